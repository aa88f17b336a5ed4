use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use respiro::audio::{write_wav, AudioClip, SampleFormat};
use respiro::dataset::Manifest;
use respiro::synth::ToneConfig;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_respiro")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    manifest: PathBuf,
}

fn fixture(patients: usize, files: usize) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let corpus = root.join("corpus");
    let table = ToneConfig::default().write_corpus(&corpus, patients, files).unwrap();
    std::fs::write(corpus.join("notes.txt"), "not audio").unwrap();
    let o = run(&[
        "ingest",
        "--corpus",
        &s(&corpus),
        "--diagnoses",
        &s(&table),
        "--out",
        &s(&root),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("notes.txt"));
    Fixture {
        manifest: root.join("manifest.csv"),
        _dir: dir,
        root,
    }
}

#[test]
fn train_help_shows_shared_defaults() {
    let train = stdout(&run(&["train", "--help"]));
    for needle in [
        "[default: 7]",
        "[default: mfcc]",
        "[default: 1]",
        "[default: 32]",
        "[default: 0.01]",
        "[default: 10]",
        "[default: uni]",
        "[default: 0.7,0.1,0.2]",
        "[default: sample]",
    ] {
        assert!(train.contains(needle), "train --help lacks {needle}");
    }
}

/// Every option line in `--help` is followed, within its description, by a
/// `[default: ...]` marker, except `--help` itself and required inputs.
#[test]
fn help_defaults_are_per_flag() {
    let required = [
        "--corpus",
        "--diagnoses",
        "--manifest",
        "--checkpoint",
        "--input",
        "--plan",
    ];
    for sub in [
        "ingest",
        "stats",
        "train",
        "evaluate",
        "predict",
        "augment",
        "gradcheck",
        "report",
    ] {
        let text = stdout(&run(&[sub, "--help"]));
        let lines: Vec<&str> = text.lines().collect();
        for (i, line) in lines.iter().enumerate() {
            let t = line.trim_start();
            let Some(flag) = t.strip_prefix("--").map(|r| r.split([' ', '<']).next().unwrap()) else {
                continue;
            };
            let flag = format!("--{flag}");
            if flag == "--help" || (required.contains(&flag.as_str()) && !t.contains("[default")) {
                continue;
            }
            let desc: String = lines[i..]
                .iter()
                .skip(1)
                .take_while(|l| !l.trim_start().starts_with('-'))
                .copied()
                .collect();
            assert!(
                desc.contains("[default") || t.contains("[default"),
                "{sub} {flag} has no documented default"
            );
        }
    }
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&run(&["train"])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["train", "--manifest", "m.csv", "--mode", "sideways"])), 1);
    assert_eq!(
        code(&run(&["train", "--manifest", "m.csv", "--split", "0.5,0.5,0.5"])),
        1
    );
    assert_eq!(code(&run(&["report"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn ingest_reports_missing_patients() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c");
    let table = ToneConfig::default().write_corpus(&corpus, 3, 1).unwrap();
    std::fs::write(&table, "101,Healthy\n102,COPD\n").unwrap();
    let o = run(&[
        "ingest",
        "--corpus",
        &s(&corpus),
        "--diagnoses",
        &s(&table),
        "--out",
        &s(dir.path()),
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("103"));
}

#[test]
fn stats_balanced_and_empty() {
    let f = fixture(8, 1);
    let o = run(&["stats", "--manifest", &s(&f.manifest)]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("files     8"));
    assert!(text.contains("majority baseline  0.1250"));
    assert_eq!(text.matches("0.1250").count(), 10);
    let empty = f.root.join("empty.csv");
    std::fs::write(&empty, "file_path,patient_id,diagnosis\n").unwrap();
    assert_eq!(code(&run(&["stats", "--manifest", &s(&empty)])), 2);
}

#[test]
fn train_evaluate_predict_report() {
    let f = fixture(16, 2);
    let out = f.root.join("run");
    let m = s(&f.manifest);
    let o = run(&[
        "train",
        "--manifest",
        &m,
        "--out",
        &s(&out),
        "--epochs",
        "3",
        "--hidden",
        "4",
        "--mode",
        "bi",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let ckpt = s(&out.join("model.ckpt"));
    let o = run(&["evaluate", "--manifest", &m, "--checkpoint", &ckpt, "--out", &s(&out)]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("majority baseline"));
    let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(report.starts_with("metric,value\naccuracy,"));

    let wav = f.root.join("corpus").join("103_1b1_Al_sc_Synth.wav");
    let o = run(&["predict", "--checkpoint", &ckpt, "--input", &s(&wav)]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let probs: f64 = text
        .lines()
        .take(8)
        .map(|l| l.split_whitespace().last().unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((probs - 1.0).abs() < 1e-5);
    assert!(text.lines().nth(8).unwrap().starts_with("predicted "));

    let silent = f.root.join("silent.wav");
    write_wav(
        &silent,
        &AudioClip::new(vec![0.0; 4000], 4000, "s").unwrap(),
        SampleFormat::Pcm16,
    )
    .unwrap();
    let o = run(&["predict", "--checkpoint", &ckpt, "--input", &s(&silent)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("silent"));

    let plots = f.root.join("plots");
    let o = run(&[
        "report",
        "--curves",
        &s(&out.join("curves.csv")),
        "--report",
        &s(&out.join("report.csv")),
        "--out",
        &s(&plots),
    ]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("true\\pred"));
    let confusion = std::fs::read_to_string(plots.join("confusion.csv")).unwrap();
    assert_eq!(confusion.lines().count(), 9);
    assert_eq!(
        std::fs::read(plots.join("curves.csv")).unwrap(),
        std::fs::read(out.join("curves.csv")).unwrap()
    );
}

#[test]
fn damaged_checkpoints_are_data_errors() {
    let f = fixture(8, 2);
    let out = f.root.join("run");
    let m = s(&f.manifest);
    assert_eq!(
        code(&run(&[
            "train",
            "--manifest",
            &m,
            "--out",
            &s(&out),
            "--epochs",
            "1",
            "--hidden",
            "2"
        ])),
        0
    );
    let bytes = std::fs::read(out.join("model.ckpt")).unwrap();
    let cases: Vec<Vec<u8>> = vec![
        bytes[..bytes.len() / 2].to_vec(),
        String::from_utf8_lossy(&bytes)
            .replacen("respiro-checkpoint 1", "respiro-checkpoint 9", 1)
            .into_bytes(),
        b"garbage".to_vec(),
        Vec::new(),
    ];
    for (i, bad) in cases.iter().enumerate() {
        let p = f.root.join(format!("bad{i}.ckpt"));
        std::fs::write(&p, bad).unwrap();
        let o = run(&[
            "evaluate",
            "--manifest",
            &m,
            "--checkpoint",
            &s(&p),
            "--out",
            &s(&f.root),
        ]);
        assert_eq!(code(&o), 2, "case {i}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn gradcheck_exit_codes() {
    let o = run(&["gradcheck"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let err: f64 = stdout(&o)
        .lines()
        .next()
        .unwrap()
        .rsplit(' ')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(err <= 1e-6);
    let o = run(&["gradcheck", "--threshold", "0", "--precision", "double"]);
    assert_eq!(code(&o), 3);
    assert_eq!(code(&run(&["gradcheck", "--eps", "0.5"])), 1);
    assert_eq!(
        code(&run(&["gradcheck", "--mode", "bi", "--feature", "zcr", "--steps", "8"])),
        0
    );
}

#[test]
fn augment_writes_provenance() {
    let f = fixture(4, 1);
    let plan = f.root.join("plan.txt");
    std::fs::write(
        &plan,
        "transform=time_shift offset_s=0.25 circular=true\ntransform=subsample offsets_s=0,0.5 duration_s=0.5\n",
    )
    .unwrap();
    let out = f.root.join("aug");
    let o = run(&[
        "augment",
        "--manifest",
        &s(&f.manifest),
        "--plan",
        &s(&plan),
        "--out",
        &s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = Manifest::load(&out.join("manifest.csv")).unwrap();
    assert_eq!(m.len(), 4 * 3);
    let tags: Vec<&str> = m.entries().iter().map(|e| e.metadata["augment"].as_str()).collect();
    assert_eq!(tags[0], "transform=time_shift offset_s=0.25 circular=true");
    assert!(m.entries().iter().all(|e| m.resolve(e).exists()));

    let bad = f.root.join("bad.txt");
    std::fs::write(&bad, "transform=warp\n").unwrap();
    assert_eq!(
        code(&run(&[
            "augment",
            "--manifest",
            &s(&f.manifest),
            "--plan",
            &s(&bad),
            "--out",
            &s(&out)
        ])),
        2
    );
}

#[test]
fn repeated_runs_are_byte_identical() {
    let f = fixture(8, 2);
    let m = s(&f.manifest);
    let mut files = Vec::new();
    for k in 0..2 {
        let out = f.root.join(format!("r{k}"));
        let args = [
            "train",
            "--manifest",
            &m,
            "--out",
            &s(&out),
            "--epochs",
            "2",
            "--hidden",
            "4",
            "--window-offset",
            "seeded",
            "--window-seconds",
            "0.5",
        ];
        assert_eq!(code(&run(&args)), 0);
        assert_eq!(
            code(&run(&[
                "evaluate",
                "--manifest",
                &m,
                "--checkpoint",
                &s(&out.join("model.ckpt")),
                "--out",
                &s(&out),
                "--subset",
                "all"
            ])),
            0
        );
        files.push(["model.ckpt", "curves.csv", "report.csv"].map(|n| std::fs::read(out.join(n)).unwrap()));
    }
    assert_eq!(files[0], files[1]);
}
