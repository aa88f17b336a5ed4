use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use respiro::audio::{read_wav, write_wav, SampleFormat};
use respiro::augment::{balance_plan, parse_plan, AugmentError, AugmentSpec};
use respiro::dataset::{
    build_examples, class_distribution, ingest_corpus, split, Diagnosis, ErrorPolicy, Example, Manifest, ManifestEntry,
    PipelineConfig, SplitConfig, Subset, WindowConfig, PROVENANCE_KEY,
};
use respiro::features::{FeatureConfig, FeatureMatrix, Standardizer};
use respiro::nn::{grad_check_with, Architecture, Checkpoint, ModelConfig, ModelParams};
use respiro::synth::ToneConfig;
use respiro::trainer::{
    chance_baseline, curves_csv, curves_from_csv, curves_table, evaluate, majority_baseline, plateau_detector, predict,
    report_csv, report_from_csv, report_table, standardize_sets, train, TrainConfig,
};
use respiro::NUM_CLASSES;

use crate::args::*;
use crate::failure::{io_failure, Failure};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const CURVES_FILE: &str = "curves.csv";
pub const REPORT_FILE: &str = "report.csv";

type Result<T> = std::result::Result<T, Failure>;

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_failure(path, e))
}

fn pipeline_config(a: &PipelineArgs) -> Result<PipelineConfig> {
    if !(a.window_seconds > 0.0 && a.window_seconds.is_finite()) {
        return Err(Failure::Usage(format!(
            "--window-seconds {} must be positive",
            a.window_seconds
        )));
    }
    let sample_rate = (a.sample_rate > 0).then_some(a.sample_rate);
    let features = FeatureConfig::for_rate(a.feature, sample_rate.unwrap_or(respiro::dataset::DEFAULT_SAMPLE_RATE));
    if sample_rate.is_some() {
        features.mfcc.validate(a.sample_rate)?;
    }
    Ok(PipelineConfig {
        sample_rate,
        window: WindowConfig {
            duration_s: a.window_seconds,
            offset: a.window_offset,
            ..Default::default()
        },
        features,
        on_error: if a.skip_bad_files {
            ErrorPolicy::SkipWithLog
        } else {
            ErrorPolicy::Fail
        },
    })
}

fn split_config(a: &SplitArgs, seed: u64) -> SplitConfig {
    SplitConfig {
        fractions: a.split,
        grouping: a.group,
        stratify: a.stratify,
        seed,
    }
}

fn split_to_meta(cfg: &SplitConfig, meta: &mut BTreeMap<String, String>) {
    meta.insert("split".into(), cfg.fractions.to_string());
    meta.insert("group".into(), cfg.grouping.to_string());
    meta.insert("stratify".into(), cfg.stratify.to_string());
}

fn split_from_meta(meta: &BTreeMap<String, String>, seed: u64) -> Result<SplitConfig> {
    let get = |k: &str| {
        meta.get(k)
            .ok_or_else(|| Failure::Data(format!("checkpoint lacks setting `{k}`")))
    };
    Ok(SplitConfig {
        fractions: get("split")?.parse()?,
        grouping: get("group")?.parse()?,
        stratify: get("stratify")?
            .parse()
            .map_err(|_| Failure::Data("checkpoint setting `stratify` is not a boolean".into()))?,
        seed,
    })
}

fn log_skipped(skipped: &[(String, String)]) {
    for (source, reason) in skipped {
        log::warn!("skipped {source}: {reason}");
    }
}

fn labels(examples: &[Example]) -> Vec<Diagnosis> {
    examples.iter().map(|e| e.label).collect()
}

fn standardize(s: Option<&Standardizer>, examples: &mut [Example]) -> Result<()> {
    if let Some(s) = s {
        for ex in examples {
            s.apply(&mut ex.features)?;
        }
    }
    Ok(())
}

pub fn ingest(a: &IngestArgs) -> Result<String> {
    let (manifest, report) = ingest_corpus(&a.corpus, &a.diagnoses)?;
    create_dir(&a.out)?;
    let path = a.out.join(MANIFEST_FILE);
    manifest.save(&path)?;
    let dist = class_distribution(&manifest)?;
    let mut s = format!(
        "wrote {} ({} recordings, {} skipped files)\n",
        path.display(),
        manifest.len(),
        report.skipped.len()
    );
    for d in Diagnosis::ALL {
        let _ = writeln!(s, "{:<15} {}", d.name(), dist.counts[d.code()]);
    }
    Ok(s)
}

pub fn stats(a: &StatsArgs) -> Result<String> {
    let m = Manifest::load(&a.manifest)?;
    let dist = class_distribution(&m)?;
    let mut s = format!("files     {}\npatients  {}\n\n", m.len(), m.patients().len());
    let _ = writeln!(s, "{:<15} {:>6} {:>9}", "class", "count", "fraction");
    for d in Diagnosis::ALL {
        let _ = writeln!(
            s,
            "{:<15} {:>6} {:>9.4}",
            d.name(),
            dist.counts[d.code()],
            dist.fractions[d.code()]
        );
    }
    let _ = writeln!(s, "\nmodal class        {}", dist.modal_class());
    let _ = writeln!(s, "majority baseline  {:.4}", dist.majority_fraction());
    let _ = writeln!(s, "chance baseline    {:.4}", chance_baseline(NUM_CLASSES)?);
    Ok(s)
}

pub fn train_cmd(a: &TrainArgs) -> Result<String> {
    let m = Manifest::load(&a.manifest)?;
    let pipeline = pipeline_config(&a.pipeline)?;
    let split_cfg = split_config(&a.split, a.seed);
    let cfg = TrainConfig {
        epochs: a.epochs,
        lr: a.lr,
        hidden: a.model.hidden,
        arch: Architecture {
            direction: a.model.mode,
            merge: a.model.merge,
            readout: a.model.readout,
        },
        forget_bias_one: a.model.forget_bias_one,
        seed: a.seed,
        shuffle: !a.no_shuffle,
        clip_norm: a.clip_norm,
        keep_best: a.keep_best,
    };
    cfg.validate()?;
    let assignment = split(&m, &split_cfg)?;
    let (mut tr, rep) = build_examples(&m, &assignment.train, &pipeline, a.seed)?;
    log_skipped(&rep.skipped);
    let (mut va, rep) = build_examples(&m, &assignment.validation, &pipeline, a.seed)?;
    log_skipped(&rep.skipped);
    let standardizer = if a.no_standardize {
        None
    } else {
        if tr.is_empty() {
            return Err(Failure::Data("training subset is empty".into()));
        }
        Some(standardize_sets(&mut tr, &mut [&mut va])?)
    };
    let model = cfg.init_model(pipeline.features.dim())?;
    let outcome = train(model, &tr, &va, &cfg)?;

    let mut ck = Checkpoint::new(outcome.model, a.seed);
    ck.standardizer = standardizer;
    ck.meta = pipeline.to_meta();
    split_to_meta(&split_cfg, &mut ck.meta);
    ck.meta.insert("epochs".into(), a.epochs.to_string());
    ck.meta.insert("lr".into(), a.lr.to_string());
    ck.meta.insert("train_examples".into(), tr.len().to_string());
    if let Some(e) = outcome.best_epoch {
        ck.meta.insert("best_epoch".into(), e.to_string());
    }
    create_dir(&a.out)?;
    let ck_path = a.out.join(CHECKPOINT_FILE);
    ck.save(&ck_path)?;
    let curves_path = a.out.join(CURVES_FILE);
    write_file(&curves_path, &curves_csv(&outcome.records))?;

    let mut s = format!(
        "trained on {} examples ({} validation), {} parameters\n\n",
        tr.len(),
        va.len(),
        ck.model.num_params()
    );
    s.push_str(&curves_table(&outcome.records));
    if let Some(e) = outcome.best_epoch {
        let _ = writeln!(s, "\nkept parameters of epoch {e}");
    }
    if let Some(e) = plateau_detector(&outcome.records, a.patience) {
        let _ = writeln!(s, "\nvalidation loss plateaued after epoch {e}");
    }
    let _ = writeln!(s, "\nwrote {} and {}", ck_path.display(), curves_path.display());
    Ok(s)
}

fn load_checkpoint(path: &Path) -> Result<(Checkpoint, PipelineConfig)> {
    let ck = Checkpoint::load(path)?;
    let pipeline =
        PipelineConfig::from_meta(&ck.meta).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    Ok((ck, pipeline))
}

pub fn evaluate_cmd(a: &EvaluateArgs) -> Result<String> {
    let (ck, pipeline) = load_checkpoint(&a.checkpoint)?;
    let m = Manifest::load(&a.manifest)?;
    let indices: Vec<usize> = match a.subset {
        SubsetChoice::All => (0..m.len()).collect(),
        other => {
            let assignment = split(&m, &split_from_meta(&ck.meta, ck.seed)?)?;
            let subset = match other {
                SubsetChoice::Train => Subset::Train,
                SubsetChoice::Val => Subset::Validation,
                _ => Subset::Test,
            };
            assignment.subset(subset).to_vec()
        }
    };
    let (mut ex, rep) = build_examples(&m, &indices, &pipeline, ck.seed)?;
    log_skipped(&rep.skipped);
    if ex.is_empty() {
        return Err(Failure::Data("the selected subset has no usable recordings".into()));
    }
    standardize(ck.standardizer.as_ref(), &mut ex)?;
    let report = evaluate(&ck.model, &ex)?;
    let majority = majority_baseline(&labels(&ex))?;
    let chance = chance_baseline(NUM_CLASSES)?;
    create_dir(&a.out)?;
    let path = a.out.join(REPORT_FILE);
    write_file(
        &path,
        &report_csv(&report, &[("majority_baseline", majority), ("chance_baseline", chance)]),
    )?;
    let mut s = report_table(&report);
    let _ = writeln!(s, "\nmean loss          {:.4}", report.mean_loss);
    let _ = writeln!(s, "majority baseline  {majority:.4}");
    let _ = writeln!(s, "chance baseline    {chance:.4}");
    let _ = writeln!(s, "\nwrote {}", path.display());
    Ok(s)
}

pub fn predict_cmd(a: &PredictArgs) -> Result<String> {
    let (ck, pipeline) = load_checkpoint(&a.checkpoint)?;
    let clip = read_wav(&a.input)?;
    let window = pipeline.prepare(&clip, a.seed.unwrap_or(ck.seed), 0)?;
    let mut features = pipeline.featurize(&window)?;
    if let Some(s) = &ck.standardizer {
        s.apply(&mut features)?;
    }
    let (probs, best) = predict(&ck.model, &features)?;
    let mut s = String::new();
    for (d, p) in Diagnosis::ALL.iter().zip(&probs) {
        let _ = writeln!(s, "{:<15} {p:.6}", d.name());
    }
    let _ = writeln!(s, "predicted {}", Diagnosis::ALL[best]);
    Ok(s)
}

fn output_name(entry: &ManifestEntry, job: usize, part: Option<usize>) -> String {
    let stem = Path::new(&entry.file_path)
        .file_stem()
        .map_or_else(|| "clip".into(), |s| s.to_string_lossy().into_owned());
    match part {
        Some(w) => format!("{stem}_aug{job}_{w}.wav"),
        None => format!("{stem}_aug{job}.wav"),
    }
}

pub fn augment_cmd(a: &AugmentArgs) -> Result<String> {
    let m = Manifest::load(&a.manifest)?;
    let text = read_file(&a.plan)?;
    let plan_dir = a.plan.parent().map(Path::to_path_buf).unwrap_or_default();
    let specs = parse_plan(&text, |p| {
        let path = Path::new(p);
        let path = if path.is_absolute() {
            path.to_path_buf()
        } else {
            plan_dir.join(path)
        };
        read_wav(path).map_err(AugmentError::from)
    })?;
    if specs.is_empty() {
        return Err(Failure::Data(format!("{} contains no transforms", a.plan.display())));
    }
    let jobs: Vec<(usize, AugmentSpec)> = if a.balance {
        let labels: Vec<Diagnosis> = m.entries().iter().map(|e| e.diagnosis).collect();
        balance_plan(&labels, &specs)?
    } else {
        (0..m.len())
            .flat_map(|i| specs.iter().map(move |s| (i, s.clone())))
            .collect()
    };

    create_dir(&a.out)?;
    let mut entries: Vec<ManifestEntry> = Vec::new();
    if a.include_originals {
        entries.extend(m.entries().iter().map(|e| ManifestEntry {
            file_path: m.resolve(e).display().to_string(),
            ..e.clone()
        }));
    }
    let mut written = 0;
    for (job, (i, spec)) in jobs.iter().enumerate() {
        let entry = &m.entries()[*i];
        let clip = read_wav(m.resolve(entry))?;
        let outputs = spec.apply(&clip)?;
        let multi = outputs.len() > 1;
        for (w, out) in outputs.iter().enumerate() {
            let name = output_name(entry, job, multi.then_some(w));
            write_wav(a.out.join(&name), out, SampleFormat::Float32)?;
            let mut metadata = entry.metadata.clone();
            metadata.insert("source".into(), entry.file_path.clone());
            metadata.insert(PROVENANCE_KEY.into(), spec.to_string());
            entries.push(ManifestEntry {
                file_path: name,
                patient_id: entry.patient_id,
                diagnosis: entry.diagnosis,
                metadata,
            });
            written += 1;
        }
    }
    let path = a.out.join(MANIFEST_FILE);
    let out_manifest = Manifest::new(entries)?;
    out_manifest.save(&path)?;
    let mut s = format!("wrote {written} recordings and {}\n", path.display());
    if let Ok(dist) = class_distribution(&out_manifest) {
        for d in Diagnosis::ALL {
            let _ = writeln!(s, "{:<15} {}", d.name(), dist.counts[d.code()]);
        }
    }
    Ok(s)
}

fn gradcheck_input(a: &GradcheckArgs, pipeline: &PipelineConfig) -> Result<FeatureMatrix> {
    if let Some(path) = &a.manifest {
        let m = Manifest::load(path)?;
        if m.is_empty() {
            return Err(Failure::Data(format!("{} has no entries", path.display())));
        }
        let (ex, _) = build_examples(&m, &[0], pipeline, a.seed)?;
        return ex
            .into_iter()
            .next()
            .map(|e| e.features)
            .ok_or_else(|| Failure::Data("first recording is silent".into()));
    }
    let tones = ToneConfig {
        sample_rate: pipeline.sample_rate.unwrap_or(respiro::dataset::DEFAULT_SAMPLE_RATE),
        duration_s: pipeline.window.duration_s,
        seed: a.seed,
        ..Default::default()
    };
    let clip = tones.clip(a.label % NUM_CLASSES, 0)?;
    let window = pipeline.prepare(&clip, a.seed, 0)?;
    Ok(pipeline.featurize(&window)?)
}

pub fn gradcheck_cmd(a: &GradcheckArgs) -> Result<String> {
    if a.steps == 0 {
        return Err(Failure::Usage("--steps must be >= 1".into()));
    }
    if a.label >= NUM_CLASSES {
        return Err(Failure::Usage(format!(
            "--label {} must be below {NUM_CLASSES}",
            a.label
        )));
    }
    let pipeline = pipeline_config(&a.pipeline)?;
    let mut full = gradcheck_input(a, &pipeline)?;
    if a.steps > full.steps() {
        return Err(Failure::Usage(format!(
            "--steps {} exceeds the {} available frames",
            a.steps,
            full.steps()
        )));
    }
    Standardizer::fit([&full])?.apply(&mut full)?;
    let xs = full.prefix(a.steps);
    let cfg = ModelConfig {
        input_dim: xs.dim(),
        hidden: a.hidden,
        arch: Architecture {
            direction: a.mode,
            merge: a.merge,
            readout: a.readout,
        },
        forget_bias_one: false,
    };
    let model = ModelParams::init(&cfg, a.seed)?;
    let r = grad_check_with(&model, &xs, a.label, a.eps, a.precision.into())?;
    let s = format!(
        "max relative error {:.3e}\nworst parameter    {}[{}] analytic {:.6e} numeric {:.6e}\nparameters checked {} ({} refined in extended precision)\n",
        r.max_rel_error, r.worst_block, r.worst_index, r.analytic, r.numeric, r.params_checked, r.params_extended
    );
    if !(r.max_rel_error <= a.threshold) {
        return Err(Failure::Numeric(format!("{s}relative error exceeds {:e}", a.threshold)));
    }
    Ok(s)
}

pub fn report_cmd(a: &ReportArgs) -> Result<String> {
    if a.curves.is_none() && a.report.is_none() {
        return Err(Failure::Usage("give --curves, --report or both".into()));
    }
    let mut s = String::new();
    let mut files: Vec<(PathBuf, String)> = Vec::new();
    if let Some(path) = &a.curves {
        let records = curves_from_csv(&read_file(path)?)?;
        s.push_str(&curves_table(&records));
        files.push((PathBuf::from(CURVES_FILE), curves_csv(&records)));
    }
    if let Some(path) = &a.report {
        let (report, extra) = report_from_csv(&read_file(path)?)?;
        if !s.is_empty() {
            s.push('\n');
        }
        s.push_str(&report_table(&report));
        for (k, v) in &extra {
            let _ = writeln!(s, "{k} {v:.4}");
        }
        let text = report_csv(&report, &[]);
        let blocks: Vec<&str> = text.split("\n\n").collect();
        files.push((PathBuf::from("per_class.csv"), format!("{}\n", blocks[1].trim_end())));
        files.push((PathBuf::from("confusion.csv"), format!("{}\n", blocks[2].trim_end())));
    }
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        for (name, text) in &files {
            write_file(&dir.join(name), text)?;
        }
        let _ = writeln!(s, "\nwrote {} files to {}", files.len(), dir.display());
    }
    Ok(s)
}

pub fn run(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Stats(a) => stats(a),
        Command::Train(a) => train_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Predict(a) => predict_cmd(a),
        Command::Augment(a) => augment_cmd(a),
        Command::Gradcheck(a) => gradcheck_cmd(a),
        Command::Report(a) => report_cmd(a),
    }
}
