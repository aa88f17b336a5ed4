use std::collections::BTreeSet;

use proptest::prelude::*;
use respiro::dataset::{
    build_examples, ingest_corpus, split, Diagnosis, Grouping, Manifest, ManifestEntry, PipelineConfig, SplitConfig,
};
use respiro::features::FeatureKind;
use respiro::nn::{Checkpoint, Direction};
use respiro::synth::ToneConfig;
use respiro::trainer::{evaluate, predict, report_csv, report_from_csv, standardize_sets, train, TrainConfig};

fn corpus(patients: usize, files: usize) -> (tempfile::TempDir, Manifest) {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("corpus");
    let table = ToneConfig::default().write_corpus(&root, patients, files).unwrap();
    let (m, report) = ingest_corpus(&root, &table).unwrap();
    assert_eq!(report.skipped.len(), 1);
    (dir, m)
}

#[test]
fn ingest_train_checkpoint_evaluate() {
    let (dir, m) = corpus(16, 2);
    assert_eq!(m.len(), 32);
    assert_eq!(m.patients().len(), 16);

    let split_cfg = SplitConfig {
        grouping: Grouping::ByPatient,
        ..Default::default()
    };
    let a = split(&m, &split_cfg).unwrap();
    let patients = |idx: &[usize]| idx.iter().map(|&i| m.entries()[i].patient_id).collect::<BTreeSet<_>>();
    assert!(patients(&a.train).is_disjoint(&patients(&a.test)));
    assert!(patients(&a.train).is_disjoint(&patients(&a.validation)));

    let pipeline = PipelineConfig::default();
    let (mut tr, _) = build_examples(&m, &a.train, &pipeline, 7).unwrap();
    let (mut va, _) = build_examples(&m, &a.validation, &pipeline, 7).unwrap();
    let (mut te, _) = build_examples(&m, &a.test, &pipeline, 7).unwrap();
    let standardizer = standardize_sets(&mut tr, &mut [&mut va, &mut te]).unwrap();

    let cfg = TrainConfig {
        epochs: 3,
        hidden: 8,
        ..Default::default()
    };
    let model = cfg.init_model(pipeline.features.dim()).unwrap();
    let outcome = train(model, &tr, &va, &cfg).unwrap();
    assert_eq!(outcome.records.len(), 3);
    assert!(outcome
        .records
        .iter()
        .all(|r| r.train_loss.is_finite() && r.val_loss.is_some()));

    let mut ck = Checkpoint::new(outcome.model.clone(), 7);
    ck.standardizer = Some(standardizer);
    ck.meta = pipeline.to_meta();
    let path = dir.path().join("model.ckpt");
    ck.save(&path).unwrap();
    let loaded = Checkpoint::load(&path).unwrap();
    assert_eq!(loaded, ck);
    assert_eq!(PipelineConfig::from_meta(&loaded.meta).unwrap(), pipeline);
    for ex in &te {
        assert_eq!(
            predict(&loaded.model, &ex.features).unwrap(),
            predict(&outcome.model, &ex.features).unwrap()
        );
    }

    let report = evaluate(&loaded.model, &te).unwrap();
    assert_eq!(report.n_examples, te.len());
    let (parsed, extra) = report_from_csv(&report_csv(&report, &[("chance_baseline", 0.125)])).unwrap();
    assert_eq!(parsed.confusion, report.confusion);
    assert_eq!(extra, vec![("chance_baseline".to_string(), 0.125)]);
}

#[test]
fn every_feature_kind_trains_both_directions() {
    for kind in [FeatureKind::Mfcc, FeatureKind::Zcr, FeatureKind::Raw] {
        let pipeline = PipelineConfig::for_kind(kind);
        let examples = ToneConfig::default().examples(8, &pipeline).unwrap();
        for direction in [Direction::Unidirectional, Direction::Bidirectional] {
            let mut cfg = TrainConfig {
                epochs: 1,
                hidden: 3,
                ..Default::default()
            };
            cfg.arch.direction = direction;
            let model = cfg.init_model(pipeline.features.dim()).unwrap();
            let outcome = train(model, &examples, &[], &cfg).unwrap();
            assert!(outcome.records[0].train_loss.is_finite(), "{kind:?} {direction:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn patient_splits_partition_the_manifest(seed in any::<u64>(), stratify in any::<bool>()) {
        let entries: Vec<_> = (0..40u32)
            .map(|i| ManifestEntry {
                file_path: format!("{}_{i}.wav", 100 + i / 3),
                patient_id: 100 + i / 3,
                diagnosis: Diagnosis::from_code((i / 3) as usize % 8).unwrap(),
                metadata: Default::default(),
            })
            .collect();
        let m = Manifest::new(entries).unwrap();
        let cfg = SplitConfig { grouping: Grouping::ByPatient, stratify, seed, ..Default::default() };
        let a = split(&m, &cfg).unwrap();
        let mut all: Vec<usize> = a.train.iter().chain(&a.validation).chain(&a.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..40).collect::<Vec<_>>());
        let owner = |idx: &[usize]| idx.iter().map(|&i| m.entries()[i].patient_id).collect::<BTreeSet<_>>();
        prop_assert!(owner(&a.train).is_disjoint(&owner(&a.validation)));
        prop_assert!(owner(&a.train).is_disjoint(&owner(&a.test)));
        prop_assert!(owner(&a.validation).is_disjoint(&owner(&a.test)));
        prop_assert_eq!(split(&m, &cfg).unwrap(), a);
    }
}
