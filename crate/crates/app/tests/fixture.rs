use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use eegpipe::config::{EvaluationSpec, PipelineConfig};
use eegpipe::fixture::{
    blink_contaminated_recording, generate_fixture, write_fixture, CHANNELS, TASK_NAMES,
};
use eegpipe::pipeline::run_pipeline;
use eegpipe_core::classify::{ClassifierSpec, KnnParams};
use eegpipe_core::features::{pearson, FeatureConfig, FeatureKind};
use eegpipe_core::signal::{load_trialset, validate, TrialSetFormat};
use eegpipe_core::spectral::power_spectrum;

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

#[test]
fn written_fixture_loads_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let ts = generate_fixture(5, 20, 7).unwrap();
    let manifest = write_fixture(&ts, dir.path(), TrialSetFormat::CsvManifest).unwrap();
    let csvs = fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .is_some_and(|x| x == "csv")
        })
        .count();
    assert_eq!(csvs, 100);
    let back = load_trialset(&manifest, TrialSetFormat::CsvManifest).unwrap();
    assert_eq!(back, ts);
    let report = validate(&back);
    assert!(report.ok && report.issues.is_empty(), "{report:?}");
    let names: Vec<&str> = back.channels().iter().map(|c| c.as_str()).collect();
    assert_eq!(names, CHANNELS);
    let labels: Vec<&str> = back.label_table().iter().map(|l| l.name.as_str()).collect();
    assert_eq!(labels, TASK_NAMES);
    for r in back.trials() {
        assert_eq!(
            (r.n_channels(), r.n_samples(), r.sample_rate_hz()),
            (7, 2500, 250.0)
        );
    }
}

#[test]
fn same_seed_same_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    write_fixture(
        &generate_fixture(3, 2, 42).unwrap(),
        a.path(),
        TrialSetFormat::CsvManifest,
    )
    .unwrap();
    write_fixture(
        &generate_fixture(3, 2, 42).unwrap(),
        b.path(),
        TrialSetFormat::CsvManifest,
    )
    .unwrap();
    write_fixture(
        &generate_fixture(3, 2, 43).unwrap(),
        c.path(),
        TrialSetFormat::CsvManifest,
    )
    .unwrap();
    assert_eq!(read_tree(a.path()), read_tree(b.path()));
    assert_ne!(read_tree(a.path()), read_tree(c.path()));

    write_fixture(
        &generate_fixture(3, 2, 42).unwrap(),
        a.path(),
        TrialSetFormat::PackedBinary,
    )
    .unwrap();
    write_fixture(
        &generate_fixture(3, 2, 42).unwrap(),
        b.path(),
        TrialSetFormat::PackedBinary,
    )
    .unwrap();
    assert_eq!(read_tree(a.path()), read_tree(b.path()));
}

#[test]
fn each_class_boosts_its_own_rhythm() {
    let ranges = [
        (1.0, 3.0),
        (4.5, 7.0),
        (9.0, 12.5),
        (17.0, 27.0),
        (32.0, 36.0),
    ];
    let ts = generate_fixture(5, 6, 1).unwrap();
    // mean spectral power in rhythm b, split by whether the trial's class is b
    let mut own = [0.0; 5];
    let mut other = [0.0; 5];
    for (r, label) in ts.trials().iter().zip(ts.label_ids()) {
        for ch in &r.data()[..6] {
            let s = power_spectrum(ch, 250.0).unwrap();
            for (b, &(lo, hi)) in ranges.iter().enumerate() {
                let p: f64 = s
                    .frequencies_hz
                    .iter()
                    .zip(&s.power)
                    .filter(|(f, _)| (lo..=hi).contains(*f))
                    .map(|(_, p)| p)
                    .sum();
                if b == label {
                    own[b] += p / 36.0;
                } else {
                    other[b] += p / 144.0;
                }
            }
        }
    }
    for b in 0..5 {
        assert!(
            own[b] > 3.0 * other[b],
            "rhythm {b}: {} vs {}",
            own[b],
            other[b]
        );
    }
}

#[test]
fn band_power_alone_separates_the_classes() {
    let dir = tempfile::tempdir().unwrap();
    let ts = generate_fixture(5, 20, 7).unwrap();
    let input = write_fixture(&ts, &dir.path().join("data"), TrialSetFormat::CsvManifest).unwrap();
    let cfg = PipelineConfig {
        input: Some(input),
        features: FeatureConfig {
            per_band_features: vec![FeatureKind::BandPower],
            ..FeatureConfig::default()
        },
        classifier: ClassifierSpec::Knn(KnnParams { k: 5 }),
        evaluation: EvaluationSpec {
            report_training_accuracy: false,
            cv_folds: Some(5),
        },
        seed: 7,
        ..PipelineConfig::default()
    };
    let report = run_pipeline(&cfg, &dir.path().join("out")).unwrap();
    assert_eq!(report.features.columns, 30);
    let cv = report.metrics.cross_validation.unwrap().metrics.accuracy;
    assert!(cv >= 0.9, "k-NN CV accuracy on band power {cv}");
}

#[test]
fn blink_fixture_is_contaminated_and_clean_copy_is_not() {
    let f = blink_contaminated_recording(3).unwrap();
    // blinks reach the central channels hardest and fade towards the back
    for c in 0..6 {
        let dirty = pearson(&f.contaminated.data()[c], &f.blink).unwrap().abs();
        let clean = pearson(&f.clean.data()[c], &f.blink).unwrap().abs();
        assert!(clean < 0.1, "channel {c}: {clean}");
        if c < 2 {
            assert!(dirty > 0.3, "channel {c}: {dirty}");
        }
    }
    assert_eq!(f.contaminated.data()[6], f.clean.data()[6]);
    assert!(pearson(&f.contaminated.data()[6], &f.blink).unwrap() > 0.9);
}
