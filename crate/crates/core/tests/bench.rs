//! Timing checks live in their own binary so no other test competes for
//! the CPU while they run.

use std::time::{Duration, Instant};

use cfm::features::{ExtractorConfig, FeatureExtractor};
use cfm::harness::{generate_benchmark, run_bench, run_train, write_benchmark, BenchmarkSpec, ConfigFile, Preset};

#[test]
fn bench_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let spec = BenchmarkSpec {
        train: 6,
        test_per_kind: 3,
        ..BenchmarkSpec::default()
    };
    write_benchmark(&spec, &data).unwrap();
    let cfg = ConfigFile {
        preset: Some(Preset::Desk),
        manifest: Some(data.join("manifest.json")),
        output: Some(dir.path().join("run")),
        epochs: Some(1),
        ..ConfigFile::default()
    }
    .resolve()
    .unwrap();
    run_train(&cfg).unwrap();
    let fps: Vec<f64> = (0..2).map(|_| run_bench(&cfg, 12).unwrap().frames_per_second).collect();
    let ratio = fps[0].max(fps[1]) / fps[0].min(fps[1]);
    assert!(ratio <= 1.2, "{fps:?}");
    let record = run_bench(&cfg, 12).unwrap();
    assert_eq!((record.variant.as_str(), record.layer, record.samples), ("Base", 12, 11));
    assert!(dir.path().join("run/bench.json").is_file());
}

#[test]
fn toy_extraction_gets_cheaper_when_pruned() {
    let spec = BenchmarkSpec {
        train: 8,
        test_per_kind: 0,
        ..BenchmarkSpec::default()
    };
    let (samples, _) = generate_benchmark(&spec).unwrap();
    let cost = |layer: usize| {
        let ex = FeatureExtractor::new(ExtractorConfig {
            layer,
            ..ExtractorConfig::desk_scale()
        })
        .unwrap();
        (0..3)
            .map(|_| {
                let t0 = Instant::now();
                for s in &samples {
                    ex.align(&s.sample).unwrap();
                }
                t0.elapsed()
            })
            .min()
            .unwrap_or(Duration::ZERO)
    };
    let (t1, t12) = (cost(1), cost(12));
    assert!(t1 < t12, "layer 1 {t1:?} vs layer 12 {t12:?}");
}
