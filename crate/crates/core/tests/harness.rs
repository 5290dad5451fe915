use std::fs;
use std::path::Path;

use cfm::data::{write_mask_png, write_rgb_png, write_xyz_file, Label, SampleInfo, XyzRaster};
use cfm::features::{ExtractorConfig, FeatureExtractor};
use cfm::harness::{
    convert, few_shot_subset, generate_scene, run_eval, run_infer, run_train, write_benchmark, AnomalyKind,
    BenchmarkSpec, ConfigFile, Manifest, Preset, RunConfig, SyntheticSceneSpec,
};
use cfm::mapping::read_checkpoint;
use cfm::Error;

fn small_benchmark(dir: &Path) -> std::path::PathBuf {
    let spec = BenchmarkSpec {
        train: 6,
        test_per_kind: 3,
        ..BenchmarkSpec::default()
    };
    write_benchmark(&spec, dir).unwrap();
    dir.join("manifest.json")
}

fn config(manifest: &Path, out: &Path, epochs: usize) -> RunConfig {
    ConfigFile {
        preset: Some(Preset::Desk),
        manifest: Some(manifest.to_path_buf()),
        output: Some(out.to_path_buf()),
        epochs: Some(epochs),
        ..ConfigFile::default()
    }
    .resolve()
    .unwrap()
}

#[test]
fn one_epoch_writes_checkpoint_and_one_loss_row() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_benchmark(&dir.path().join("data"));
    let cfg = config(&manifest, &dir.path().join("run"), 1);
    let summary = run_train(&cfg).unwrap();
    assert_eq!(summary.len(), 1);
    assert!(read_checkpoint(&summary[0].checkpoint).is_ok());
    let loss = fs::read_to_string(dir.path().join("run/synthetic/loss.csv")).unwrap();
    let lines: Vec<&str> = loss.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "epoch,mean_loss");
    assert!(lines[1].starts_with("1,"));
}

#[test]
fn eval_writes_reports_and_infer_writes_maps() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_benchmark(&dir.path().join("data"));
    let cfg = config(&manifest, &dir.path().join("run"), 3);
    run_train(&cfg).unwrap();
    let report = run_eval(&cfg).unwrap();
    assert_eq!(report.categories.len(), 1);
    assert_eq!((report.categories[0].nominal, report.categories[0].anomalous), (3, 9));
    let out = dir.path().join("run");
    for f in ["report.json", "report.csv", "defects/report.csv", "synthetic/scores.csv", "synthetic/pro_curve.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(csv.starts_with("category,I-AUROC,P-AUROC,AUPRO@30,AUPRO@10,AUPRO@5,AUPRO@1\nsynthetic,"));
    let defects = fs::read_to_string(out.join("defects/report.csv")).unwrap();
    for d in ["2d_only", "3d_only", "multimodal_only"] {
        assert!(defects.contains(&format!("synthetic/{d},")), "{d}");
    }
    assert_eq!(fs::read_to_string(out.join("synthetic/scores.csv")).unwrap().lines().count(), 13);

    // re-running replaces rather than appends
    run_eval(&cfg).unwrap();
    assert_eq!(fs::read_to_string(out.join("synthetic/scores.csv")).unwrap().lines().count(), 13);

    let records = run_infer(&cfg, "test").unwrap();
    assert_eq!(records.len(), 12);
    assert!(out.join("synthetic/maps/good_000.png").is_file());
    assert!(out.join("synthetic/maps/good_000.cfmf").is_file());
}

#[test]
fn missing_checkpoint_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_benchmark(&dir.path().join("data"));
    let cfg = config(&manifest, &dir.path().join("run"), 1);
    match run_eval(&cfg) {
        Err(Error::Io { path, .. }) => assert!(path.ends_with("synthetic/mapping.cfmm")),
        other => panic!("expected an I/O error, got {other:?}"),
    }
}

#[test]
fn few_shot_training_records_its_subset() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_benchmark(&dir.path().join("data"));
    let cfg = RunConfig {
        few_shot: Some(2),
        ..config(&manifest, &dir.path().join("run"), 1)
    };
    let summary = run_train(&cfg).unwrap();
    let ids: Vec<String> = (0..6).map(|i| format!("good_{i:03}")).collect();
    assert_eq!(summary[0].train_ids, few_shot_subset(&ids, 2, 0, "synthetic").unwrap());
    let record: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run/synthetic/train_subset.json")).unwrap()).unwrap();
    assert_eq!(record["few_shot"], 2);
    assert_eq!(record["ids"].as_array().unwrap().len(), 2);
}

fn write_sample(root: &Path, split: &str, defect: &str, stem: &str, seed: u64, anomaly: AnomalyKind) {
    let spec = SyntheticSceneSpec {
        anomaly,
        seed,
        ..SyntheticSceneSpec::default()
    };
    let s = generate_scene(&spec, SampleInfo::new(stem, "bagel", split, Label::Nominal)).unwrap();
    let base = root.join("bagel").join(split).join(defect);
    for sub in ["rgb", "xyz", "gt"] {
        fs::create_dir_all(base.join(sub)).unwrap();
    }
    let (h, w) = (s.height(), s.width());
    write_rgb_png(base.join("rgb").join(format!("{stem}.png")), h, w, s.rgb()).unwrap();
    let raster = XyzRaster {
        height: h,
        width: w,
        data: s.xyz().to_vec(),
    };
    write_xyz_file(&raster, base.join("xyz").join(format!("{stem}.cfmx"))).unwrap();
    if let Some(gt) = s.gt_mask() {
        write_mask_png(base.join("gt").join(format!("{stem}.png")), h, w, gt).unwrap();
    }
}

#[test]
fn convert_infers_labels_from_directory_names() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("mvtec");
    write_sample(&data, "train", "good", "000", 1, AnomalyKind::None);
    write_sample(&data, "test", "good", "000", 2, AnomalyKind::None);
    write_sample(&data, "test", "hole", "000", 3, AnomalyKind::TwoDOnly);

    let out = dir.path().join("out");
    let m = convert(&data, &out).unwrap();
    let test = m.select("bagel", "test");
    assert_eq!(test.len(), 2);
    let good = test.iter().find(|e| e.defect == "good").unwrap();
    let hole = test.iter().find(|e| e.defect == "hole").unwrap();
    assert_eq!((good.label, good.id.as_str()), (Label::Nominal, "good_000"));
    assert_eq!((hole.label, hole.id.as_str()), (Label::Anomalous, "hole_000"));
    assert!(hole.gt.is_some());

    let reread = Manifest::read(out.join("manifest.json")).unwrap();
    assert_eq!(reread, m);
    let first = fs::read(out.join("manifest.json")).unwrap();
    convert(&data, &out).unwrap();
    assert_eq!(fs::read(out.join("manifest.json")).unwrap(), first);

    let loaded = reread.load(hole).unwrap();
    assert_eq!(loaded.sample.label(), Label::Anomalous);
    assert!(loaded.sample.gt_mask().unwrap().iter().any(|g| *g));
}

#[test]
fn convert_rejects_empty_and_malformed_trees() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    assert!(matches!(convert(&empty, dir.path()), Err(Error::Format(_))));
    assert!(convert(dir.path().join("missing"), dir.path()).is_err());

    let bad = dir.path().join("bad");
    fs::create_dir_all(bad.join("bagel/test/hole/xyz")).unwrap();
    assert!(matches!(convert(&bad, dir.path()), Err(Error::Format(_))));
}

#[test]
fn written_benchmark_matches_the_in_memory_one() {
    let dir = tempfile::tempdir().unwrap();
    let spec = BenchmarkSpec {
        train: 2,
        test_per_kind: 1,
        ..BenchmarkSpec::default()
    };
    let m = write_benchmark(&spec, dir.path()).unwrap();
    let (train, test) = cfm::harness::generate_benchmark(&spec).unwrap();
    assert_eq!(m.samples.len(), train.len() + test.len());
    for (entry, original) in m.samples.iter().zip(train.iter().chain(&test)) {
        let back = m.load(entry).unwrap();
        assert_eq!(back.defect, original.defect);
        assert_eq!(back.sample.rgb(), original.sample.rgb());
        assert_eq!(back.sample.xyz(), original.sample.xyz());
        assert_eq!(back.sample.gt_mask(), original.sample.gt_mask());
        assert_eq!(back.sample.label(), original.sample.label());
    }
}

#[test]
fn multimodal_patch_features_differ_from_nominal() {
    let ex = FeatureExtractor::new(ExtractorConfig::desk_scale()).unwrap();
    let base = SyntheticSceneSpec::default();
    let info = || SampleInfo::new("s", "synthetic", "test", Label::Nominal);
    for seed in 0..3 {
        let nominal = generate_scene(&SyntheticSceneSpec { seed, ..base.clone() }, info()).unwrap();
        let swapped = generate_scene(
            &SyntheticSceneSpec {
                seed,
                anomaly: AnomalyKind::MultimodalOnly,
                ..base.clone()
            },
            info(),
        )
        .unwrap();
        let (a, b) = (ex.align(&nominal).unwrap(), ex.align(&swapped).unwrap());
        let gt = swapped.gt_mask().unwrap();
        let dist = |x: &cfm::data::FeatureMap, y: &cfm::data::FeatureMap| {
            (0..gt.len())
                .filter(|&i| gt[i])
                .map(|i| x.pixel_at(i).iter().zip(y.pixel_at(i)).map(|(p, q)| (p - q).abs() as f64).sum::<f64>())
                .sum::<f64>()
        };
        assert!(dist(&a.e2d, &b.e2d) > 0.0 || dist(&a.e3d, &b.e3d) > 0.0);
    }
}
