//! Train, eval, infer and bench pipelines over a dataset manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::Serialize;

use super::config::RunConfig;
use super::fewshot::few_shot_subset;
use super::manifest::Manifest;
use super::pipeline::{finalize_all, fit, report, score_samples, GroupBy, Scored};
use super::LabeledSample;
use crate::anomaly::{score_sample, write_anomaly_cfmf, write_anomaly_png, write_scores_csv, AnomalyMap, ScoreRecord};
use crate::features::FeatureExtractor;
use crate::mapping::{read_checkpoint, write_checkpoint, write_loss_csv, MappingPair};
use crate::metrics::{pro_curve, write_pro_curve_csv, EvalReport};
use crate::{Error, Result};

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn categories(cfg: &RunConfig, manifest: &Manifest) -> Result<Vec<String>> {
    let all = manifest.categories();
    if cfg.categories.is_empty() {
        return Ok(all);
    }
    for c in &cfg.categories {
        if !all.contains(c) {
            return Err(Error::Config(format!("category '{c}' is not in the manifest")));
        }
    }
    Ok(cfg.categories.clone())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainSummary {
    pub category: String,
    pub train_ids: Vec<String>,
    pub final_loss: f64,
    pub checkpoint: PathBuf,
}

#[derive(Serialize)]
struct SubsetRecord<'a> {
    category: &'a str,
    few_shot: Option<usize>,
    seed: u64,
    ids: &'a [String],
}

/// Trains one mapping pair per category and writes
/// `<checkpoints>/<category>/{mapping.cfmm, loss.csv, train_subset.json}`.
pub fn run_train(cfg: &RunConfig) -> Result<Vec<TrainSummary>> {
    let manifest = Manifest::read(cfg.manifest_path()?)?;
    let extractor = FeatureExtractor::new(cfg.extractor.clone())?;
    let mut out = Vec::new();
    for category in categories(cfg, &manifest)? {
        let entries = manifest.select(&category, "train");
        let ids: Vec<String> = entries.iter().map(|e| e.id.clone()).collect();
        let chosen = match cfg.few_shot {
            Some(k) => few_shot_subset(&ids, k, cfg.seed, &category)?,
            None if ids.is_empty() => {
                return Err(Error::Argument(format!("category '{category}' has no training samples")))
            }
            None => ids,
        };
        let selected: Vec<_> = chosen
            .iter()
            .map(|id| *entries.iter().find(|e| &e.id == id).expect("id comes from entries"))
            .collect();
        let samples = manifest.load_all(&selected)?;
        let refs: Vec<_> = samples.iter().map(|s| &s.sample).collect();
        let t0 = Instant::now();
        let trained = fit(&extractor, &refs, &cfg.train)?;
        let final_loss = *trained.loss_trace.last().expect("at least one epoch");
        info!("{category}: trained on {} samples in {:.1?}, loss {final_loss:.5}", refs.len(), t0.elapsed());

        let ckpt = cfg.checkpoint_path(&category);
        let dir = ckpt.parent().expect("checkpoint has a directory");
        create_dir(dir)?;
        write_checkpoint(&ckpt, &trained.pair)?;
        write_loss_csv(&dir.join("loss.csv"), &trained.loss_trace)?;
        let record = SubsetRecord {
            category: &category,
            few_shot: cfg.few_shot,
            seed: cfg.seed,
            ids: &chosen,
        };
        let subset_path = dir.join("train_subset.json");
        fs::write(&subset_path, serde_json::to_string_pretty(&record).expect("serializes") + "\n")
            .map_err(|e| Error::io(&subset_path, e))?;
        out.push(TrainSummary {
            category,
            train_ids: chosen,
            final_loss,
            checkpoint: ckpt,
        });
    }
    Ok(out)
}

fn score_split(cfg: &RunConfig, manifest: &Manifest, category: &str, split: &str) -> Result<Vec<Scored>> {
    let ckpt = cfg.checkpoint_path(category);
    let pair = read_checkpoint(&ckpt)?;
    let extractor = FeatureExtractor::new(cfg.extractor.clone())?;
    let samples = manifest.load_all(&manifest.select(category, split))?;
    if samples.is_empty() {
        return Err(Error::Argument(format!("category '{category}' has no {split} samples")));
    }
    let refs: Vec<_> = samples.iter().collect();
    score_samples(&extractor, &pair, &refs)
}

fn write_outputs(cfg: &RunConfig, category: &str, scored: &[Scored], maps: &[AnomalyMap]) -> Result<()> {
    let dir = cfg.output.join(category);
    create_dir(&dir)?;
    let scores = dir.join("scores.csv");
    if scores.exists() {
        fs::remove_file(&scores).map_err(|e| Error::io(&scores, e))?;
    }
    let records: Vec<ScoreRecord> = scored
        .iter()
        .zip(maps)
        .map(|(s, m)| ScoreRecord {
            sample_id: s.info.id.clone(),
            label: s.info.label,
            score: m.global(),
        })
        .collect();
    write_scores_csv(&scores, &records)?;
    if cfg.export_maps {
        let map_dir = dir.join("maps");
        create_dir(&map_dir)?;
        let scale = maps.iter().map(AnomalyMap::global).fold(0.0, f64::max);
        for (s, m) in scored.iter().zip(maps) {
            write_anomaly_png(m, map_dir.join(format!("{}.png", s.info.id)), Some(scale))?;
            write_anomaly_cfmf(m, map_dir.join(format!("{}.cfmf", s.info.id)))?;
        }
    }
    Ok(())
}

/// Scores every test sample and writes `report.{json,csv}`, a per-defect
/// report under `defects/`, and per-category scores and PRO curves.
pub fn run_eval(cfg: &RunConfig) -> Result<EvalReport> {
    let manifest = Manifest::read(cfg.manifest_path()?)?;
    let mut all_scored = Vec::new();
    let mut all_maps = Vec::new();
    for category in categories(cfg, &manifest)? {
        let t0 = Instant::now();
        let scored = score_split(cfg, &manifest, &category, "test")?;
        let maps = finalize_all(&scored, &cfg.score)?;
        info!("{category}: scored {} samples in {:.1?}", scored.len(), t0.elapsed());
        write_outputs(cfg, &category, &scored, &maps)?;
        let gts: Vec<&[bool]> = scored.iter().filter_map(|s| s.gt.as_deref()).collect();
        if gts.len() == scored.len() {
            let map_refs: Vec<&AnomalyMap> = maps.iter().collect();
            let curve = pro_curve(&map_refs, &gts)?;
            write_pro_curve_csv(cfg.output.join(&category).join("pro_curve.csv"), &curve)?;
        }
        all_scored.extend(scored);
        all_maps.extend(maps);
    }
    let report_all = report(&all_scored, &all_maps, GroupBy::Category)?;
    report_all.write(&cfg.output)?;
    report(&all_scored, &all_maps, GroupBy::Defect)?.write(cfg.output.join("defects"))?;
    Ok(report_all)
}

/// Scores one split without computing metrics; maps are always exported.
pub fn run_infer(cfg: &RunConfig, split: &str) -> Result<Vec<ScoreRecord>> {
    let manifest = Manifest::read(cfg.manifest_path()?)?;
    let cfg = RunConfig {
        export_maps: true,
        ..cfg.clone()
    };
    let mut out = Vec::new();
    for category in categories(&cfg, &manifest)? {
        let scored = score_split(&cfg, &manifest, &category, split)?;
        let maps = finalize_all(&scored, &cfg.score)?;
        write_outputs(&cfg, &category, &scored, &maps)?;
        out.extend(scored.iter().zip(&maps).map(|(s, m)| ScoreRecord {
            sample_id: format!("{category}/{}", s.info.id),
            label: s.info.label,
            score: m.global(),
        }));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRecord {
    pub variant: String,
    pub layer: usize,
    pub samples: usize,
    pub frames_per_second: f64,
    pub mean_ms: f64,
    /// Peak resident set size of the whole process; `None` where the
    /// platform does not expose it.
    pub peak_rss_mb: Option<f64>,
}

/// Peak resident set size in MiB from `/proc/self/status`.
pub fn peak_rss_mb() -> Option<f64> {
    let status = fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: f64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb / 1024.0)
}

/// Times the inference path, feature extraction through final map, on one
/// thread over preloaded samples. The first sample is a warm-up and is not
/// counted.
pub fn bench_samples(cfg: &RunConfig, pair: &MappingPair, samples: &[&LabeledSample]) -> Result<BenchRecord> {
    if samples.is_empty() {
        return Err(Error::Argument("nothing to benchmark".into()));
    }
    let extractor = FeatureExtractor::new(cfg.extractor.clone())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::Argument(format!("thread pool: {e}")))?;
    pool.install(|| {
        score_sample(pair, &extractor.align(&samples[0].sample)?, &cfg.score)?;
        let timed = if samples.len() > 1 { &samples[1..] } else { samples };
        let t0 = Instant::now();
        for s in timed {
            let feats = extractor.align(&s.sample)?;
            score_sample(pair, &feats, &cfg.score)?;
        }
        let secs = t0.elapsed().as_secs_f64();
        Ok(BenchRecord {
            variant: cfg.extractor.variant_name().to_string(),
            layer: cfg.extractor.layer,
            samples: timed.len(),
            frames_per_second: timed.len() as f64 / secs,
            mean_ms: secs * 1e3 / timed.len() as f64,
            peak_rss_mb: peak_rss_mb(),
        })
    })
}

/// Benchmarks the first category's test split, at most `limit` samples.
pub fn run_bench(cfg: &RunConfig, limit: usize) -> Result<BenchRecord> {
    let manifest = Manifest::read(cfg.manifest_path()?)?;
    let category = categories(cfg, &manifest)?
        .into_iter()
        .next()
        .ok_or_else(|| Error::Argument("manifest is empty".into()))?;
    let pair = read_checkpoint(&cfg.checkpoint_path(&category))?;
    let entries: Vec<_> = manifest.select(&category, "test").into_iter().take(limit.max(1)).collect();
    let samples = manifest.load_all(&entries)?;
    let refs: Vec<_> = samples.iter().collect();
    let record = bench_samples(cfg, &pair, &refs)?;
    create_dir(&cfg.output)?;
    let path = cfg.output.join("bench.json");
    fs::write(&path, serde_json::to_string_pretty(&record).expect("serializes") + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(record)
}
