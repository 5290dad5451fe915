use rayon::prelude::*;

use super::LabeledSample;
use crate::anomaly::{score_components, AnomalyMap, ScoreComponents, ScoreConfig};
use crate::data::{MultimodalSample, SampleInfo};
use crate::features::{AlignedFeatures, FeatureExtractor};
use crate::mapping::{train, MappingPair, TrainConfig, Trained};
use crate::metrics::{evaluate, EvalEntry, EvalReport};
use crate::Result;

/// Aligned features of every sample, in input order.
pub fn align_samples(extractor: &FeatureExtractor, samples: &[&MultimodalSample]) -> Result<Vec<AlignedFeatures>> {
    samples.par_iter().map(|s| extractor.align(s)).collect()
}

pub fn fit(extractor: &FeatureExtractor, samples: &[&MultimodalSample], cfg: &TrainConfig) -> Result<Trained> {
    let feats = align_samples(extractor, samples)?;
    train(&feats, cfg)
}

/// A test sample with its unsmoothed per-modality scores.
#[derive(Clone, Debug)]
pub struct Scored {
    pub info: SampleInfo,
    pub defect: String,
    pub gt: Option<Vec<bool>>,
    pub components: ScoreComponents,
}

pub fn score_samples(extractor: &FeatureExtractor, pair: &MappingPair, samples: &[&LabeledSample]) -> Result<Vec<Scored>> {
    samples
        .par_iter()
        .map(|s| {
            let feats = extractor.align(&s.sample)?;
            Ok(Scored {
                info: s.sample.info().clone(),
                defect: s.defect.clone(),
                gt: s.sample.gt_mask().map(<[bool]>::to_vec),
                components: score_components(pair, &feats)?,
            })
        })
        .collect()
}

/// Final anomaly maps under one scoring configuration.
pub fn finalize_all(scored: &[Scored], cfg: &ScoreConfig) -> Result<Vec<AnomalyMap>> {
    scored.par_iter().map(|s| s.components.finalize(cfg)).collect()
}

/// How test samples are grouped into report rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupBy {
    Category,
    /// One row per defect type, each holding that type plus all nominal
    /// samples of the category, named `<category>/<defect>`.
    Defect,
}

pub fn report(scored: &[Scored], maps: &[AnomalyMap], group: GroupBy) -> Result<EvalReport> {
    let mut keys: Vec<(String, usize)> = Vec::new();
    for (i, s) in scored.iter().enumerate() {
        match group {
            GroupBy::Category => keys.push((s.info.category.clone(), i)),
            GroupBy::Defect if s.info.label.is_anomalous() => keys.push((format!("{}/{}", s.info.category, s.defect), i)),
            GroupBy::Defect => {
                for d in scored
                    .iter()
                    .filter(|o| o.info.category == s.info.category && o.info.label.is_anomalous())
                    .map(|o| o.defect.as_str())
                    .collect::<std::collections::BTreeSet<_>>()
                {
                    keys.push((format!("{}/{d}", s.info.category), i));
                }
            }
        }
    }
    let entries: Vec<EvalEntry> = keys
        .iter()
        .map(|(k, i)| EvalEntry {
            category: k,
            map: &maps[*i],
            gt: scored[*i].gt.as_deref(),
            label: scored[*i].info.label,
        })
        .collect();
    evaluate(&entries)
}
