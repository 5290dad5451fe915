use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{aupro_at, pro_curve, roc_auc};
use crate::anomaly::AnomalyMap;
use crate::data::Label;
use crate::{Error, Result};

/// FPR integration limits, largest first.
pub const AUPRO_LIMITS: [f64; 4] = [0.30, 0.10, 0.05, 0.01];

/// One scored test sample.
#[derive(Clone, Copy, Debug)]
pub struct EvalEntry<'a> {
    pub category: &'a str,
    pub map: &'a AnomalyMap,
    /// Pixel mask of the defect; `None` means no anomalous pixel.
    pub gt: Option<&'a [bool]>,
    pub label: Label,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub i_auroc: f64,
    pub p_auroc: f64,
    pub aupro_30: f64,
    pub aupro_10: f64,
    pub aupro_5: f64,
    pub aupro_1: f64,
}

impl MetricSet {
    fn values(&self) -> [f64; 6] {
        [self.i_auroc, self.p_auroc, self.aupro_30, self.aupro_10, self.aupro_5, self.aupro_1]
    }

    fn from_values(v: [f64; 6]) -> Self {
        Self {
            i_auroc: v[0],
            p_auroc: v[1],
            aupro_30: v[2],
            aupro_10: v[3],
            aupro_5: v[4],
            aupro_1: v[5],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryMetrics {
    pub category: String,
    pub nominal: usize,
    pub anomalous: usize,
    #[serde(flatten)]
    pub metrics: MetricSet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub categories: Vec<CategoryMetrics>,
    /// Unweighted mean over categories.
    pub mean: MetricSet,
}

fn evaluate_category(name: &str, entries: &[&EvalEntry]) -> Result<CategoryMetrics> {
    let globals: Vec<f64> = entries.iter().map(|e| e.map.global()).collect();
    let labels: Vec<bool> = entries.iter().map(|e| e.label.is_anomalous()).collect();
    let i_auroc = roc_auc(&globals, &labels).map_err(|e| Error::UndefinedMetric(format!("{name}: {e}")))?;

    let masks: Vec<Vec<bool>> = entries
        .iter()
        .map(|e| match e.gt {
            Some(gt) if gt.len() == e.map.scores().len() => Ok(gt.to_vec()),
            Some(_) => Err(Error::Registration(format!("{name}: mask and map sizes differ"))),
            None if e.label.is_anomalous() => Err(Error::Argument(format!(
                "{name}: anomalous sample without a ground-truth mask"
            ))),
            None => Ok(vec![false; e.map.scores().len()]),
        })
        .collect::<Result<_>>()?;
    let pixel_scores: Vec<f64> = entries.iter().flat_map(|e| e.map.scores().iter().copied()).collect();
    let pixel_labels: Vec<bool> = masks.iter().flatten().copied().collect();
    let p_auroc = roc_auc(&pixel_scores, &pixel_labels).map_err(|e| Error::UndefinedMetric(format!("{name}: {e}")))?;

    let maps: Vec<&AnomalyMap> = entries.iter().map(|e| e.map).collect();
    let mask_refs: Vec<&[bool]> = masks.iter().map(Vec::as_slice).collect();
    let curve = pro_curve(&maps, &mask_refs)?;
    let aupro = AUPRO_LIMITS.map(|l| aupro_at(&curve, l).expect("limits are in range"));
    let anomalous = labels.iter().filter(|l| **l).count();
    Ok(CategoryMetrics {
        category: name.to_string(),
        nominal: labels.len() - anomalous,
        anomalous,
        metrics: MetricSet::from_values([i_auroc, p_auroc, aupro[0], aupro[1], aupro[2], aupro[3]]),
    })
}

/// Metrics per category (sorted by name) and their unweighted mean.
pub fn evaluate(entries: &[EvalEntry]) -> Result<EvalReport> {
    let mut groups: BTreeMap<&str, Vec<&EvalEntry>> = BTreeMap::new();
    for e in entries {
        groups.entry(e.category).or_default().push(e);
    }
    if groups.is_empty() {
        return Err(Error::UndefinedMetric("nothing to evaluate".into()));
    }
    let categories = groups
        .into_par_iter()
        .map(|(name, group)| evaluate_category(name, &group))
        .collect::<Result<Vec<_>>>()?;
    let mut sum = [0.0; 6];
    for c in &categories {
        for (s, v) in sum.iter_mut().zip(c.metrics.values()) {
            *s += v;
        }
    }
    let mean = MetricSet::from_values(sum.map(|s| s / categories.len() as f64));
    Ok(EvalReport { categories, mean })
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("category,I-AUROC,P-AUROC,AUPRO@30,AUPRO@10,AUPRO@5,AUPRO@1\n");
        let rows = self
            .categories
            .iter()
            .map(|c| (c.category.as_str(), &c.metrics))
            .chain(std::iter::once(("mean", &self.mean)));
        for (name, m) in rows {
            out.push_str(name);
            for v in m.values() {
                out.push_str(&format!(",{v:.6}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn category(&self, name: &str) -> Option<&MetricSet> {
        self.categories.iter().find(|c| c.category == name).map(|c| &c.metrics)
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in [("report.json", self.to_json()), ("report.csv", self.to_csv())] {
            let path = dir.join(name);
            let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            f.write_all(body.as_bytes()).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}
