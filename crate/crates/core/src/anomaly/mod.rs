//! Anomaly scoring: per-modality feature discrepancies, their aggregation,
//! Gaussian smoothing and the global image score.

mod export;
mod smooth;

pub use export::{write_anomaly_cfmf, write_anomaly_png, write_scores_csv, ScoreRecord};
pub use smooth::{gaussian_kernel, gaussian_smooth};

use serde::{Deserialize, Serialize};

use crate::data::FeatureMap;
use crate::features::AlignedFeatures;
use crate::mapping::{map_features, MappingPair, Mode};
use crate::{Error, Result};

const ZERO_NORM: f64 = 1e-12;

/// Per-pixel scores plus the global score, the maximum over pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct AnomalyMap {
    height: usize,
    width: usize,
    scores: Vec<f64>,
    global: f64,
}

impl AnomalyMap {
    pub fn new(height: usize, width: usize, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != height * width {
            return Err(Error::Argument(format!(
                "{} scores for a {height}x{width} map",
                scores.len()
            )));
        }
        if scores.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::Argument("anomaly scores must be finite and nonnegative".into()));
        }
        let global = scores.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            height,
            width,
            scores,
            global,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn score(&self, row: usize, col: usize) -> f64 {
        self.scores[row * self.width + col]
    }

    pub fn global(&self) -> f64 {
        self.global
    }

    fn same_shape(&self, other: &AnomalyMap) -> bool {
        self.height == other.height && self.width == other.width
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationKind {
    #[default]
    Product,
    Sum,
    Max,
    #[serde(rename = "2d", alias = "only2d")]
    Only2d,
    #[serde(rename = "3d", alias = "only3d")]
    Only3d,
}

impl AggregationKind {
    pub const ALL: [AggregationKind; 5] = [Self::Product, Self::Sum, Self::Max, Self::Only2d, Self::Only3d];

    pub fn name(self) -> &'static str {
        match self {
            Self::Product => "product",
            Self::Sum => "sum",
            Self::Max => "max",
            Self::Only2d => "2d",
            Self::Only3d => "3d",
        }
    }
}

impl std::str::FromStr for AggregationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "product" => Ok(Self::Product),
            "sum" => Ok(Self::Sum),
            "max" => Ok(Self::Max),
            "2d" | "only2d" => Ok(Self::Only2d),
            "3d" | "only3d" => Ok(Self::Only3d),
            _ => Err(Error::Argument(format!("unknown aggregation '{s}'"))),
        }
    }
}

/// Scales every valid pixel vector to unit length. Near-zero vectors stay zero.
pub fn l2_normalize(map: &FeatureMap) -> FeatureMap {
    let mut data = map.data().to_vec();
    for px in data.chunks_exact_mut(map.dim()) {
        let norm = px.iter().map(|&v| v as f64 * v as f64).sum::<f64>().sqrt();
        if norm < ZERO_NORM {
            px.fill(0.0);
        } else {
            px.iter_mut().for_each(|v| *v = (*v as f64 / norm) as f32);
        }
    }
    FeatureMap::from_parts(map.height(), map.width(), map.dim(), data, map.valid().to_vec())
        .expect("shape unchanged")
}

/// Pixel-wise Euclidean distance. Pixels invalid in either map score 0.
pub fn discrepancy(e: &FeatureMap, ehat: &FeatureMap) -> Result<AnomalyMap> {
    if !e.same_shape(ehat) {
        return Err(Error::Argument(format!(
            "cannot compare {}x{}x{} with {}x{}x{}",
            e.height(),
            e.width(),
            e.dim(),
            ehat.height(),
            ehat.width(),
            ehat.dim()
        )));
    }
    let scores = (0..e.pixels())
        .map(|i| {
            if !(e.valid()[i] && ehat.valid()[i]) {
                return 0.0;
            }
            e.pixel_at(i)
                .iter()
                .zip(ehat.pixel_at(i))
                .map(|(&a, &b)| {
                    let d = a as f64 - b as f64;
                    d * d
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    AnomalyMap::new(e.height(), e.width(), scores)
}

pub fn aggregate(p2d: &AnomalyMap, p3d: &AnomalyMap, kind: AggregationKind) -> Result<AnomalyMap> {
    if !p2d.same_shape(p3d) {
        return Err(Error::Argument("aggregated maps differ in size".into()));
    }
    let f: fn(f64, f64) -> f64 = match kind {
        AggregationKind::Product => |a, b| a * b,
        AggregationKind::Sum => |a, b| a + b,
        AggregationKind::Max => f64::max,
        AggregationKind::Only2d => |a, _| a,
        AggregationKind::Only3d => |_, b| b,
    };
    let scores = p2d.scores.iter().zip(&p3d.scores).map(|(&a, &b)| f(a, b)).collect();
    AnomalyMap::new(p2d.height, p2d.width, scores)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreConfig {
    pub aggregation: AggregationKind,
    pub sigma: f64,
    /// Score assigned to pixels without a foreground 3D point.
    pub background_score: f64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            aggregation: AggregationKind::Product,
            sigma: 4.0,
            background_score: 0.0,
        }
    }
}

/// Unsmoothed per-modality maps of one sample, kept so several aggregation
/// rules can be evaluated from a single forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreComponents {
    pub psi_2d: AnomalyMap,
    pub psi_3d: AnomalyMap,
    pub foreground: Vec<bool>,
}

impl ScoreComponents {
    pub fn finalize(&self, cfg: &ScoreConfig) -> Result<AnomalyMap> {
        if !(cfg.background_score.is_finite() && cfg.background_score >= 0.0) {
            return Err(Error::Config("background score must be finite and nonnegative".into()));
        }
        let mut agg = aggregate(&self.psi_2d, &self.psi_3d, cfg.aggregation)?;
        for (s, fg) in agg.scores.iter_mut().zip(&self.foreground) {
            if !fg {
                *s = cfg.background_score;
            }
        }
        gaussian_smooth(&agg, cfg.sigma)
    }
}

/// Runs both mapping networks on aligned features and measures how far each
/// prediction is from the observed features of its target modality.
pub fn score_components(pair: &MappingPair, feats: &AlignedFeatures) -> Result<ScoreComponents> {
    let (from_2d, from_3d) = map_features(pair, &feats.e2d, &feats.e3d)?;
    let (pred_2d, pred_3d) = match pair.mode {
        Mode::Cross => (from_3d, from_2d),
        Mode::Intra => (from_2d, from_3d),
    };
    let psi_2d = discrepancy(&l2_normalize(&feats.e2d), &l2_normalize(&pred_2d))?;
    let psi_3d = discrepancy(&l2_normalize(&feats.e3d), &l2_normalize(&pred_3d))?;
    Ok(ScoreComponents {
        psi_2d,
        psi_3d,
        foreground: feats.e3d.valid().to_vec(),
    })
}

pub fn score_sample(pair: &MappingPair, feats: &AlignedFeatures, cfg: &ScoreConfig) -> Result<AnomalyMap> {
    score_components(pair, feats)?.finalize(cfg)
}
