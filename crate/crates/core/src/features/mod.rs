//! Feature extraction front-end and pixel-level alignment of 2D and 3D
//! features.
//!
//! The frozen backbones are not run in-process. Features come either from
//! files written by the exporter (`ExtractorKind::External`) or from a pair
//! of deterministic toy extractors that compute contextual descriptors and
//! project them with fixed random matrices (`ExtractorKind::Toy`).

mod toy;
mod upsample;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use toy::{ToyExtractor, STATS_2D, STATS_3D};
pub use upsample::upsample_bilinear;

use crate::data::{read_feature_file, read_point_feature_file, sample_to_pointset, FeatureMap, MultimodalSample, PointFeatureSet, PointSet};
use crate::preprocess::{
    farthest_point_sampling, fit_plane_ransac, group_points, interpolate_features, project_to_image, remove_background, smooth3x3,
    Grouping, SmoothingKind,
};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtractorKind {
    #[default]
    Toy,
    External,
}

/// Extractor and 3D preprocessing settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractorConfig {
    pub kind: ExtractorKind,
    /// Root of exported features, required for `External`.
    pub features_dir: Option<PathBuf>,
    /// Encoder layer the backbones are pruned at, `1..=depth`.
    pub layer: usize,
    pub depth: usize,
    pub d2d: usize,
    pub d3d: usize,
    /// 2D feature grid `(H_f, W_f)`.
    pub grid: (usize, usize),
    /// FPS group count and points per group.
    pub groups: usize,
    pub group_size: usize,
    pub ransac_threshold: f64,
    pub ransac_iterations: usize,
    pub smoothing: SmoothingKind,
    pub seed: u64,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        Self {
            kind: ExtractorKind::Toy,
            features_dir: None,
            layer: 12,
            depth: 12,
            d2d: 768,
            d3d: 1152,
            grid: (28, 28),
            groups: 1024,
            group_size: 32,
            ransac_threshold: 0.005,
            ransac_iterations: 1000,
            smoothing: SmoothingKind::Box,
            seed: 0,
        }
    }
}

impl ExtractorConfig {
    /// Desk-scale settings used with the synthetic benchmark.
    pub fn desk_scale() -> Self {
        Self {
            d2d: 24,
            d3d: 32,
            grid: (12, 12),
            groups: 64,
            group_size: 32,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer == 0 || self.layer > self.depth {
            return Err(Error::Config(format!("layer {} outside 1..={}", self.layer, self.depth)));
        }
        if self.d2d == 0 || self.d3d == 0 {
            return Err(Error::Config("feature dimensions must be positive".into()));
        }
        if self.grid.0 == 0 || self.grid.1 == 0 {
            return Err(Error::Config("2D feature grid must be non-empty".into()));
        }
        if self.groups < 3 || self.group_size == 0 {
            return Err(Error::Config("need at least 3 groups of at least 1 point".into()));
        }
        if !(self.ransac_threshold > 0.0) {
            return Err(Error::Config("RANSAC threshold must be positive".into()));
        }
        if self.kind == ExtractorKind::External && self.features_dir.is_none() {
            return Err(Error::Config("external features need a features directory".into()));
        }
        Ok(())
    }

    /// Architecture name of a pruned variant.
    pub fn variant_name(&self) -> &'static str {
        match self.layer {
            l if l == self.depth => "Base",
            1 => "Tiny",
            4 => "Small",
            8 => "Medium",
            _ => "Custom",
        }
    }

    fn external_path(&self, sample: &MultimodalSample, ext: &str) -> PathBuf {
        let info = sample.info();
        self.features_dir
            .as_deref()
            .unwrap_or(Path::new("."))
            .join(&info.category)
            .join(&info.split)
            .join(format!("{}.l{}.{ext}", info.id, self.layer))
    }
}

/// Pixel-aligned feature maps `E_2D` (all pixels valid) and `E_3D` (valid at
/// foreground points only).
#[derive(Clone, Debug, PartialEq)]
pub struct AlignedFeatures {
    pub e2d: FeatureMap,
    pub e3d: FeatureMap,
}

/// Foreground points of a sample after background-plane removal.
pub fn foreground_points(sample: &MultimodalSample, cfg: &ExtractorConfig) -> Result<PointSet> {
    let cloud = sample_to_pointset(sample)?;
    let plane = fit_plane_ransac(&cloud, cfg.ransac_threshold, cfg.ransac_iterations, cfg.seed)?;
    remove_background(&cloud, &plane, cfg.ransac_threshold)
}

/// Feature extractor holding the shared read-only projection matrices.
#[derive(Clone, Debug)]
pub struct FeatureExtractor {
    cfg: ExtractorConfig,
    toy: Option<ToyExtractor>,
}

impl FeatureExtractor {
    pub fn new(cfg: ExtractorConfig) -> Result<Self> {
        cfg.validate()?;
        let toy = (cfg.kind == ExtractorKind::Toy).then(|| ToyExtractor::new(&cfg));
        Ok(Self { cfg, toy })
    }

    pub fn config(&self) -> &ExtractorConfig {
        &self.cfg
    }

    /// `H_f x W_f x D_2D` grid before upsampling.
    pub fn extract_2d(&self, sample: &MultimodalSample) -> Result<FeatureMap> {
        let (hf, wf) = self.cfg.grid;
        match &self.toy {
            Some(toy) => toy.extract_2d(sample, &self.cfg),
            None => {
                let path = self.cfg.external_path(sample, "cfmf");
                let grid = read_feature_file(&path).map_err(|e| annotate(e, sample, &path))?;
                if (grid.height(), grid.width(), grid.dim()) != (hf, wf, self.cfg.d2d) {
                    return Err(Error::Format(format!(
                        "{}: 2D features are {}x{}x{}, expected {hf}x{wf}x{}",
                        path.display(),
                        grid.height(),
                        grid.width(),
                        grid.dim(),
                        self.cfg.d2d
                    )));
                }
                Ok(grid)
            }
        }
    }

    /// One `D_3D` feature per group centre.
    pub fn extract_3d(&self, sample: &MultimodalSample, points: &PointSet, grouping: Option<&Grouping>) -> Result<PointFeatureSet> {
        match &self.toy {
            Some(toy) => {
                let grouping = grouping.ok_or_else(|| Error::Argument("toy 3D extraction needs a grouping".into()))?;
                toy.extract_3d(points, grouping, &self.cfg)
            }
            None => {
                let path = self.cfg.external_path(sample, "cfmp");
                let set = read_point_feature_file(&path).map_err(|e| annotate(e, sample, &path))?;
                let expected = self.cfg.groups.min(points.len());
                if set.len() != expected || set.dim() != self.cfg.d3d {
                    return Err(Error::Format(format!(
                        "{}: 3D features are {}x{}, expected {expected}x{}",
                        path.display(),
                        set.len(),
                        set.dim(),
                        self.cfg.d3d
                    )));
                }
                Ok(set)
            }
        }
    }

    /// Full alignment: `E_2D` by bilinear upsampling, `E_3D` by background
    /// removal, grouping, extraction, interpolation, projection and 3x3
    /// smoothing.
    pub fn align(&self, sample: &MultimodalSample) -> Result<AlignedFeatures> {
        let (h, w) = (sample.height(), sample.width());
        let grid = self.extract_2d(sample)?;
        let e2d = upsample_bilinear(&grid, h, w)?;

        let fg = foreground_points(sample, &self.cfg)?;
        let grouping = match self.cfg.kind {
            ExtractorKind::Toy => {
                let g = self.cfg.groups.min(fg.len());
                let centers = farthest_point_sampling(&fg, g, 0)?;
                Some(group_points(&fg, &centers, self.cfg.group_size.min(fg.len()))?)
            }
            ExtractorKind::External => None,
        };
        let centres = self.extract_3d(sample, &fg, grouping.as_ref())?;
        let per_point = interpolate_features(&centres, &fg)?;
        let e3d = project_to_image(&per_point, centres.dim(), &fg.pixel_index, h, w)?;
        let e3d = smooth3x3(&e3d, self.cfg.smoothing);
        Ok(AlignedFeatures { e2d, e3d })
    }
}

fn annotate(e: Error, sample: &MultimodalSample, path: &Path) -> Error {
    match e {
        Error::Io { source, .. } => Error::Io {
            path: PathBuf::from(format!("{} (sample {})", path.display(), sample.id())),
            source,
        },
        other => other,
    }
}
