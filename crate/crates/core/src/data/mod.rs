//! Core sample and feature containers, ingestion, and the binary formats
//! shared with the external feature exporter.

mod format;
mod load;

pub use format::{
    cfmf_file_len, read_feature_file, read_point_feature_file, read_xyz_file, write_feature_file,
    write_point_feature_file, write_xyz_file, XyzRaster,
};
pub use load::{load_sample, write_mask_png, write_rgb_png};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Nominal,
    Anomalous,
}

impl Label {
    pub fn is_anomalous(self) -> bool {
        self == Label::Anomalous
    }
}

/// Identifying metadata carried alongside a sample's rasters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleInfo {
    pub id: String,
    pub category: String,
    pub split: String,
    pub label: Label,
}

impl SampleInfo {
    pub fn new(id: impl Into<String>, category: impl Into<String>, split: impl Into<String>, label: Label) -> Self {
        Self {
            id: id.into(),
            category: category.into(),
            split: split.into(),
            label,
        }
    }
}

/// Pixel-registered RGB image and organized coordinate map.
///
/// All rasters are row-major; `rgb` and `xyz` are channel-last with three
/// channels. A pixel carries a 3D point iff its coordinates are finite and
/// not exactly the zero vector (datasets such as MVTec 3D-AD encode missing
/// points as zeros).
#[derive(Clone, Debug, PartialEq)]
pub struct MultimodalSample {
    info: SampleInfo,
    height: usize,
    width: usize,
    rgb: Vec<f32>,
    xyz: Vec<f32>,
    valid: Vec<bool>,
    gt_mask: Option<Vec<bool>>,
}

impl MultimodalSample {
    pub fn new(
        info: SampleInfo,
        height: usize,
        width: usize,
        rgb: Vec<f32>,
        xyz: Vec<f32>,
        gt_mask: Option<Vec<bool>>,
    ) -> Result<Self> {
        let pixels = height * width;
        if pixels == 0 {
            return Err(Error::Registration("sample has zero area".into()));
        }
        if rgb.len() != pixels * 3 {
            return Err(Error::Registration(format!(
                "rgb holds {} values, expected {height}x{width}x3",
                rgb.len()
            )));
        }
        if xyz.len() != pixels * 3 {
            return Err(Error::Registration(format!(
                "xyz holds {} values, expected {height}x{width}x3",
                xyz.len()
            )));
        }
        if let Some(gt) = &gt_mask {
            if gt.len() != pixels {
                return Err(Error::Registration(format!(
                    "gt mask holds {} pixels, expected {height}x{width}",
                    gt.len()
                )));
            }
        }
        if let Some(v) = rgb.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Argument(format!("rgb value {v} outside [0, 1]")));
        }
        let valid = xyz.chunks_exact(3).map(is_valid_point).collect();
        Ok(Self {
            info,
            height,
            width,
            rgb,
            xyz,
            valid,
            gt_mask,
        })
    }

    pub fn info(&self) -> &SampleInfo {
        &self.info
    }

    pub fn id(&self) -> &str {
        &self.info.id
    }

    pub fn label(&self) -> Label {
        self.info.label
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rgb(&self) -> &[f32] {
        &self.rgb
    }

    pub fn rgb_at(&self, row: usize, col: usize) -> [f32; 3] {
        let i = (row * self.width + col) * 3;
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    pub fn xyz(&self) -> &[f32] {
        &self.xyz
    }

    pub fn validity(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn gt_mask(&self) -> Option<&[bool]> {
        self.gt_mask.as_deref()
    }
}

fn is_valid_point(p: &[f32]) -> bool {
    p.iter().all(|v| v.is_finite()) && p.iter().any(|v| *v != 0.0)
}

/// Points of a sample, each tied to the pixel it was measured at.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointSet {
    pub coords: Vec<[f64; 3]>,
    pub pixel_index: Vec<(usize, usize)>,
}

impl PointSet {
    pub fn new(coords: Vec<[f64; 3]>, pixel_index: Vec<(usize, usize)>) -> Result<Self> {
        if coords.len() != pixel_index.len() {
            return Err(Error::Argument(format!(
                "{} coordinates but {} pixel indices",
                coords.len(),
                pixel_index.len()
            )));
        }
        Ok(Self { coords, pixel_index })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Keeps the points at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> PointSet {
        PointSet {
            coords: indices.iter().map(|&i| self.coords[i]).collect(),
            pixel_index: indices.iter().map(|&i| self.pixel_index[i]).collect(),
        }
    }
}

/// One point per valid pixel, in row-major pixel order.
pub fn sample_to_pointset(sample: &MultimodalSample) -> Result<PointSet> {
    let mut set = PointSet::default();
    for (idx, p) in sample.xyz.chunks_exact(3).enumerate() {
        if sample.valid[idx] {
            set.coords.push([p[0] as f64, p[1] as f64, p[2] as f64]);
            set.pixel_index.push((idx / sample.width, idx % sample.width));
        }
    }
    if set.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(set)
}

/// Dense `height x width x dim` feature grid with a per-pixel validity mask.
///
/// Invalid pixels always hold the zero vector.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    dim: usize,
    data: Vec<f32>,
    valid: Vec<bool>,
}

impl FeatureMap {
    /// All-zero map with an empty validity mask.
    pub fn zeros(height: usize, width: usize, dim: usize) -> Self {
        assert!(dim > 0, "feature dimension must be positive");
        Self {
            height,
            width,
            dim,
            data: vec![0.0; height * width * dim],
            valid: vec![false; height * width],
        }
    }

    pub fn from_parts(height: usize, width: usize, dim: usize, data: Vec<f32>, valid: Vec<bool>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Argument("feature dimension must be positive".into()));
        }
        if valid.len() != height * width || data.len() != height * width * dim {
            return Err(Error::Argument(format!(
                "feature map buffers do not match {height}x{width}x{dim}"
            )));
        }
        let mut map = Self {
            height,
            width,
            dim,
            data,
            valid,
        };
        for idx in 0..map.valid.len() {
            if !map.valid[idx] {
                map.pixel_at_mut(idx).fill(0.0);
            }
        }
        Ok(map)
    }

    /// Map where every pixel is valid.
    pub fn dense(height: usize, width: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        Self::from_parts(height, width, dim, data, vec![true; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn pixel(&self, row: usize, col: usize) -> &[f32] {
        self.pixel_at(row * self.width + col)
    }

    pub fn pixel_at(&self, idx: usize) -> &[f32] {
        &self.data[idx * self.dim..(idx + 1) * self.dim]
    }

    pub(crate) fn pixel_at_mut(&mut self, idx: usize) -> &mut [f32] {
        &mut self.data[idx * self.dim..(idx + 1) * self.dim]
    }

    /// Writes `values` at pixel `idx` and marks it valid.
    pub fn set_pixel(&mut self, idx: usize, values: &[f32]) {
        self.pixel_at_mut(idx).copy_from_slice(values);
        self.valid[idx] = true;
    }

    pub fn same_shape(&self, other: &FeatureMap) -> bool {
        self.height == other.height && self.width == other.width && self.dim == other.dim
    }
}

/// Features attached to a subset of a point cloud (the group centres).
#[derive(Clone, Debug, PartialEq)]
pub struct PointFeatureSet {
    centers: Vec<[f64; 3]>,
    dim: usize,
    feats: Vec<f32>,
}

impl PointFeatureSet {
    pub fn new(centers: Vec<[f64; 3]>, dim: usize, feats: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Argument("feature dimension must be positive".into()));
        }
        if feats.len() != centers.len() * dim {
            return Err(Error::Argument(format!(
                "{} feature values for {} centres of dimension {dim}",
                feats.len(),
                centers.len()
            )));
        }
        if !feats.iter().all(|v| v.is_finite()) || !centers.iter().flatten().all(|v| v.is_finite()) {
            return Err(Error::Argument("point features must be finite".into()));
        }
        Ok(Self { centers, dim, feats })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn centers(&self) -> &[[f64; 3]] {
        &self.centers
    }

    pub fn feats(&self) -> &[f32] {
        &self.feats
    }

    pub fn feature(&self, i: usize) -> &[f32] {
        &self.feats[i * self.dim..(i + 1) * self.dim]
    }
}
