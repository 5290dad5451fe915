use std::fs;
use std::io::Write;
use std::path::Path;

use image::{ImageBuffer, Luma};

use super::AnomalyMap;
use crate::data::{write_feature_file, FeatureMap, Label};
use crate::{Error, Result};

/// Writes the scores as a one-channel CFMF map.
pub fn write_anomaly_cfmf(map: &AnomalyMap, path: impl AsRef<Path>) -> Result<()> {
    let data = map.scores().iter().map(|&s| s as f32).collect();
    let fm = FeatureMap::dense(map.height(), map.width(), 1, data)?;
    write_feature_file(&fm, path)
}

/// 16-bit grayscale heatmap, scores divided by `scale` (the map's own
/// maximum when `None`) and clamped to `[0, 1]`.
pub fn write_anomaly_png(map: &AnomalyMap, path: impl AsRef<Path>, scale: Option<f64>) -> Result<()> {
    let path = path.as_ref();
    let scale = scale.unwrap_or(map.global());
    let img: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_fn(map.width() as u32, map.height() as u32, |x, y| {
        let s = map.score(y as usize, x as usize);
        let v = if scale > 0.0 { (s / scale).clamp(0.0, 1.0) } else { 0.0 };
        Luma([(v * u16::MAX as f64).round() as u16])
    });
    img.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRecord {
    pub sample_id: String,
    pub label: Label,
    pub score: f64,
}

/// Appends `sample_id,label,score` rows, writing the header for a new file.
pub fn write_scores_csv(path: impl AsRef<Path>, records: &[ScoreRecord]) -> Result<()> {
    let path = path.as_ref();
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut out = Vec::new();
    if fresh {
        writeln!(out, "sample_id,label,score").unwrap();
    }
    for r in records {
        let label = if r.label.is_anomalous() { "anomalous" } else { "nominal" };
        writeln!(out, "{},{label},{}", r.sample_id, r.score).unwrap();
    }
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}
