use serde::{Deserialize, Serialize};

use super::dist2;
use crate::data::{FeatureMap, PointFeatureSet, PointSet};
use crate::{Error, Result};

/// Distances below this snap a query onto the coincident centre.
pub const ZERO_DISTANCE: f64 = 1e-12;

/// Inverse-distance interpolation from the three nearest centres.
///
/// Returns `queries.len() x dim` values, row-major.
pub fn interpolate_features(centers: &PointFeatureSet, queries: &PointSet) -> Result<Vec<f32>> {
    let nf = centers.len();
    if nf < 3 {
        return Err(Error::Degenerate(format!("interpolation needs at least 3 centres, got {nf}")));
    }
    let dim = centers.dim();
    let mut out = vec![0f32; queries.len() * dim];
    let mut acc = vec![0f64; dim];
    for (q, row) in queries.coords.iter().zip(out.chunks_exact_mut(dim)) {
        let mut near = [(f64::INFINITY, usize::MAX); 3];
        for (i, c) in centers.centers().iter().enumerate() {
            let d = dist2(q, c);
            // strict comparisons keep the lowest index on ties
            if d < near[2].0 {
                near[2] = (d, i);
                if near[2].0 < near[1].0 {
                    near.swap(1, 2);
                    if near[1].0 < near[0].0 {
                        near.swap(0, 1);
                    }
                }
            }
        }
        let dists = near.map(|(d2, i)| (d2.sqrt(), i));
        if let Some(&(_, i)) = dists.iter().find(|(d, _)| *d < ZERO_DISTANCE) {
            row.copy_from_slice(centers.feature(i));
            continue;
        }
        let inv: [f64; 3] = dists.map(|(d, _)| 1.0 / d);
        let total: f64 = inv.iter().sum();
        acc.fill(0.0);
        for (w, (_, i)) in inv.iter().zip(&dists) {
            let w = w / total;
            for (a, f) in acc.iter_mut().zip(centers.feature(*i)) {
                *a += w * *f as f64;
            }
        }
        for (o, a) in row.iter_mut().zip(&acc) {
            *o = *a as f32;
        }
    }
    Ok(out)
}

/// Scatters per-point features onto their registered pixels.
///
/// Pixels without a point stay zero and invalid. If two points share a
/// pixel the later one wins.
pub fn project_to_image(
    feats: &[f32],
    dim: usize,
    pixel_index: &[(usize, usize)],
    height: usize,
    width: usize,
) -> Result<FeatureMap> {
    if feats.len() != pixel_index.len() * dim {
        return Err(Error::Argument(format!(
            "{} feature values for {} points of dimension {dim}",
            feats.len(),
            pixel_index.len()
        )));
    }
    let mut map = FeatureMap::zeros(height, width, dim);
    for (k, &(r, c)) in pixel_index.iter().enumerate() {
        if r >= height || c >= width {
            return Err(Error::Argument(format!("pixel ({r}, {c}) outside {height}x{width}")));
        }
        map.set_pixel(r * width + c, &feats[k * dim..(k + 1) * dim]);
    }
    Ok(map)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothingKind {
    /// Uniform 3x3 kernel over all pixels, zero padded.
    #[default]
    Box,
    /// Mean over the valid pixels of each 3x3 window.
    ValidBox,
    None,
}

/// 3x3 smoothing of every channel. The validity mask is unchanged and
/// invalid pixels stay zero.
pub fn smooth3x3(map: &FeatureMap, kind: SmoothingKind) -> FeatureMap {
    if kind == SmoothingKind::None {
        return map.clone();
    }
    let (h, w, d) = (map.height(), map.width(), map.dim());
    let valid = map.valid();
    let mut out = vec![0f32; h * w * d];
    let mut acc = vec![0f64; d];
    for r in 0..h {
        for c in 0..w {
            let idx = r * w + c;
            if !valid[idx] {
                continue;
            }
            acc.fill(0.0);
            let mut count = 0usize;
            for rr in r.saturating_sub(1)..(r + 2).min(h) {
                for cc in c.saturating_sub(1)..(c + 2).min(w) {
                    let j = rr * w + cc;
                    if kind == SmoothingKind::ValidBox && !valid[j] {
                        continue;
                    }
                    count += 1;
                    for (a, v) in acc.iter_mut().zip(map.pixel_at(j)) {
                        *a += *v as f64;
                    }
                }
            }
            let denom = match kind {
                SmoothingKind::ValidBox => count as f64,
                _ => 9.0,
            };
            for (o, a) in out[idx * d..(idx + 1) * d].iter_mut().zip(&acc) {
                *o = (*a / denom) as f32;
            }
        }
    }
    FeatureMap::from_parts(h, w, d, out, valid.to_vec()).expect("shape preserved")
}
