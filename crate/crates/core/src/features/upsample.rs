use crate::data::FeatureMap;
use crate::{Error, Result};

// Half-pixel centres: source = (dest + 0.5) * src_len / dst_len - 0.5, clamped.
fn taps(dst: usize, src: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|d| {
            let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let lo = s.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            (lo, hi, s - lo as f64)
        })
        .collect()
}

/// Per-channel bilinear upsampling of a feature grid to `height x width`.
pub fn upsample_bilinear(grid: &FeatureMap, height: usize, width: usize) -> Result<FeatureMap> {
    let (hf, wf, d) = (grid.height(), grid.width(), grid.dim());
    if height < hf || width < wf || hf == 0 || wf == 0 {
        return Err(Error::Argument(format!(
            "cannot upsample {hf}x{wf} to {height}x{width}"
        )));
    }
    let rows = taps(height, hf);
    let cols = taps(width, wf);
    let mut out = vec![0f32; height * width * d];
    for (r, &(r0, r1, fy)) in rows.iter().enumerate() {
        for (c, &(c0, c1, fx)) in cols.iter().enumerate() {
            let corners = [
                (grid.pixel(r0, c0), (1.0 - fy) * (1.0 - fx)),
                (grid.pixel(r0, c1), (1.0 - fy) * fx),
                (grid.pixel(r1, c0), fy * (1.0 - fx)),
                (grid.pixel(r1, c1), fy * fx),
            ];
            let dst = &mut out[(r * width + c) * d..(r * width + c + 1) * d];
            for (k, o) in dst.iter_mut().enumerate() {
                *o = corners.iter().map(|(p, wgt)| p[k] as f64 * wgt).sum::<f64>() as f32;
            }
        }
    }
    FeatureMap::dense(height, width, d, out)
}
