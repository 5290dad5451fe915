use super::AnomalyMap;
use crate::{Error, Result};

/// Normalized 1D Gaussian with radius `ceil(4 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|x| (-0.5 * (x as f64 / sigma).powi(2)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

/// Mirror index about the pixel edges: `d c b a | a b c d | d c b a`.
fn reflect(idx: i64, n: usize) -> usize {
    let n = n as i64;
    let m = idx.rem_euclid(2 * n);
    (if m < n { m } else { 2 * n - 1 - m }) as usize
}

fn convolve_line(src: &[f64], dst: &mut [f64], kernel: &[f64]) {
    let n = src.len();
    let radius = (kernel.len() / 2) as i64;
    for (i, out) in dst.iter_mut().enumerate() {
        *out = kernel
            .iter()
            .enumerate()
            .map(|(k, w)| w * src[reflect(i as i64 + k as i64 - radius, n)])
            .sum();
    }
}

/// Separable Gaussian blur with reflected borders. `sigma == 0` returns the
/// map unchanged. The global score is recomputed afterwards.
pub fn gaussian_smooth(map: &AnomalyMap, sigma: f64) -> Result<AnomalyMap> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::Argument(format!("sigma must be a nonnegative number, got {sigma}")));
    }
    if sigma == 0.0 || map.scores.is_empty() {
        return Ok(map.clone());
    }
    let kernel = gaussian_kernel(sigma);
    let (h, w) = (map.height, map.width);
    let mut tmp = vec![0.0; h * w];
    for (src, dst) in map.scores.chunks_exact(w).zip(tmp.chunks_exact_mut(w)) {
        convolve_line(src, dst, &kernel);
    }
    let mut out = vec![0.0; h * w];
    let mut col = vec![0.0; h];
    let mut res = vec![0.0; h];
    for c in 0..w {
        for r in 0..h {
            col[r] = tmp[r * w + c];
        }
        convolve_line(&col, &mut res, &kernel);
        for r in 0..h {
            out[r * w + c] = res[r].max(0.0);
        }
    }
    AnomalyMap::new(h, w, out)
}
