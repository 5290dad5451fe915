//! Deterministic stand-ins for the frozen 2D and 3D backbones.
//!
//! Both extractors compute a small hand-crafted descriptor made of a local
//! part and a context part whose receptive field grows with the pruning
//! layer, then embed it with a fixed random projection with orthonormal
//! columns. Projections are seeded from `(seed, modality, layer)`.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::ExtractorConfig;
use crate::data::{FeatureMap, MultimodalSample, PointFeatureSet, PointSet};
use crate::preprocess::Grouping;
use crate::{Error, Result};

/// Statistics per 2D window: mean RGB, RGB standard deviation, mean absolute
/// luminance gradient along x and y.
pub const STATS_2D: usize = 8;
/// Statistics per 3D group, see `group_stats`.
pub const STATS_3D: usize = 12;

const NEIGHBOUR_CENTRES: usize = 6;
/// Weight of the context half of each descriptor relative to the local half.
const CONTEXT_WEIGHT: f64 = 0.5;
const MODALITY_2D: u64 = 2;
const MODALITY_3D: u64 = 3;

#[derive(Clone, Debug)]
struct Projection {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
}

impl Projection {
    /// `rows x cols` Gaussian matrix orthonormalized along the shorter side.
    fn seeded(rows: usize, cols: usize, seed: u64, modality: u64, layer: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(modality << 32 | layer as u64);
        let mut weights: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
        let (n_vec, len, stride_vec, stride_el) = if rows >= cols { (cols, rows, 1, cols) } else { (rows, cols, cols, 1) };
        for v in 0..n_vec {
            for u in 0..v {
                let dot: f64 = (0..len).map(|k| weights[v * stride_vec + k * stride_el] * weights[u * stride_vec + k * stride_el]).sum();
                for k in 0..len {
                    weights[v * stride_vec + k * stride_el] -= dot * weights[u * stride_vec + k * stride_el];
                }
            }
            let norm = (0..len).map(|k| weights[v * stride_vec + k * stride_el].powi(2)).sum::<f64>().sqrt();
            for k in 0..len {
                weights[v * stride_vec + k * stride_el] /= norm;
            }
        }
        Self { rows, cols, weights }
    }

    fn apply(&self, input: &[f64], out: &mut [f32]) {
        debug_assert_eq!(input.len(), self.cols);
        for (r, o) in out.iter_mut().enumerate().take(self.rows) {
            let row = &self.weights[r * self.cols..(r + 1) * self.cols];
            *o = row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() as f32;
        }
    }
}

#[derive(Clone, Debug)]
pub struct ToyExtractor {
    proj_2d: Projection,
    proj_3d: Projection,
}

#[derive(Clone, Copy)]
struct Rect {
    r0: usize,
    r1: usize,
    c0: usize,
    c1: usize,
}

impl ToyExtractor {
    pub fn new(cfg: &ExtractorConfig) -> Self {
        Self {
            proj_2d: Projection::seeded(cfg.d2d, 2 * STATS_2D, cfg.seed, MODALITY_2D, cfg.layer),
            proj_3d: Projection::seeded(cfg.d3d, 2 * STATS_3D, cfg.seed, MODALITY_3D, cfg.layer),
        }
    }

    /// Grid of contextual colour/texture descriptors. The context window of
    /// cell `(i, j)` spans `1 + 2 * layer` cells per side, clamped to the image.
    pub fn extract_2d(&self, sample: &MultimodalSample, cfg: &ExtractorConfig) -> Result<FeatureMap> {
        let (h, w) = (sample.height(), sample.width());
        let (hf, wf) = cfg.grid;
        if h < hf || w < wf {
            return Err(Error::Argument(format!("{h}x{w} image is smaller than the {hf}x{wf} grid")));
        }
        let row_edge = |i: usize| i * h / hf;
        let col_edge = |j: usize| j * w / wf;
        let l = cfg.layer;
        let mut out = vec![0f32; hf * wf * cfg.d2d];
        let mut desc = [0f64; 2 * STATS_2D];
        for i in 0..hf {
            for j in 0..wf {
                let own = Rect {
                    r0: row_edge(i),
                    r1: row_edge(i + 1),
                    c0: col_edge(j),
                    c1: col_edge(j + 1),
                };
                let ctx = Rect {
                    r0: row_edge(i.saturating_sub(l)),
                    r1: row_edge((i + l + 1).min(hf)),
                    c0: col_edge(j.saturating_sub(l)),
                    c1: col_edge((j + l + 1).min(wf)),
                };
                window_stats(sample, own, &mut desc[..STATS_2D]);
                window_stats(sample, ctx, &mut desc[STATS_2D..]);
                desc[STATS_2D..].iter_mut().for_each(|v| *v *= CONTEXT_WEIGHT);
                let k = i * wf + j;
                self.proj_2d.apply(&desc, &mut out[k * cfg.d2d..(k + 1) * cfg.d2d]);
            }
        }
        FeatureMap::dense(hf, wf, cfg.d2d, out)
    }

    /// One descriptor per group centre. The context part averages the local
    /// descriptors over the centre's neighbourhood graph `layer` times.
    pub fn extract_3d(&self, points: &PointSet, grouping: &Grouping, cfg: &ExtractorConfig) -> Result<PointFeatureSet> {
        let g = grouping.len();
        if g == 0 {
            return Err(Error::Degenerate("grouping has no groups".into()));
        }
        let centres: Vec<[f64; 3]> = grouping.center_indices.iter().map(|&c| points.coords[c]).collect();
        let neighbours = centre_neighbours(&centres, NEIGHBOUR_CENTRES.min(g - 1));
        let local: Vec<[f64; STATS_3D]> = (0..g)
            .map(|k| group_stats(points, &grouping.members[k], &centres, k, &neighbours[k]))
            .collect();
        let mut ctx = local.clone();
        let mut next = ctx.clone();
        for _ in 0..cfg.layer {
            for k in 0..g {
                let mut acc = ctx[k];
                for &n in &neighbours[k] {
                    for (a, v) in acc.iter_mut().zip(&ctx[n]) {
                        *a += v;
                    }
                }
                let denom = (neighbours[k].len() + 1) as f64;
                next[k] = acc.map(|a| a / denom);
            }
            std::mem::swap(&mut ctx, &mut next);
        }
        let mut feats = vec![0f32; g * cfg.d3d];
        let mut desc = [0f64; 2 * STATS_3D];
        for k in 0..g {
            desc[..STATS_3D].copy_from_slice(&local[k]);
            for (d, c) in desc[STATS_3D..].iter_mut().zip(&ctx[k]) {
                *d = CONTEXT_WEIGHT * c;
            }
            self.proj_3d.apply(&desc, &mut feats[k * cfg.d3d..(k + 1) * cfg.d3d]);
        }
        PointFeatureSet::new(centres, cfg.d3d, feats)
    }
}

/// Colour and gradient statistics of a pixel rectangle. Gradients use only
/// pixels inside the rectangle so the result depends on nothing outside it.
fn window_stats(sample: &MultimodalSample, rect: Rect, out: &mut [f64]) {
    let luma = |r: usize, c: usize| {
        let p = sample.rgb_at(r, c);
        (p[0] + p[1] + p[2]) as f64 / 3.0
    };
    let mut sum = [0f64; 3];
    let mut sq = [0f64; 3];
    let (mut gx, mut gy) = (0f64, 0f64);
    for r in rect.r0..rect.r1 {
        for c in rect.c0..rect.c1 {
            let p = sample.rgb_at(r, c);
            for k in 0..3 {
                sum[k] += p[k] as f64;
                sq[k] += (p[k] as f64).powi(2);
            }
            let (cl, cr) = (c.saturating_sub(1).max(rect.c0), (c + 1).min(rect.c1 - 1));
            let (ru, rd) = (r.saturating_sub(1).max(rect.r0), (r + 1).min(rect.r1 - 1));
            gx += (luma(r, cr) - luma(r, cl)).abs();
            gy += (luma(rd, c) - luma(ru, c)).abs();
        }
    }
    let n = ((rect.r1 - rect.r0) * (rect.c1 - rect.c0)) as f64;
    for k in 0..3 {
        let mean = sum[k] / n;
        out[k] = 2.0 * mean - 1.0;
        out[3 + k] = 4.0 * (sq[k] / n - mean * mean).max(0.0).sqrt();
    }
    out[6] = 4.0 * gx / n;
    out[7] = 4.0 * gy / n;
}

fn centre_neighbours(centres: &[[f64; 3]], k: usize) -> Vec<Vec<usize>> {
    centres
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut d: Vec<(f64, usize)> = centres
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(j, o)| (crate::preprocess::dist2(c, o), j))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

fn oriented(v: Vector3<f64>) -> Vector3<f64> {
    let flip = [v.z, v.y, v.x].into_iter().find(|x| x.abs() > 1e-12).is_some_and(|x| x < 0.0);
    if flip {
        -v
    } else {
        v
    }
}

/// Scale-free shape descriptor of one group; every term is built from
/// differences of coordinates, so it is invariant to translation.
///
/// Layout: a constant bias, roughness, anisotropy, normal tilt (2), signed
/// skew along the normal, then down-weighted centroid offset (3) and mean
/// offset to neighbouring centres (3), which mostly encode where the sampler
/// happened to put the centre.
fn group_stats(points: &PointSet, members: &[usize], centres: &[[f64; 3]], k: usize, neighbours: &[usize]) -> [f64; STATS_3D] {
    const PLACEMENT_WEIGHT: f64 = 0.2;
    let centre = Vector3::from(centres[k]);
    let pts: Vec<Vector3<f64>> = members.iter().map(|&m| Vector3::from(points.coords[m])).collect();
    let mean = pts.iter().sum::<Vector3<f64>>() / pts.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in &pts {
        let d = p - mean;
        cov += d * d.transpose();
    }
    cov /= pts.len() as f64;
    let spread = cov.trace();
    let mut out = [0f64; STATS_3D];
    out[0] = 1.0;
    if spread > 1e-30 {
        let eig = SymmetricEigen::new(cov);
        let mut order = [0usize, 1, 2];
        order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
        let s = order.map(|i| (eig.eigenvalues[i].max(0.0) / spread).sqrt());
        out[1] = 3.0 * s[0];
        out[2] = 3.0 * (s[2] - s[1]);
        let normal = oriented(eig.eigenvectors.column(order[0]).into_owned());
        out[3] = 2.0 * normal.x;
        out[4] = 2.0 * normal.y;
        let scale = spread.sqrt();
        let (mut m2, mut m3) = (0.0, 0.0);
        for p in &pts {
            let r = (p - mean).dot(&normal) / scale;
            m2 += r * r;
            m3 += r * r * r;
        }
        let n = pts.len() as f64;
        let (m2, m3) = (m2 / n, m3 / n);
        if m2 > 1e-12 {
            out[5] = (m3 / m2.powf(1.5)).clamp(-2.0, 2.0) * out[1].min(1.0);
        }
        let offset = PLACEMENT_WEIGHT * (mean - centre) / scale;
        out[6..9].copy_from_slice(offset.as_slice());
    }
    if !neighbours.is_empty() {
        let diffs: Vec<Vector3<f64>> = neighbours.iter().map(|&n| Vector3::from(centres[n]) - centre).collect();
        let scale = diffs.iter().map(|d| d.norm()).sum::<f64>() / diffs.len() as f64;
        if scale > 1e-30 {
            let m = PLACEMENT_WEIGHT * diffs.iter().sum::<Vector3<f64>>() / (diffs.len() as f64 * scale);
            out[9..12].copy_from_slice(m.as_slice());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Label, SampleInfo};
    use crate::preprocess::{farthest_point_sampling, group_points};

    fn cfg() -> ExtractorConfig {
        ExtractorConfig {
            d2d: 10,
            d3d: 12,
            grid: (4, 4),
            groups: 8,
            group_size: 6,
            layer: 1,
            ..ExtractorConfig::default()
        }
    }

    fn sample(rgb: Vec<f32>) -> MultimodalSample {
        let xyz = (0..256).flat_map(|i| [(i % 16) as f32, (i / 16) as f32, 1.0]).collect();
        MultimodalSample::new(SampleInfo::new("t", "c", "test", Label::Nominal), 16, 16, rgb, xyz, None).unwrap()
    }

    fn pattern() -> Vec<f32> {
        (0..768).map(|i| ((i * 37) % 101) as f32 / 100.0).collect()
    }

    #[test]
    fn projection_columns_are_orthonormal() {
        let p = Projection::seeded(10, 4, 3, MODALITY_2D, 1);
        for a in 0..4 {
            for b in 0..4 {
                let dot: f64 = (0..10).map(|r| p.weights[r * 4 + a] * p.weights[r * 4 + b]).sum();
                assert!((dot - if a == b { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn extraction_is_deterministic() {
        let c = cfg();
        let toy = ToyExtractor::new(&c);
        let s = sample(pattern());
        assert_eq!(toy.extract_2d(&s, &c).unwrap(), ToyExtractor::new(&c).extract_2d(&s, &c).unwrap());
    }

    #[test]
    fn changes_outside_the_context_window_do_not_leak() {
        let c = cfg();
        let toy = ToyExtractor::new(&c);
        let a = pattern();
        let mut b = a.clone();
        // bottom-right cell (3, 3) lies outside the 3x3-cell window of cell (0, 0)
        for r in 12..16 {
            for col in 12..16 {
                b[(r * 16 + col) * 3] = 0.0;
            }
        }
        let fa = toy.extract_2d(&sample(a), &c).unwrap();
        let fb = toy.extract_2d(&sample(b), &c).unwrap();
        assert_eq!(fa.pixel(0, 0), fb.pixel(0, 0));
        assert_ne!(fa.pixel(3, 3), fb.pixel(3, 3));
    }

    fn bumpy_cloud(offset: [f64; 3]) -> PointSet {
        let mut coords = Vec::new();
        let mut px = Vec::new();
        for r in 0..12 {
            for c in 0..12 {
                let (x, y) = (c as f64 * 0.1, r as f64 * 0.1);
                let z = 0.2 * (x * 3.0).sin() * (y * 2.0).cos();
                coords.push([x + offset[0], y + offset[1], z + offset[2]]);
                px.push((r, c));
            }
        }
        PointSet::new(coords, px).unwrap()
    }

    #[test]
    fn descriptors_are_translation_invariant() {
        let c = cfg();
        let toy = ToyExtractor::new(&c);
        let run = |pts: &PointSet| {
            let centres = farthest_point_sampling(pts, 8, 0).unwrap();
            let g = group_points(pts, &centres, 6).unwrap();
            toy.extract_3d(pts, &g, &c).unwrap()
        };
        let a = run(&bumpy_cloud([0.0; 3]));
        let b = run(&bumpy_cloud([0.5, -0.25, 0.125]));
        for (x, y) in a.feats().iter().zip(b.feats()) {
            assert!((x - y).abs() < 1e-4, "{x} vs {y}");
        }
    }
}
