use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::PointSet;
use crate::{Error, Result};

/// Plane `{x : normal . x + offset = 0}` with a unit normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaneModel {
    pub normal: [f64; 3],
    pub offset: f64,
    pub inlier_count: usize,
}

impl PlaneModel {
    pub fn distance(&self, p: &[f64; 3]) -> f64 {
        (self.normal[0] * p[0] + self.normal[1] * p[1] + self.normal[2] * p[2] + self.offset).abs()
    }

    fn count_inliers(&self, points: &[[f64; 3]], threshold: f64) -> usize {
        points.iter().filter(|p| self.distance(p) <= threshold).count()
    }
}

// Sign convention: first nonzero of (z, y, x) is positive, so equal planes
// compare equal regardless of which triple produced them.
fn canonical(normal: Vector3<f64>, offset: f64) -> ([f64; 3], f64) {
    let flip = [normal.z, normal.y, normal.x]
        .into_iter()
        .find(|v| *v != 0.0)
        .is_some_and(|v| v < 0.0);
    let s = if flip { -1.0 } else { 1.0 };
    ([s * normal.x, s * normal.y, s * normal.z], s * offset)
}

fn plane_through(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3], scale: f64) -> Option<([f64; 3], f64)> {
    let a = Vector3::from(*a);
    let n = (Vector3::from(*b) - a).cross(&(Vector3::from(*c) - a));
    let norm = n.norm();
    if !(norm > 1e-12 * scale * scale) {
        return None;
    }
    let n = n / norm;
    Some(canonical(n, -n.dot(&a)))
}

fn least_squares_plane(points: &[[f64; 3]], keep: impl Fn(&[f64; 3]) -> bool) -> Option<([f64; 3], f64)> {
    let inliers: Vec<Vector3<f64>> = points.iter().filter(|p| keep(p)).map(|p| Vector3::from(*p)).collect();
    if inliers.len() < 3 {
        return None;
    }
    let centroid = inliers.iter().sum::<Vector3<f64>>() / inliers.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in &inliers {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let (imin, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    let n = eig.eigenvectors.column(imin).into_owned().normalize();
    if !n.iter().all(|v| v.is_finite()) {
        return None;
    }
    Some(canonical(n, -n.dot(&centroid)))
}

/// RANSAC plane fit over 3-point minimal samples, followed by a least-squares
/// refit on the inliers of the best candidate.
///
/// The refit is kept only when it does not lose inliers, so `inlier_count`
/// is always the maximum found. Deterministic for a fixed `seed`.
pub fn fit_plane_ransac(points: &PointSet, threshold: f64, iterations: usize, seed: u64) -> Result<PlaneModel> {
    let n = points.len();
    if n < 3 {
        return Err(Error::Degenerate(format!("RANSAC needs at least 3 points, got {n}")));
    }
    if !(threshold > 0.0) {
        return Err(Error::Argument(format!("RANSAC threshold must be positive, got {threshold}")));
    }
    let pts = &points.coords;
    let scale = pts
        .iter()
        .flat_map(|p| p.iter().map(|v| v.abs()))
        .fold(1e-300f64, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<PlaneModel> = None;
    for _ in 0..iterations {
        let idx = rand::seq::index::sample(&mut rng, n, 3);
        let Some((normal, offset)) = plane_through(&pts[idx.index(0)], &pts[idx.index(1)], &pts[idx.index(2)], scale) else {
            continue;
        };
        let mut cand = PlaneModel {
            normal,
            offset,
            inlier_count: 0,
        };
        cand.inlier_count = cand.count_inliers(pts, threshold);
        if best.is_none_or(|b| cand.inlier_count > b.inlier_count) {
            best = Some(cand);
        }
    }
    let best = best.ok_or(Error::FitFailure)?;
    if let Some((normal, offset)) = least_squares_plane(pts, |p| best.distance(p) <= threshold) {
        let mut refit = PlaneModel {
            normal,
            offset,
            inlier_count: 0,
        };
        refit.inlier_count = refit.count_inliers(pts, threshold);
        if refit.inlier_count >= best.inlier_count {
            return Ok(refit);
        }
    }
    Ok(best)
}

/// Keeps the points whose distance to `plane` is at least `threshold`.
pub fn remove_background(points: &PointSet, plane: &PlaneModel, threshold: f64) -> Result<PointSet> {
    if !(threshold >= 0.0) {
        return Err(Error::Argument(format!("background threshold must be non-negative, got {threshold}")));
    }
    let keep: Vec<usize> = (0..points.len())
        .filter(|&i| plane.distance(&points.coords[i]) >= threshold)
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptyForeground);
    }
    Ok(points.subset(&keep))
}
