//! Geometric preprocessing of point clouds and 3D feature alignment.

mod project;
mod ransac;
mod sampling;

pub use project::{interpolate_features, project_to_image, smooth3x3, SmoothingKind, ZERO_DISTANCE};
pub use ransac::{fit_plane_ransac, remove_background, PlaneModel};
pub use sampling::{farthest_point_sampling, group_points, Grouping};

#[inline]
pub(crate) fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}
