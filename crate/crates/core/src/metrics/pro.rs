use std::collections::VecDeque;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::anomaly::AnomalyMap;
use crate::{Error, Result};

/// 8-connected regions of `mask`, each a sorted list of pixel indices, in
/// row-major order of their first pixel.
pub fn connected_components(mask: &[bool], height: usize, width: usize) -> Vec<Vec<usize>> {
    assert_eq!(mask.len(), height * width, "mask size");
    let mut seen = vec![false; mask.len()];
    let mut regions = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut region = Vec::new();
        while let Some(p) = queue.pop_front() {
            region.push(p);
            let (r, c) = ((p / width) as i64, (p % width) as i64);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (nr, nc) = (r + dr, c + dc);
                    if nr < 0 || nc < 0 || nr >= height as i64 || nc >= width as i64 {
                        continue;
                    }
                    let q = nr as usize * width + nc as usize;
                    if mask[q] && !seen[q] {
                        seen[q] = true;
                        queue.push_back(q);
                    }
                }
            }
        }
        region.sort_unstable();
        regions.push(region);
    }
    regions
}

/// Points `(fpr, pro)`, one per distinct score threshold, preceded by the
/// origin. Both coordinates are non-decreasing.
#[derive(Clone, Debug, PartialEq)]
pub struct ProCurve {
    pub points: Vec<(f64, f64)>,
}

/// PRO curve of a set of maps, false positives pooled over all of them.
pub fn pro_curve(maps: &[&AnomalyMap], gts: &[&[bool]]) -> Result<ProCurve> {
    if maps.len() != gts.len() {
        return Err(Error::Argument("one ground-truth mask per map is required".into()));
    }
    // (score, region id or usize::MAX for negatives)
    let mut pixels: Vec<(f64, usize)> = Vec::new();
    let mut region_sizes: Vec<usize> = Vec::new();
    for (map, gt) in maps.iter().zip(gts) {
        if gt.len() != map.scores().len() {
            return Err(Error::Registration("ground-truth mask and anomaly map differ in size".into()));
        }
        let mut owner = vec![usize::MAX; gt.len()];
        for region in connected_components(gt, map.height(), map.width()) {
            for &p in &region {
                owner[p] = region_sizes.len();
            }
            region_sizes.push(region.len());
        }
        pixels.extend(map.scores().iter().copied().zip(owner));
    }
    let negatives = pixels.iter().filter(|(_, o)| *o == usize::MAX).count();
    if region_sizes.is_empty() {
        return Err(Error::UndefinedMetric("PRO needs at least one ground-truth region".into()));
    }
    if negatives == 0 {
        return Err(Error::UndefinedMetric("PRO needs at least one nominal pixel".into()));
    }
    pixels.sort_unstable_by(|a, b| b.0.total_cmp(&a.0));
    let weight: Vec<f64> = region_sizes
        .iter()
        .map(|&n| 1.0 / (n as f64 * region_sizes.len() as f64))
        .collect();
    let mut points = vec![(0.0, 0.0)];
    let (mut fp, mut pro) = (0usize, 0.0f64);
    let mut i = 0;
    while i < pixels.len() {
        let t = pixels[i].0;
        while i < pixels.len() && pixels[i].0 == t {
            match pixels[i].1 {
                usize::MAX => fp += 1,
                r => pro += weight[r],
            }
            i += 1;
        }
        points.push((fp as f64 / negatives as f64, pro.min(1.0)));
    }
    // the full sweep covers every region exactly
    points.last_mut().unwrap().1 = 1.0;
    Ok(ProCurve { points })
}

/// Area under the step-interpolated PRO curve on `[0, limit]`, divided by
/// `limit`. Between points the curve holds the value of the last point whose
/// FPR does not exceed the abscissa.
pub fn aupro_at(curve: &ProCurve, limit: f64) -> Result<f64> {
    if !(limit > 0.0 && limit <= 1.0) {
        return Err(Error::Argument(format!("integration limit {limit} is outside (0, 1]")));
    }
    let pts = &curve.points;
    let mut area = 0.0;
    for (k, &(f, p)) in pts.iter().enumerate() {
        if f >= limit {
            break;
        }
        let next = pts.get(k + 1).map_or(1.0, |q| q.0).min(limit);
        area += p * (next - f);
    }
    Ok(area / limit)
}

pub fn write_pro_curve_csv(path: impl AsRef<Path>, curve: &ProCurve) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    writeln!(out, "fpr,pro").unwrap();
    for (f, p) in &curve.points {
        writeln!(out, "{f},{p}").unwrap();
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(h: usize, w: usize, v: &[f64]) -> AnomalyMap {
        AnomalyMap::new(h, w, v.to_vec()).unwrap()
    }

    #[test]
    fn component_examples() {
        assert!(connected_components(&[false; 9], 3, 3).is_empty());
        let diag = [true, false, false, true];
        assert_eq!(connected_components(&diag, 2, 2), vec![vec![0, 3]]);
        #[rustfmt::skip]
        let mask = [
            true,  true,  false, false, false,
            false, true,  false, false, false,
            false, false, false, false, true,
            false, false, false, true,  true,
            false, false, false, false, true,
        ];
        assert_eq!(
            connected_components(&mask, 5, 5),
            vec![vec![0, 1, 6], vec![14, 18, 19, 24]]
        );
    }

    #[test]
    fn perfect_detector() {
        let gt = [true, false, false, false];
        let map = m(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let c = pro_curve(&[&map], &[&gt]).unwrap();
        assert_eq!(c.points[1], (0.0, 1.0));
        for limit in [0.3, 0.1, 0.05, 0.01, 1.0] {
            assert_eq!(aupro_at(&c, limit).unwrap(), 1.0);
        }
    }

    #[test]
    fn two_by_two_sweep() {
        let map = m(2, 2, &[0.9, 0.1, 0.8, 0.2]);
        let gt = [true, true, false, false];
        let c = pro_curve(&[&map], &[&gt]).unwrap();
        assert_eq!(c.points, vec![(0.0, 0.0), (0.0, 0.5), (0.5, 0.5), (1.0, 0.5), (1.0, 1.0)]);
        assert!((aupro_at(&c, 0.3).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_map() {
        let map = m(2, 2, &[0.4; 4]);
        let c = pro_curve(&[&map], &[&[true, false, false, false]]).unwrap();
        assert_eq!(c.points, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(aupro_at(&c, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn undefined_inputs() {
        let map = m(1, 2, &[0.1, 0.2]);
        assert!(matches!(pro_curve(&[&map], &[&[false, false]]), Err(Error::UndefinedMetric(_))));
        assert!(matches!(pro_curve(&[&map], &[&[true, true]]), Err(Error::UndefinedMetric(_))));
        let c = pro_curve(&[&map], &[&[true, false]]).unwrap();
        assert!(aupro_at(&c, 0.0).is_err());
        assert!(aupro_at(&c, 1.5).is_err());
    }

    proptest! {
        #[test]
        fn curve_is_monotone_and_area_grows(v in prop::collection::vec((0u8..6, any::<bool>()), 25)) {
            let scores: Vec<f64> = v.iter().map(|(s, _)| *s as f64).collect();
            let gt: Vec<bool> = v.iter().map(|(_, g)| *g).collect();
            prop_assume!(gt.iter().any(|g| *g) && gt.iter().any(|g| !*g));
            let map = m(5, 5, &scores);
            let c = pro_curve(&[&map], &[&gt]).unwrap();
            for w in c.points.windows(2) {
                prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
            }
            prop_assert_eq!(*c.points.last().unwrap(), (1.0, 1.0));
            let mut prev = 0.0;
            for limit in [0.01, 0.05, 0.1, 0.3, 0.7, 1.0] {
                let area = aupro_at(&c, limit).unwrap() * limit;
                prop_assert!(area >= prev - 1e-15);
                prev = area;
            }
        }
    }
}
