use super::dist2;
use crate::data::PointSet;
use crate::{Error, Result};

/// Groups of `n` nearest neighbours around FPS centres.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grouping {
    pub center_indices: Vec<usize>,
    pub members: Vec<Vec<usize>>,
}

impl Grouping {
    pub fn len(&self) -> usize {
        self.center_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.center_indices.is_empty()
    }
}

/// Greedy farthest point sampling starting at `start`.
///
/// Each new centre maximizes the distance to its nearest chosen centre; ties
/// go to the lowest index.
pub fn farthest_point_sampling(points: &PointSet, count: usize, start: usize) -> Result<Vec<usize>> {
    let n = points.len();
    if count == 0 || count > n {
        return Err(Error::Argument(format!("FPS needs 1 <= G <= N, got G={count}, N={n}")));
    }
    if start >= n {
        return Err(Error::Argument(format!("FPS start index {start} out of range for {n} points")));
    }
    let pts = &points.coords;
    let mut nearest = vec![f64::INFINITY; n];
    let mut chosen = Vec::with_capacity(count);
    let mut current = start;
    loop {
        chosen.push(current);
        if chosen.len() == count {
            break;
        }
        let c = pts[current];
        let mut best = (f64::NEG_INFINITY, 0usize);
        for (i, p) in pts.iter().enumerate() {
            let d = dist2(p, &c);
            if d < nearest[i] {
                nearest[i] = d;
            }
            if nearest[i] > best.0 {
                best = (nearest[i], i);
            }
        }
        current = best.1;
    }
    Ok(chosen)
}

/// The `n` nearest points of each centre (ties by lowest index). A centre is
/// always the first member of its own group.
pub fn group_points(points: &PointSet, centers: &[usize], n: usize) -> Result<Grouping> {
    let total = points.len();
    if n == 0 || n > total {
        return Err(Error::Argument(format!("group size must be in 1..={total}, got {n}")));
    }
    if let Some(c) = centers.iter().find(|&&c| c >= total) {
        return Err(Error::Argument(format!("centre index {c} out of range for {total} points")));
    }
    let pts = &points.coords;
    let members = centers
        .iter()
        .map(|&c| {
            let mut order: Vec<(f64, usize)> = pts
                .iter()
                .enumerate()
                .map(|(i, p)| (if i == c { -1.0 } else { dist2(p, &pts[c]) }, i))
                .collect();
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if n < total {
                order.select_nth_unstable_by(n - 1, cmp);
                order.truncate(n);
            }
            order.sort_unstable_by(cmp);
            order.into_iter().map(|(_, i)| i).collect()
        })
        .collect();
    Ok(Grouping {
        center_indices: centers.to_vec(),
        members,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(xs: &[f64]) -> PointSet {
        PointSet::new(xs.iter().map(|&x| [x, 0.0, 0.0]).collect(), (0..xs.len()).map(|i| (0, i)).collect()).unwrap()
    }

    // Oracle: among all orderings consistent with the greedy rule, enumerate
    // every candidate at each step and pick the max-min (lowest index on ties).
    fn brute_fps(pts: &PointSet, count: usize, start: usize) -> Vec<usize> {
        let mut chosen = vec![start];
        while chosen.len() < count {
            let mut best: Option<(f64, usize)> = None;
            for i in 0..pts.len() {
                let d = chosen
                    .iter()
                    .map(|&c| dist2(&pts.coords[i], &pts.coords[c]).sqrt())
                    .fold(f64::INFINITY, f64::min);
                if best.is_none_or(|b| d > b.0) {
                    best = Some((d, i));
                }
            }
            chosen.push(best.unwrap().1);
        }
        chosen
    }

    #[test]
    fn fps_on_a_line() {
        let pts = line(&[0.0, 1.0, 2.0, 9.0]);
        assert_eq!(brute_fps(&pts, 2, 0), vec![0, 3]);
        assert_eq!(farthest_point_sampling(&pts, 2, 0).unwrap(), vec![0, 3]);
        assert_eq!(farthest_point_sampling(&pts, 1, 2).unwrap(), vec![2]);
        let all = farthest_point_sampling(&pts, 4, 0).unwrap();
        assert_eq!(all, brute_fps(&pts, 4, 0));
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2, 3]);
        assert!(farthest_point_sampling(&pts, 5, 0).is_err());
    }

    #[test]
    fn grouping_examples() {
        let pts = line(&[0.0, 1.0, 3.0, 7.0]);
        let g = group_points(&pts, &[0], 2).unwrap();
        assert_eq!(g.members, vec![vec![0, 1]]);
        let g = group_points(&pts, &[0, 2, 3], 1).unwrap();
        assert_eq!(g.members, vec![vec![0], vec![2], vec![3]]);
        let g = group_points(&pts, &[1, 3], 4).unwrap();
        for m in &g.members {
            let mut s = m.clone();
            s.sort();
            assert_eq!(s, vec![0, 1, 2, 3]);
        }
        assert!(group_points(&pts, &[0], 5).is_err());
    }

    #[test]
    fn centre_is_member_even_with_duplicates() {
        let pts = line(&[0.0, 0.0, 0.0]);
        let g = group_points(&pts, &[2], 1).unwrap();
        assert_eq!(g.members, vec![vec![2]]);
    }

    fn arb_points() -> impl Strategy<Value = PointSet> {
        prop::collection::vec(prop::array::uniform3(-5.0f64..5.0), 2..40).prop_map(|c| {
            let n = c.len();
            PointSet::new(c, (0..n).map(|i| (0, i)).collect()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn fps_matches_oracle_and_is_monotone(pts in arb_points(), frac in 0.0f64..1.0) {
            let g = 1 + ((pts.len() - 1) as f64 * frac) as usize;
            let centers = farthest_point_sampling(&pts, g, 0).unwrap();
            prop_assert_eq!(&centers, &brute_fps(&pts, g, 0));
            let mut prev = f64::INFINITY;
            for k in 1..centers.len() {
                let d = centers[..k]
                    .iter()
                    .map(|&c| dist2(&pts.coords[centers[k]], &pts.coords[c]))
                    .fold(f64::INFINITY, f64::min);
                prop_assert!(d <= prev);
                prev = d;
            }
        }

        #[test]
        fn groups_are_nearest_neighbours(pts in arb_points(), n in 1usize..10) {
            let n = n.min(pts.len());
            let g = group_points(&pts, &[0, pts.len() - 1], n).unwrap();
            for (c, members) in g.center_indices.iter().zip(&g.members) {
                prop_assert_eq!(members.len(), n);
                prop_assert!(members.contains(c));
                let radius = members.iter().map(|&m| dist2(&pts.coords[m], &pts.coords[*c])).fold(0.0, f64::max);
                let closer = (0..pts.len()).filter(|i| dist2(&pts.coords[*i], &pts.coords[*c]) < radius).count();
                prop_assert!(closer < n);
            }
        }
    }
}
