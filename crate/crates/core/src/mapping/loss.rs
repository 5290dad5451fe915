/// Vectors with a norm below this are treated as missing.
pub const NORM_EPS: f64 = 1e-12;

fn dot_norms(e: &[f64], ehat: &[f64]) -> (f64, f64, f64) {
    let mut dot = 0.0;
    let mut ne = 0.0;
    let mut nh = 0.0;
    for (a, b) in e.iter().zip(ehat) {
        dot += a * b;
        ne += a * a;
        nh += b * b;
    }
    (dot, ne.sqrt(), nh.sqrt())
}

/// `1 - cos(e, ehat)`, or `None` if either vector is (near) zero, in which
/// case the pixel is left out of training.
pub fn cosine_loss(e: &[f64], ehat: &[f64]) -> Option<f64> {
    let (dot, ne, nh) = dot_norms(e, ehat);
    if ne < NORM_EPS || nh < NORM_EPS {
        return None;
    }
    Some(1.0 - dot / (ne * nh))
}

/// Loss and its gradient with respect to `ehat`.
pub fn cosine_loss_grad(e: &[f64], ehat: &[f64], grad: &mut [f64]) -> Option<f64> {
    let (dot, ne, nh) = dot_norms(e, ehat);
    if ne < NORM_EPS || nh < NORM_EPS {
        return None;
    }
    let inv = 1.0 / (ne * nh);
    let cos = dot * inv;
    for ((g, a), b) in grad.iter_mut().zip(e).zip(ehat) {
        *g = -(a * inv - cos * b / (nh * nh));
    }
    Some(1.0 - cos)
}

/// Per-pixel training loss: the sum of the 2D and 3D cosine terms.
pub fn loss_at_pixel(e2d: &[f64], ehat2d: &[f64], e3d: &[f64], ehat3d: &[f64]) -> Option<f64> {
    Some(cosine_loss(e2d, ehat2d)? + cosine_loss(e3d, ehat3d)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_values() {
        let e = [1.0, 2.0, -0.5];
        assert!(cosine_loss(&e, &e).unwrap().abs() < 1e-15);
        assert!((cosine_loss(&[1.0, 0.0], &[0.0, 3.0]).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = e.iter().map(|v| -v).collect();
        assert!((cosine_loss(&e, &neg).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(cosine_loss(&[0.0, 0.0], &[1.0, 1.0]), None);
    }

    #[test]
    fn pixel_loss_is_additive() {
        let a = [1.0, 0.0];
        let b = [0.0, 1.0];
        assert_eq!(loss_at_pixel(&a, &a, &b, &b), Some(0.0));
        assert_eq!(loss_at_pixel(&a, &b, &b, &a), Some(2.0));
        assert_eq!(loss_at_pixel(&a, &a, &b, &[0.0, -1.0]), Some(2.0));
    }

    proptest! {
        #[test]
        fn loss_is_bounded(v in prop::collection::vec(-10.0f64..10.0, 12)) {
            if let Some(l) = loss_at_pixel(&v[0..3], &v[3..6], &v[6..9], &v[9..12]) {
                prop_assert!((-1e-12..=4.0 + 1e-12).contains(&l));
            }
        }

        #[test]
        fn grad_matches_finite_difference(e in prop::collection::vec(-2.0f64..2.0, 4), h in prop::collection::vec(-2.0f64..2.0, 4)) {
            prop_assume!(h.iter().map(|v| v * v).sum::<f64>() > 0.1 && e.iter().map(|v| v * v).sum::<f64>() > 0.1);
            let mut g = vec![0.0; 4];
            cosine_loss_grad(&e, &h, &mut g).unwrap();
            for k in 0..4 {
                let mut p = h.clone();
                let mut m = h.clone();
                p[k] += 1e-6;
                m[k] -= 1e-6;
                let fd = (cosine_loss(&e, &p).unwrap() - cosine_loss(&e, &m).unwrap()) / 2e-6;
                prop_assert!((fd - g[k]).abs() < 1e-6 * (1.0 + fd.abs()) * 100.0);
            }
        }
    }
}
