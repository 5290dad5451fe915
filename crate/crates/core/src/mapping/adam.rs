use crate::{Error, Result};

/// Adam optimizer state with bias correction.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(tensor_sizes: &[usize], lr: f64) -> Self {
        Self {
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: tensor_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: tensor_sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn second_moments(&self) -> impl Iterator<Item = &f64> {
        self.v.iter().flatten()
    }
}

pub fn adam_step(params: &mut [&mut [f64]], grads: &[&[f64]], state: &mut AdamState) -> Result<()> {
    let shapes_ok = params.len() == state.m.len()
        && grads.len() == params.len()
        && params.iter().zip(grads).zip(&state.m).all(|((p, g), m)| p.len() == g.len() && g.len() == m.len());
    if !shapes_ok {
        return Err(Error::Argument("Adam parameter, gradient and state shapes differ".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        for i in 0..p.len() {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = vec![0.5, -1.0];
        let mut s = AdamState::new(&[2], 1e-3);
        for _ in 0..2 {
            adam_step(&mut [p.as_mut_slice()], &[&[0.0, 0.0]], &mut s).unwrap();
        }
        assert_eq!(p, vec![0.5, -1.0]);
        assert_eq!(s.step, 2);
    }

    #[test]
    fn first_step_hand_value() {
        let mut p = vec![0.0];
        let mut s = AdamState::new(&[1], 1e-3);
        adam_step(&mut [p.as_mut_slice()], &[&[1.0]], &mut s).unwrap();
        assert!((p[0] - (-0.001 / (1.0 + 1e-8))).abs() < 1e-18);
        assert!(s.second_moments().all(|v| *v >= 0.0));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = vec![0.0; 2];
        let mut s = AdamState::new(&[3], 1e-3);
        assert!(adam_step(&mut [p.as_mut_slice()], &[&[1.0, 1.0]], &mut s).is_err());
    }
}
