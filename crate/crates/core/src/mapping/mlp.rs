use std::f64::consts::{FRAC_1_SQRT_2, PI};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Exact GeLU, `x * Phi(x)`.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x * FRAC_1_SQRT_2))
}

/// `Phi(x) + x * phi(x)`.
pub fn gelu_derivative(x: f64) -> f64 {
    let cdf = 0.5 * (1.0 + libm::erf(x * FRAC_1_SQRT_2));
    let pdf = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
    cdf + x * pdf
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    /// Three linear layers through a hidden width of `(in + out) / 2`.
    #[default]
    Projection,
    /// Halving encoder, bottleneck, doubling decoder.
    #[serde(alias = "encdec")]
    EncoderDecoder,
}

/// Layer widths of an MLP, input first. GeLU follows every layer but the last.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    dims: Vec<usize>,
    arch: Arch,
}

impl MlpSpec {
    pub fn new(dims: Vec<usize>, arch: Arch) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Argument(format!("invalid layer widths {dims:?}")));
        }
        Ok(Self { dims, arch })
    }

    /// `[in, h, h, out]` with `h = (in + out) / 2`; 768 -> 960 -> 960 -> 1152
    /// for the default 2D-to-3D mapping.
    pub fn projection(d_in: usize, d_out: usize) -> Self {
        let hidden = ((d_in + d_out) / 2).max(1);
        Self {
            dims: vec![d_in, hidden, hidden, d_out],
            arch: Arch::Projection,
        }
    }

    /// `[in, in/2, in/4, in/4, in/2, out]`, e.g. 768, 384, 192, 192, 384, 1152.
    pub fn encoder_decoder(d_in: usize, d_out: usize) -> Result<Self> {
        if d_in < 4 {
            return Err(Error::Argument(format!("encoder-decoder needs an input width >= 4, got {d_in}")));
        }
        Ok(Self {
            dims: vec![d_in, d_in / 2, d_in / 4, d_in / 4, d_in / 2, d_out],
            arch: Arch::EncoderDecoder,
        })
    }

    pub fn for_arch(arch: Arch, d_in: usize, d_out: usize) -> Result<Self> {
        match arch {
            Arch::Projection => Ok(Self::projection(d_in, d_out)),
            Arch::EncoderDecoder => Self::encoder_decoder(d_in, d_out),
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

/// Affine layer, `weight` is `out x in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MappingNetwork {
    spec: MlpSpec,
    layers: Vec<Dense>,
}

/// Activations kept from a batched forward pass: `inputs[k]` feeds layer `k`,
/// `pre[k]` is its affine output.
#[derive(Clone, Debug)]
pub struct Trace {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
}

impl Trace {
    pub fn output(&self) -> &Array2<f64> {
        self.pre.last().expect("at least one layer")
    }
}

/// Parameter gradients, one `(weight, bias)` pair per layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Gradients {
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|(w, b)| [w.as_slice().expect("standard layout"), b.as_slice().expect("standard layout")])
            .collect()
    }
}

impl MappingNetwork {
    /// Kaiming-uniform weights with the ReLU-family gain, zero biases.
    pub fn init(spec: MlpSpec, rng: &mut impl Rng) -> Self {
        let layers = spec
            .dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / fan_in as f64).sqrt();
                Dense {
                    weight: Array2::from_shape_simple_fn((fan_out, fan_in), || rng.random_range(-bound..bound)),
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Self { spec, layers }
    }

    pub fn from_layers(spec: MlpSpec, layers: Vec<Dense>) -> Result<Self> {
        let ok = layers.len() == spec.dims.len() - 1
            && layers.iter().zip(spec.dims.windows(2)).all(|(l, w)| {
                l.weight.dim() == (w[1], w[0]) && l.bias.len() == w[1] && l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite())
            });
        if !ok {
            return Err(Error::Argument("layer shapes do not match the spec or hold non-finite values".into()));
        }
        Ok(Self { spec, layers })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.spec.input_dim() {
            return Err(Error::Argument(format!(
                "input has {} values, network expects {}",
                x.len(),
                self.spec.input_dim()
            )));
        }
        let batch = ArrayView2::from_shape((1, x.len()), x).expect("contiguous");
        Ok(self.forward_batch(batch).into_raw_vec_and_offset().0)
    }

    /// Rows of `x` are independent inputs.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let last = self.layers.len() - 1;
        let mut act = x.to_owned();
        for (k, layer) in self.layers.iter().enumerate() {
            act = act.dot(&layer.weight.t()) + &layer.bias;
            if k < last {
                act.mapv_inplace(gelu);
            }
        }
        act
    }

    pub fn forward_trace(&self, x: ArrayView2<f64>) -> Trace {
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut act = x.to_owned();
        for (k, layer) in self.layers.iter().enumerate() {
            let z = act.dot(&layer.weight.t()) + &layer.bias;
            let next = if k < last { z.mapv(gelu) } else { z.clone() };
            inputs.push(act);
            pre.push(z);
            act = next;
        }
        Trace { inputs, pre }
    }

    /// Reverse pass for a loss whose gradient w.r.t. the outputs is
    /// `upstream` (one row per input row). Returns parameter gradients summed
    /// over the batch and the gradient w.r.t. the inputs.
    pub fn backward(&self, trace: &Trace, upstream: ArrayView2<f64>) -> (Gradients, Array2<f64>) {
        let last = self.layers.len() - 1;
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = upstream.to_owned();
        for k in (0..self.layers.len()).rev() {
            if k < last {
                ndarray::Zip::from(&mut delta)
                    .and(&trace.pre[k])
                    .for_each(|d, &z| *d *= gelu_derivative(z));
            }
            let mut dw = delta.t().dot(&trace.inputs[k]);
            if !dw.is_standard_layout() {
                dw = dw.as_standard_layout().into_owned();
            }
            let db = delta.sum_axis(Axis(0));
            let next = delta.dot(&self.layers[k].weight);
            grads.push((dw, db));
            delta = next;
        }
        grads.reverse();
        (Gradients { layers: grads }, delta)
    }

    /// Mutable views of every parameter tensor, in layer order (weight, bias).
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    l.weight.as_slice_mut().expect("standard layout"),
                    l.bias.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn tensor_sizes(&self) -> Vec<usize> {
        self.layers.iter().flat_map(|l| [l.weight.len(), l.bias.len()]).collect()
    }

    /// Parameters flattened in layer order: weight (row-major) then bias.
    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    pub fn from_params(spec: MlpSpec, params: &[f64]) -> Result<Self> {
        if params.len() != spec.param_count() {
            return Err(Error::Format(format!(
                "{} parameters for a network with {}",
                params.len(),
                spec.param_count()
            )));
        }
        let mut offset = 0;
        let layers = spec
            .dims
            .windows(2)
            .map(|w| {
                let (i, o) = (w[0], w[1]);
                let weight = Array2::from_shape_vec((o, i), params[offset..offset + o * i].to_vec()).expect("sized");
                offset += o * i;
                let bias = Array1::from(params[offset..offset + o].to_vec());
                offset += o;
                Dense { weight, bias }
            })
            .collect();
        Self::from_layers(spec, layers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn gelu_values() {
        assert_eq!(gelu(0.0), 0.0);
        for x in [-3.0, -0.7, 0.2, 1.0, 2.5] {
            assert!((gelu(x) - gelu(-x) - x).abs() < 1e-14);
        }
    }

    #[test]
    fn default_widths() {
        assert_eq!(MlpSpec::projection(768, 1152).dims(), &[768, 960, 960, 1152]);
        assert_eq!(MlpSpec::projection(1152, 768).dims(), &[1152, 960, 960, 768]);
        assert_eq!(MlpSpec::encoder_decoder(768, 1152).unwrap().dims(), &[768, 384, 192, 192, 384, 1152]);
        assert_eq!(MlpSpec::encoder_decoder(1152, 768).unwrap().dims(), &[1152, 576, 288, 288, 576, 768]);
        assert!(MlpSpec::new(vec![3], Arch::Projection).is_err());
    }

    fn single_layer(weight: Array2<f64>, bias: Array1<f64>) -> MappingNetwork {
        let spec = MlpSpec::new(vec![weight.ncols(), weight.nrows()], Arch::Projection).unwrap();
        MappingNetwork::from_layers(spec, vec![Dense { weight, bias }]).unwrap()
    }

    #[test]
    fn zero_network_outputs_zero() {
        let spec = MlpSpec::projection(3, 5);
        let net = MappingNetwork::from_params(spec.clone(), &vec![0.0; spec.param_count()]).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0; 5]);
    }

    #[test]
    fn identity_layer() {
        let net = single_layer(Array2::eye(3), Array1::zeros(3));
        assert_eq!(net.forward(&[0.5, -1.5, 2.0]).unwrap(), vec![0.5, -1.5, 2.0]);
        assert!(net.forward(&[1.0]).is_err());
    }

    #[test]
    fn two_layer_hand_computation() {
        // h = gelu([1, -1] . x + [0, 0.5]) ; y = [2, 1] . h - 1
        let spec = MlpSpec::new(vec![2, 2, 1], Arch::Projection).unwrap();
        let net = MappingNetwork::from_layers(
            spec,
            vec![
                Dense {
                    weight: array![[1.0, 0.0], [0.0, -1.0]],
                    bias: array![0.0, 0.5],
                },
                Dense {
                    weight: array![[2.0, 1.0]],
                    bias: array![-1.0],
                },
            ],
        )
        .unwrap();
        // x = (1, 0.5): z = (1, 0), gelu(1) = 0.8413447460685429, gelu(0) = 0
        let y = net.forward(&[1.0, 0.5]).unwrap()[0];
        assert!((y - (2.0 * 0.841_344_746_068_542_9 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let net = MappingNetwork::init(MlpSpec::projection(3, 2), &mut rand::rng());
        let x = array![[0.3, -0.2, 1.0]];
        let trace = net.forward_trace(x.view());
        let (g, dx) = net.backward(&trace, Array2::zeros((1, 2)).view());
        assert!(g.tensors().iter().all(|t| t.iter().all(|v| *v == 0.0)));
        assert!(dx.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn linear_layer_gradient_is_the_input() {
        let net = single_layer(array![[0.2, -0.4, 0.1], [1.0, 0.0, 2.0]], array![0.1, 0.0]);
        let x = array![[0.5, 1.5, -2.0]];
        let trace = net.forward_trace(x.view());
        let (g, _) = net.backward(&trace, array![[1.0, 0.0]].view());
        assert_eq!(g.layers[0].0.row(0).to_vec(), vec![0.5, 1.5, -2.0]);
        assert_eq!(g.layers[0].0.row(1).to_vec(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn params_round_trip() {
        let net = MappingNetwork::init(MlpSpec::encoder_decoder(8, 5).unwrap(), &mut rand::rng());
        let back = MappingNetwork::from_params(net.spec().clone(), &net.params()).unwrap();
        assert_eq!(back, net);
    }
}
