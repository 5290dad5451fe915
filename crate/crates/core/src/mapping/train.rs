use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::loss::cosine_loss_grad;
use super::mlp::{Arch, MappingNetwork, MlpSpec};
use crate::data::FeatureMap;
use crate::features::AlignedFeatures;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// 2D features predict 3D features and vice versa.
    #[default]
    Cross,
    /// Each modality reconstructs itself.
    Intra,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub mode: Mode,
    pub arch: Arch,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 250,
            lr: 1e-3,
            batch_size: 4096,
            mode: Mode::Cross,
            arch: Arch::Projection,
            seed: 0,
        }
    }
}

/// The two trained networks. `from_2d` consumes 2D features, `from_3d`
/// consumes 3D features; their targets depend on `mode`.
#[derive(Clone, Debug, PartialEq)]
pub struct MappingPair {
    pub mode: Mode,
    pub from_2d: MappingNetwork,
    pub from_3d: MappingNetwork,
}

impl MappingPair {
    pub fn init(mode: Mode, arch: Arch, d2d: usize, d3d: usize, seed: u64) -> Result<Self> {
        let (out_2d, out_3d) = match mode {
            Mode::Cross => (d3d, d2d),
            Mode::Intra => (d2d, d3d),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(10);
        let from_2d = MappingNetwork::init(MlpSpec::for_arch(arch, d2d, out_2d)?, &mut rng);
        rng.set_stream(11);
        let from_3d = MappingNetwork::init(MlpSpec::for_arch(arch, d3d, out_3d)?, &mut rng);
        Ok(Self { mode, from_2d, from_3d })
    }

    pub fn d2d(&self) -> usize {
        self.from_2d.spec().input_dim()
    }

    pub fn d3d(&self) -> usize {
        self.from_3d.spec().input_dim()
    }
}

#[derive(Clone, Debug)]
pub struct Trained {
    pub pair: MappingPair,
    /// Mean per-pixel loss of every epoch.
    pub loss_trace: Vec<f64>,
}

/// Training pixels: every pixel valid in the 3D map, as f64 rows.
fn gather(samples: &[AlignedFeatures]) -> Result<(Array2<f64>, Array2<f64>)> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Training("no training samples".into()))?;
    let (d2, d3) = (first.e2d.dim(), first.e3d.dim());
    let mut rows2 = Vec::new();
    let mut rows3 = Vec::new();
    for s in samples {
        if s.e2d.dim() != d2 || s.e3d.dim() != d3 || s.e2d.pixels() != s.e3d.pixels() {
            return Err(Error::Training("training samples have inconsistent feature shapes".into()));
        }
        for idx in (0..s.e3d.pixels()).filter(|&i| s.e3d.valid()[i]) {
            rows2.extend(s.e2d.pixel_at(idx).iter().map(|&v| v as f64));
            rows3.extend(s.e3d.pixel_at(idx).iter().map(|&v| v as f64));
        }
    }
    let n = rows2.len() / d2;
    if n == 0 {
        return Err(Error::Training("training set has no foreground pixels".into()));
    }
    Ok((
        Array2::from_shape_vec((n, d2), rows2).expect("sized"),
        Array2::from_shape_vec((n, d3), rows3).expect("sized"),
    ))
}

fn select_rows(m: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    m.select(ndarray::Axis(0), idx)
}

/// Cosine loss gradient rows. Pixels where any term is undefined get zero
/// gradient and are flagged in `keep`.
fn loss_rows(target: ArrayView2<f64>, pred: ArrayView2<f64>, grad: &mut Array2<f64>, loss: &mut [f64], keep: &mut [bool]) {
    for (i, ((t, p), mut g)) in target
        .outer_iter()
        .zip(pred.outer_iter())
        .zip(grad.outer_iter_mut())
        .enumerate()
    {
        let g = g.as_slice_mut().expect("standard layout");
        match cosine_loss_grad(t.as_slice().expect("standard layout"), p.as_slice().expect("standard layout"), g) {
            Some(l) => loss[i] += l,
            None => keep[i] = false,
        }
    }
}

/// Trains both networks jointly. Deterministic for a fixed config and input
/// order: the pixel shuffle and initialization are seeded from `cfg.seed`.
pub fn train(samples: &[AlignedFeatures], cfg: &TrainConfig) -> Result<Trained> {
    if cfg.epochs == 0 || cfg.batch_size == 0 || !(cfg.lr > 0.0) {
        return Err(Error::Argument("epochs, batch size and learning rate must be positive".into()));
    }
    let (x2, x3) = gather(samples)?;
    let mut pair = MappingPair::init(cfg.mode, cfg.arch, x2.ncols(), x3.ncols(), cfg.seed)?;
    let mut adam_2d = AdamState::new(&pair.from_2d.tensor_sizes(), cfg.lr);
    let mut adam_3d = AdamState::new(&pair.from_3d.tensor_sizes(), cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..x2.nrows()).collect();
    let mut loss_trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut counted = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let b2 = select_rows(&x2, batch);
            let b3 = select_rows(&x3, batch);
            let t2 = pair.from_2d.forward_trace(b2.view());
            let t3 = pair.from_3d.forward_trace(b3.view());
            // target of from_2d / from_3d
            let (target_a, target_b) = match cfg.mode {
                Mode::Cross => (&b3, &b2),
                Mode::Intra => (&b2, &b3),
            };
            let mut g2 = Array2::zeros(t2.output().raw_dim());
            let mut g3 = Array2::zeros(t3.output().raw_dim());
            let mut loss = vec![0.0; batch.len()];
            let mut keep = vec![true; batch.len()];
            loss_rows(target_a.view(), t2.output().view(), &mut g2, &mut loss, &mut keep);
            loss_rows(target_b.view(), t3.output().view(), &mut g3, &mut loss, &mut keep);
            let kept = keep.iter().filter(|k| **k).count();
            if kept == 0 {
                continue;
            }
            let scale = 1.0 / kept as f64;
            for (i, k) in keep.iter().enumerate() {
                let s = if *k { scale } else { 0.0 };
                g2.row_mut(i).mapv_inplace(|v| v * s);
                g3.row_mut(i).mapv_inplace(|v| v * s);
                if *k {
                    total += loss[i];
                }
            }
            counted += kept;
            let (grads_2d, _) = pair.from_2d.backward(&t2, g2.view());
            let (grads_3d, _) = pair.from_3d.backward(&t3, g3.view());
            adam_step(&mut pair.from_2d.tensors_mut(), &grads_2d.tensors(), &mut adam_2d)?;
            adam_step(&mut pair.from_3d.tensors_mut(), &grads_3d.tensors(), &mut adam_3d)?;
        }
        if counted == 0 {
            return Err(Error::Training("every training pixel has a zero feature".into()));
        }
        let mean = total / counted as f64;
        if !mean.is_finite() {
            return Err(Error::Training(format!("loss diverged at epoch {}", epoch + 1)));
        }
        log::debug!("epoch {} loss {mean:.6}", epoch + 1);
        loss_trace.push(mean);
    }
    Ok(Trained { pair, loss_trace })
}

fn apply(net: &MappingNetwork, input: &FeatureMap, valid: &[bool]) -> FeatureMap {
    let idx: Vec<usize> = (0..input.pixels()).filter(|&i| valid[i]).collect();
    let d_in = input.dim();
    let mut rows = Vec::with_capacity(idx.len() * d_in);
    for &i in &idx {
        rows.extend(input.pixel_at(i).iter().map(|&v| v as f64));
    }
    let x = Array2::from_shape_vec((idx.len(), d_in), rows).expect("sized");
    let y = net.forward_batch(x.view());
    let mut out = FeatureMap::zeros(input.height(), input.width(), net.spec().output_dim());
    let mut buf = vec![0f32; out.dim()];
    for (row, &i) in y.outer_iter().zip(&idx) {
        for (b, v) in buf.iter_mut().zip(row) {
            *b = *v as f32;
        }
        out.set_pixel(i, &buf);
    }
    out
}

/// Applies both networks at the pixels valid in `e3d`. Returns
/// `(from_2d(e2d), from_3d(e3d))`; in cross mode that is the predicted 3D
/// map followed by the predicted 2D map.
pub fn map_features(pair: &MappingPair, e2d: &FeatureMap, e3d: &FeatureMap) -> Result<(FeatureMap, FeatureMap)> {
    if e2d.dim() != pair.d2d() || e3d.dim() != pair.d3d() {
        return Err(Error::Argument(format!(
            "feature widths {}/{} do not match the networks ({}/{})",
            e2d.dim(),
            e3d.dim(),
            pair.d2d(),
            pair.d3d()
        )));
    }
    if e2d.height() != e3d.height() || e2d.width() != e3d.width() {
        return Err(Error::Registration("2D and 3D feature maps differ in size".into()));
    }
    Ok((apply(&pair.from_2d, e2d, e3d.valid()), apply(&pair.from_3d, e3d, e3d.valid())))
}
