//! Procedural multimodal scenes: a raised board of coloured patches, each
//! with its own surface shape, resting on a flat table.
//!
//! Nominal scenes only use the palette's (colour, shape) pairings. Anomalous
//! scenes alter one or more patches: a foreign colour (`2d_only`), a foreign
//! shape (`3d_only`), or a colour and a shape that both occur in the palette
//! but never together (`multimodal_only`).

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Label, MultimodalSample, SampleInfo};
use crate::{Error, Result};

/// Surface profile of one patch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Flat,
    Bump,
    Dimple,
    Ridge,
    Tilt,
}

impl Shape {
    pub const ALL: [Shape; 5] = [Shape::Flat, Shape::Bump, Shape::Dimple, Shape::Ridge, Shape::Tilt];

    /// Height in units of the shape amplitude at patch coordinates
    /// `u, v` in `[-1, 1]`.
    fn height(self, u: f64, v: f64) -> f64 {
        let r = (u * u + v * v).sqrt().min(1.0);
        match self {
            Shape::Flat => 0.0,
            Shape::Bump => (FRAC_PI_2 * r).cos().powi(2),
            Shape::Dimple => -(FRAC_PI_2 * r).cos().powi(2),
            Shape::Ridge => (FRAC_PI_2 * u).cos().powi(2),
            Shape::Tilt => 0.5 * (u + 1.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pairing {
    pub color: [f32; 3],
    pub shape: Shape,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AnomalyKind {
    #[default]
    #[serde(rename = "none")]
    None,
    #[serde(rename = "2d_only")]
    TwoDOnly,
    #[serde(rename = "3d_only")]
    ThreeDOnly,
    #[serde(rename = "multimodal_only")]
    MultimodalOnly,
}

impl AnomalyKind {
    pub const DEFECTS: [AnomalyKind; 3] = [Self::TwoDOnly, Self::ThreeDOnly, Self::MultimodalOnly];

    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::TwoDOnly => "2d_only",
            Self::ThreeDOnly => "3d_only",
            Self::MultimodalOnly => "multimodal_only",
        }
    }
}

impl fmt::Display for AnomalyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AnomalyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Self::None, Self::TwoDOnly, Self::ThreeDOnly, Self::MultimodalOnly]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown anomaly kind '{s}'")))
    }
}

const RED: [f32; 3] = [0.85, 0.15, 0.15];
const GREEN: [f32; 3] = [0.15, 0.75, 0.2];
const YELLOW: [f32; 3] = [0.9, 0.8, 0.1];
const BLUE: [f32; 3] = [0.15, 0.25, 0.85];
const FOREIGN_COLORS: [[f32; 3]; 3] = [[0.1, 0.8, 0.8], [0.8, 0.2, 0.8], [0.95, 0.95, 0.95]];
const TABLE_COLOR: [f32; 3] = [0.2, 0.2, 0.2];

/// The default palette: warm colours only on flat patches, blue only on
/// curved ones. Colour pins down the shape family and shape pins down the
/// colour family, but not the exact member.
pub fn default_palette() -> Vec<Pairing> {
    let p = |color, shape| Pairing { color, shape };
    vec![
        p(RED, Shape::Flat),
        p(GREEN, Shape::Flat),
        p(YELLOW, Shape::Flat),
        p(BLUE, Shape::Bump),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSceneSpec {
    /// Patch rows and columns on the board.
    pub grid: (usize, usize),
    pub patch_px: usize,
    /// Table border around the board, in pixels.
    pub margin: usize,
    pub palette: Vec<Pairing>,
    pub anomaly: AnomalyKind,
    /// Number of altered patches in an anomalous scene.
    pub defect_extent: usize,
    /// Metric size of one pixel.
    pub pitch: f64,
    /// Board height above the table.
    pub board_height: f64,
    /// Peak height of the curved shapes.
    pub amplitude: f64,
    /// Per-patch colour offset, uniform in `±tint_jitter` per channel.
    pub tint_jitter: f32,
    /// Per-patch relief scale, uniform in `1 ± relief_jitter`.
    pub relief_jitter: f64,
    pub color_noise: f32,
    pub depth_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSceneSpec {
    fn default() -> Self {
        Self {
            grid: (4, 4),
            patch_px: 8,
            margin: 8,
            palette: default_palette(),
            anomaly: AnomalyKind::None,
            defect_extent: 1,
            pitch: 0.002,
            board_height: 0.015,
            amplitude: 0.006,
            tint_jitter: 0.2,
            relief_jitter: 0.3,
            color_noise: 0.02,
            depth_noise: 0.0002,
            seed: 0,
        }
    }
}

fn color_distance(a: [f32; 3], b: [f32; 3]) -> f32 {
    a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f32>().sqrt()
}

impl SyntheticSceneSpec {
    pub fn size(&self) -> (usize, usize) {
        (
            2 * self.margin + self.grid.0 * self.patch_px,
            2 * self.margin + self.grid.1 * self.patch_px,
        )
    }

    fn shapes(&self) -> Vec<Shape> {
        Shape::ALL
            .into_iter()
            .filter(|s| self.palette.iter().any(|p| p.shape == *s))
            .collect()
    }

    fn colors(&self) -> Vec<[f32; 3]> {
        let mut out: Vec<[f32; 3]> = Vec::new();
        for p in &self.palette {
            if !out.contains(&p.color) {
                out.push(p.color);
            }
        }
        out
    }

    fn foreign_colors(&self) -> Vec<[f32; 3]> {
        let own = self.colors();
        FOREIGN_COLORS
            .into_iter()
            .filter(|f| own.iter().all(|c| color_distance(*f, *c) > 0.35))
            .collect()
    }

    fn foreign_shapes(&self) -> Vec<Shape> {
        let own = self.shapes();
        Shape::ALL.into_iter().filter(|s| !own.contains(s)).collect()
    }

    /// Colour/shape combinations built from palette components that never
    /// appear together.
    pub fn cross_pairings(&self) -> Vec<Pairing> {
        let mut out = Vec::new();
        for color in self.colors() {
            for shape in self.shapes() {
                if !self.palette.iter().any(|p| p.color == color && p.shape == shape) {
                    out.push(Pairing { color, shape });
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let (h, w) = self.grid;
        if h == 0 || w == 0 || self.patch_px < 2 {
            return Err(Error::Argument("board needs at least one patch of 2x2 pixels".into()));
        }
        if self.palette.is_empty() {
            return Err(Error::Argument("palette is empty".into()));
        }
        if self.palette.iter().flat_map(|p| p.color).any(|c| !(0.0..=1.0).contains(&c)) {
            return Err(Error::Argument("palette colours must lie in [0, 1]".into()));
        }
        if !(self.pitch > 0.0 && self.board_height > 0.0 && self.amplitude >= 0.0) {
            return Err(Error::Argument("pitch and board height must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.tint_jitter) || !(0.0..1.0).contains(&self.relief_jitter) {
            return Err(Error::Argument("jitter must lie in [0, 1)".into()));
        }
        let (ih, iw) = self.size();
        let board = h * w * self.patch_px * self.patch_px;
        if ih * iw - board <= board {
            return Err(Error::Argument(
                "the table must cover more pixels than the board or the background plane is ambiguous".into(),
            ));
        }
        if self.anomaly != AnomalyKind::None && !(1..=h * w).contains(&self.defect_extent) {
            return Err(Error::Argument(format!("defect extent must be in 1..={}", h * w)));
        }
        match self.anomaly {
            AnomalyKind::MultimodalOnly if self.palette.len() < 2 || self.cross_pairings().is_empty() => Err(
                Error::Argument("multimodal anomalies need two pairings that can be crossed".into()),
            ),
            AnomalyKind::TwoDOnly if self.foreign_colors().is_empty() => {
                Err(Error::Argument("palette leaves no foreign colour".into()))
            }
            AnomalyKind::ThreeDOnly if self.foreign_shapes().is_empty() => {
                Err(Error::Argument("palette leaves no foreign shape".into()))
            }
            _ => Ok(()),
        }
    }
}

fn quantize(v: f32) -> f32 {
    (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
}

/// Renders a scene. Colours are quantized to 8 bits so a PNG round trip is
/// lossless.
pub fn generate_scene(spec: &SyntheticSceneSpec, info: SampleInfo) -> Result<MultimodalSample> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (gh, gw) = spec.grid;
    let mut layout: Vec<Pairing> = (0..gh * gw)
        .map(|_| *spec.palette.choose(&mut rng).expect("palette is not empty"))
        .collect();

    let mut altered: Vec<usize> = Vec::new();
    if spec.anomaly != AnomalyKind::None {
        let mut idx: Vec<usize> = (0..gh * gw).collect();
        idx.shuffle(&mut rng);
        altered = idx[..spec.defect_extent].to_vec();
        for &k in &altered {
            layout[k] = match spec.anomaly {
                AnomalyKind::TwoDOnly => Pairing {
                    color: *spec.foreign_colors().choose(&mut rng).unwrap(),
                    shape: layout[k].shape,
                },
                AnomalyKind::ThreeDOnly => Pairing {
                    color: layout[k].color,
                    shape: *spec.foreign_shapes().choose(&mut rng).unwrap(),
                },
                AnomalyKind::MultimodalOnly => *spec.cross_pairings().choose(&mut rng).unwrap(),
                AnomalyKind::None => unreachable!(),
            };
        }
    }

    let tint: Vec<[f32; 3]> = (0..gh * gw)
        .map(|_| [(); 3].map(|_| spec.tint_jitter * (2.0 * rng.random::<f32>() - 1.0)))
        .collect();
    let relief: Vec<f64> = (0..gh * gw)
        .map(|_| 1.0 + spec.relief_jitter * (2.0 * rng.random::<f64>() - 1.0))
        .collect();

    let (h, w) = spec.size();
    let color_noise = Normal::new(0.0, spec.color_noise.max(0.0)).map_err(|e| Error::Argument(e.to_string()))?;
    let depth_noise = Normal::new(0.0, spec.depth_noise.max(0.0)).map_err(|e| Error::Argument(e.to_string()))?;
    let mut rgb = Vec::with_capacity(h * w * 3);
    let mut xyz = Vec::with_capacity(h * w * 3);
    let mut gt = vec![false; h * w];
    let table_z = 0.4;
    for r in 0..h {
        for c in 0..w {
            let x = (c as f64 + 0.5 - w as f64 / 2.0) * spec.pitch;
            let y = (r as f64 + 0.5 - h as f64 / 2.0) * spec.pitch;
            let on_board = (spec.margin..spec.margin + gh * spec.patch_px).contains(&r)
                && (spec.margin..spec.margin + gw * spec.patch_px).contains(&c);
            let (color, z) = if on_board {
                let (pr, pc) = ((r - spec.margin) / spec.patch_px, (c - spec.margin) / spec.patch_px);
                let k = pr * gw + pc;
                let half = spec.patch_px as f64 / 2.0;
                let u = ((c - spec.margin) % spec.patch_px) as f64 + 0.5 - half;
                let v = ((r - spec.margin) % spec.patch_px) as f64 + 0.5 - half;
                let height = spec.board_height + spec.amplitude * relief[k] * layout[k].shape.height(u / half, v / half);
                gt[r * w + c] = altered.contains(&k);
                let color = [0, 1, 2].map(|i| layout[k].color[i] + tint[k][i]);
                (color, table_z - height)
            } else {
                (TABLE_COLOR, table_z)
            };
            for ch in color {
                rgb.push(quantize(ch + color_noise.sample(&mut rng)));
            }
            xyz.extend([x as f32, y as f32, (z + depth_noise.sample(&mut rng)) as f32]);
        }
    }
    let info = SampleInfo {
        label: if altered.is_empty() { Label::Nominal } else { Label::Anomalous },
        ..info
    };
    let gt = (spec.anomaly != AnomalyKind::None || info.split == "test").then_some(gt);
    MultimodalSample::new(info, h, w, rgb, xyz, gt)
}

/// Patch-level pairing sampled for every board cell, used by tests.
#[cfg(test)]
fn patch_color(sample: &MultimodalSample, spec: &SyntheticSceneSpec, k: usize) -> [f32; 3] {
    let gw = spec.grid.1;
    let r = spec.margin + (k / gw) * spec.patch_px + spec.patch_px / 2;
    let c = spec.margin + (k % gw) * spec.patch_px + spec.patch_px / 2;
    sample.rgb_at(r, c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn info() -> SampleInfo {
        SampleInfo::new("s", "synthetic", "test", Label::Nominal)
    }

    fn spec(anomaly: AnomalyKind, seed: u64) -> SyntheticSceneSpec {
        SyntheticSceneSpec {
            anomaly,
            seed,
            ..SyntheticSceneSpec::default()
        }
    }

    #[test]
    fn nominal_scene_has_empty_mask() {
        let s = generate_scene(&spec(AnomalyKind::None, 1), info()).unwrap();
        assert_eq!((s.height(), s.width()), (48, 48));
        assert_eq!(s.label(), Label::Nominal);
        assert!(s.gt_mask().unwrap().iter().all(|g| !g));
        assert_eq!(s.valid_count(), 48 * 48);
    }

    #[test]
    fn deterministic() {
        for kind in AnomalyKind::DEFECTS {
            let a = generate_scene(&spec(kind, 7), info()).unwrap();
            let b = generate_scene(&spec(kind, 7), info()).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn defect_marks_one_patch() {
        for kind in AnomalyKind::DEFECTS {
            let s = generate_scene(&spec(kind, 3), info()).unwrap();
            assert_eq!(s.label(), Label::Anomalous);
            assert_eq!(s.gt_mask().unwrap().iter().filter(|g| **g).count(), 64);
        }
    }

    #[test]
    fn two_pairing_multimodal_swap() {
        let s = SyntheticSceneSpec {
            palette: vec![
                Pairing { color: RED, shape: Shape::Flat },
                Pairing { color: BLUE, shape: Shape::Bump },
            ],
            anomaly: AnomalyKind::MultimodalOnly,
            color_noise: 0.0,
            tint_jitter: 0.0,
            ..SyntheticSceneSpec::default()
        };
        let cross = s.cross_pairings();
        assert_eq!(cross.len(), 2);
        assert!(cross.contains(&Pairing { color: RED, shape: Shape::Bump }));
        for seed in 0..8 {
            let scene = generate_scene(&SyntheticSceneSpec { seed, ..s.clone() }, info()).unwrap();
            let gt = scene.gt_mask().unwrap();
            let k = (0..16)
                .find(|&k| {
                    let r = s.margin + (k / 4) * 8;
                    let c = s.margin + (k % 4) * 8;
                    gt[r * 48 + c]
                })
                .unwrap();
            let color = patch_color(&scene, &s, k);
            assert!(cross.iter().any(|p| color_distance(p.color, color) < 0.01));
        }
    }

    #[test]
    fn invalid_specs() {
        let single = SyntheticSceneSpec {
            palette: vec![Pairing { color: RED, shape: Shape::Flat }],
            anomaly: AnomalyKind::MultimodalOnly,
            ..SyntheticSceneSpec::default()
        };
        assert!(generate_scene(&single, info()).is_err());
        let empty = SyntheticSceneSpec {
            grid: (0, 4),
            ..SyntheticSceneSpec::default()
        };
        assert!(generate_scene(&empty, info()).is_err());
        assert!("bogus".parse::<AnomalyKind>().is_err());
        assert_eq!("3d_only".parse::<AnomalyKind>().unwrap(), AnomalyKind::ThreeDOnly);
    }

    #[test]
    fn board_sits_above_the_table() {
        let s = generate_scene(&spec(AnomalyKind::None, 2), info()).unwrap();
        let z = |r: usize, c: usize| s.xyz()[(r * 48 + c) * 3 + 2];
        assert!((z(0, 0) - 0.4).abs() < 0.002);
        assert!(z(0, 0) - z(20, 20) > 0.005);
    }
}

