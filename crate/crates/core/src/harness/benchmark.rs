use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::synthetic::{generate_scene, AnomalyKind, SyntheticSceneSpec};
use super::LabeledSample;
use crate::data::{Label, SampleInfo};
use crate::Result;

/// Train/test split of synthetic scenes for one category.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkSpec {
    pub category: String,
    pub scene: SyntheticSceneSpec,
    pub train: usize,
    /// Test scenes per kind, nominal included.
    pub test_per_kind: usize,
    pub seed: u64,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            category: "synthetic".into(),
            scene: SyntheticSceneSpec::default(),
            train: 40,
            test_per_kind: 20,
            seed: 0,
        }
    }
}

/// Defect directory name of a scene kind; nominal scenes are `good`.
pub fn defect_name(kind: AnomalyKind) -> &'static str {
    match kind {
        AnomalyKind::None => "good",
        k => k.name(),
    }
}

pub fn generate_benchmark(spec: &BenchmarkSpec) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let scene = |kind: AnomalyKind, split: &str, index: usize, rng: &mut ChaCha8Rng| {
        let scene_spec = SyntheticSceneSpec {
            anomaly: kind,
            seed: rng.random(),
            ..spec.scene.clone()
        };
        let defect = defect_name(kind);
        let info = SampleInfo::new(format!("{defect}_{index:03}"), spec.category.clone(), split, Label::Nominal);
        generate_scene(&scene_spec, info).map(|sample| LabeledSample {
            sample,
            defect: defect.to_string(),
        })
    };
    let train = (0..spec.train)
        .map(|i| scene(AnomalyKind::None, "train", i, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let mut test = Vec::new();
    for kind in [AnomalyKind::None].into_iter().chain(AnomalyKind::DEFECTS) {
        for i in 0..spec.test_per_kind {
            test.push(scene(kind, "test", i, &mut rng)?);
        }
    }
    Ok((train, test))
}
