//! Run configuration: flat `key = value` TOML files and command-line
//! overrides layered over a preset.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::anomaly::{AggregationKind, ScoreConfig};
use crate::features::{ExtractorConfig, ExtractorKind};
use crate::mapping::{Arch, Mode, TrainConfig};
use crate::preprocess::SmoothingKind;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Full-size settings for exported backbone features.
    #[default]
    Paper,
    /// Small toy-extractor settings for the synthetic benchmark.
    Desk,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Preset::Paper),
            "desk" => Ok(Preset::Desk),
            _ => Err(Error::Config(format!("unknown preset '{s}' (expected paper or desk)"))),
        }
    }
}

/// Every settable key. Unset keys keep the preset value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub preset: Option<Preset>,
    pub manifest: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub checkpoints: Option<PathBuf>,
    pub categories: Option<Vec<String>>,
    pub extractor: Option<ExtractorKind>,
    pub features_dir: Option<PathBuf>,
    pub layer: Option<usize>,
    pub depth: Option<usize>,
    pub d2d: Option<usize>,
    pub d3d: Option<usize>,
    pub grid: Option<usize>,
    pub groups: Option<usize>,
    pub group_size: Option<usize>,
    pub ransac_threshold: Option<f64>,
    pub ransac_iterations: Option<usize>,
    pub smoothing: Option<SmoothingKind>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub mode: Option<Mode>,
    pub arch: Option<Arch>,
    pub aggregation: Option<AggregationKind>,
    pub sigma: Option<f64>,
    pub background_score: Option<f64>,
    pub few_shot: Option<usize>,
    pub seed: Option<u64>,
    pub export_maps: Option<bool>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($field:ident),*) => {
        $(if $top.$field.is_some() { $base.$field = $top.$field; })*
    };
}

impl ConfigFile {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: ConfigFile = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        // Paths in a file are relative to the file.
        let dir = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.manifest, &mut cfg.output, &mut cfg.checkpoints, &mut cfg.features_dir]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }

    /// Keys set in `top` replace those in `self`.
    pub fn overlay(mut self, top: ConfigFile) -> Self {
        overlay!(self, top; preset, manifest, output, checkpoints, categories, extractor, features_dir,
            layer, depth, d2d, d3d, grid, groups, group_size, ransac_threshold, ransac_iterations,
            smoothing, epochs, lr, batch_size, mode, arch, aggregation, sigma, background_score,
            few_shot, seed, export_maps);
        self
    }

    pub fn resolve(self) -> Result<RunConfig> {
        let preset = self.preset.unwrap_or_default();
        let mut extractor = match preset {
            Preset::Paper => ExtractorConfig::default(),
            Preset::Desk => ExtractorConfig::desk_scale(),
        };
        let mut train = TrainConfig::default();
        if preset == Preset::Desk {
            train.epochs = 100;
        }
        let mut score = ScoreConfig::default();
        let seed = self.seed.unwrap_or(0);

        macro_rules! set {
            ($dst:expr, $src:expr) => {
                if let Some(v) = $src {
                    $dst = v;
                }
            };
        }
        set!(extractor.kind, self.extractor);
        extractor.features_dir = self.features_dir.or(extractor.features_dir);
        set!(extractor.layer, self.layer);
        set!(extractor.depth, self.depth);
        set!(extractor.d2d, self.d2d);
        set!(extractor.d3d, self.d3d);
        if let Some(g) = self.grid {
            extractor.grid = (g, g);
        }
        set!(extractor.groups, self.groups);
        set!(extractor.group_size, self.group_size);
        set!(extractor.ransac_threshold, self.ransac_threshold);
        set!(extractor.ransac_iterations, self.ransac_iterations);
        set!(extractor.smoothing, self.smoothing);
        extractor.seed = seed;
        set!(train.epochs, self.epochs);
        set!(train.lr, self.lr);
        set!(train.batch_size, self.batch_size);
        set!(train.mode, self.mode);
        set!(train.arch, self.arch);
        train.seed = seed;
        set!(score.aggregation, self.aggregation);
        set!(score.sigma, self.sigma);
        set!(score.background_score, self.background_score);

        let output = self.output.unwrap_or_else(|| PathBuf::from("out"));
        let cfg = RunConfig {
            manifest: self.manifest,
            checkpoints: self.checkpoints.unwrap_or_else(|| output.clone()),
            output,
            categories: self.categories.unwrap_or_default(),
            extractor,
            train,
            score,
            few_shot: self.few_shot,
            seed,
            export_maps: self.export_maps.unwrap_or(false),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Fully resolved settings of a train/eval/infer/bench run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub output: PathBuf,
    /// Directory holding `<category>/mapping.cfmm`.
    pub checkpoints: PathBuf,
    /// Empty selects every category in the manifest.
    pub categories: Vec<String>,
    pub extractor: ExtractorConfig,
    pub train: TrainConfig,
    pub score: ScoreConfig,
    pub few_shot: Option<usize>,
    pub seed: u64,
    pub export_maps: bool,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.extractor.validate()?;
        if self.few_shot == Some(0) {
            return Err(Error::Config("few-shot size must be at least 1".into()));
        }
        if !(self.score.sigma > 0.0 && self.score.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be positive, got {}", self.score.sigma)));
        }
        if !self.score.background_score.is_finite() || self.score.background_score < 0.0 {
            return Err(Error::Config("background score must be finite and non-negative".into()));
        }
        if self.train.epochs == 0 || self.train.batch_size == 0 || !(self.train.lr > 0.0) {
            return Err(Error::Config("epochs, batch size and learning rate must be positive".into()));
        }
        Ok(())
    }

    pub fn manifest_path(&self) -> Result<&Path> {
        self.manifest
            .as_deref()
            .ok_or_else(|| Error::Config("no manifest given (set `manifest` or pass --manifest)".into()))
    }

    pub fn checkpoint_path(&self, category: &str) -> PathBuf {
        self.checkpoints.join(category).join("mapping.cfmm")
    }
}
