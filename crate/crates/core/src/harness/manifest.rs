//! JSON dataset manifests and conversion of MVTec-style directory trees.
//!
//! Layout: `<root>/<category>/<split>/<defect>/{rgb,xyz,gt}/<stem>.{png,cfmx,png}`.
//! Sample ids are `<defect>_<stem>`; the `good` defect marks nominal samples.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::benchmark::{generate_benchmark, BenchmarkSpec};
use super::LabeledSample;
use crate::data::{load_sample, write_mask_png, write_rgb_png, write_xyz_file, Label, SampleInfo, XyzRaster};
use crate::{Error, Result};

pub const NOMINAL_DEFECT: &str = "good";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub category: String,
    pub split: String,
    pub id: String,
    pub rgb: PathBuf,
    pub xyz: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt: Option<PathBuf>,
    pub label: Label,
    pub defect: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    /// Base of the relative sample paths; itself relative to the manifest
    /// file when not absolute.
    pub root: PathBuf,
    pub samples: Vec<ManifestEntry>,
    #[serde(skip)]
    base: PathBuf,
}

impl Manifest {
    pub fn new(root: impl Into<PathBuf>, samples: Vec<ManifestEntry>) -> Self {
        let root = root.into();
        Self {
            base: root.clone(),
            root,
            samples,
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: Manifest =
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        m.base = path.parent().unwrap_or(Path::new("")).join(&m.root);
        Ok(m)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let text = serde_json::to_string_pretty(self).expect("plain data serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Sorted distinct categories.
    pub fn categories(&self) -> Vec<String> {
        let mut c: Vec<String> = self.samples.iter().map(|s| s.category.clone()).collect();
        c.sort();
        c.dedup();
        c
    }

    pub fn select(&self, category: &str, split: &str) -> Vec<&ManifestEntry> {
        self.samples
            .iter()
            .filter(|s| s.category == category && s.split == split)
            .collect()
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base.join(p)
    }

    pub fn load(&self, entry: &ManifestEntry) -> Result<LabeledSample> {
        let info = SampleInfo::new(entry.id.clone(), entry.category.clone(), entry.split.clone(), entry.label);
        let gt = entry.gt.as_ref().map(|g| self.resolve(g));
        let sample = load_sample(info, self.resolve(&entry.rgb), self.resolve(&entry.xyz), gt.as_deref())?;
        Ok(LabeledSample {
            sample,
            defect: entry.defect.clone(),
        })
    }

    pub fn load_all(&self, entries: &[&ManifestEntry]) -> Result<Vec<LabeledSample>> {
        entries.par_iter().map(|e| self.load(e)).collect()
    }
}

fn sorted_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if entry.file_type().map_err(|e| Error::io(entry.path(), e))?.is_dir() {
            out.push(entry.path());
        }
    }
    out.sort();
    Ok(out)
}

fn name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Builds a manifest from an MVTec-style tree. Coordinate rasters must
/// already be CFMX files (the exporter transcodes the TIFFs).
pub fn convert(dataset_dir: impl AsRef<Path>, out_dir: impl AsRef<Path>) -> Result<Manifest> {
    let root = dataset_dir.as_ref();
    if !root.is_dir() {
        return Err(Error::Format(format!("{} is not a directory", root.display())));
    }
    let root = root.canonicalize().map_err(|e| Error::io(root, e))?;
    let mut samples = Vec::new();
    for cat in sorted_dirs(&root)? {
        for split in sorted_dirs(&cat)? {
            for defect in sorted_dirs(&split)? {
                let rgb_dir = defect.join("rgb");
                if !rgb_dir.is_dir() {
                    return Err(Error::Format(format!("{} has no rgb directory", defect.display())));
                }
                let mut rgbs: Vec<PathBuf> = fs::read_dir(&rgb_dir)
                    .map_err(|e| Error::io(&rgb_dir, e))?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
                    .collect();
                rgbs.sort();
                let defect_name = name(&defect);
                let label = if defect_name == NOMINAL_DEFECT { Label::Nominal } else { Label::Anomalous };
                for rgb in rgbs {
                    let stem = rgb.file_stem().unwrap().to_string_lossy().into_owned();
                    let xyz = defect.join("xyz").join(format!("{stem}.cfmx"));
                    if !xyz.is_file() {
                        return Err(Error::Format(format!(
                            "{} is missing; transcode the xyz TIFFs to CFMX first",
                            xyz.display()
                        )));
                    }
                    let gt = defect.join("gt").join(format!("{stem}.png"));
                    let gt = gt.is_file().then_some(gt);
                    if label == Label::Anomalous && gt.is_none() {
                        return Err(Error::Format(format!("{} has no ground-truth mask", rgb.display())));
                    }
                    let rel = |p: &Path| p.strip_prefix(&root).expect("under root").to_path_buf();
                    samples.push(ManifestEntry {
                        category: name(&cat),
                        split: name(&split),
                        id: format!("{defect_name}_{stem}"),
                        rgb: rel(&rgb),
                        xyz: rel(&xyz),
                        gt: gt.as_deref().map(rel),
                        label,
                        defect: defect_name.clone(),
                    });
                }
            }
        }
    }
    if samples.is_empty() {
        return Err(Error::Format(format!("no samples found under {}", root.display())));
    }
    let manifest = Manifest::new(root, samples);
    manifest.write(out_dir.as_ref().join("manifest.json"))?;
    Ok(manifest)
}

/// Writes a synthetic benchmark as an MVTec-style tree under `out_dir` plus
/// `manifest.json`.
pub fn write_benchmark(spec: &BenchmarkSpec, out_dir: impl AsRef<Path>) -> Result<Manifest> {
    let out = out_dir.as_ref();
    let (train, test) = generate_benchmark(spec)?;
    let all: Vec<&LabeledSample> = train.iter().chain(&test).collect();
    let entries = all
        .par_iter()
        .map(|s| {
            let info = s.sample.info();
            let stem = info.id.rsplit('_').next().unwrap_or(&info.id).to_string();
            let dir = PathBuf::from(&info.category).join(&info.split).join(&s.defect);
            let rgb = dir.join("rgb").join(format!("{stem}.png"));
            let xyz = dir.join("xyz").join(format!("{stem}.cfmx"));
            let gt = dir.join("gt").join(format!("{stem}.png"));
            for sub in ["rgb", "xyz", "gt"] {
                let d = out.join(&dir).join(sub);
                fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
            }
            let (h, w) = (s.sample.height(), s.sample.width());
            write_rgb_png(out.join(&rgb), h, w, s.sample.rgb())?;
            write_xyz_file(
                &XyzRaster {
                    height: h,
                    width: w,
                    data: s.sample.xyz().to_vec(),
                },
                out.join(&xyz),
            )?;
            let gt = match s.sample.gt_mask() {
                Some(mask) => {
                    write_mask_png(out.join(&gt), h, w, mask)?;
                    Some(gt)
                }
                None => None,
            };
            Ok(ManifestEntry {
                category: info.category.clone(),
                split: info.split.clone(),
                id: info.id.clone(),
                rgb,
                xyz,
                gt,
                label: s.sample.label(),
                defect: s.defect.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut manifest = Manifest::new(".", entries);
    manifest.base = out.to_path_buf();
    manifest.write(out.join("manifest.json"))?;
    Ok(manifest)
}
