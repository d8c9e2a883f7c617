//! The run configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{Geometry, SynthSpec};
use crate::error::{Error, Result};
use crate::modality::InvariantParams;
use crate::trainer::TrainConfig;

/// Where samples come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSpec {
    /// Generated on the fly.
    Synthetic(SynthSpec),
    /// A `root/<class>/<image>` tree.
    Images {
        root: PathBuf,
        #[serde(default)]
        geometry: Geometry,
    },
    /// A dump written by the `synth` command.
    Dump { path: PathBuf },
}

impl Default for SourceSpec {
    fn default() -> Self {
        SourceSpec::Synthetic(SynthSpec::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_per_class: usize,
    pub repeats: usize,
    /// Fraction of training entries receiving `±1` spikes after the split
    /// (sample matrices only; images use occlusion instead).
    pub train_corruption: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_per_class: 10,
            repeats: 10,
            train_corruption: 0.0,
        }
    }
}

/// Block occlusion of training images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcclusionSpec {
    pub fraction: f64,
    /// Directory of occluder images; the built-in textures when absent.
    #[serde(default)]
    pub patches: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub folds: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            alpha: vec![0.0, 0.01, 0.1],
            beta: vec![0.1, 0.5],
            lambda: vec![0.3, 1.0],
            folds: 5,
        }
    }
}

impl GridSpec {
    pub fn points(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for &a in &self.alpha {
            for &b in &self.beta {
                for &l in &self.lambda {
                    out.push((a, b, l));
                }
            }
        }
        out
    }
}

/// Everything a command needs. Serialized next to every run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub source: SourceSpec,
    pub invariant: InvariantParams,
    pub train: TrainConfig,
    pub split: SplitSpec,
    pub occlusion: Option<OcclusionSpec>,
    pub grid: GridSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("mmsldl-out"),
            source: SourceSpec::default(),
            invariant: InvariantParams::default(),
            train: TrainConfig::default(),
            split: SplitSpec::default(),
            occlusion: None,
            grid: GridSpec::default(),
        }
    }
}

pub const CONFIG_FILE: &str = "config.toml";

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::InvalidConfig(format!("config file {} not found", path.display())),
            _ => Error::Io(e),
        })?;
        Self::from_toml(&text)
    }

    /// Writes the effective config into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(CONFIG_FILE), self.to_toml()?)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.train.hyper.validate().map_err(|e| Error::InvalidConfig(e.to_string()))?;
        if !(self.train.ridge_lambda > 0.0) {
            return Err(Error::InvalidConfig("ridge_lambda must be positive".into()));
        }
        if self.split.train_per_class == 0 {
            return Err(Error::InvalidConfig("train_per_class must be at least 1".into()));
        }
        if self.split.repeats == 0 {
            return Err(Error::InvalidConfig("repeats must be at least 1".into()));
        }
        if !(0.0..=0.5).contains(&self.split.train_corruption) {
            return Err(Error::InvalidConfig("train_corruption must lie in [0, 0.5]".into()));
        }
        if let Some(o) = &self.occlusion {
            if !crate::data::occlusion::FRACTION_RANGE.contains(&o.fraction) {
                return Err(Error::InvalidConfig(format!(
                    "occlusion fraction must lie in [0.05, 0.95], got {}",
                    o.fraction
                )));
            }
            if !matches!(self.source, SourceSpec::Images { .. }) {
                return Err(Error::InvalidConfig("occlusion applies to image datasets only".into()));
            }
        }
        if self.grid.folds < 2 {
            return Err(Error::InvalidConfig("grid search needs at least 2 folds".into()));
        }
        Ok(())
    }
}
