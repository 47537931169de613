//! Flat `key=value` run configuration. Blank lines and lines starting with
//! `#` are ignored; unknown or repeated keys are errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::data::{DEFAULT_BONAFIDE, DEFAULT_MORPHED};
use crate::error::{Error, Result};
use crate::explain::DEFAULT_WEIGHTS;
use crate::model::{ScalingConfig, TrainOptions};
use crate::viz::DEFAULT_OVERLAY_ALPHA;

pub const KEYS: [&str; 20] = [
    "phi",
    "alpha",
    "beta",
    "gamma",
    "tau",
    "base_depth",
    "base_width",
    "base_resolution",
    "epochs",
    "batch_size",
    "learning_rate",
    "seed",
    "n_bonafide",
    "n_morphed",
    "split_ratio",
    "ensemble_weights",
    "overlay_alpha",
    "corpus_dir",
    "checkpoint",
    "output_dir",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scaling: ScalingConfig,
    pub training: TrainOptions,
    pub n_bonafide: usize,
    pub n_morphed: usize,
    /// Fraction of each class assigned to the training split.
    pub split_ratio: f64,
    /// Saliency, CAM, Grad-CAM.
    pub ensemble_weights: [f64; 3],
    pub overlay_alpha: f64,
    pub corpus_dir: String,
    pub checkpoint: String,
    pub output_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scaling: ScalingConfig::default(),
            training: TrainOptions::default(),
            n_bonafide: DEFAULT_BONAFIDE,
            n_morphed: DEFAULT_MORPHED,
            split_ratio: 0.8,
            ensemble_weights: DEFAULT_WEIGHTS,
            overlay_alpha: DEFAULT_OVERLAY_ALPHA,
            corpus_dir: "corpus".into(),
            checkpoint: "model.ckpt".into(),
            output_dir: "out".into(),
        }
    }
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn real(key: &str, value: &str) -> Result<f64> {
    let v: f64 = number(key, value)?;
    if !v.is_finite() {
        return Err(Error::Config(format!("{key}: value must be finite, got {value:?}")));
    }
    Ok(v)
}

fn path_value(key: &str, value: &str) -> Result<String> {
    if value.is_empty() || value.trim() != value || value.contains(['\n', '\r']) {
        return Err(Error::Config(format!("{key}: path must be non-empty without surrounding whitespace")));
    }
    Ok(value.to_string())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = RunConfig::default();
        let mut seen = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got {line:?}", n + 1)))?;
            let key = key.trim();
            if seen.contains(&key) {
                return Err(Error::Config(format!("line {}: duplicate key {key:?}", n + 1)));
            }
            seen.push(key);
            config.set(key, value.trim())?;
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "phi" => self.scaling.phi = real(key, value)?,
            "alpha" => self.scaling.alpha = real(key, value)?,
            "beta" => self.scaling.beta = real(key, value)?,
            "gamma" => self.scaling.gamma = real(key, value)?,
            "tau" => self.scaling.tolerance = real(key, value)?,
            "base_depth" => self.scaling.base_depth = number(key, value)?,
            "base_width" => self.scaling.base_width = number(key, value)?,
            "base_resolution" => self.scaling.base_resolution = number(key, value)?,
            "epochs" => self.training.epochs = number(key, value)?,
            "batch_size" => self.training.batch_size = number(key, value)?,
            "learning_rate" => self.training.learning_rate = real(key, value)?,
            "seed" => self.training.seed = number(key, value)?,
            "n_bonafide" => self.n_bonafide = number(key, value)?,
            "n_morphed" => self.n_morphed = number(key, value)?,
            "split_ratio" => self.split_ratio = real(key, value)?,
            "ensemble_weights" => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                let [s, c, g] = parts[..] else {
                    return Err(Error::Config(format!("{key}: expected three comma-separated weights, got {value:?}")));
                };
                self.ensemble_weights = [real(key, s)?, real(key, c)?, real(key, g)?];
            }
            "overlay_alpha" => self.overlay_alpha = real(key, value)?,
            "corpus_dir" => self.corpus_dir = path_value(key, value)?,
            "checkpoint" => self.checkpoint = path_value(key, value)?,
            "output_dir" => self.output_dir = path_value(key, value)?,
            other => return Err(Error::Config(format!("unknown key {other:?} (known: {})", KEYS.join(", ")))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let s = &self.scaling;
        let t = &self.training;
        Some(match key {
            "phi" => s.phi.to_string(),
            "alpha" => s.alpha.to_string(),
            "beta" => s.beta.to_string(),
            "gamma" => s.gamma.to_string(),
            "tau" => s.tolerance.to_string(),
            "base_depth" => s.base_depth.to_string(),
            "base_width" => s.base_width.to_string(),
            "base_resolution" => s.base_resolution.to_string(),
            "epochs" => t.epochs.to_string(),
            "batch_size" => t.batch_size.to_string(),
            "learning_rate" => t.learning_rate.to_string(),
            "seed" => t.seed.to_string(),
            "n_bonafide" => self.n_bonafide.to_string(),
            "n_morphed" => self.n_morphed.to_string(),
            "split_ratio" => self.split_ratio.to_string(),
            "ensemble_weights" => {
                let [a, b, c] = self.ensemble_weights;
                format!("{a},{b},{c}")
            }
            "overlay_alpha" => self.overlay_alpha.to_string(),
            "corpus_dir" => self.corpus_dir.clone(),
            "checkpoint" => self.checkpoint.clone(),
            "output_dir" => self.output_dir.clone(),
            _ => return None,
        })
    }

    /// Canonical text: every key in [`KEYS`] order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let value = self.get(key).expect("every key has a value");
            writeln!(out, "{key}={value}").expect("writing to a String");
        }
        out
    }

    pub fn corpus_path(&self) -> PathBuf {
        PathBuf::from(&self.corpus_dir)
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        PathBuf::from(&self.checkpoint)
    }

    pub fn output_path(&self) -> PathBuf {
        PathBuf::from(&self.output_dir)
    }
}
