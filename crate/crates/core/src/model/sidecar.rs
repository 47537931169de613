//! Plan sidecar: `key=value` lines recording how a checkpoint's model was built.

use std::path::{Path, PathBuf};

use super::scaling::{plan_scaling, ScalingConfig, ScalingPlan};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PlanSidecar {
    pub phi: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub base_depth: usize,
    pub base_width: usize,
    pub base_resolution: usize,
    pub seed: u64,
}

impl PlanSidecar {
    pub fn new(plan: &ScalingPlan, seed: u64) -> Self {
        PlanSidecar {
            phi: plan.phi,
            alpha: plan.alpha,
            beta: plan.beta,
            gamma: plan.gamma,
            base_depth: plan.base_depth,
            base_width: plan.base_width,
            base_resolution: plan.base_resolution,
            seed,
        }
    }

    pub fn to_text(&self) -> String {
        format!(
            "phi={}\nalpha={}\nbeta={}\ngamma={}\nbase_depth={}\nbase_width={}\nbase_resolution={}\nseed={}\n",
            self.phi, self.alpha, self.beta, self.gamma, self.base_depth, self.base_width, self.base_resolution, self.seed
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut out = PlanSidecar {
            phi: f64::NAN,
            alpha: f64::NAN,
            beta: f64::NAN,
            gamma: f64::NAN,
            base_depth: 0,
            base_width: 0,
            base_resolution: 0,
            seed: 0,
        };
        let mut seen = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::format("plan sidecar", format!("expected key=value, got {line:?}")))?;
            let bad = || Error::format("plan sidecar", format!("bad value for {key}: {value:?}"));
            match key {
                "phi" => out.phi = value.parse().map_err(|_| bad())?,
                "alpha" => out.alpha = value.parse().map_err(|_| bad())?,
                "beta" => out.beta = value.parse().map_err(|_| bad())?,
                "gamma" => out.gamma = value.parse().map_err(|_| bad())?,
                "base_depth" => out.base_depth = value.parse().map_err(|_| bad())?,
                "base_width" => out.base_width = value.parse().map_err(|_| bad())?,
                "base_resolution" => out.base_resolution = value.parse().map_err(|_| bad())?,
                "seed" => out.seed = value.parse().map_err(|_| bad())?,
                other => return Err(Error::format("plan sidecar", format!("unknown key {other}"))),
            }
            seen.push(key.to_string());
        }
        for key in ["phi", "alpha", "beta", "gamma", "base_depth", "base_width", "base_resolution", "seed"] {
            if !seen.iter().any(|k| k == key) {
                return Err(Error::format("plan sidecar", format!("missing key {key}")));
            }
        }
        Ok(out)
    }

    /// Rebuild the plan. The constraint was enforced when the model was
    /// trained, so it is not re-checked here.
    pub fn plan(&self) -> Result<ScalingPlan> {
        plan_scaling(&ScalingConfig {
            phi: self.phi,
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            base_depth: self.base_depth,
            base_width: self.base_width,
            base_resolution: self.base_resolution,
            tolerance: f64::INFINITY,
        })
    }
}

pub fn sidecar_path(checkpoint: &Path) -> PathBuf {
    let mut name = checkpoint.as_os_str().to_owned();
    name.push(".plan");
    PathBuf::from(name)
}

pub fn write_plan_sidecar(checkpoint: &Path, sidecar: &PlanSidecar) -> Result<()> {
    let path = sidecar_path(checkpoint);
    std::fs::write(&path, sidecar.to_text()).map_err(|e| Error::io(path, e))
}

pub fn read_plan_sidecar(checkpoint: &Path) -> Result<PlanSidecar> {
    let path = sidecar_path(checkpoint);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(path, e))?;
    PlanSidecar::parse(&text)
}
