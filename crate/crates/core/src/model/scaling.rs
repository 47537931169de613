use crate::error::{Error, Result};

/// Inputs to the compound-scaling planner.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingConfig {
    pub phi: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub base_depth: usize,
    pub base_width: usize,
    pub base_resolution: usize,
    /// Accepted half-width around 2 for `alpha * beta^2 * gamma^2`.
    pub tolerance: f64,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig {
            phi: 0.0,
            alpha: 1.2,
            beta: 1.1,
            gamma: 1.15,
            base_depth: 2,
            base_width: 8,
            base_resolution: 64,
            tolerance: 0.15,
        }
    }
}

/// Resolved depth/width/resolution multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingPlan {
    pub phi: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub depth_mult: f64,
    pub width_mult: f64,
    pub resolution_mult: f64,
    pub base_depth: usize,
    pub base_width: usize,
    pub base_resolution: usize,
}

impl ScalingPlan {
    /// `alpha * beta^2 * gamma^2`, the FLOPS growth per unit of `phi`.
    pub fn constraint_value(&self) -> f64 {
        constraint(self.alpha, self.beta, self.gamma)
    }

    /// Number of conv blocks.
    pub fn depth(&self) -> usize {
        (self.base_depth as f64 * self.depth_mult).round() as usize
    }

    /// Kernel count of block `stage` (0-based); doubles per stage.
    pub fn width(&self, stage: usize) -> usize {
        let w = (self.base_width as f64 * self.width_mult * 2f64.powi(stage as i32)).round() as usize;
        w.max(1)
    }

    /// Input side length, rounded to a multiple of 4.
    pub fn resolution(&self) -> usize {
        let raw = (self.base_resolution as f64 * self.resolution_mult).round();
        (4.0 * (raw / 4.0).round()) as usize
    }
}

fn constraint(alpha: f64, beta: f64, gamma: f64) -> f64 {
    alpha * beta * beta * gamma * gamma
}

pub fn plan_scaling(config: &ScalingConfig) -> Result<ScalingPlan> {
    let ScalingConfig { phi, alpha, beta, gamma, base_depth, base_width, base_resolution, tolerance } = *config;
    if !(phi >= 0.0 && phi.is_finite()) {
        return Err(Error::InvalidArgument(format!("phi must be finite and >= 0, got {phi}")));
    }
    for (name, v) in [("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
        if !(v >= 1.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!("{name} must be finite and >= 1, got {v}")));
        }
    }
    if !(tolerance >= 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be >= 0, got {tolerance}")));
    }
    if base_depth == 0 || base_width == 0 || base_resolution == 0 {
        return Err(Error::InvalidArgument("base depth, width and resolution must be positive".into()));
    }
    let value = constraint(alpha, beta, gamma);
    let (lo, hi) = (2.0 - tolerance, 2.0 + tolerance);
    if !(lo..=hi).contains(&value) {
        return Err(Error::ScalingConstraint { value, lo, hi });
    }
    Ok(ScalingPlan {
        phi,
        alpha,
        beta,
        gamma,
        depth_mult: alpha.powf(phi),
        width_mult: beta.powf(phi),
        resolution_mult: gamma.powf(phi),
        base_depth,
        base_width,
        base_resolution,
    })
}
