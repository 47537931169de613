use super::heatmap::{Heatmap, Method};
use crate::error::{Error, Result};

/// Uniform weights for (saliency, cam, gradcam).
pub const DEFAULT_WEIGHTS: [f64; 3] = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    /// Re-normalized weighted mean of the components.
    pub combined: Heatmap,
    /// Weighted mean before re-normalization.
    pub blended: Vec<f64>,
    /// gradcam, cam, saliency pixels concatenated, each row-major.
    pub feature_vector: Vec<f64>,
    /// Normalized inputs in (saliency, cam, gradcam) order.
    pub components: [Heatmap; 3],
    pub weights: [f64; 3],
}

/// Weighted per-pixel fusion of three normalized maps of equal size.
/// `weights` apply to (saliency, cam, gradcam), must be nonnegative and
/// sum to 1.
pub fn ensemble(saliency: &Heatmap, cam: &Heatmap, gradcam: &Heatmap, weights: [f64; 3]) -> Result<EnsembleResult> {
    let maps = [saliency, cam, gradcam];
    for m in maps {
        if !m.is_normalized() {
            return Err(Error::InvalidArgument(format!("{} map must be normalized before fusion", m.method())));
        }
        if (m.height(), m.width()) != (saliency.height(), saliency.width()) {
            return Err(Error::shape(
                "ensemble",
                format!(
                    "{} map is {}x{}, saliency is {}x{}",
                    m.method(),
                    m.height(),
                    m.width(),
                    saliency.height(),
                    saliency.width()
                ),
            ));
        }
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::InvalidArgument(format!("ensemble weights must be nonnegative, got {weights:?}")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("ensemble weights must sum to 1, got {total}")));
    }

    let blended: Vec<f64> = (0..saliency.values().len())
        .map(|i| maps.iter().zip(weights).map(|(m, w)| w * m.values()[i]).sum())
        .collect();
    let combined = Heatmap::new(saliency.height(), saliency.width(), blended.clone(), Method::Ensemble, saliency.target_class())?
        .normalized();
    let feature_vector = [gradcam, cam, saliency].iter().flat_map(|m| m.values().iter().copied()).collect();
    Ok(EnsembleResult {
        combined,
        blended,
        feature_vector,
        components: [saliency.clone(), cam.clone(), gradcam.clone()],
        weights,
    })
}
