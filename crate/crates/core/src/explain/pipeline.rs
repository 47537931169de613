use super::{cam, ensemble, gradcam, saliency_map, EnsembleResult, Heatmap, ImportanceWeights};
use crate::error::Result;
use crate::model::CnnModel;
use crate::tensor::Tensor;

/// All explanations for one image and class.
#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    /// Unnormalized maps at their native resolution.
    pub saliency_raw: Heatmap,
    pub cam_raw: Heatmap,
    pub gradcam_raw: Heatmap,
    pub importance: ImportanceWeights,
    /// Components normalized at input resolution, and their fusion.
    pub ensemble: EnsembleResult,
}

impl Explanation {
    pub fn saliency(&self) -> &Heatmap {
        &self.ensemble.components[0]
    }

    pub fn cam(&self) -> &Heatmap {
        &self.ensemble.components[1]
    }

    pub fn gradcam(&self) -> &Heatmap {
        &self.ensemble.components[2]
    }

    pub fn combined(&self) -> &Heatmap {
        &self.ensemble.combined
    }
}

pub fn explain_image(
    model: &CnnModel,
    image: &Tensor,
    class: usize,
    weights: [f64; 3],
    target_layer: Option<usize>,
) -> Result<Explanation> {
    let saliency_raw = saliency_map(model, image, class)?;
    let cam_raw = cam(model, image, class)?;
    let gc = gradcam(model, image, class, target_layer)?;
    let (h, w) = (saliency_raw.height(), saliency_raw.width());
    let s = saliency_raw.normalized();
    let c = cam_raw.upsample(h, w)?.normalized();
    let g = gc.heatmap.upsample(h, w)?.normalized();
    let ensemble = ensemble(&s, &c, &g, weights)?;
    Ok(Explanation { saliency_raw, cam_raw, gradcam_raw: gc.heatmap, importance: gc.importance, ensemble })
}
