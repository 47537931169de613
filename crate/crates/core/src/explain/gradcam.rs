use super::heatmap::{Heatmap, Method};
use crate::error::{Error, Result};
use crate::model::{CnnModel, NUM_CLASSES};
use crate::tensor::Tensor;

/// Per-feature-map importance `alpha_k` for one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceWeights(pub Vec<f64>);

impl ImportanceWeights {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCam {
    /// `ReLU(sum_k alpha_k A_k)` at the target layer's resolution.
    pub heatmap: Heatmap,
    pub importance: ImportanceWeights,
    /// The weighted combination before the ReLU clamp.
    pub linear: Vec<f64>,
    /// Activation index the maps were taken from.
    pub target_layer: usize,
}

/// Grad-CAM at activation `target_layer` (an output of a conv layer or its
/// ReLU); `None` selects the last conv block.
pub fn gradcam(model: &CnnModel, image: &Tensor, class: usize, target_layer: Option<usize>) -> Result<GradCam> {
    if class >= NUM_CLASSES {
        return Err(Error::ClassOutOfRange { index: class, classes: NUM_CLASSES });
    }
    let target = match target_layer {
        Some(t) => {
            if !model.conv_activation_indices().contains(&t) {
                return Err(Error::Architecture(format!(
                    "layer {t} is not a convolutional output (valid: {:?})",
                    model.conv_activation_indices()
                )));
            }
            t
        }
        None => model.last_conv_activation()?,
    };

    let mut fwd = model.forward_eval(image)?;
    let score = fwd.tape.select_class(fwd.logits(), class)?;
    let grads = fwd.tape.backward(score)?;
    let act = fwd.activation(target);
    let grad = grads.get(fwd.activations[target]);

    let &[1, k, h, w] = act.shape() else {
        return Err(Error::shape("gradcam", format!("expected a single-image activation, got {:?}", act.shape())));
    };
    let plane = h * w;
    let importance: Vec<f64> = grad
        .data()
        .chunks_exact(plane)
        .map(|g| g.iter().sum::<f64>() / plane as f64)
        .collect();
    debug_assert_eq!(importance.len(), k);

    let mut linear = vec![0.0; plane];
    for (alpha, map) in importance.iter().zip(act.data().chunks_exact(plane)) {
        for (v, a) in linear.iter_mut().zip(map) {
            *v += alpha * a;
        }
    }
    let clamped = linear.iter().map(|&v| v.max(0.0)).collect();
    Ok(GradCam {
        heatmap: Heatmap::new(h, w, clamped, Method::GradCam, class)?,
        importance: ImportanceWeights(importance),
        linear,
        target_layer: target,
    })
}
