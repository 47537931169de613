use super::heatmap::{Heatmap, Method};
use crate::error::{Error, Result};
use crate::model::{CnnModel, NUM_CLASSES};
use crate::tensor::Tensor;

/// Tolerance for `mean(CAM) + bias_c == Y_c`.
const IDENTITY_TOLERANCE: f64 = 1e-9;

/// `M(i, j) = sum_k w[k, class] * A_k(i, j)` for features `1 x K x H x W`
/// and output weights `K x classes`.
pub fn class_activation_map(features: &Tensor, weights: &Tensor, class: usize) -> Result<Heatmap> {
    let &[1, k, h, w] = features.shape() else {
        return Err(Error::shape("cam", format!("expected 1 x K x H x W features, got {:?}", features.shape())));
    };
    let &[wk, classes] = weights.shape() else {
        return Err(Error::shape("cam", format!("expected K x classes weights, got {:?}", weights.shape())));
    };
    if wk != k {
        return Err(Error::shape("cam", format!("{wk} weight rows for {k} feature maps")));
    }
    if class >= classes {
        return Err(Error::ClassOutOfRange { index: class, classes });
    }
    let plane = h * w;
    let mut values = vec![0.0; plane];
    for (ki, map) in features.data().chunks_exact(plane).enumerate() {
        let wc = weights.data()[ki * classes + class];
        for (v, a) in values.iter_mut().zip(map) {
            *v += wc * a;
        }
    }
    Heatmap::new(h, w, values, Method::Cam, class)
}

/// CAM over the maps pooled by the model's GAP layer. Fails if the
/// pooled-score identity does not reproduce the model's logit.
pub fn cam(model: &CnnModel, image: &Tensor, class: usize) -> Result<Heatmap> {
    if class >= NUM_CLASSES {
        return Err(Error::ClassOutOfRange { index: class, classes: NUM_CLASSES });
    }
    let head = model.cam_head()?;
    let fwd = model.forward_eval(image)?;
    let features = fwd.activation(head.features);
    let weights = &model.params()[head.weight].1;
    let bias = model.params()[head.bias].1.data()[class];
    let map = class_activation_map(features, weights, class)?;

    let logit = fwd.tape.value(fwd.logits()).data()[class];
    let z = map.values().len() as f64;
    let pooled = map.values().iter().sum::<f64>() / z + bias;
    if (pooled - logit).abs() > IDENTITY_TOLERANCE {
        return Err(Error::Identity(format!("mean CAM + bias = {pooled} but class score = {logit}")));
    }
    Ok(map)
}
