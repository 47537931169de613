use super::cnn::CnnModel;
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::viz::GrayImage;

/// Output of activation `layer_index` (0 is the preprocessed input) plus a
/// grayscale grid with one min-max scaled tile per channel.
pub fn dump_layer_activations(model: &CnnModel, image: &Tensor, layer_index: usize) -> Result<(Tensor, GrayImage)> {
    let max = model.layers().len();
    if layer_index > max {
        return Err(Error::IndexOutOfRange { what: "layer", index: layer_index, max });
    }
    let fwd = model.forward_eval(image)?;
    let act = fwd.activation(layer_index).clone();
    let grid = activation_grid(&act)?;
    Ok((act, grid))
}

/// Tiles channels of the first batch item into a `ceil(sqrt(K))`-square grid.
/// 2-d activations (`batch x K`) become 1x1 tiles.
pub fn activation_grid(activation: &Tensor) -> Result<GrayImage> {
    let s = activation.shape();
    let (k, th, tw) = match s {
        [_, k, h, w] => (*k, *h, *w),
        [_, k] => (*k, 1, 1),
        _ => return Err(Error::shape("activation_grid", format!("unsupported activation shape {s:?}"))),
    };
    let side = (1..).find(|c| c * c >= k).expect("k is finite");
    let (gh, gw) = (side * th, side * tw);
    let mut pixels = vec![0u8; gh * gw];
    let plane = th * tw;
    for (c, values) in activation.data()[..k * plane].chunks_exact(plane).enumerate() {
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (row0, col0) = ((c / side) * th, (c % side) * tw);
        for y in 0..th {
            for x in 0..tw {
                let v = values[y * tw + x];
                let scaled = if hi > lo { (255.0 * (v - lo) / (hi - lo)).round() as u8 } else { 0 };
                pixels[(row0 + y) * gw + col0 + x] = scaled;
            }
        }
    }
    GrayImage::new(gh, gw, pixels)
}
