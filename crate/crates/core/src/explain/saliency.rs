use super::heatmap::{Heatmap, Method};
use crate::autodiff::{Mode, Tape, Var};
use crate::error::{Error, Result};
use crate::model::CnnModel;
use crate::rng::Lcg;
use crate::tensor::Tensor;

/// A differentiable map from an input batch to class scores.
pub trait LogitModel {
    fn num_classes(&self) -> usize;

    /// Record `batch x classes` logits for `input` in eval mode.
    fn record_logits(&self, tape: &mut Tape, input: Var) -> Result<Var>;
}

impl LogitModel for CnnModel {
    fn num_classes(&self) -> usize {
        crate::model::NUM_CLASSES
    }

    fn record_logits(&self, tape: &mut Tape, input: Var) -> Result<Var> {
        let params = self.param_leaves(tape, &self.param_tensors());
        let acts = self.record(tape, input, &params, Mode::Eval, &mut Lcg::new(0))?;
        Ok(*acts.last().expect("logits"))
    }
}

/// `S(i, j) = max_channel |dY_c / dx(channel, i, j)|` for a single image
/// `1 x C x H x W`.
pub fn saliency_map<M: LogitModel + ?Sized>(model: &M, image: &Tensor, class: usize) -> Result<Heatmap> {
    let classes = model.num_classes();
    if class >= classes {
        return Err(Error::ClassOutOfRange { index: class, classes });
    }
    let &[1, channels, height, width] = image.shape() else {
        return Err(Error::shape("saliency_map", format!("expected 1 x C x H x W, got {:?}", image.shape())));
    };
    let mut tape = Tape::new();
    let x = tape.leaf(image.clone());
    let logits = model.record_logits(&mut tape, x)?;
    let score = tape.select_class(logits, class)?;
    let grads = tape.backward(score)?;
    let g = grads.get(x).data();
    let plane = height * width;
    let values = (0..plane)
        .map(|p| (0..channels).map(|c| g[c * plane + p].abs()).fold(0.0, f64::max))
        .collect();
    Heatmap::new(height, width, values, Method::Saliency, class)
}
