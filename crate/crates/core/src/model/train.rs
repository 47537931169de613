use super::cnn::{CnnModel, Layer};
use crate::autodiff::{Mode, Objective, Probe, Tape};
use crate::data::{image_to_tensor, LabeledImage};
use crate::error::{Error, Result};
use crate::metrics::{compute_metrics, confusion, MetricsReport};
use crate::rng::Lcg;
use crate::tensor::Tensor;
use crate::viz::RgbImage;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions { epochs: 5, batch_size: 32, learning_rate: 0.05, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Sample-weighted mean loss of each epoch.
    pub epoch_losses: Vec<f64>,
    /// Accuracy on the training set in eval mode after the last epoch.
    pub train_accuracy: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl TrainReport {
    pub fn to_text(&self) -> String {
        let mut out = format!("epochs={}\nbatch_size={}\nseed={}\n", self.epochs, self.batch_size, self.seed);
        for (i, loss) in self.epoch_losses.iter().enumerate() {
            out.push_str(&format!("loss.{}={loss}\n", i + 1));
        }
        out.push_str(&format!("train_accuracy={}\n", self.train_accuracy));
        out
    }
}

fn check_images(model: &CnnModel, data: &[LabeledImage]) -> Result<()> {
    let r = model.resolution();
    for sample in data {
        let (h, w) = (sample.image.height(), sample.image.width());
        if (h, w) != (r, r) {
            return Err(Error::ResolutionMismatch { expected: r, height: h, width: w });
        }
    }
    Ok(())
}

/// Mini-batch SGD on mean softmax cross-entropy, followed by a refit of
/// the decision threshold on the training set.
///
/// Dropout jitters the training-mode logits along the mean feature
/// direction, which is large next to the class gap of the pooled
/// features, so after a few epochs the ranking of the samples is already
/// good while the learned bias still lags. With the weights frozen, the
/// calibration shifts the two dense biases symmetrically to the exact
/// cross-entropy minimum over the eval-mode margins. It is skipped when no
/// epoch ran or only one class is present.
pub fn train(model: &mut CnnModel, data: &[LabeledImage], options: &TrainOptions) -> Result<TrainReport> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if options.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be at least 1".into()));
    }
    check_images(model, data)?;
    let inputs: Vec<Tensor> = data.iter().map(|s| image_to_tensor(&s.image)).collect();
    let labels: Vec<usize> = data.iter().map(|s| s.label.index()).collect();

    let mut order_rng = Lcg::stream(options.seed, 0);
    let mut dropout_rng = Lcg::stream(options.seed, 1);
    let mut epoch_losses = Vec::with_capacity(options.epochs);
    let mut order: Vec<usize> = (0..data.len()).collect();

    for _ in 0..options.epochs {
        order_rng.shuffle(&mut order);
        let mut total = 0.0;
        for batch in order.chunks(options.batch_size) {
            let x = Tensor::stack(&batch.iter().map(|&i| inputs[i].clone()).collect::<Vec<_>>())?;
            let y: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();

            let mut tape = Tape::new();
            let xv = tape.leaf(x);
            let params = model.param_leaves(&mut tape, &model.param_tensors());
            let acts = model.record(&mut tape, xv, &params, Mode::Train, &mut dropout_rng)?;
            let loss = tape.softmax_cross_entropy(*acts.last().expect("logits"), &y)?;
            total += tape.value(loss).data()[0] * batch.len() as f64;

            let grads = tape.backward(loss)?.take(&params);
            let updated = model
                .param_tensors()
                .into_iter()
                .zip(grads)
                .map(|(mut p, g)| {
                    for (v, d) in p.data_mut().iter_mut().zip(g.data()) {
                        *v -= options.learning_rate * d;
                    }
                    p
                })
                .collect();
            model.update_tensors(updated);
        }
        epoch_losses.push(total / data.len() as f64);
    }
    if options.epochs > 0 {
        calibrate_bias(model, &inputs, &labels)?;
    }

    let correct = inputs
        .iter()
        .zip(&labels)
        .map(|(x, &l)| model.predict(x).map(|p| usize::from(p.class == l)))
        .sum::<Result<usize>>()?;
    Ok(TrainReport {
        epoch_losses,
        train_accuracy: correct as f64 / data.len() as f64,
        epochs: options.epochs,
        batch_size: options.batch_size,
        seed: options.seed,
    })
}

/// Shift the logit-difference bias so the eval-mode margins minimize
/// mean cross-entropy with the weights held fixed.
fn calibrate_bias(model: &mut CnnModel, inputs: &[Tensor], labels: &[usize]) -> Result<()> {
    if !labels.contains(&0) || !labels.contains(&1) {
        return Ok(());
    }
    let margins = inputs
        .iter()
        .map(|x| model.predict(x).map(|p| p.scores[1] - p.scores[0]))
        .collect::<Result<Vec<f64>>>()?;
    let slope = |delta: f64| -> f64 {
        margins.iter().zip(labels).map(|(m, &y)| 1.0 / (1.0 + (-(m + delta)).exp()) - y as f64).sum()
    };
    let reach = margins.iter().fold(0.0f64, |a, m| a.max(m.abs())) + 50.0;
    let (mut lo, mut hi) = (-reach, reach);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let delta = 0.5 * (lo + hi);
    let mut bias = model.param("dense.bias").expect("dense bias").clone();
    bias.data_mut()[0] -= 0.5 * delta;
    bias.data_mut()[1] += 0.5 * delta;
    model.set_param("dense.bias", bias)
}

/// Anything that assigns a class (0 bona fide, 1 morphed) to an image.
pub trait Classifier {
    fn classify(&self, image: &RgbImage) -> Result<usize>;
}

impl Classifier for CnnModel {
    fn classify(&self, image: &RgbImage) -> Result<usize> {
        let r = self.resolution();
        if (image.height(), image.width()) != (r, r) {
            return Err(Error::ResolutionMismatch { expected: r, height: image.height(), width: image.width() });
        }
        Ok(self.predict(&image_to_tensor(image))?.class)
    }
}

pub fn evaluate<C: Classifier + ?Sized>(classifier: &C, samples: &[LabeledImage]) -> Result<MetricsReport> {
    let predictions = samples
        .iter()
        .map(|s| classifier.classify(&s.image))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<usize> = samples.iter().map(|s| s.label.index()).collect();
    Ok(compute_metrics(&confusion(&predictions, &labels)?))
}

/// Mean cross-entropy of a fixed batch as a function of the model's
/// parameters. Dropout, if `mode` is `Train`, replays the same mask on
/// every evaluation.
pub struct LossObjective<'a> {
    model: &'a CnnModel,
    input: Tensor,
    labels: Vec<usize>,
    mode: Mode,
    dropout_seed: u64,
    /// Activation chain at the model's own parameters.
    base: Vec<Tensor>,
}

impl<'a> LossObjective<'a> {
    pub fn new(model: &'a CnnModel, input: Tensor, labels: Vec<usize>, mode: Mode, dropout_seed: u64) -> Result<Self> {
        let fwd = model.forward(&input, mode, &mut Lcg::new(dropout_seed))?;
        let base = fwd.activations.iter().map(|&v| fwd.tape.value(v).clone()).collect();
        Ok(LossObjective { model, input, labels, mode, dropout_seed, base })
    }

    fn run(&self, params: &[Tensor], with_grad: bool) -> Result<(f64, Vec<Tensor>)> {
        let mut tape = Tape::new();
        let x = tape.leaf(self.input.clone());
        let vars = self.model.param_leaves(&mut tape, params);
        let mut rng = Lcg::new(self.dropout_seed);
        let acts = self.model.record(&mut tape, x, &vars, self.mode, &mut rng)?;
        let loss = tape.softmax_cross_entropy(*acts.last().expect("logits"), &self.labels)?;
        let value = tape.value(loss).data()[0];
        let grads = if with_grad { tape.backward(loss)?.take(&vars) } else { Vec::new() };
        Ok((value, grads))
    }

    /// Runs layers `start..` on `activation` and packs the sign of every
    /// ReLU input met on the way. Dropout is the only consumer of the
    /// generator, so a fresh one replays the mask of the full pass.
    fn run_tail(&self, start: usize, activation: Tensor, params: &[Tensor]) -> Result<Probe> {
        let mut tape = Tape::new();
        let x = tape.leaf(activation);
        let vars = self.model.param_leaves(&mut tape, params);
        let mut rng = Lcg::new(self.dropout_seed);
        let acts = self.model.record_from(&mut tape, start, x, &vars, self.mode, &mut rng)?;
        let mut signs = Vec::new();
        let mut bits = 0usize;
        for (k, layer) in self.model.layers()[start..].iter().enumerate() {
            if matches!(layer, Layer::Relu) {
                for &v in tape.value(acts[k]).data() {
                    if bits % 64 == 0 {
                        signs.push(0u64);
                    }
                    if v > 0.0 {
                        *signs.last_mut().expect("pushed") |= 1 << (bits % 64);
                    }
                    bits += 1;
                }
            }
        }
        let loss = tape.softmax_cross_entropy(*acts.last().expect("logits"), &self.labels)?;
        Ok(Probe { value: tape.value(loss).data()[0], region: Some(signs) })
    }
}

impl LossObjective<'_> {
    /// Continues from the output of the conv layer `start - 1` when only
    /// channel `channel` differs from the cached pass. A following
    /// `ReLU -> conv` pair is updated by convolving just the change of that
    /// channel, which is exact because the convolution is linear in its
    /// input.
    fn run_after_channel(&self, start: usize, out: Tensor, channel: usize, params: &[Tensor]) -> Result<Probe> {
        let layers = self.model.layers();
        let (Some(Layer::Relu), Some(&Layer::Conv { weight, stride, padding, .. })) =
            (layers.get(start), layers.get(start + 1))
        else {
            return self.run_tail(start, out, params);
        };
        let (n, c, h, w) = (out.shape()[0], out.shape()[1], out.shape()[2], out.shape()[3]);
        let plane = h * w;
        let before = &self.base[start + 1];
        let mut next = self.base[start + 2].clone();
        let (o, oh, ow) = (next.shape()[1], next.shape()[2], next.shape()[3]);
        let ks = params[weight].shape();
        let (kh, kw) = (ks[2], ks[3]);
        let kd = params[weight].data();
        let mut signs = vec![0u64; (n * plane).div_ceil(64)];
        for ni in 0..n {
            let z = &out.data()[(ni * c + channel) * plane..][..plane];
            let a = &before.data()[(ni * c + channel) * plane..][..plane];
            let diff: Vec<f64> = z.iter().zip(a).map(|(&z, &a)| if z > 0.0 { z } else { 0.0 } - a).collect();
            for (k, &z) in z.iter().enumerate() {
                if z > 0.0 {
                    signs[(ni * plane + k) / 64] |= 1 << ((ni * plane + k) % 64);
                }
            }
            let nd = next.data_mut();
            for oi in 0..o {
                let oplane = &mut nd[(ni * o + oi) * oh * ow..][..oh * ow];
                for khi in 0..kh {
                    for kwi in 0..kw {
                        let wgt = kd[((oi * c + channel) * kh + khi) * kw + kwi];
                        for oy in 0..oh {
                            let Some(iy) = (oy * stride + khi).checked_sub(padding).filter(|&iy| iy < h) else { continue };
                            for ox in 0..ow {
                                let Some(ix) = (ox * stride + kwi).checked_sub(padding).filter(|&ix| ix < w) else { continue };
                                oplane[oy * ow + ox] += wgt * diff[iy * w + ix];
                            }
                        }
                    }
                }
            }
        }
        let mut probe = self.run_tail(start + 2, next, params)?;
        signs.extend(probe.region.take().unwrap_or_default());
        probe.region = Some(signs);
        Ok(probe)
    }
}

impl Objective for LossObjective<'_> {
    fn parameters(&self) -> Vec<Tensor> {
        self.model.param_tensors()
    }

    fn evaluate(&self, params: &[Tensor]) -> Result<f64> {
        Ok(self.run(params, false)?.0)
    }

    fn gradients(&self, params: &[Tensor]) -> Result<Vec<Tensor>> {
        Ok(self.run(params, true)?.1)
    }

    /// A convolution is linear in its kernels and bias, so shifting one of
    /// them by `delta` adds `delta` times a shifted input plane to one
    /// output channel of the cached pass; only the layers after it rerun.
    /// Assumes `params` are the model's own, as `gradient_check` passes.
    fn probe(&self, params: &[Tensor], index: usize, element: usize, delta: f64) -> Result<Probe> {
        let (li, layer) = self
            .model
            .layers()
            .iter()
            .enumerate()
            .find(|(_, l)| match l {
                Layer::Conv { weight, bias, .. } | Layer::Dense { weight, bias } => *weight == index || *bias == index,
                _ => false,
            })
            .ok_or(Error::IndexOutOfRange { what: "parameter", index, max: params.len().saturating_sub(1) })?;
        match *layer {
            Layer::Conv { weight, stride, padding, .. } => {
                let mut out = self.base[li + 1].clone();
                let (n, o, oh, ow) = (out.shape()[0], out.shape()[1], out.shape()[2], out.shape()[3]);
                let plane = oh * ow;
                if index == weight {
                    let ks = params[weight].shape();
                    let (c, kh, kw) = (ks[1], ks[2], ks[3]);
                    let (oi, ci, khi, kwi) = (element / (c * kh * kw), element / (kh * kw) % c, element / kw % kh, element % kw);
                    let x = &self.base[li];
                    let (h, w) = (x.shape()[2], x.shape()[3]);
                    let xd = x.data();
                    let od = out.data_mut();
                    for ni in 0..n {
                        let xplane = &xd[(ni * c + ci) * h * w..][..h * w];
                        let oplane = &mut od[(ni * o + oi) * plane..][..plane];
                        for oy in 0..oh {
                            let Some(iy) = (oy * stride + khi).checked_sub(padding).filter(|&iy| iy < h) else { continue };
                            for ox in 0..ow {
                                let Some(ix) = (ox * stride + kwi).checked_sub(padding).filter(|&ix| ix < w) else { continue };
                                oplane[oy * ow + ox] += delta * xplane[iy * w + ix];
                            }
                        }
                    }
                } else {
                    let od = out.data_mut();
                    for ni in 0..n {
                        od[(ni * o + element) * plane..][..plane].iter_mut().for_each(|v| *v += delta);
                    }
                }
                let changed = if index == weight { element / (params[weight].numel() / o) } else { element };
                self.run_after_channel(li + 1, out, changed, params)
            }
            _ => {
                let mut shifted = params.to_vec();
                shifted[index].data_mut()[element] += delta;
                self.run_tail(li, self.base[li].clone(), &shifted)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_face, morph};
    use crate::model::{build_model, plan_scaling, ScalingConfig};

    fn small_model(seed: u64) -> CnnModel {
        let plan = plan_scaling(&ScalingConfig { base_resolution: 16, ..ScalingConfig::default() }).unwrap();
        build_model(&plan, seed).unwrap()
    }

    #[test]
    fn zero_epochs_leaves_parameters() {
        let mut m = small_model(1);
        let before = m.checkpoint_bytes().unwrap();
        let data = vec![generate_face(3, 16)];
        let report = train(&mut m, &data, &TrainOptions { epochs: 0, ..TrainOptions::default() }).unwrap();
        assert!(report.epoch_losses.is_empty());
        assert_eq!(m.checkpoint_bytes().unwrap(), before);
        assert!((0.0..=1.0).contains(&report.train_accuracy));
    }

    #[test]
    fn memorizes_single_sample() {
        let mut m = small_model(2);
        let a = generate_face(10, 16);
        let b = generate_face(11, 16);
        let data = vec![morph(&a, &b, 0.5, "m0000").unwrap()];
        let opts = TrainOptions { epochs: 200, batch_size: 32, learning_rate: 0.05, seed: 4 };
        let report = train(&mut m, &data, &opts).unwrap();
        assert_eq!(report.epoch_losses.len(), 200);
        let last = *report.epoch_losses.last().unwrap();
        assert!(last < 0.01, "final loss {last}");
    }

    #[test]
    fn rejects_empty_and_mismatched_data() {
        let mut m = small_model(1);
        assert!(train(&mut m, &[], &TrainOptions::default()).is_err());
        let wrong = vec![generate_face(1, 32)];
        assert!(matches!(
            train(&mut m, &wrong, &TrainOptions::default()),
            Err(Error::ResolutionMismatch { expected: 16, .. })
        ));
    }

    #[test]
    fn training_is_deterministic() {
        let data: Vec<_> = (0..6).map(|i| generate_face(i, 16)).collect();
        let run = || {
            let mut m = small_model(7);
            let report = train(&mut m, &data, &TrainOptions { epochs: 2, batch_size: 4, ..TrainOptions::default() }).unwrap();
            (m.checkpoint_bytes().unwrap(), report)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn incremental_probe_matches_full_evaluation() {
        let m = small_model(5);
        let x = Tensor::stack(&[image_to_tensor(&generate_face(1, 16).image), image_to_tensor(&generate_face(2, 16).image)])
            .unwrap();
        let obj = LossObjective::new(&m, x, vec![0, 1], Mode::Train, 9).unwrap();
        let params = obj.parameters();
        for (index, p) in params.iter().enumerate() {
            for element in [0, p.numel() / 2, p.numel() - 1] {
                let probe = obj.probe(&params, index, element, 0.03).unwrap();
                let mut shifted = params.clone();
                shifted[index].data_mut()[element] += 0.03;
                let full = obj.evaluate(&shifted).unwrap();
                assert!((probe.value - full).abs() < 1e-12, "param {index}[{element}]: {} vs {full}", probe.value);
                assert!(probe.region.is_some());
            }
        }
    }
}
