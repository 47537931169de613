use sha2::{Digest, Sha256};

use super::scaling::ScalingPlan;
use crate::autodiff::{conv_output_size, Mode, Tape, Var};
use crate::checkpoint;
use crate::error::{Error, Result};
use crate::rng::Lcg;
use crate::tensor::Tensor;

pub const NUM_CLASSES: usize = 2;
pub const DROPOUT_RATE: f64 = 0.5;
pub const INPUT_CHANNELS: usize = 3;
const KERNEL: usize = 3;
const PADDING: usize = 1;
const MIN_RESOLUTION: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    /// `weight` and `bias` index into the parameter list.
    Conv { weight: usize, bias: usize, stride: usize, padding: usize },
    Relu,
    GlobalAvgPool,
    Dropout { rate: f64 },
    Dense { weight: usize, bias: usize },
}

impl Layer {
    fn describe(&self, params: &[(String, Tensor)]) -> String {
        match self {
            Layer::Conv { weight, stride, padding, .. } => {
                format!("conv{:?}/s{stride}/p{padding}", params[*weight].1.shape())
            }
            Layer::Relu => "relu".into(),
            Layer::GlobalAvgPool => "gap".into(),
            Layer::Dropout { rate } => format!("dropout{rate}"),
            Layer::Dense { weight, .. } => format!("dense{:?}", params[*weight].1.shape()),
        }
    }
}

/// Where the CAM inputs live: the activation fed to GAP and the output layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CamHead {
    pub features: usize,
    pub weight: usize,
    pub bias: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    plan: ScalingPlan,
    seed: u64,
    layers: Vec<Layer>,
    params: Vec<(String, Tensor)>,
    resolution: usize,
    fingerprint: String,
}

/// A recorded forward pass. `activations[0]` is the input and
/// `activations[i + 1]` the output of layer `i`.
#[derive(Debug)]
pub struct Forward {
    pub tape: Tape,
    pub params: Vec<Var>,
    pub activations: Vec<Var>,
}

impl Forward {
    pub fn input(&self) -> Var {
        self.activations[0]
    }

    pub fn logits(&self) -> Var {
        *self.activations.last().expect("at least the input activation")
    }

    pub fn activation(&self, index: usize) -> &Tensor {
        self.tape.value(self.activations[index])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub scores: [f64; NUM_CLASSES],
    pub probabilities: [f64; NUM_CLASSES],
    pub class: usize,
}

impl Prediction {
    pub fn from_scores(scores: [f64; NUM_CLASSES]) -> Self {
        let max = scores[0].max(scores[1]);
        let e = [(scores[0] - max).exp(), (scores[1] - max).exp()];
        let total = e[0] + e[1];
        let probabilities = [e[0] / total, e[1] / total];
        // ties go to bona fide
        let class = usize::from(scores[1] > scores[0]);
        Prediction { scores, probabilities, class }
    }
}

pub fn build_model(plan: &ScalingPlan, seed: u64) -> Result<CnnModel> {
    let resolution = plan.resolution();
    if resolution < MIN_RESOLUTION {
        return Err(Error::InvalidArgument(format!(
            "input resolution {resolution} is below the minimum of {MIN_RESOLUTION} pixels"
        )));
    }
    let mut rng = Lcg::new(seed);
    let mut layers = Vec::new();
    let mut params: Vec<(String, Tensor)> = Vec::new();
    let mut channels = INPUT_CHANNELS;
    let mut spatial = resolution;

    for stage in 0..plan.depth() {
        let out = plan.width(stage);
        // The first stage keeps full resolution so pixel-level texture
        // reaches the deeper features; later stages halve it down to 8.
        let stride = if stage > 0 && spatial >= MIN_RESOLUTION { 2 } else { 1 };
        let std = (2.0 / (channels * KERNEL * KERNEL) as f64).sqrt();
        let n = out * channels * KERNEL * KERNEL;
        let mut data: Vec<f64> = (0..n).map(|_| std * rng.normal()).collect();
        if stage == 0 {
            // Zero-mean first kernels respond to texture, not brightness.
            for k in data.chunks_exact_mut(KERNEL * KERNEL) {
                let m = k.iter().sum::<f64>() / k.len() as f64;
                k.iter_mut().for_each(|v| *v -= m);
            }
        }
        let w = Tensor::new(vec![out, channels, KERNEL, KERNEL], data)?;
        params.push((format!("conv{stage}.weight"), w));
        params.push((format!("conv{stage}.bias"), Tensor::zeros(&[out])));
        layers.push(Layer::Conv { weight: params.len() - 2, bias: params.len() - 1, stride, padding: PADDING });
        layers.push(Layer::Relu);
        channels = out;
        spatial = conv_output_size(spatial, KERNEL, stride, PADDING).expect("padded kernel fits");
    }

    let std = (1.0 / channels as f64).sqrt();
    let w = Tensor::new(
        vec![channels, NUM_CLASSES],
        (0..channels * NUM_CLASSES).map(|_| std * rng.normal()).collect(),
    )?;
    params.push(("dense.weight".into(), w));
    params.push(("dense.bias".into(), Tensor::zeros(&[NUM_CLASSES])));
    layers.push(Layer::GlobalAvgPool);
    layers.push(Layer::Dropout { rate: DROPOUT_RATE });
    layers.push(Layer::Dense { weight: params.len() - 2, bias: params.len() - 1 });

    let fingerprint = fingerprint(&layers, &params, resolution);
    Ok(CnnModel { plan: plan.clone(), seed, layers, params, resolution, fingerprint })
}

fn fingerprint(layers: &[Layer], params: &[(String, Tensor)], resolution: usize) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!("in{INPUT_CHANNELS}x{resolution}x{resolution}").as_bytes());
    for layer in layers {
        hasher.update(b";");
        hasher.update(layer.describe(params).as_bytes());
    }
    hasher.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

impl CnnModel {
    pub fn plan(&self) -> &ScalingPlan {
        &self.plan
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn params(&self) -> &[(String, Tensor)] {
        &self.params
    }

    pub fn param_tensors(&self) -> Vec<Tensor> {
        self.params.iter().map(|(_, t)| t.clone()).collect()
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn set_param(&mut self, name: &str, value: Tensor) -> Result<()> {
        let slot = self
            .params
            .iter_mut()
            .find(|(n, _)| n == name)
            .ok_or_else(|| Error::InvalidArgument(format!("no parameter named {name}")))?;
        if slot.1.shape() != value.shape() {
            return Err(Error::shape("set_param", format!("{name}: {:?} vs {:?}", slot.1.shape(), value.shape())));
        }
        slot.1 = value;
        Ok(())
    }

    /// Replace every parameter, keeping order; names and shapes must match.
    pub fn set_params(&mut self, params: Vec<(String, Tensor)>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Architecture(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        for ((name, t), (new_name, new_t)) in self.params.iter().zip(&params) {
            if name != new_name || t.shape() != new_t.shape() {
                return Err(Error::Architecture(format!(
                    "parameter {name} {:?} does not match {new_name} {:?}",
                    t.shape(),
                    new_t.shape()
                )));
            }
        }
        self.params = params;
        Ok(())
    }

    pub fn update_tensors(&mut self, tensors: Vec<Tensor>) {
        debug_assert_eq!(tensors.len(), self.params.len());
        for ((_, slot), t) in self.params.iter_mut().zip(tensors) {
            *slot = t;
        }
    }

    pub fn checkpoint_bytes(&self) -> Result<Vec<u8>> {
        checkpoint::encode_checkpoint(&self.params)
    }

    pub fn load_checkpoint_bytes(&mut self, bytes: &[u8]) -> Result<()> {
        self.set_params(checkpoint::decode_checkpoint(bytes)?)
    }

    pub fn check_input(&self, input: &Tensor) -> Result<()> {
        let s = input.shape();
        if s.len() != 4 || s[1] != INPUT_CHANNELS {
            return Err(Error::shape("model input", format!("expected N x {INPUT_CHANNELS} x H x W, got {s:?}")));
        }
        if s[2] != self.resolution || s[3] != self.resolution {
            return Err(Error::ResolutionMismatch { expected: self.resolution, height: s[2], width: s[3] });
        }
        Ok(())
    }

    pub fn param_leaves(&self, tape: &mut Tape, params: &[Tensor]) -> Vec<Var> {
        params.iter().map(|t| tape.leaf(t.clone())).collect()
    }

    /// Run layers `start..` on `activation`. Returns the activation chain
    /// beginning with `activation` itself.
    pub fn record_from(
        &self,
        tape: &mut Tape,
        start: usize,
        activation: Var,
        params: &[Var],
        mode: Mode,
        rng: &mut Lcg,
    ) -> Result<Vec<Var>> {
        if start > self.layers.len() {
            return Err(Error::IndexOutOfRange { what: "layer", index: start, max: self.layers.len() });
        }
        let mut acts = vec![activation];
        let mut x = activation;
        for layer in &self.layers[start..] {
            x = match *layer {
                Layer::Conv { weight, bias, stride, padding } => {
                    tape.conv2d(x, params[weight], params[bias], stride, padding)?
                }
                Layer::Relu => tape.relu(x),
                Layer::GlobalAvgPool => tape.global_average_pool(x)?,
                Layer::Dropout { rate } => tape.dropout(x, rate, mode, rng)?,
                Layer::Dense { weight, bias } => tape.dense(x, params[weight], params[bias])?,
            };
            acts.push(x);
        }
        Ok(acts)
    }

    pub fn record(&self, tape: &mut Tape, input: Var, params: &[Var], mode: Mode, rng: &mut Lcg) -> Result<Vec<Var>> {
        self.check_input(tape.value(input))?;
        self.record_from(tape, 0, input, params, mode, rng)
    }

    /// Full forward pass on a fresh tape.
    pub fn forward(&self, input: &Tensor, mode: Mode, rng: &mut Lcg) -> Result<Forward> {
        self.check_input(input)?;
        let mut tape = Tape::new();
        let x = tape.leaf(input.clone());
        let params = self.param_leaves(&mut tape, &self.param_tensors());
        let activations = self.record_from(&mut tape, 0, x, &params, mode, rng)?;
        Ok(Forward { tape, params, activations })
    }

    pub fn forward_eval(&self, input: &Tensor) -> Result<Forward> {
        self.forward(input, Mode::Eval, &mut Lcg::new(0))
    }

    /// Logits from an activation injected at `activations[start]`, eval mode.
    pub fn forward_from(&self, start: usize, activation: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let x = tape.leaf(activation.clone());
        let params = self.param_leaves(&mut tape, &self.param_tensors());
        let acts = self.record_from(&mut tape, start, x, &params, Mode::Eval, &mut Lcg::new(0))?;
        Ok(tape.value(*acts.last().expect("nonempty")).clone())
    }

    /// Class scores for a single preprocessed image (`1 x 3 x R x R`).
    pub fn predict(&self, image: &Tensor) -> Result<Prediction> {
        if image.shape().first() != Some(&1) {
            return Err(Error::shape("predict", format!("expected a single image, got {:?}", image.shape())));
        }
        let fwd = self.forward_eval(image)?;
        let y = fwd.tape.value(fwd.logits()).data();
        Ok(Prediction::from_scores([y[0], y[1]]))
    }

    /// Head layout required by CAM: `... -> GAP -> [dropout] -> dense`.
    pub fn cam_head(&self) -> Result<CamHead> {
        let n = self.layers.len();
        let (dense, gap) = match self.layers.as_slice() {
            [.., Layer::GlobalAvgPool, Layer::Dropout { .. }, Layer::Dense { .. }] => (n - 1, n - 3),
            [.., Layer::GlobalAvgPool, Layer::Dense { .. }] => (n - 1, n - 2),
            _ => return Err(Error::Architecture("head must end with GAP -> dropout -> dense".into())),
        };
        let Layer::Dense { weight, bias } = self.layers[dense] else { unreachable!() };
        Ok(CamHead { features: gap, weight, bias })
    }

    /// Activation indices produced by a conv layer or its ReLU.
    pub fn conv_activation_indices(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut in_block = false;
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Conv { .. } => {
                    in_block = true;
                    out.push(i + 1);
                }
                Layer::Relu if in_block => out.push(i + 1),
                _ => in_block = false,
            }
        }
        out
    }

    /// Output of the last conv block, the maps pooled by GAP.
    pub fn last_conv_activation(&self) -> Result<usize> {
        self.conv_activation_indices()
            .last()
            .copied()
            .ok_or_else(|| Error::Architecture("model has no convolutional layer".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{plan_scaling, ScalingConfig};

    fn model(config: ScalingConfig, seed: u64) -> CnnModel {
        build_model(&plan_scaling(&config).unwrap(), seed).unwrap()
    }

    #[test]
    fn baseline_architecture() {
        let m = model(ScalingConfig::default(), 1);
        assert_eq!(m.resolution(), 64);
        let convs: Vec<_> = m.layers().iter().filter(|l| matches!(l, Layer::Conv { .. })).collect();
        assert_eq!(convs.len(), 2);
        assert_eq!(m.param("conv0.weight").unwrap().shape(), &[8, 3, 3, 3]);
        assert_eq!(m.param("conv1.weight").unwrap().shape(), &[16, 8, 3, 3]);
        assert_eq!(m.param("dense.weight").unwrap().shape(), &[16, 2]);
        let tail = &m.layers()[m.layers().len() - 3..];
        assert!(matches!(tail, [Layer::GlobalAvgPool, Layer::Dropout { rate }, Layer::Dense { .. }] if *rate == 0.5));
        assert_eq!(m.fingerprint().len(), 16);
    }

    #[test]
    fn depth_scaled_architecture() {
        let m = model(ScalingConfig { phi: 1.0, alpha: 2.0, beta: 1.0, gamma: 1.0, ..ScalingConfig::default() }, 1);
        let convs = m.layers().iter().filter(|l| matches!(l, Layer::Conv { .. })).count();
        assert_eq!(convs, 4);
        assert_eq!(m.param("conv3.weight").unwrap().shape()[0], 64);
        assert_ne!(m.fingerprint(), model(ScalingConfig::default(), 1).fingerprint());
    }

    #[test]
    fn build_is_deterministic() {
        let a = model(ScalingConfig::default(), 11);
        let b = model(ScalingConfig::default(), 11);
        assert_eq!(a.checkpoint_bytes().unwrap(), b.checkpoint_bytes().unwrap());
        let c = model(ScalingConfig::default(), 12);
        assert_ne!(a.checkpoint_bytes().unwrap(), c.checkpoint_bytes().unwrap());
    }

    #[test]
    fn rejects_tiny_resolution() {
        let plan = plan_scaling(&ScalingConfig { base_resolution: 4, ..ScalingConfig::default() }).unwrap();
        assert!(build_model(&plan, 0).is_err());
    }

    #[test]
    fn zero_head_predicts_bona_fide_tie() {
        let mut m = model(ScalingConfig::default(), 3);
        m.set_param("dense.weight", Tensor::zeros(&[16, 2])).unwrap();
        let x = Tensor::filled(&[1, 3, 64, 64], 0.5);
        let p = m.predict(&x).unwrap();
        assert_eq!(p.probabilities, [0.5, 0.5]);
        assert_eq!(p.class, 0);
    }

    #[test]
    fn prediction_shift_invariance() {
        for scores in [[0.3, -1.2], [2.0, 2.5], [-4.0, -4.0], [100.0, 99.0]] {
            let p = Prediction::from_scores(scores);
            assert!((p.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let q = Prediction::from_scores([scores[0] + 7.5, scores[1] + 7.5]);
            assert_eq!(p.class, q.class);
        }
    }

    #[test]
    fn rejects_wrong_resolution() {
        let m = model(ScalingConfig::default(), 3);
        let x = Tensor::zeros(&[1, 3, 32, 32]);
        assert!(matches!(m.predict(&x), Err(Error::ResolutionMismatch { expected: 64, .. })));
    }

    #[test]
    fn checkpoint_reload_and_mismatch() {
        let a = model(ScalingConfig::default(), 5);
        let mut b = model(ScalingConfig::default(), 6);
        b.load_checkpoint_bytes(&a.checkpoint_bytes().unwrap()).unwrap();
        assert_eq!(a.params(), b.params());
        let mut deep = model(ScalingConfig { phi: 1.0, alpha: 2.0, beta: 1.0, gamma: 1.0, ..ScalingConfig::default() }, 5);
        assert!(deep.load_checkpoint_bytes(&a.checkpoint_bytes().unwrap()).is_err());
    }

    #[test]
    fn conv_indices_and_head() {
        let m = model(ScalingConfig::default(), 1);
        assert_eq!(m.conv_activation_indices(), vec![1, 2, 3, 4]);
        assert_eq!(m.last_conv_activation().unwrap(), 4);
        let head = m.cam_head().unwrap();
        assert_eq!(head.features, 4);
    }

    #[test]
    fn forward_from_matches_full_forward() {
        let m = model(ScalingConfig::default(), 9);
        let mut rng = Lcg::new(1);
        let x = Tensor::new(vec![1, 3, 64, 64], (0..3 * 64 * 64).map(|_| rng.next_f64()).collect()).unwrap();
        let fwd = m.forward_eval(&x).unwrap();
        let logits = fwd.tape.value(fwd.logits()).clone();
        for start in 0..=m.layers().len() {
            assert_eq!(m.forward_from(start, fwd.activation(start)).unwrap(), logits);
        }
    }
}
