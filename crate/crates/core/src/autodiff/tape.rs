use crate::error::{Error, Result};
use crate::rng::Lcg;
use crate::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Whether stochastic layers are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv2d { input: Var, kernels: Var, bias: Var, stride: usize, padding: usize },
    Relu { input: Var },
    GlobalAvgPool { input: Var },
    Dense { input: Var, weights: Var, bias: Var },
    /// `mask` holds 0 for dropped elements and the survivor scale otherwise.
    Dropout { input: Var, mask: Vec<f64> },
    SoftmaxCrossEntropy { logits: Var, labels: Vec<usize>, probs: Vec<f64> },
    SelectClass { logits: Var, class: usize },
    Sum { input: Var },
    Square { input: Var },
    Flatten { input: Var },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Output spatial extent of a convolution along one axis.
pub fn conv_output_size(size: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = size + 2 * padding;
    if stride == 0 || padded < kernel {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

/// Range of output positions whose tap `k` lands inside `0..size`.
fn valid_range(out: usize, size: usize, k: usize, stride: usize, padding: usize) -> (usize, usize) {
    // position = o * stride + k - padding must satisfy 0 <= position < size
    let lo = if padding > k { (padding - k).div_ceil(stride) } else { 0 };
    let hi = if size + padding > k { ((size + padding - k - 1) / stride + 1).min(out) } else { 0 };
    (lo, hi.max(lo))
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Differentiable leaf (parameter or input).
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn conv2d(&mut self, input: Var, kernels: Var, bias: Var, stride: usize, padding: usize) -> Result<Var> {
        let x = self.value(input);
        let k = self.value(kernels);
        let b = self.value(bias);
        let (xs, ks) = (x.shape(), k.shape());
        if xs.len() != 4 || ks.len() != 4 {
            return Err(Error::shape("conv2d", format!("expected 4-d input and kernels, got {xs:?} and {ks:?}")));
        }
        let (n, c, h, w) = (xs[0], xs[1], xs[2], xs[3]);
        let (o, kc, kh, kw) = (ks[0], ks[1], ks[2], ks[3]);
        if kc != c {
            return Err(Error::shape("conv2d", format!("kernel channels {kc} != input channels {c}")));
        }
        if b.shape() != [o] {
            return Err(Error::shape("conv2d", format!("bias shape {:?} != [{o}]", b.shape())));
        }
        if stride == 0 {
            return Err(Error::InvalidArgument("conv2d stride must be at least 1".into()));
        }
        let oh = conv_output_size(h, kh, stride, padding)
            .ok_or_else(|| Error::shape("conv2d", format!("kernel height {kh} exceeds padded height {}", h + 2 * padding)))?;
        let ow = conv_output_size(w, kw, stride, padding)
            .ok_or_else(|| Error::shape("conv2d", format!("kernel width {kw} exceeds padded width {}", w + 2 * padding)))?;

        let (xd, kd, bd) = (x.data(), k.data(), b.data());
        let mut out = vec![0.0; n * o * oh * ow];
        for ni in 0..n {
            for oi in 0..o {
                let plane = &mut out[(ni * o + oi) * oh * ow..][..oh * ow];
                plane.fill(bd[oi]);
                for ci in 0..c {
                    let xplane = &xd[(ni * c + ci) * h * w..][..h * w];
                    for khi in 0..kh {
                        let (y_lo, y_hi) = valid_range(oh, h, khi, stride, padding);
                        for kwi in 0..kw {
                            let wgt = kd[((oi * c + ci) * kh + khi) * kw + kwi];
                            let (x_lo, x_hi) = valid_range(ow, w, kwi, stride, padding);
                            for oy in y_lo..y_hi {
                                let iy = oy * stride + khi - padding;
                                let xrow = &xplane[iy * w..][..w];
                                let orow = &mut plane[oy * ow..][..ow];
                                for ox in x_lo..x_hi {
                                    orow[ox] += wgt * xrow[ox * stride + kwi - padding];
                                }
                            }
                        }
                    }
                }
            }
        }
        let value = Tensor::new(vec![n, o, oh, ow], out)?;
        Ok(self.push(value, Op::Conv2d { input, kernels, bias, stride, padding }))
    }

    pub fn relu(&mut self, input: Var) -> Var {
        let value = self.value(input).map(|v| if v > 0.0 { v } else { 0.0 });
        self.push(value, Op::Relu { input })
    }

    /// `batch x K x H x W -> batch x K`, averaging each map.
    pub fn global_average_pool(&mut self, input: Var) -> Result<Var> {
        let x = self.value(input);
        let s = x.shape();
        if s.len() != 4 {
            return Err(Error::shape("global_average_pool", format!("expected 4-d input, got {s:?}")));
        }
        let (n, k, z) = (s[0], s[1], s[2] * s[3]);
        if z == 0 {
            return Err(Error::shape("global_average_pool", "empty spatial extent"));
        }
        let out: Vec<f64> = x
            .data()
            .chunks_exact(z)
            .map(|plane| plane.iter().sum::<f64>() / z as f64)
            .collect();
        let value = Tensor::new(vec![n, k], out)?;
        Ok(self.push(value, Op::GlobalAvgPool { input }))
    }

    /// `input (batch x F) . weights (F x O) + bias (O)`.
    pub fn dense(&mut self, input: Var, weights: Var, bias: Var) -> Result<Var> {
        let x = self.value(input);
        let wt = self.value(weights);
        let b = self.value(bias);
        let (xs, ws) = (x.shape(), wt.shape());
        if xs.len() != 2 || ws.len() != 2 {
            return Err(Error::shape("dense", format!("expected 2-d input and weights, got {xs:?} and {ws:?}")));
        }
        let (n, f, o) = (xs[0], xs[1], ws[1]);
        if ws[0] != f {
            return Err(Error::shape("dense", format!("weights inner dimension {} != input features {f}", ws[0])));
        }
        if b.shape() != [o] {
            return Err(Error::shape("dense", format!("bias shape {:?} != [{o}]", b.shape())));
        }
        let (xd, wd, bd) = (x.data(), wt.data(), b.data());
        let mut out = Vec::with_capacity(n * o);
        for row in xd.chunks_exact(f) {
            for j in 0..o {
                let mut acc = bd[j];
                for (i, xv) in row.iter().enumerate() {
                    acc += xv * wd[i * o + j];
                }
                out.push(acc);
            }
        }
        let value = Tensor::new(vec![n, o], out)?;
        Ok(self.push(value, Op::Dense { input, weights, bias }))
    }

    /// Inverted dropout. Eval mode and `rate == 0` pass values through.
    pub fn dropout(&mut self, input: Var, rate: f64, mode: Mode, rng: &mut Lcg) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!("dropout rate {rate} must lie in [0, 1)")));
        }
        let x = self.value(input);
        let mask: Vec<f64> = match mode {
            Mode::Eval => vec![1.0; x.numel()],
            Mode::Train if rate == 0.0 => vec![1.0; x.numel()],
            Mode::Train => {
                let keep = 1.0 / (1.0 - rate);
                (0..x.numel()).map(|_| if rng.next_f64() < rate { 0.0 } else { keep }).collect()
            }
        };
        let data = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let value = Tensor::new(x.shape().to_vec(), data)?;
        Ok(self.push(value, Op::Dropout { input, mask }))
    }

    /// Mean over the batch of `-log softmax(logits)[label]`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let x = self.value(logits);
        let s = x.shape();
        if s.len() != 2 || s[0] != labels.len() {
            return Err(Error::shape(
                "softmax_cross_entropy",
                format!("logits {s:?} do not match {} labels", labels.len()),
            ));
        }
        let classes = s[1];
        let mut probs = Vec::with_capacity(x.numel());
        let mut loss = 0.0;
        for (row, &label) in x.data().chunks_exact(classes).zip(labels) {
            if label >= classes {
                return Err(Error::ClassOutOfRange { index: label, classes });
            }
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
            let lse = max + sum.ln();
            loss += lse - row[label];
            probs.extend(row.iter().map(|v| (v - lse).exp()));
        }
        loss /= labels.len() as f64;
        let labels = labels.to_vec();
        Ok(self.push(Tensor::scalar(loss), Op::SoftmaxCrossEntropy { logits, labels, probs }))
    }

    /// Sum over the batch of `logits[:, class]`.
    pub fn select_class(&mut self, logits: Var, class: usize) -> Result<Var> {
        let x = self.value(logits);
        let s = x.shape();
        if s.len() != 2 {
            return Err(Error::shape("select_class", format!("expected 2-d logits, got {s:?}")));
        }
        if class >= s[1] {
            return Err(Error::ClassOutOfRange { index: class, classes: s[1] });
        }
        let total = x.data().chunks_exact(s[1]).map(|row| row[class]).sum();
        Ok(self.push(Tensor::scalar(total), Op::SelectClass { logits, class }))
    }

    pub fn sum(&mut self, input: Var) -> Var {
        let total = self.value(input).data().iter().sum();
        self.push(Tensor::scalar(total), Op::Sum { input })
    }

    pub fn square(&mut self, input: Var) -> Var {
        let value = self.value(input).map(|v| v * v);
        self.push(value, Op::Square { input })
    }

    /// `batch x ... -> batch x features`.
    pub fn flatten(&mut self, input: Var) -> Result<Var> {
        let x = self.value(input);
        let n = x.shape()[0];
        let value = x.reshape(vec![n, x.numel() / n])?;
        Ok(self.push(value, Op::Flatten { input }))
    }

    /// Reverse sweep from a scalar node. The tape itself is not modified,
    /// so calling this repeatedly yields identical gradients.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let root = &self.nodes[loss.0].value;
        if !root.is_scalar() {
            return Err(Error::NotScalar(root.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::filled(root.shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(upstream) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::Conv2d { input, kernels, bias, stride, padding } => {
                    let (gi, gk, gb) = self.conv2d_backward(*input, *kernels, &upstream, *stride, *padding);
                    accumulate(&mut grads, *input, gi);
                    accumulate(&mut grads, *kernels, gk);
                    accumulate(&mut grads, *bias, gb);
                }
                Op::Relu { input } => {
                    let x = self.value(*input);
                    let data = x
                        .data()
                        .iter()
                        .zip(upstream.data())
                        .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
                        .collect();
                    accumulate(&mut grads, *input, Tensor::new(x.shape().to_vec(), data)?);
                }
                Op::GlobalAvgPool { input } => {
                    let x = self.value(*input);
                    let s = x.shape();
                    let z = s[2] * s[3];
                    let mut data = Vec::with_capacity(x.numel());
                    for &g in upstream.data() {
                        let share = g / z as f64;
                        data.extend(std::iter::repeat(share).take(z));
                    }
                    accumulate(&mut grads, *input, Tensor::new(s.to_vec(), data)?);
                }
                Op::Dense { input, weights, bias } => {
                    let x = self.value(*input);
                    let wt = self.value(*weights);
                    let (n, f, o) = (x.shape()[0], x.shape()[1], wt.shape()[1]);
                    let (xd, wd, gd) = (x.data(), wt.data(), upstream.data());
                    let mut gx = vec![0.0; n * f];
                    let mut gw = vec![0.0; f * o];
                    let mut gb = vec![0.0; o];
                    for r in 0..n {
                        let grow = &gd[r * o..][..o];
                        for i in 0..f {
                            let xv = xd[r * f + i];
                            let mut acc = 0.0;
                            for j in 0..o {
                                acc += grow[j] * wd[i * o + j];
                                gw[i * o + j] += xv * grow[j];
                            }
                            gx[r * f + i] = acc;
                        }
                        for j in 0..o {
                            gb[j] += grow[j];
                        }
                    }
                    accumulate(&mut grads, *input, Tensor::new(vec![n, f], gx)?);
                    accumulate(&mut grads, *weights, Tensor::new(vec![f, o], gw)?);
                    accumulate(&mut grads, *bias, Tensor::new(vec![o], gb)?);
                }
                Op::Dropout { input, mask } => {
                    let data = upstream.data().iter().zip(mask).map(|(g, m)| g * m).collect();
                    accumulate(&mut grads, *input, Tensor::new(upstream.shape().to_vec(), data)?);
                }
                Op::SoftmaxCrossEntropy { logits, labels, probs } => {
                    let g = upstream.data()[0] / labels.len() as f64;
                    let shape = self.value(*logits).shape().to_vec();
                    let classes = shape[1];
                    let mut data = probs.clone();
                    for (r, &label) in labels.iter().enumerate() {
                        data[r * classes + label] -= 1.0;
                    }
                    data.iter_mut().for_each(|v| *v *= g);
                    accumulate(&mut grads, *logits, Tensor::new(shape, data)?);
                }
                Op::SelectClass { logits, class } => {
                    let g = upstream.data()[0];
                    let shape = self.value(*logits).shape().to_vec();
                    let mut t = Tensor::zeros(&shape);
                    let classes = shape[1];
                    for row in t.data_mut().chunks_exact_mut(classes) {
                        row[*class] = g;
                    }
                    accumulate(&mut grads, *logits, t);
                }
                Op::Sum { input } => {
                    let g = upstream.data()[0];
                    accumulate(&mut grads, *input, Tensor::filled(self.value(*input).shape(), g));
                }
                Op::Square { input } => {
                    let x = self.value(*input);
                    let data = x.data().iter().zip(upstream.data()).map(|(v, g)| 2.0 * v * g).collect();
                    accumulate(&mut grads, *input, Tensor::new(x.shape().to_vec(), data)?);
                }
                Op::Flatten { input } => {
                    let shape = self.value(*input).shape().to_vec();
                    accumulate(&mut grads, *input, upstream.reshape(shape)?);
                }
            }
            grads[idx] = Some(upstream);
        }

        let grads = grads
            .into_iter()
            .zip(&self.nodes)
            .map(|(g, node)| g.unwrap_or_else(|| Tensor::zeros(node.value.shape())))
            .collect();
        Ok(Gradients { grads })
    }

    fn conv2d_backward(
        &self,
        input: Var,
        kernels: Var,
        upstream: &Tensor,
        stride: usize,
        padding: usize,
    ) -> (Tensor, Tensor, Tensor) {
        let x = self.value(input);
        let k = self.value(kernels);
        let (xs, ks, us) = (x.shape(), k.shape(), upstream.shape());
        let (n, c, h, w) = (xs[0], xs[1], xs[2], xs[3]);
        let (o, kh, kw) = (ks[0], ks[2], ks[3]);
        let (oh, ow) = (us[2], us[3]);
        let (xd, kd, ud) = (x.data(), k.data(), upstream.data());

        let mut gx = vec![0.0; x.numel()];
        let mut gk = vec![0.0; k.numel()];
        let mut gb = vec![0.0; o];
        for ni in 0..n {
            for oi in 0..o {
                let uplane = &ud[(ni * o + oi) * oh * ow..][..oh * ow];
                gb[oi] += uplane.iter().sum::<f64>();
                for ci in 0..c {
                    let base = (ni * c + ci) * h * w;
                    for khi in 0..kh {
                        let (y_lo, y_hi) = valid_range(oh, h, khi, stride, padding);
                        for kwi in 0..kw {
                            let kidx = ((oi * c + ci) * kh + khi) * kw + kwi;
                            let wgt = kd[kidx];
                            let (x_lo, x_hi) = valid_range(ow, w, kwi, stride, padding);
                            let mut acc = 0.0;
                            for oy in y_lo..y_hi {
                                let iy = oy * stride + khi - padding;
                                let row = base + iy * w;
                                let urow = &uplane[oy * ow..][..ow];
                                for ox in x_lo..x_hi {
                                    let ix = row + ox * stride + kwi - padding;
                                    let g = urow[ox];
                                    acc += g * xd[ix];
                                    gx[ix] += g * wgt;
                                }
                            }
                            gk[kidx] += acc;
                        }
                    }
                }
            }
        }
        (
            Tensor::new(xs.to_vec(), gx).expect("input gradient shape"),
            Tensor::new(ks.to_vec(), gk).expect("kernel gradient shape"),
            Tensor::new(vec![o], gb).expect("bias gradient shape"),
        )
    }
}

fn accumulate(grads: &mut [Option<Tensor>], var: Var, g: Tensor) {
    match &mut grads[var.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

/// Gradient of the backward root with respect to every node on the tape.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Tensor>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> &Tensor {
        &self.grads[var.0]
    }

    pub fn take(mut self, vars: &[Var]) -> Vec<Tensor> {
        vars.iter()
            .map(|v| std::mem::replace(&mut self.grads[v.0], Tensor::scalar(0.0)))
            .collect()
    }
}
