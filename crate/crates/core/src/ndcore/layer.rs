//! Differentiable layers.
//!
//! Every layer maps one instance (a single sample, not a batch) to one
//! output. Backward receives the cached input and output of the matching
//! forward call and adds parameter gradients into a caller-provided buffer.

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::Tensor;
use crate::{Error, Result};

pub const DEFAULT_PRELU_SLOPE: f64 = 0.25;
pub const DEFAULT_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerKind {
    /// `y = W x + b`, `W` stored as `[outputs, inputs]`. Input is flattened.
    Dense { inputs: usize, outputs: usize },
    /// Leaky rectifier with a learned slope per channel. The input's values
    /// are split into `channels` equal contiguous groups.
    PRelu { channels: usize },
    /// Zero-mean, unit-variance normalization per instance (per row for
    /// rank-2 `[channels, length]` inputs). No affine terms.
    InstanceNorm { eps: f64 },
    /// 1-D transposed convolution over `[in_channels, length]` inputs.
    /// Output length is `(length - 1) * stride + kernel - 2 * padding`.
    ConvTranspose1d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    /// Softmax over `classes` values.
    SoftmaxHead { classes: usize },
}

impl LayerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LayerKind::Dense { .. } => "dense",
            LayerKind::PRelu { .. } => "prelu",
            LayerKind::InstanceNorm { .. } => "instance_norm",
            LayerKind::ConvTranspose1d { .. } => "conv_transpose1d",
            LayerKind::SoftmaxHead { .. } => "softmax_head",
        }
    }

    /// Shapes of the parameter tensors for this kind.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        match *self {
            LayerKind::Dense { inputs, outputs } => vec![vec![outputs, inputs], vec![outputs]],
            LayerKind::PRelu { channels } => vec![vec![channels]],
            LayerKind::InstanceNorm { .. } | LayerKind::SoftmaxHead { .. } => vec![],
            LayerKind::ConvTranspose1d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => vec![vec![in_channels, out_channels, kernel], vec![out_channels]],
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            LayerKind::Dense { inputs, outputs } => inputs > 0 && outputs > 0,
            LayerKind::PRelu { channels } => channels > 0,
            LayerKind::InstanceNorm { eps } => eps > 0.0 && eps.is_finite(),
            LayerKind::ConvTranspose1d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => in_channels > 0 && out_channels > 0 && kernel >= 1 && stride >= 1 && 2 * padding < kernel,
            LayerKind::SoftmaxHead { classes } => classes > 0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid layer configuration {self:?}")))
        }
    }

    /// Output shape for a given input shape, or a description of what was expected.
    pub fn output_shape(&self, input: &[usize]) -> std::result::Result<Vec<usize>, String> {
        let numel: usize = input.iter().product();
        match *self {
            LayerKind::Dense { inputs, outputs } => {
                if numel == inputs {
                    Ok(vec![outputs])
                } else {
                    Err(format!("{inputs} input values"))
                }
            }
            LayerKind::PRelu { channels } => {
                if numel % channels == 0 {
                    Ok(input.to_vec())
                } else {
                    Err(format!("a multiple of {channels} values"))
                }
            }
            LayerKind::InstanceNorm { .. } => Ok(input.to_vec()),
            LayerKind::ConvTranspose1d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                if numel % in_channels != 0 {
                    return Err(format!("a multiple of {in_channels} values"));
                }
                let len = numel / in_channels;
                let full = (len - 1) * stride + kernel;
                Ok(vec![out_channels, full - 2 * padding])
            }
            LayerKind::SoftmaxHead { classes } => {
                if numel == classes {
                    Ok(vec![classes])
                } else {
                    Err(format!("{classes} values"))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    kind: LayerKind,
    params: Vec<Tensor>,
    grads: Vec<Tensor>,
}

impl Layer {
    /// Builds a layer from explicit parameters, checking their shapes.
    pub fn from_parts(kind: LayerKind, params: Vec<Tensor>) -> Result<Self> {
        kind.validate()?;
        let shapes = kind.param_shapes();
        if shapes.len() != params.len()
            || shapes.iter().zip(&params).any(|(s, p)| s.as_slice() != p.shape())
        {
            return Err(Error::invalid(format!(
                "{} expects parameter shapes {shapes:?}",
                kind.name()
            )));
        }
        let grads = shapes.iter().map(|s| Tensor::zeros(s)).collect();
        Ok(Self { kind, params, grads })
    }

    /// Dense layer with weights and biases drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn dense<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Result<Self> {
        let kind = LayerKind::Dense { inputs, outputs };
        kind.validate()?;
        let w = uniform_tensor(&[outputs, inputs], inputs, rng);
        let b = uniform_tensor(&[outputs], inputs, rng);
        Self::from_parts(kind, vec![w, b])
    }

    pub fn prelu(channels: usize) -> Result<Self> {
        let kind = LayerKind::PRelu { channels };
        kind.validate()?;
        Self::from_parts(kind, vec![Tensor::filled(&[channels], DEFAULT_PRELU_SLOPE)])
    }

    pub fn instance_norm(eps: f64) -> Result<Self> {
        Self::from_parts(LayerKind::InstanceNorm { eps }, vec![])
    }

    pub fn conv_transpose1d<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let kind = LayerKind::ConvTranspose1d {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
        };
        kind.validate()?;
        let fan_in = in_channels * kernel;
        let w = uniform_tensor(&[in_channels, out_channels, kernel], fan_in, rng);
        let b = uniform_tensor(&[out_channels], fan_in, rng);
        Self::from_parts(kind, vec![w, b])
    }

    pub fn softmax_head(classes: usize) -> Result<Self> {
        Self::from_parts(LayerKind::SoftmaxHead { classes }, vec![])
    }

    pub fn kind(&self) -> &LayerKind {
        &self.kind
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn grads(&self) -> &[Tensor] {
        &self.grads
    }

    pub fn grads_mut(&mut self) -> &mut [Tensor] {
        &mut self.grads
    }

    pub(crate) fn params_and_grads_mut(&mut self) -> (&mut [Tensor], &mut [Tensor]) {
        (&mut self.params, &mut self.grads)
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| g.fill(0.0));
    }

    pub fn num_params(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Forward pass for one instance. `index` is only used in error reports.
    pub fn forward(&self, index: usize, x: &Tensor) -> Result<Tensor> {
        let out_shape = self.kind.output_shape(x.shape()).map_err(|expected| Error::ShapeMismatch {
            layer: index,
            expected,
            got: x.shape().to_vec(),
        })?;
        let xs = x.data();
        let out = match self.kind {
            LayerKind::Dense { inputs, outputs } => {
                let w = self.params[0].data();
                let b = self.params[1].data();
                (0..outputs)
                    .map(|o| b[o] + dot(&w[o * inputs..(o + 1) * inputs], xs))
                    .collect()
            }
            LayerKind::PRelu { channels } => {
                let a = self.params[0].data();
                let group = xs.len() / channels;
                xs.iter()
                    .enumerate()
                    .map(|(i, &v)| if v > 0.0 { v } else { a[i / group] * v })
                    .collect()
            }
            LayerKind::InstanceNorm { eps } => {
                let mut y = xs.to_vec();
                let group = norm_group(x.shape());
                for chunk in y.chunks_mut(group) {
                    let (mean, var) = mean_var(chunk);
                    let inv = 1.0 / (var + eps).sqrt();
                    chunk.iter_mut().for_each(|v| *v = (*v - mean) * inv);
                }
                y
            }
            LayerKind::ConvTranspose1d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                let len = xs.len() / in_channels;
                let out_len = out_shape[1];
                let w = self.params[0].data();
                let b = self.params[1].data();
                let mut y = vec![0.0; out_channels * out_len];
                for (o, row) in y.chunks_mut(out_len).enumerate() {
                    row.iter_mut().for_each(|v| *v = b[o]);
                }
                for i in 0..in_channels {
                    for l in 0..len {
                        let xv = xs[i * len + l];
                        for o in 0..out_channels {
                            let wk = &w[(i * out_channels + o) * kernel..(i * out_channels + o + 1) * kernel];
                            let row = &mut y[o * out_len..(o + 1) * out_len];
                            for (j, &wv) in wk.iter().enumerate() {
                                if let Some(t) = (l * stride + j).checked_sub(padding) {
                                    if t < out_len {
                                        row[t] += wv * xv;
                                    }
                                }
                            }
                        }
                    }
                }
                y
            }
            LayerKind::SoftmaxHead { .. } => softmax(xs),
        };
        Tensor::new(out_shape, out)
    }

    /// Backward pass for one instance.
    ///
    /// `input` and `output` are the cached tensors of the forward call.
    /// Parameter gradients are added into `grads` when it is given.
    pub fn backward(
        &self,
        input: &Tensor,
        output: &Tensor,
        upstream: &Tensor,
        grads: Option<&mut [Tensor]>,
    ) -> Tensor {
        let xs = input.data();
        let g = upstream.data();
        let dx = match self.kind {
            LayerKind::Dense { inputs, outputs } => {
                let w = self.params[0].data();
                let mut dx = vec![0.0; inputs];
                for o in 0..outputs {
                    let go = g[o];
                    if go == 0.0 {
                        continue;
                    }
                    for (d, &wv) in dx.iter_mut().zip(&w[o * inputs..(o + 1) * inputs]) {
                        *d += wv * go;
                    }
                }
                if let Some(grads) = grads {
                    let (gw, gb) = grads.split_at_mut(1);
                    let gw = gw[0].data_mut();
                    let gb = gb[0].data_mut();
                    for o in 0..outputs {
                        let go = g[o];
                        gb[o] += go;
                        if go == 0.0 {
                            continue;
                        }
                        for (d, &xv) in gw[o * inputs..(o + 1) * inputs].iter_mut().zip(xs) {
                            *d += go * xv;
                        }
                    }
                }
                dx
            }
            LayerKind::PRelu { channels } => {
                let a = self.params[0].data();
                let group = xs.len() / channels;
                let dx = xs
                    .iter()
                    .zip(g)
                    .enumerate()
                    .map(|(i, (&v, &gv))| if v > 0.0 { gv } else { a[i / group] * gv })
                    .collect();
                if let Some(grads) = grads {
                    let ga = grads[0].data_mut();
                    for (i, (&v, &gv)) in xs.iter().zip(g).enumerate() {
                        if v <= 0.0 {
                            ga[i / group] += gv * v;
                        }
                    }
                }
                dx
            }
            LayerKind::InstanceNorm { eps } => {
                let group = norm_group(input.shape());
                let y = output.data();
                let mut dx = vec![0.0; xs.len()];
                for ((xc, yc), (gc, dc)) in xs
                    .chunks(group)
                    .zip(y.chunks(group))
                    .zip(g.chunks(group).zip(dx.chunks_mut(group)))
                {
                    let (_, var) = mean_var(xc);
                    let inv = 1.0 / (var + eps).sqrt();
                    let n = group as f64;
                    let mean_g = gc.iter().sum::<f64>() / n;
                    let mean_gy = dot(gc, yc) / n;
                    for ((d, &gv), &yv) in dc.iter_mut().zip(gc).zip(yc) {
                        *d = inv * (gv - mean_g - yv * mean_gy);
                    }
                }
                dx
            }
            LayerKind::ConvTranspose1d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                let len = xs.len() / in_channels;
                let out_len = output.shape()[1];
                let w = self.params[0].data();
                let mut dx = vec![0.0; xs.len()];
                let mut grads = grads;
                for i in 0..in_channels {
                    for l in 0..len {
                        let xv = xs[i * len + l];
                        let mut acc = 0.0;
                        for o in 0..out_channels {
                            let base = (i * out_channels + o) * kernel;
                            let row = &g[o * out_len..(o + 1) * out_len];
                            for j in 0..kernel {
                                if let Some(t) = (l * stride + j).checked_sub(padding) {
                                    if t < out_len {
                                        acc += w[base + j] * row[t];
                                        if let Some(gr) = grads.as_deref_mut() {
                                            gr[0].data_mut()[base + j] += xv * row[t];
                                        }
                                    }
                                }
                            }
                        }
                        dx[i * len + l] = acc;
                    }
                }
                if let Some(gr) = grads {
                    let gb = gr[1].data_mut();
                    for (o, row) in g.chunks(out_len).enumerate() {
                        gb[o] += row.iter().sum::<f64>();
                    }
                }
                dx
            }
            LayerKind::SoftmaxHead { .. } => {
                let y = output.data();
                let s = dot(g, y);
                y.iter().zip(g).map(|(&yv, &gv)| yv * (gv - s)).collect()
            }
        };
        Tensor::new(input.shape().to_vec(), dx).expect("input gradient matches input shape")
    }
}

fn uniform_tensor<R: Rng + ?Sized>(shape: &[usize], fan_in: usize, rng: &mut R) -> Tensor {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| dist.sample(rng)).collect()).expect("shape")
}

/// Values per normalization group: one row for rank-2 inputs, everything otherwise.
fn norm_group(shape: &[usize]) -> usize {
    if shape.len() == 2 {
        shape[1]
    } else {
        shape.iter().product()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Numerically stable softmax.
pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `log(sum(exp(xs)))`, stable for large magnitudes.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn t(v: &[f64]) -> Tensor {
        Tensor::from_vec(v.to_vec())
    }

    #[test]
    fn dense_identity() {
        let w = Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let layer = Layer::from_parts(LayerKind::Dense { inputs: 2, outputs: 2 }, vec![w, Tensor::zeros(&[2])]).unwrap();
        assert_eq!(layer.forward(0, &t(&[3.0, 5.0])).unwrap().data(), &[3.0, 5.0]);
    }

    #[test]
    fn prelu_forward_and_backward() {
        let layer = Layer::prelu(1).unwrap();
        let x = t(&[-2.0, 3.0]);
        let y = layer.forward(0, &x).unwrap();
        assert_eq!(y.data(), &[-0.5, 3.0]);

        let x = t(&[-2.0]);
        let y = layer.forward(0, &x).unwrap();
        let mut grads = vec![Tensor::zeros(&[1])];
        let dx = layer.backward(&x, &y, &t(&[1.0]), Some(&mut grads));
        assert_eq!(dx.data(), &[0.25]);
        assert_eq!(grads[0].data(), &[-2.0]);
    }

    #[test]
    fn instance_norm_two_values() {
        let layer = Layer::instance_norm(1e-15).unwrap();
        let y = layer.forward(0, &t(&[1.0, 3.0])).unwrap();
        assert!((y.data()[0] + 1.0).abs() < 1e-9);
        assert!((y.data()[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn instance_norm_moments() {
        let eps = 1e-5;
        let layer = Layer::instance_norm(eps).unwrap();
        let x = Tensor::new(vec![2, 4], vec![0.1, 0.4, -0.3, 0.9, 5.0, 7.0, 6.0, 2.0]).unwrap();
        let y = layer.forward(0, &x).unwrap();
        for (xc, yc) in x.data().chunks(4).zip(y.data().chunks(4)) {
            let (_, var_x) = mean_var(xc);
            let (m, v) = mean_var(yc);
            assert!(m.abs() <= 1e-9);
            assert!((v - var_x / (var_x + eps)).abs() <= 1e-6);
        }
    }

    #[test]
    fn unit_conv_transpose_is_scaling() {
        let kind = LayerKind::ConvTranspose1d {
            in_channels: 1,
            out_channels: 1,
            kernel: 1,
            stride: 1,
            padding: 0,
        };
        let layer = Layer::from_parts(
            kind,
            vec![Tensor::new(vec![1, 1, 1], vec![2.5]).unwrap(), Tensor::zeros(&[1])],
        )
        .unwrap();
        let x = Tensor::new(vec![1, 3], vec![1.0, -2.0, 4.0]).unwrap();
        let y = layer.forward(0, &x).unwrap();
        assert_eq!(y.data(), &[2.5, -5.0, 10.0]);
        let mut grads = vec![Tensor::zeros(&[1, 1, 1]), Tensor::zeros(&[1])];
        let dx = layer.backward(&x, &y, &Tensor::new(vec![1, 3], vec![1.0, 1.0, 1.0]).unwrap(), Some(&mut grads));
        assert_eq!(dx.data(), &[2.5, 2.5, 2.5]);
        assert_eq!(grads[0].data(), &[3.0]);
        assert_eq!(grads[1].data(), &[3.0]);
    }

    #[test]
    fn conv_transpose_output_length() {
        let mut rng = seeded(1);
        let layer = Layer::conv_transpose1d(4, 2, 4, 2, 1, &mut rng).unwrap();
        let x = Tensor::new(vec![4, 8], vec![0.5; 32]).unwrap();
        assert_eq!(layer.forward(0, &x).unwrap().shape(), &[2, 16]);
    }

    #[test]
    fn softmax_head_sums_to_one() {
        let layer = Layer::softmax_head(3).unwrap();
        let y = layer.forward(0, &t(&[1.0, 2.0, 1000.0])).unwrap();
        assert!((y.data().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(y.is_finite());
    }

    #[test]
    fn shape_mismatch_names_layer() {
        let mut rng = seeded(0);
        let layer = Layer::dense(3, 2, &mut rng).unwrap();
        match layer.forward(7, &t(&[1.0, 2.0])) {
            Err(Error::ShapeMismatch { layer: 7, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_kinds_rejected() {
        assert!(Layer::instance_norm(0.0).is_err());
        let mut rng = seeded(0);
        assert!(Layer::conv_transpose1d(1, 1, 0, 1, 0, &mut rng).is_err());
        assert!(Layer::conv_transpose1d(1, 1, 2, 0, 0, &mut rng).is_err());
    }

    #[test]
    fn dense_init_bounds() {
        let mut rng = seeded(3);
        let layer = Layer::dense(16, 8, &mut rng).unwrap();
        assert!(layer.params()[0].data().iter().all(|w| w.abs() <= 0.25));
    }
}
