use rand::Rng;

use crate::ndcore::{log_sum_exp, softmax, Gradients, Layer, Network, Tape, Tensor, DEFAULT_NORM_EPS};
use crate::{Error, Result};

pub const DEFAULT_LATENT_DIM: usize = 128;
pub const DEFAULT_GENERATOR_HIDDEN: [usize; 4] = [128, 256, 256, 256];
pub const DEFAULT_DISCRIMINATOR_HIDDEN: [usize; 2] = [128, 64];
/// Widths at or above this (and divisible by 32) get the transposed-convolution body.
pub const CONV_BODY_MIN_WIDTH: usize = 512;
const CONV_CHANNELS: [usize; 6] = [128, 64, 32, 16, 8, 1];

/// Conditional generator: `(z, one_hot(class)) -> feature vector`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorNet {
    net: Network,
    latent_dim: usize,
    n_classes: usize,
    width: usize,
}

impl GeneratorNet {
    /// Dense body: one Dense stage per hidden width plus a linear output stage,
    /// with InstanceNorm + PReLU after every stage but the last.
    pub fn mlp<R: Rng + ?Sized>(latent_dim: usize, n_classes: usize, width: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        let mut layers = Vec::new();
        let mut prev = latent_dim + n_classes;
        for &h in hidden {
            layers.push(Layer::dense(prev, h, rng)?);
            layers.push(Layer::instance_norm(DEFAULT_NORM_EPS)?);
            layers.push(Layer::prelu(h)?);
            prev = h;
        }
        layers.push(Layer::dense(prev, width, rng)?);
        Self::from_network(Network::new(layers), latent_dim, n_classes, width)
    }

    /// Projection to 128 channels followed by five stride-2 transposed
    /// convolutions (64, 32, 16, 8, 1 output channels). `width` must be a
    /// multiple of 32.
    pub fn conv<R: Rng + ?Sized>(latent_dim: usize, n_classes: usize, width: usize, rng: &mut R) -> Result<Self> {
        if width % 32 != 0 {
            return Err(Error::invalid("convolutional generator needs a width divisible by 32"));
        }
        let seed_len = width / 32;
        let mut layers = vec![
            Layer::dense(latent_dim + n_classes, CONV_CHANNELS[0] * seed_len, rng)?,
            Layer::instance_norm(DEFAULT_NORM_EPS)?,
            Layer::prelu(CONV_CHANNELS[0])?,
        ];
        for (i, pair) in CONV_CHANNELS.windows(2).enumerate() {
            layers.push(Layer::conv_transpose1d(pair[0], pair[1], 4, 2, 1, rng)?);
            if i + 2 < CONV_CHANNELS.len() {
                layers.push(Layer::instance_norm(DEFAULT_NORM_EPS)?);
                layers.push(Layer::prelu(pair[1])?);
            }
        }
        Self::from_network(Network::new(layers), latent_dim, n_classes, width)
    }

    /// The default architecture for a dataset width.
    pub fn for_width<R: Rng + ?Sized>(latent_dim: usize, n_classes: usize, width: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        if width >= CONV_BODY_MIN_WIDTH && width % 32 == 0 {
            Self::conv(latent_dim, n_classes, width, rng)
        } else {
            Self::mlp(latent_dim, n_classes, width, hidden, rng)
        }
    }

    pub fn from_network(net: Network, latent_dim: usize, n_classes: usize, width: usize) -> Result<Self> {
        let out = net.check_composition(&[latent_dim + n_classes])?;
        if out.iter().product::<usize>() != width {
            return Err(Error::invalid(format!("generator output {out:?} does not have width {width}")));
        }
        Ok(Self {
            net,
            latent_dim,
            n_classes,
            width,
        })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn input(&self, z: &[f64], class: usize) -> Result<Tensor> {
        if z.len() != self.latent_dim {
            return Err(Error::invalid(format!(
                "latent vector has {} values, generator expects {}",
                z.len(),
                self.latent_dim
            )));
        }
        if class >= self.n_classes {
            return Err(Error::ClassOutOfRange {
                class,
                classes: self.n_classes,
            });
        }
        let mut v = Vec::with_capacity(self.latent_dim + self.n_classes);
        v.extend_from_slice(z);
        v.extend((0..self.n_classes).map(|c| if c == class { 1.0 } else { 0.0 }));
        Ok(Tensor::from_vec(v))
    }

    /// `G(z, class)`.
    pub fn generate(&self, z: &[f64], class: usize) -> Result<Vec<f64>> {
        Ok(self.net.forward(&self.input(z, class)?)?.into_data())
    }

    pub fn generate_tape(&self, z: &[f64], class: usize) -> Result<Tape> {
        self.net.forward_tape(&self.input(z, class)?)
    }
}

/// Everything a discriminator pass exposes for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct Discrimination {
    pub class_logits: Vec<f64>,
    pub fake_logit: f64,
    pub embedding: Vec<f64>,
    /// Softmax over the K+1 logits.
    pub probs: Vec<f64>,
    /// `1 - p_fake`.
    pub realness: f64,
}

impl Discrimination {
    pub fn p_fake(&self) -> f64 {
        *self.probs.last().expect("K+1 probabilities")
    }

    /// Argmax over the class logits, lowest index on ties.
    pub fn best_class(&self) -> usize {
        argmax(&self.class_logits)
    }

    /// `p_fake / (1 - p_fake)` evaluated in log space from the logits.
    pub fn odds_fake(&self) -> f64 {
        (self.fake_logit - log_sum_exp(&self.class_logits)).exp()
    }
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate() {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

/// K+1-way discriminator: an embedding body followed by a linear head with
/// K class logits and one fake logit (last index).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorNet {
    body: Network,
    head: Network,
    n_classes: usize,
    width: usize,
    embed_dim: usize,
}

/// Parameter gradients for both parts of a discriminator.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscGradients {
    pub body: Gradients,
    pub head: Gradients,
}

impl DiscGradients {
    pub fn zeros_like(d: &DiscriminatorNet) -> Self {
        Self {
            body: Gradients::zeros_like(&d.body),
            head: Gradients::zeros_like(&d.head),
        }
    }

    pub fn add_assign(&mut self, other: &DiscGradients) {
        self.body.add_assign(&other.body);
        self.head.add_assign(&other.head);
    }

    pub fn scale(&mut self, f: f64) {
        self.body.scale(f);
        self.head.scale(f);
    }
}

impl DiscriminatorNet {
    /// Dense + PReLU stages over `hidden`; the last hidden activation is the embedding.
    pub fn mlp<R: Rng + ?Sized>(width: usize, n_classes: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        if hidden.is_empty() {
            return Err(Error::invalid("discriminator needs at least one hidden stage"));
        }
        let mut layers = Vec::new();
        let mut prev = width;
        for &h in hidden {
            layers.push(Layer::dense(prev, h, rng)?);
            layers.push(Layer::prelu(h)?);
            prev = h;
        }
        let head = Network::new(vec![Layer::dense(prev, n_classes + 1, rng)?]);
        Self::from_parts(Network::new(layers), head, n_classes, width)
    }

    pub fn from_parts(body: Network, head: Network, n_classes: usize, width: usize) -> Result<Self> {
        if n_classes == 0 {
            return Err(Error::invalid("discriminator needs at least one class"));
        }
        let emb = body.check_composition(&[width])?;
        let embed_dim = emb.iter().product();
        let out = head.check_composition(&emb)?;
        if out.iter().product::<usize>() != n_classes + 1 {
            return Err(Error::invalid(format!(
                "discriminator head yields {out:?}, expected {} logits",
                n_classes + 1
            )));
        }
        Ok(Self {
            body,
            head,
            n_classes,
            width,
            embed_dim,
        })
    }

    pub fn body(&self) -> &Network {
        &self.body
    }

    pub fn head(&self) -> &Network {
        &self.head
    }

    pub fn body_mut(&mut self) -> &mut Network {
        &mut self.body
    }

    pub fn head_mut(&mut self) -> &mut Network {
        &mut self.head
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Index of the fake logit.
    pub fn fake_index(&self) -> usize {
        self.n_classes
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    fn check_width(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.width {
            return Err(Error::ShapeMismatch {
                layer: 0,
                expected: format!("{} input values", self.width),
                got: vec![x.len()],
            });
        }
        Ok(())
    }

    pub fn embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_width(x)?;
        Ok(self.body.forward(&Tensor::from_vec(x.to_vec()))?.into_data())
    }

    /// All K+1 logits.
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_width(x)?;
        let e = self.body.forward(&Tensor::from_vec(x.to_vec()))?;
        Ok(self.head.forward(&e)?.into_data())
    }

    pub fn discriminate(&self, x: &[f64]) -> Result<Discrimination> {
        self.check_width(x)?;
        let e = self.body.forward(&Tensor::from_vec(x.to_vec()))?;
        let logits = self.head.forward(&e)?.into_data();
        Ok(Self::readout(logits, e.into_data()))
    }

    pub(crate) fn readout(logits: Vec<f64>, embedding: Vec<f64>) -> Discrimination {
        let probs = softmax(&logits);
        let realness = 1.0 - probs[probs.len() - 1];
        let (class_logits, fake) = logits.split_at(logits.len() - 1);
        Discrimination {
            class_logits: class_logits.to_vec(),
            fake_logit: fake[0],
            embedding,
            probs,
            realness,
        }
    }

    /// Body tape for `x`.
    pub fn body_tape(&self, x: &[f64]) -> Result<Tape> {
        self.check_width(x)?;
        self.body.forward_tape(&Tensor::from_vec(x.to_vec()))
    }

    /// Cross-entropy of the K+1 softmax against `target` for one input.
    /// Adds parameter gradients into `grads` and returns the loss.
    pub fn cross_entropy_grad(&self, x: &[f64], target: usize, grads: &mut DiscGradients) -> Result<f64> {
        let body_tape = self.body_tape(x)?;
        let head_tape = self.head.forward_tape(body_tape.output())?;
        let (loss, dlogits) = crate::ndcore::softmax_cross_entropy(head_tape.output(), target)?;
        let demb = self.head.backward_tape(&head_tape, &dlogits, Some(&mut grads.head))?;
        self.body.backward_tape(&body_tape, &demb, Some(&mut grads.body))?;
        Ok(loss)
    }

    /// Gradient of `upstream . embedding(x)` with respect to `x`, no parameter gradients.
    pub fn embedding_input_grad(&self, tape: &Tape, upstream: &[f64]) -> Result<Vec<f64>> {
        let g = Tensor::new(tape.output().shape().to_vec(), upstream.to_vec())?;
        Ok(self.body.backward_tape(tape, &g, None)?.into_data())
    }

    /// Copies gradient buffers into the layers (overwriting).
    pub fn set_gradients(&mut self, grads: &DiscGradients) {
        self.body.zero_grad();
        self.body.accumulate(&grads.body);
        self.head.zero_grad();
        self.head.accumulate(&grads.head);
    }
}
