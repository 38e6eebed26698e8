use super::{Layer, Tensor};
use crate::{Error, Result};

/// Activations recorded by one forward pass: the input followed by each layer's output.
#[derive(Debug, Clone)]
pub struct Tape {
    acts: Vec<Tensor>,
}

impl Tape {
    pub fn output(&self) -> &Tensor {
        self.acts.last().expect("tape holds at least the input")
    }

    pub fn input(&self) -> &Tensor {
        &self.acts[0]
    }

    pub fn activation(&self, layer: usize) -> &Tensor {
        &self.acts[layer + 1]
    }
}

/// Parameter gradients for every layer of a network, shaped like its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(Vec<Vec<Tensor>>);

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Gradients(
            net.layers
                .iter()
                .map(|l| l.params().iter().map(|p| Tensor::zeros(p.shape())).collect())
                .collect(),
        )
    }

    pub fn layers(&self) -> &[Vec<Tensor>] {
        &self.0
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (ta, tb) in a.iter_mut().zip(b) {
                ta.add_assign(tb);
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.0.iter_mut().flatten().for_each(|t| t.scale(factor));
    }
}

/// An ordered stack of layers evaluated on one instance at a time.
#[derive(Debug, Clone, Default)]
pub struct Network {
    layers: Vec<Layer>,
    cache: Option<Tape>,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Self {
        Self { layers, cache: None }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn push(&mut self, layer: Layer) {
        self.layers.push(layer);
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Layer::num_params).sum()
    }

    /// Checks that every layer accepts the previous layer's output for `input_shape`
    /// and returns the final output shape.
    pub fn check_composition(&self, input_shape: &[usize]) -> Result<Vec<usize>> {
        let mut shape = input_shape.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            shape = layer.kind().output_shape(&shape).map_err(|expected| Error::ShapeMismatch {
                layer: i,
                expected,
                got: shape.clone(),
            })?;
        }
        Ok(shape)
    }

    /// Pure forward pass.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut cur = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            cur = layer.forward(i, &cur)?;
        }
        Ok(cur)
    }

    /// Forward pass that keeps every activation for a later backward pass.
    pub fn forward_tape(&self, x: &Tensor) -> Result<Tape> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.clone());
        for (i, layer) in self.layers.iter().enumerate() {
            let next = layer.forward(i, acts.last().expect("non-empty"))?;
            acts.push(next);
        }
        Ok(Tape { acts })
    }

    /// Backward pass through a recorded tape. Parameter gradients are added into
    /// `grads` when given; the input gradient is returned.
    pub fn backward_tape(&self, tape: &Tape, upstream: &Tensor, mut grads: Option<&mut Gradients>) -> Result<Tensor> {
        if tape.acts.len() != self.layers.len() + 1 {
            return Err(Error::BackwardWithoutForward);
        }
        if upstream.shape() != tape.output().shape() {
            return Err(Error::ShapeMismatch {
                layer: self.layers.len().saturating_sub(1),
                expected: format!("upstream gradient of shape {:?}", tape.output().shape()),
                got: upstream.shape().to_vec(),
            });
        }
        let mut g = upstream.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let slot = grads.as_deref_mut().map(|gr| gr.0[i].as_mut_slice());
            g = layer.backward(&tape.acts[i], &tape.acts[i + 1], &g, slot);
        }
        Ok(g)
    }

    /// Forward pass that caches activations inside the network for one [`Network::backward`] call.
    pub fn forward_cached(&mut self, x: &Tensor) -> Result<Tensor> {
        let tape = self.forward_tape(x)?;
        let out = tape.output().clone();
        self.cache = Some(tape);
        Ok(out)
    }

    /// Consumes the cached forward pass, overwrites every layer's gradients and
    /// returns the gradient with respect to the input.
    pub fn backward(&mut self, upstream: &Tensor) -> Result<Tensor> {
        let tape = self.cache.take().ok_or(Error::BackwardWithoutForward)?;
        let mut grads = Gradients::zeros_like(self);
        let dx = match self.backward_tape(&tape, upstream, Some(&mut grads)) {
            Ok(dx) => dx,
            Err(e) => {
                self.cache = Some(tape);
                return Err(e);
            }
        };
        self.zero_grad();
        self.accumulate(&grads);
        Ok(dx)
    }

    pub fn zero_grad(&mut self) {
        self.layers.iter_mut().for_each(Layer::zero_grad);
    }

    /// Adds `grads` into the layers' gradient buffers.
    pub fn accumulate(&mut self, grads: &Gradients) {
        for (layer, g) in self.layers.iter_mut().zip(&grads.0) {
            for (dst, src) in layer.grads_mut().iter_mut().zip(g) {
                dst.add_assign(src);
            }
        }
    }

    /// Snapshot of the layers' gradient buffers.
    pub fn gradients(&self) -> Gradients {
        Gradients(self.layers.iter().map(|l| l.grads().to_vec()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndcore::LayerKind;
    use crate::rng::seeded;

    #[test]
    fn dense_weight_grad_is_cached_input() {
        let w = Tensor::new(vec![1, 1], vec![0.7]).unwrap();
        let layer = Layer::from_parts(LayerKind::Dense { inputs: 1, outputs: 1 }, vec![w, Tensor::zeros(&[1])]).unwrap();
        let mut net = Network::new(vec![layer]);
        net.forward_cached(&Tensor::from_vec(vec![3.5])).unwrap();
        net.backward(&Tensor::from_vec(vec![1.0])).unwrap();
        assert_eq!(net.layers()[0].grads()[0].data(), &[3.5]);
        assert_eq!(net.layers()[0].grads()[1].data(), &[1.0]);
    }

    #[test]
    fn backward_requires_forward() {
        let mut rng = seeded(0);
        let mut net = Network::new(vec![Layer::dense(2, 2, &mut rng).unwrap()]);
        assert!(matches!(
            net.backward(&Tensor::from_vec(vec![1.0, 1.0])),
            Err(Error::BackwardWithoutForward)
        ));
        net.forward_cached(&Tensor::from_vec(vec![1.0, 2.0])).unwrap();
        net.backward(&Tensor::from_vec(vec![1.0, 1.0])).unwrap();
        // cache is consumed by the first backward
        assert!(net.backward(&Tensor::from_vec(vec![1.0, 1.0])).is_err());
    }

    #[test]
    fn backward_is_repeatable() {
        let mut rng = seeded(5);
        let mut net = Network::new(vec![
            Layer::dense(3, 4, &mut rng).unwrap(),
            Layer::prelu(4).unwrap(),
            Layer::dense(4, 2, &mut rng).unwrap(),
        ]);
        let x = Tensor::from_vec(vec![0.3, -1.2, 0.8]);
        let up = Tensor::from_vec(vec![0.5, -2.0]);
        net.forward_cached(&x).unwrap();
        let dx1 = net.backward(&up).unwrap();
        let g1 = net.gradients();
        net.forward_cached(&x).unwrap();
        let dx2 = net.backward(&up).unwrap();
        assert_eq!(dx1, dx2);
        assert_eq!(g1, net.gradients());
    }

    #[test]
    fn forward_is_bit_exact() {
        let mut rng = seeded(9);
        let net = Network::new(vec![
            Layer::dense(5, 6, &mut rng).unwrap(),
            Layer::instance_norm(1e-5).unwrap(),
            Layer::prelu(6).unwrap(),
            Layer::dense(6, 3, &mut rng).unwrap(),
            Layer::softmax_head(3).unwrap(),
        ]);
        let x = Tensor::from_vec(vec![0.1, 0.2, -0.3, 0.4, 2.0]);
        let a = net.forward(&x).unwrap();
        let b = net.forward(&x).unwrap();
        assert!(a.data().iter().zip(b.data()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn composition_reports_offending_layer() {
        let mut rng = seeded(1);
        let net = Network::new(vec![Layer::dense(4, 3, &mut rng).unwrap(), Layer::dense(4, 2, &mut rng).unwrap()]);
        assert!(matches!(net.check_composition(&[4]), Err(Error::ShapeMismatch { layer: 1, .. })));
        assert!(matches!(
            net.forward(&Tensor::from_vec(vec![1.0; 4])),
            Err(Error::ShapeMismatch { layer: 1, .. })
        ));
    }
}
