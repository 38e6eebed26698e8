use super::{Network, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    /// DCGAN-style settings.
    fn default() -> Self {
        Self {
            lr: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |b: f64| b > 0.0 && b < 1.0;
        if self.lr > 0.0 && self.lr.is_finite() && unit(self.beta1) && unit(self.beta2) && self.eps > 0.0 {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid Adam hyperparameters {self:?}")))
        }
    }
}

/// Adam moment accumulators for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    first: Vec<Vec<Tensor>>,
    second: Vec<Vec<Tensor>>,
    step: u64,
}

impl AdamState {
    pub fn new(net: &Network, config: AdamConfig) -> Result<Self> {
        config.validate()?;
        let zeros = || -> Vec<Vec<Tensor>> {
            net.layers()
                .iter()
                .map(|l| l.params().iter().map(|p| Tensor::zeros(p.shape())).collect())
                .collect()
        };
        Ok(Self {
            config,
            first: zeros(),
            second: zeros(),
            step: 0,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// Applies one Adam update from the gradients stored in `net`'s layers.
///
/// Refuses the whole step, leaving parameters and state untouched, when any
/// gradient is non-finite.
pub fn adam_step(net: &mut Network, state: &mut AdamState) -> Result<()> {
    if state.first.len() != net.layers().len() {
        return Err(Error::invalid("Adam state does not match network"));
    }
    for (i, layer) in net.layers().iter().enumerate() {
        if layer.grads().iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { layer: i });
        }
    }
    state.step += 1;
    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    for ((layer, m_layer), v_layer) in net.layers_mut().iter_mut().zip(&mut state.first).zip(&mut state.second) {
        let (params, grads) = layer.params_and_grads_mut();
        for (((p, g), m), v) in params.iter_mut().zip(grads.iter()).zip(m_layer).zip(v_layer) {
            for (((pv, &gv), mv), vv) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mv = beta1 * *mv + (1.0 - beta1) * gv;
                *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
                let m_hat = *mv / c1;
                let v_hat = *vv / c2;
                *pv -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
    Ok(())
}
