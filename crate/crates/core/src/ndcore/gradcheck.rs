//! Central finite-difference gradient checking.

use super::{Gradients, Network, Tensor};
use crate::Result;

pub const DEFAULT_TOLERANCE: f64 = 1e-4;

/// Relative error `|a - b| / max(|a|, |b|, 1e-12)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamError {
    pub layer: usize,
    pub param: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub params: Vec<ParamError>,
    pub input_max_rel_error: f64,
    pub max_rel_error: f64,
    pub tolerance: f64,
    /// Set when the loss or a gradient was not finite.
    pub failure: Option<String>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none() && self.max_rel_error <= self.tolerance
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }
}

/// Compares backpropagated gradients of `loss_fn(net(x))` against central
/// differences with step `eps`, for every parameter and every input value.
///
/// `loss_fn` returns the scalar loss and its gradient with respect to the
/// network output.
pub fn grad_check<F>(net: &Network, x: &Tensor, loss_fn: F, eps: f64) -> Result<GradCheckReport>
where
    F: Fn(&Tensor) -> (f64, Tensor),
{
    if !(eps > 0.0) {
        return Err(crate::Error::invalid("finite-difference step must be positive"));
    }
    let mut report = GradCheckReport {
        params: Vec::new(),
        input_max_rel_error: 0.0,
        max_rel_error: 0.0,
        tolerance: DEFAULT_TOLERANCE,
        failure: None,
    };

    let tape = net.forward_tape(x)?;
    let (loss, upstream) = loss_fn(tape.output());
    if !loss.is_finite() || !upstream.is_finite() {
        report.failure = Some(format!("non-finite loss {loss}"));
        report.max_rel_error = f64::INFINITY;
        return Ok(report);
    }
    let mut grads = Gradients::zeros_like(net);
    let dx = net.backward_tape(&tape, &upstream, Some(&mut grads))?;

    let eval = |n: &Network, input: &Tensor| -> Result<f64> { Ok(loss_fn(&n.forward(input)?).0) };

    let mut probe = net.clone();
    for (li, layer_grads) in grads.layers().iter().enumerate() {
        for (pi, g) in layer_grads.iter().enumerate() {
            let mut worst: f64 = 0.0;
            for k in 0..g.len() {
                let orig = probe.layers()[li].params()[pi].data()[k];
                probe.layers_mut()[li].params_mut()[pi].data_mut()[k] = orig + eps;
                let plus = eval(&probe, x)?;
                probe.layers_mut()[li].params_mut()[pi].data_mut()[k] = orig - eps;
                let minus = eval(&probe, x)?;
                probe.layers_mut()[li].params_mut()[pi].data_mut()[k] = orig;
                let fd = (plus - minus) / (2.0 * eps);
                if !fd.is_finite() {
                    report.failure = Some(format!("non-finite loss perturbing layer {li} param {pi}"));
                }
                worst = worst.max(relative_error(g.data()[k], fd));
            }
            report.params.push(ParamError {
                layer: li,
                param: pi,
                max_rel_error: worst,
            });
            report.max_rel_error = report.max_rel_error.max(worst);
        }
    }

    let mut xp = x.clone();
    for k in 0..x.len() {
        let orig = x.data()[k];
        xp.data_mut()[k] = orig + eps;
        let plus = eval(net, &xp)?;
        xp.data_mut()[k] = orig - eps;
        let minus = eval(net, &xp)?;
        xp.data_mut()[k] = orig;
        let fd = (plus - minus) / (2.0 * eps);
        report.input_max_rel_error = report.input_max_rel_error.max(relative_error(dx.data()[k], fd));
    }
    report.max_rel_error = report.max_rel_error.max(report.input_max_rel_error);
    Ok(report)
}
