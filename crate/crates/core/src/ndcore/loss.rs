use super::layer::{log_sum_exp, softmax};
use super::Tensor;
use crate::{Error, Result};

/// Cross-entropy of `softmax(logits)` against `target`, with its gradient
/// `softmax(logits) - one_hot(target)`.
pub fn softmax_cross_entropy(logits: &Tensor, target: usize) -> Result<(f64, Tensor)> {
    let xs = logits.data();
    if target >= xs.len() {
        return Err(Error::ClassOutOfRange {
            class: target,
            classes: xs.len(),
        });
    }
    let loss = (log_sum_exp(xs) - xs[target]).max(0.0);
    let mut grad = softmax(xs);
    grad[target] -= 1.0;
    Ok((loss, Tensor::new(logits.shape().to_vec(), grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_k() {
        for k in 2..6 {
            let (loss, _) = softmax_cross_entropy(&Tensor::from_vec(vec![0.3; k]), 1).unwrap();
            assert!((loss - (k as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn dominant_target_gives_zero_loss() {
        let (loss, grad) = softmax_cross_entropy(&Tensor::from_vec(vec![800.0, 0.0, -3.0]), 0).unwrap();
        assert!(loss < 1e-300);
        assert!(grad.is_finite());
    }

    #[test]
    fn two_class_gradient() {
        let (_, grad) = softmax_cross_entropy(&Tensor::from_vec(vec![0.0, 0.0]), 0).unwrap();
        assert_eq!(grad.data(), &[-0.5, 0.5]);
    }

    #[test]
    fn gradient_sums_to_zero() {
        let (_, grad) = softmax_cross_entropy(&Tensor::from_vec(vec![1.5, -0.2, 3.3, 0.7]), 2).unwrap();
        assert!(grad.data().iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn out_of_range_target() {
        assert!(matches!(
            softmax_cross_entropy(&Tensor::from_vec(vec![0.0, 1.0]), 2),
            Err(Error::ClassOutOfRange { class: 2, classes: 2 })
        ));
    }
}
