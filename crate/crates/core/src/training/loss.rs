//! Softmax cross-entropy over the two-output head.

use super::{Result, TrainError};
use crate::dataset::Label;
use crate::model::{softmax, Scalar};
use ndarray::{Array2, Axis};

fn class_index(label: Label) -> usize {
    match label {
        Label::Real => 0,
        Label::Fake => 1,
    }
}

/// Mean softmax cross-entropy and its gradient w.r.t. the logits,
/// `(softmax - one_hot) / batch`.
pub fn compute_loss<F: Scalar>(logits: &Array2<F>, labels: &[Label]) -> Result<(F, Array2<F>)> {
    let (n, classes) = logits.dim();
    if n == 0 {
        return Err(TrainError::EmptyBatch);
    }
    if labels.len() != n {
        return Err(TrainError::LabelMismatch(format!(
            "{n} logit rows vs {} labels",
            labels.len()
        )));
    }
    debug_assert_eq!(classes, 2);

    let batch = crate::model::layers::cast::<F>(n as f64);
    let mut grad = softmax(logits);
    let mut loss = F::zero();
    for (i, label) in labels.iter().enumerate() {
        let target = class_index(*label);
        // log softmax via the stable route: logit - logsumexp.
        let row = logits.index_axis(Axis(0), i);
        let max = row.iter().copied().fold(F::neg_infinity(), F::max);
        let logsumexp = max + row.iter().map(|&v| (v - max).exp()).sum::<F>().ln();
        loss = loss - (row[target] - logsumexp);
        grad[(i, target)] = grad[(i, target)] - F::one();
    }
    grad.mapv_inplace(|v| v / batch);
    Ok((loss / batch, grad))
}

/// Fraction of rows whose argmax matches the label (ties go to fake).
pub(crate) fn batch_accuracy<F: Scalar>(logits: &Array2<F>, labels: &[Label]) -> f64 {
    let mut correct = 0usize;
    for (row, label) in logits.axis_iter(Axis(0)).zip(labels) {
        let predicted = if row[1] >= row[0] { Label::Fake } else { Label::Real };
        if predicted == *label {
            correct += 1;
        }
    }
    correct as f64 / labels.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn uniform_logits_cost_ln_two() {
        let logits = arr2(&[[0.0f64, 0.0]]);
        let (loss, grad) = compute_loss(&logits, &[Label::Fake]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((grad[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((grad[(0, 1)] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_logits_cost_nothing() {
        let logits = arr2(&[[20.0f64, -20.0], [-20.0, 20.0]]);
        let (loss, _) = compute_loss(&logits, &[Label::Real, Label::Fake]).unwrap();
        assert!(loss < 1e-8);
    }

    #[test]
    fn empty_batch_is_an_error() {
        let logits = Array2::<f64>::zeros((0, 2));
        assert!(matches!(
            compute_loss(&logits, &[]),
            Err(TrainError::EmptyBatch)
        ));
    }

    #[test]
    fn gradient_matches_central_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(5);
        let logits = Array2::from_shape_fn((8, 2), |_| rng.random::<f64>() * 4.0 - 2.0);
        let labels: Vec<Label> = (0..8)
            .map(|_| if rng.random::<bool>() { Label::Fake } else { Label::Real })
            .collect();
        let (_, grad) = compute_loss(&logits, &labels).unwrap();
        let eps = 1e-7;
        for i in 0..8 {
            for j in 0..2 {
                let mut up = logits.clone();
                up[(i, j)] += eps;
                let mut down = logits.clone();
                down[(i, j)] -= eps;
                let (lu, _) = compute_loss(&up, &labels).unwrap();
                let (ld, _) = compute_loss(&down, &labels).unwrap();
                let fd = (lu - ld) / (2.0 * eps);
                let rel = (fd - grad[(i, j)]).abs() / fd.abs().max(1e-12);
                assert!(rel <= 1e-6, "({i},{j}): fd {fd} vs {}", grad[(i, j)]);
            }
        }
    }

    #[test]
    fn accuracy_counts_argmax_matches() {
        let logits = arr2(&[[2.0f32, 1.0], [0.0, 3.0], [1.0, 1.0]]);
        let labels = [Label::Real, Label::Fake, Label::Fake];
        assert!((batch_accuracy(&logits, &labels) - 1.0).abs() < 1e-12);
    }
}
