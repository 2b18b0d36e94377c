use crate::error::{bail, Result};
use crate::net::model::PROB_FLOOR;
use crate::net::real::Real;

/// Mean categorical cross-entropy of `(B, n_classes)` probabilities against
/// class indices, with each target probability floored at 1e-12.
pub fn cross_entropy<F: Real>(probs: &[F], n_classes: usize, targets: &[usize]) -> Result<f64> {
    if targets.is_empty() || probs.len() != targets.len() * n_classes {
        bail!(
            Shape,
            "{} probabilities for {} targets of {n_classes} classes",
            probs.len(),
            targets.len()
        );
    }
    let mut total = 0.0;
    for (row, &t) in probs.chunks(n_classes).zip(targets) {
        if t >= n_classes {
            bail!(InvalidLabel, "target class {t} out of range");
        }
        total -= row[t].as_f64().max(PROB_FLOOR).ln();
    }
    Ok(total / targets.len() as f64)
}

/// Same loss with one-hot target rows.
pub fn cross_entropy_one_hot<F: Real>(probs: &[F], one_hot: &[F], n_classes: usize) -> Result<f64> {
    if one_hot.len() != probs.len() || n_classes == 0 || !probs.len().is_multiple_of(n_classes) {
        bail!(Shape, "probability and target matrices differ in shape");
    }
    let targets: Vec<usize> = one_hot
        .chunks(n_classes)
        .map(crate::net::model::argmax)
        .collect();
    cross_entropy(probs, n_classes, &targets)
}
