//! Cosine max-margin ranking loss against six distractors.

use super::{NnError, Result, Scalar};

fn norm<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Cosine similarity. Fails on a zero-norm argument.
pub fn cosine<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(NnError::ShapeError(format!("cosine of lengths {} and {}", a.len(), b.len())));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == T::zero() || nb == T::zero() {
        return Err(NnError::ZeroVector);
    }
    Ok(dot(a, b) / (na * nb))
}

/// `Σ_i max(0, 1 + cos(neg_i, pred) − cos(correct, pred))` and its gradient
/// with respect to `pred`. Inactive hinge terms contribute no gradient.
pub fn margin_loss<T: Scalar, V: AsRef<[T]>>(pred: &[T], correct: &[T], negatives: &[V]) -> Result<(T, Vec<T>)> {
    let dim = pred.len();
    if correct.len() != dim || negatives.iter().any(|n| n.as_ref().len() != dim) {
        return Err(NnError::ShapeError("margin loss vectors differ in length".into()));
    }
    let p_norm = norm(pred);
    if p_norm == T::zero() {
        return Err(NnError::ZeroVector);
    }
    // d cos(a, p) / dp = a / (|a||p|) - cos(a, p) p / |p|^2
    let cos_and_grad = |a: &[T]| -> Result<(T, Vec<T>)> {
        let a_norm = norm(a);
        if a_norm == T::zero() {
            return Err(NnError::ZeroVector);
        }
        let c = dot(a, pred) / (a_norm * p_norm);
        let inv_ap = T::one() / (a_norm * p_norm);
        let p_coef = c / (p_norm * p_norm);
        Ok((c, a.iter().zip(pred).map(|(&ai, &pi)| ai * inv_ap - p_coef * pi).collect()))
    };
    let (c_pos, g_pos) = cos_and_grad(correct)?;
    let mut loss = T::zero();
    let mut grad = vec![T::zero(); dim];
    for neg in negatives {
        let (c_neg, g_neg) = cos_and_grad(neg.as_ref())?;
        let term = T::one() + c_neg - c_pos;
        if term > T::zero() {
            loss = loss + term;
            for ((g, &gn), &gp) in grad.iter_mut().zip(&g_neg).zip(&g_pos) {
                *g = *g + gn - gp;
            }
        }
    }
    Ok((loss, grad))
}
