use super::graph::PROB_FLOOR;
use super::Real;
use crate::error::{Error, Result};

/// Softmax over the unmasked positions; masked positions get exactly 0.
pub fn softmax_masked<T: Real>(logits: &[T], mask: &[bool]) -> Result<Vec<T>> {
    if logits.len() != mask.len() {
        return Err(Error::shape("softmax mask", logits.len(), mask.len()));
    }
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, m)| **m)
        .map(|(l, _)| *l)
        .fold(None, |acc: Option<T>, l| Some(acc.map_or(l, |a| a.max(l))))
        .ok_or_else(|| Error::invalid("softmax with every position masked"))?;
    let exps: Vec<T> = logits
        .iter()
        .zip(mask)
        .map(|(l, m)| if *m { (*l - max).exp() } else { T::zero() })
        .collect();
    let total: T = exps.iter().copied().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// −ln(probs[label]) with the probability floored at 1e-12.
pub fn cross_entropy<T: Real>(probs: &[T], mask: &[bool], label: usize) -> Result<T> {
    if label >= probs.len() || !mask.get(label).copied().unwrap_or(false) {
        return Err(Error::invalid(format!("label {label} is not an unmasked position")));
    }
    Ok(-probs[label].max(T::of(PROB_FLOOR)).ln())
}
