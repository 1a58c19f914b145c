use rand::seq::index::sample;

use super::params::{Gradients, ParamId, ParameterStore};
use crate::error::{Error, Result};
use crate::rng::rng_for;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckOptions {
    pub epsilon: f64,
    /// Check at most this many randomly chosen elements per tensor; `None`
    /// checks every element.
    pub max_per_tensor: Option<usize>,
    pub seed: u64,
    /// Lower bound on the relative-error denominator. Central differences
    /// of a loss L carry rounding noise near `f64::EPSILON * |L| / epsilon`
    /// (about 1e-10 for L near 10 at epsilon 1e-5), so gradients smaller
    /// than the floor are in effect compared absolutely.
    pub denominator_floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            epsilon: 1e-5,
            max_per_tensor: None,
            seed: 0,
            denominator_floor: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    /// (parameter, element, analytic, numeric) at the worst element.
    pub worst: Option<(String, usize, f64, f64)>,
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compare analytic gradients with central differences
/// (f(θ+ε) − f(θ−ε)) / 2ε. `forward` returns the loss and its gradients.
pub fn gradient_check<F>(
    store: &mut ParameterStore<f64>,
    opts: &GradCheckOptions,
    mut forward: F,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParameterStore<f64>) -> Result<(f64, Gradients<f64>)>,
{
    if opts.epsilon <= 0.0 || !opts.epsilon.is_finite() {
        return Err(Error::invalid(format!(
            "finite-difference step must be positive, got {}",
            opts.epsilon
        )));
    }
    let (base, analytic) = forward(store)?;
    if !base.is_finite() {
        return Err(Error::Numerical(format!("loss is {base} at the unperturbed point")));
    }
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        checked: 0,
        worst: None,
    };
    let ids: Vec<ParamId> = store.ids().collect();
    for id in ids {
        let n = store.values(id).len();
        let elements: Vec<usize> = match opts.max_per_tensor {
            Some(m) if m < n => {
                let mut rng = rng_for(opts.seed, &format!("gradcheck/{}", store.name(id)));
                let mut picked = sample(&mut rng, n, m).into_vec();
                picked.sort_unstable();
                picked
            }
            _ => (0..n).collect(),
        };
        for i in elements {
            let original = store.values(id)[i];
            store.values_mut(id)[i] = original + opts.epsilon;
            let plus = forward(store)?.0;
            store.values_mut(id)[i] = original - opts.epsilon;
            let minus = forward(store)?.0;
            store.values_mut(id)[i] = original;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite loss perturbing {}[{i}]",
                    store.name(id)
                )));
            }
            let numeric = (plus - minus) / (2.0 * opts.epsilon);
            let a = analytic.get(id)[i];
            if !a.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite analytic gradient at {}[{i}]",
                    store.name(id)
                )));
            }
            let err = relative_error(a, numeric, opts.denominator_floor);
            report.checked += 1;
            if err > report.max_relative_error || report.worst.is_none() {
                report.max_relative_error = report.max_relative_error.max(err);
                if err >= report.max_relative_error {
                    report.worst = Some((store.name(id).to_string(), i, a, numeric));
                }
            }
        }
    }
    Ok(report)
}
