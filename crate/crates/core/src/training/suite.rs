use std::fmt;
use std::str::FromStr;

use super::{check_model_gradients, tracker_config_for, SlateMissPolicy, TrainConfig};
use crate::corpus::{generate_synthetic, restaurant_schema, GenConfig};
use crate::error::{Error, Result};
use crate::neural::{GradCheckOptions, GradCheckReport};
use crate::tracker::{SharingMode, TrackerModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteDims {
    /// Width 8, K=3.
    Small,
    /// Width 50, K=7.
    Default,
}

impl fmt::Display for SuiteDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SuiteDims::Small => "small",
            SuiteDims::Default => "default",
        })
    }
}

impl FromStr for SuiteDims {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "small" => Ok(SuiteDims::Small),
            "default" => Ok(SuiteDims::Default),
            _ => Err(Error::invalid(format!("unknown dims '{s}' (expected small or default)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub mode: SharingMode,
    pub policy: SlateMissPolicy,
    pub report: GradCheckReport,
}

/// Finite-difference check of the full dialogue loss on a short generated
/// restaurant dialogue, for both sharing modes and both slate-miss policies.
/// A random sample of elements is checked per tensor.
///
/// The step is 1e-4 rather than the library default: this loss sums a few
/// dozen instances (|L| near 40), and at 1e-5 the rounding noise of the
/// difference quotient already reaches about 2e-5 relative on the smallest
/// gradients, shrinking tenfold per tenfold increase in the step.
pub fn gradient_suite(dims: SuiteDims, seed: u64) -> Result<Vec<SuiteResult>> {
    let gen = GenConfig {
        n_train: 2,
        n_dev: 1,
        n_test: 1,
        oov_target: 0.0,
        max_turns: 4,
        ..GenConfig::default()
    };
    let corpus = generate_synthetic(&[restaurant_schema()], &gen, seed)?.remove(0);
    let (width, capacity, sample) = match dims {
        SuiteDims::Small => (8, 3, 24),
        SuiteDims::Default => (50, 7, 8),
    };
    let mut out = Vec::new();
    for mode in [SharingMode::Shared, SharingMode::PerSlot] {
        let cfg = TrainConfig {
            embedding_dim: width,
            gru_hidden_dim: width,
            scorer_hidden_dim: width,
            capacity,
            sharing_mode: mode,
            ..TrainConfig::default()
        };
        let model: TrackerModel<f64> = TrackerModel::new(tracker_config_for(&[&corpus], &cfg)?, seed)?;
        for policy in [SlateMissPolicy::Skip, SlateMissPolicy::MapToNull] {
            let opts = GradCheckOptions {
                epsilon: 1e-4,
                max_per_tensor: Some(sample),
                seed,
                ..GradCheckOptions::default()
            };
            let report = check_model_gradients(&model, &corpus.train[..1], policy, &opts)?;
            out.push(SuiteResult { mode, policy, report });
        }
    }
    Ok(out)
}
