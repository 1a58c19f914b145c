use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use log::info;

use super::{joint_accuracy, train_on, GridSpec, TrainConfig, TrainHistory};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, MetricsReport};
use crate::tracker::{SharingMode, TrackerModel};

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub config: TrainConfig,
    /// Dev joint accuracy at the cell's tuned threshold.
    pub dev_jga: f64,
    pub chosen_epoch: usize,
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub best: TrainConfig,
    pub best_dev_jga: f64,
    pub best_model: TrackerModel<f32>,
    /// In search order: embedding, then hidden, then learning rate, ascending.
    pub cells: Vec<GridCell>,
}

impl GridResult {
    /// Tab-separated cell table.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("embedding_dim\tgru_hidden_dim\tlearning_rate\tchosen_epoch\tdev_jga\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{:.6}\n",
                c.config.embedding_dim, c.config.gru_hidden_dim, c.config.learning_rate, c.chosen_epoch, c.dev_jga
            ));
        }
        out
    }
}

fn sorted<T: Clone>(xs: &[T], cmp: impl Fn(&T, &T) -> Ordering) -> Vec<T> {
    let mut v = xs.to_vec();
    v.sort_by(cmp);
    v
}

/// Train every grid combination over `base` and keep the best by dev joint
/// accuracy. Cells are visited smallest-first and only a strict
/// improvement replaces the incumbent.
pub fn grid_search(corpus: &Corpus, base: &TrainConfig, grid: &GridSpec) -> Result<GridResult> {
    if grid.cells() == 0 {
        return Err(Error::invalid("empty hyperparameter grid"));
    }
    let embeddings = sorted(&grid.embedding_dims, |a, b| a.cmp(b));
    let hiddens = sorted(&grid.gru_hidden_dims, |a, b| a.cmp(b));
    let rates = sorted(&grid.learning_rates, |a, b| a.total_cmp(b));
    let mut cells = Vec::with_capacity(grid.cells());
    let mut best: Option<(f64, TrainConfig, TrackerModel<f32>)> = None;
    for &embedding_dim in &embeddings {
        for &gru_hidden_dim in &hiddens {
            for &learning_rate in &rates {
                let cfg = TrainConfig {
                    embedding_dim,
                    gru_hidden_dim,
                    learning_rate,
                    ..base.clone()
                };
                let (model, history) = train_on::<f32>(&[corpus], &cfg)?;
                let dev_jga = joint_accuracy(&model, &corpus.dev, model.config.threshold)?;
                info!("grid cell emb={embedding_dim} hidden={gru_hidden_dim} lr={learning_rate}: dev jga {dev_jga:.4}");
                if best.as_ref().map_or(true, |(acc, _, _)| dev_jga > *acc) {
                    best = Some((dev_jga, cfg.clone(), model));
                }
                cells.push(GridCell {
                    config: cfg,
                    dev_jga,
                    chosen_epoch: history.chosen_epoch,
                });
            }
        }
    }
    let (best_dev_jga, best, best_model) = best.expect("grid is non-empty");
    Ok(GridResult {
        best,
        best_dev_jga,
        best_model,
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferMode {
    /// The evaluation domain is left out of training.
    ZeroShot,
    /// The evaluation domain's train split is added to training.
    Joint,
}

impl fmt::Display for TransferMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransferMode::ZeroShot => "zero_shot",
            TransferMode::Joint => "joint",
        })
    }
}

impl FromStr for TransferMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero_shot" => Ok(TransferMode::ZeroShot),
            "joint" => Ok(TransferMode::Joint),
            _ => Err(Error::invalid(format!("unknown transfer mode '{s}' (expected zero_shot or joint)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransferResult {
    pub mode: TransferMode,
    pub trained_on: Vec<String>,
    /// Metrics on the evaluation corpus's test split.
    pub report: MetricsReport,
    /// Joint accuracy of predicting every slot unset on the same split.
    pub null_jga: f64,
    pub history: TrainHistory,
    pub model: TrackerModel<f32>,
}

/// Fraction of turns whose gold state has no slot set.
pub fn null_predictor_jga(dialogues: &[crate::dialogue::Dialogue]) -> f64 {
    let (mut hits, mut turns) = (0usize, 0usize);
    for t in dialogues.iter().flat_map(|d| &d.turns) {
        turns += 1;
        hits += usize::from(t.gold_state.iter().all(|(_, v)| v.is_unset()));
    }
    if turns == 0 {
        0.0
    } else {
        hits as f64 / turns as f64
    }
}

/// Train one shared model on `train_corpora` (plus or minus the evaluation
/// domain, per `mode`) and evaluate it on `eval_corpus.test`.
pub fn transfer_eval(
    train_corpora: &[Corpus],
    eval_corpus: &Corpus,
    cfg: &TrainConfig,
    mode: TransferMode,
) -> Result<TransferResult> {
    if cfg.sharing_mode != SharingMode::Shared {
        return Err(Error::invalid(
            "transfer needs sharing_mode=shared: per-slot scorers have no parameters for slots \
             outside the training domains",
        ));
    }
    let eval_domain = eval_corpus.schema.domain.as_str();
    let mut corpora: Vec<&Corpus> = train_corpora
        .iter()
        .filter(|c| c.schema.domain != eval_domain)
        .collect();
    if mode == TransferMode::Joint {
        corpora.push(eval_corpus);
    }
    if corpora.is_empty() {
        return Err(Error::invalid(format!(
            "zero-shot transfer to '{eval_domain}' needs at least one other training domain"
        )));
    }
    let trained_on: Vec<String> = corpora.iter().map(|c| c.schema.domain.clone()).collect();
    info!("{mode} transfer: training on {trained_on:?}, evaluating on {eval_domain}");
    let (mut model, history) = train_on::<f32>(&corpora, cfg)?;
    model.register_domain(&eval_corpus.schema)?;
    let report = evaluate(&model, &eval_corpus.test, model.config.threshold)?;
    Ok(TransferResult {
        mode,
        trained_on,
        report,
        null_jga: null_predictor_jga(&eval_corpus.test),
        history,
        model,
    })
}
