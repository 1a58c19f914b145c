//! Example construction, the training loop, grid search and transfer runs.

mod config;
mod search;
mod suite;

use log::{debug, info};
use rand::seq::SliceRandom;

use crate::candidates::{build_slate, update_candidate_set, Distribution, ScoredCandidateSet, ValueSlate};
use crate::corpus::{build_vocab, Corpus};
use crate::dialogue::{Dialogue, StateValue};
use crate::error::{Error, Result};
use crate::evaluation::{assignments_at, gold_states, pooled_jga, track_all, tune_threshold_tracked, default_threshold_grid};
use crate::neural::{adam_step, gradient_check, AdamState, GradCheckOptions, GradCheckReport, Gradients, Graph, Node, Real};
use crate::rng::rng_for;
use crate::tracker::{forward_turn, previous_from_state, PreviousSlot, TrackerConfig, TrackerModel, TurnTrackState};

pub use config::{GridSpec, SlateMissPolicy, TrainConfig};
pub use search::{grid_search, null_predictor_jga, transfer_eval, GridCell, GridResult, TransferMode, TransferResult};
pub use suite::{gradient_suite, SuiteDims, SuiteResult};

/// Threshold used for dev accuracy while training; the final one is tuned.
pub const TRAINING_THRESHOLD: f64 = 0.5;

/// One labelled (dialogue, turn, slot) instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub dialogue: usize,
    pub turn: usize,
    pub slot: String,
    pub slate: ValueSlate,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Examples {
    pub instances: Vec<Example>,
    /// Slot-turns whose gold value was not on the slate.
    pub misses: usize,
    /// Slot-turns considered, emitted or not.
    pub slot_turns: usize,
}

impl Examples {
    pub fn miss_rate(&self) -> f64 {
        if self.slot_turns == 0 {
            0.0
        } else {
            self.misses as f64 / self.slot_turns as f64
        }
    }
}

/// Slate position of the gold value, or `None` on a slate miss.
pub fn gold_label(slate: &ValueSlate, gold: &StateValue) -> Option<usize> {
    match gold {
        StateValue::Unset => Some(slate.null_index()),
        StateValue::DontCare => Some(slate.dontcare_index()),
        StateValue::Value(v) => slate.index_of(v),
    }
}

fn resolve_label(slate: &ValueSlate, gold: &StateValue, policy: SlateMissPolicy) -> (Option<usize>, bool) {
    match gold_label(slate, gold) {
        Some(l) => (Some(l), false),
        None => match policy {
            SlateMissPolicy::Skip => (None, true),
            SlateMissPolicy::MapToNull => (Some(slate.null_index()), true),
        },
    }
}

fn one_hot(slate: &ValueSlate, index: usize) -> Distribution {
    let mut probs = vec![0.0; slate.len()];
    probs[index] = 1.0;
    Distribution {
        slate: slate.clone(),
        probs,
    }
}

fn mentioned<'a>(slot: &str, pairs: impl Iterator<Item = (Option<&'a str>, Option<&'a str>)>) -> Vec<&'a str> {
    pairs
        .filter_map(|(s, v)| (s? == slot).then_some(v).flatten())
        .collect()
}

/// Labels from replaying the candidate-set pipeline with gold inputs: each
/// turn's set is rescored with all mass on the gold entry.
pub fn make_examples(
    dialogues: &[Dialogue],
    slots_for: impl Fn(&str) -> Result<Vec<String>>,
    capacity: usize,
    policy: SlateMissPolicy,
) -> Result<Examples> {
    let mut out = Examples::default();
    for (di, d) in dialogues.iter().enumerate() {
        let slots = slots_for(&d.domain)?;
        let mut sets: Vec<ScoredCandidateSet> = slots.iter().map(|s| ScoredCandidateSet::new(s, capacity)).collect();
        for (ti, turn) in d.turns.iter().enumerate() {
            for set in sets.iter_mut() {
                let slot = set.slot.clone();
                let user = mentioned(
                    &slot,
                    turn.user_spans.iter().map(|s| (Some(s.slot.as_str()), Some(s.value.as_str()))),
                );
                let system = if turn.system_tokens.is_empty() {
                    Vec::new()
                } else {
                    mentioned(
                        &slot,
                        turn.system_acts.iter().map(|a| (a.slot.as_deref(), a.value.as_deref())),
                    )
                };
                let update = update_candidate_set(set, user, system, [], capacity);
                let slate = build_slate(&update.set);
                let gold = turn.gold_state.get(&slot);
                out.slot_turns += 1;
                let (label, miss) = resolve_label(&slate, &gold, policy);
                if miss {
                    out.misses += 1;
                }
                let mut next = update.set;
                let target = label.unwrap_or(slate.null_index());
                next.rescore(&one_hot(&slate, target));
                *set = next;
                if let Some(label) = label {
                    out.instances.push(Example {
                        dialogue: di,
                        turn: ti,
                        slot,
                        slate,
                        label,
                    });
                }
            }
        }
    }
    Ok(out)
}

pub struct DialogueLoss {
    /// Sum of the per-instance cross-entropies; `None` if nothing was emitted.
    pub loss: Option<Node>,
    pub instances: usize,
    pub misses: usize,
    pub slot_turns: usize,
}

/// Loss of one dialogue built on-policy in `g`: each turn's predicted
/// distributions feed the next turn's features.
pub fn dialogue_loss<T: Real>(
    g: &mut Graph<'_, T>,
    model: &TrackerModel<T>,
    d: &Dialogue,
    policy: SlateMissPolicy,
) -> Result<DialogueLoss> {
    let slots = model.slots_for(&d.domain)?;
    let initial = TurnTrackState::initial(slots, model.config.capacity);
    let mut prev: Vec<PreviousSlot> = previous_from_state(g, &initial);
    let mut sets: Vec<ScoredCandidateSet> = initial.slots.into_iter().map(|s| s.set).collect();
    let mut terms = Vec::new();
    let (mut misses, mut slot_turns) = (0, 0);
    for (ti, turn) in d.turns.iter().enumerate() {
        let outs = forward_turn(g, model, turn, &sets, &prev).map_err(|e| Error::Validation {
            dialogue: d.id.clone(),
            message: format!("turn {ti}: {e}"),
        })?;
        let mut next_prev = Vec::with_capacity(outs.len());
        let mut next_sets = Vec::with_capacity(outs.len());
        for o in outs {
            slot_turns += 1;
            let (label, miss) = resolve_label(&o.slate, &turn.gold_state.get(&o.slot), policy);
            if miss {
                misses += 1;
            }
            if let Some(label) = label {
                terms.push(g.nll(o.probs, label));
            }
            next_prev.push(PreviousSlot {
                slate: o.slate.clone(),
                probs: o.probs,
            });
            let probs = o.probs;
            let mut set = o.set;
            let dist = Distribution {
                slate: o.slate,
                probs: g.value(probs).iter().map(|p| p.f64()).collect(),
            };
            set.rescore(&dist);
            next_sets.push(set);
        }
        prev = next_prev;
        sets = next_sets;
    }
    let instances = terms.len();
    let loss = (!terms.is_empty()).then(|| g.add(&terms));
    Ok(DialogueLoss {
        loss,
        instances,
        misses,
        slot_turns,
    })
}

/// Summed cross-entropy over `dialogues` and the number of instances.
pub fn corpus_loss<T: Real>(
    model: &TrackerModel<T>,
    dialogues: &[Dialogue],
    policy: SlateMissPolicy,
) -> Result<(f64, usize)> {
    let mut total = 0.0;
    let mut count = 0;
    for d in dialogues {
        let mut g = Graph::new(&model.store);
        let dl = dialogue_loss(&mut g, model, d, policy)?;
        if let Some(l) = dl.loss {
            total += g.scalar_value(l).f64();
        }
        count += dl.instances;
    }
    Ok((total, count))
}

/// Compare backpropagated gradients of the summed loss over `dialogues`
/// against central differences, for every parameter of `model`.
pub fn check_model_gradients(
    model: &TrackerModel<f64>,
    dialogues: &[Dialogue],
    policy: SlateMissPolicy,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let mut scratch = model.clone();
    let mut store = std::mem::take(&mut scratch.store);
    store.zero_grads();
    gradient_check(&mut store, opts, |s| {
        scratch.store = s.clone();
        let mut total = 0.0;
        let mut grads = Vec::new();
        for d in dialogues {
            let mut g = Graph::new(&scratch.store);
            let dl = dialogue_loss(&mut g, &scratch, d, policy)?;
            if let Some(loss) = dl.loss {
                total += g.scalar_value(loss);
                grads.push(g.backward(loss));
            }
        }
        for gr in &grads {
            scratch.store.accumulate(gr);
        }
        let summed = Gradients(scratch.store.ids().map(|id| scratch.store.grad(id).to_vec()).collect());
        Ok((total, summed))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-instance loss accumulated while the epoch ran.
    pub train_loss: f64,
    pub dev_jga: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    /// Mean per-instance loss of the initial parameters on the train split.
    pub initial_loss: f64,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose snapshot was returned (1-based).
    pub chosen_epoch: usize,
    /// Gold-replay slate-miss rate on the train split.
    pub slate_miss_rate: f64,
    pub threshold: f64,
}

impl TrainHistory {
    /// One `{epoch, train_loss, dev_jga}` JSON record per line.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for e in &self.epochs {
            out.push_str(
                &serde_json::json!({"epoch": e.epoch, "train_loss": e.train_loss, "dev_jga": e.dev_jga}).to_string(),
            );
            out.push('\n');
        }
        out
    }

    /// Summary line with the chosen epoch, miss rate and threshold.
    pub fn summary(&self) -> String {
        serde_json::json!({
            "initial_loss": self.initial_loss,
            "epochs_run": self.epochs.len(),
            "chosen_epoch": self.chosen_epoch,
            "slate_miss_rate": self.slate_miss_rate,
            "threshold": self.threshold,
        })
        .to_string()
    }
}

/// Model layout for training on `corpora`: merged vocabulary over their
/// train splits and merged act inventories, in first-seen order.
pub fn tracker_config_for(corpora: &[&Corpus], cfg: &TrainConfig) -> Result<TrackerConfig> {
    let mut domains = std::collections::BTreeMap::new();
    let mut all_slots: Vec<String> = Vec::new();
    let mut user_acts: Vec<String> = Vec::new();
    let mut system_acts: Vec<String> = Vec::new();
    let mut train: Vec<Dialogue> = Vec::new();
    for c in corpora {
        if let Some(prev) = domains.insert(c.schema.domain.clone(), c.schema.slots.clone()) {
            if prev != c.schema.slots {
                return Err(Error::invalid(format!(
                    "domain '{}' appears twice with different slots",
                    c.schema.domain
                )));
            }
        }
        for (dst, src) in [
            (&mut all_slots, &c.schema.slots),
            (&mut user_acts, &c.schema.user_act_inventory),
            (&mut system_acts, &c.schema.system_act_inventory),
        ] {
            for x in src {
                if !dst.contains(x) {
                    dst.push(x.clone());
                }
            }
        }
        train.extend(c.train.iter().cloned());
    }
    Ok(TrackerConfig {
        vocabulary: build_vocab(&train, &all_slots, cfg.min_token_count),
        user_acts,
        system_acts,
        domains,
        embedding_dim: cfg.embedding_dim,
        gru_hidden_dim: cfg.gru_hidden_dim,
        scorer_hidden_dim: cfg.scorer_hidden_dim,
        capacity: cfg.capacity,
        threshold: TRAINING_THRESHOLD,
        sharing_mode: cfg.sharing_mode,
    })
}

/// Pooled joint goal accuracy of `model` on `dialogues` at `threshold`.
pub fn joint_accuracy<T: Real>(model: &TrackerModel<T>, dialogues: &[Dialogue], threshold: f64) -> Result<f64> {
    let tracked = track_all(model, dialogues)?;
    pooled_jga(&assignments_at(&tracked, threshold), &gold_states(dialogues))
}

pub fn train(corpus: &Corpus, cfg: &TrainConfig) -> Result<(TrackerModel<f32>, TrainHistory)> {
    train_on(&[corpus], cfg)
}

/// Train one model on the union of the corpora's train splits, selecting
/// the epoch by joint accuracy on the union of their dev splits.
pub fn train_on<T: Real>(corpora: &[&Corpus], cfg: &TrainConfig) -> Result<(TrackerModel<T>, TrainHistory)> {
    cfg.check()?;
    if corpora.is_empty() {
        return Err(Error::invalid("no training corpora"));
    }
    let train: Vec<Dialogue> = corpora.iter().flat_map(|c| c.train.iter().cloned()).collect();
    let dev: Vec<Dialogue> = corpora.iter().flat_map(|c| c.dev.iter().cloned()).collect();
    if train.is_empty() || dev.is_empty() {
        return Err(Error::invalid("training needs non-empty train and dev splits"));
    }
    let mut model: TrackerModel<T> = TrackerModel::new(tracker_config_for(corpora, cfg)?, cfg.seed)?;
    let examples = make_examples(
        &train,
        |dom| model.slots_for(dom).map(|s| s.to_vec()),
        cfg.capacity,
        cfg.slate_miss_policy,
    )?;
    let (initial_total, initial_count) = corpus_loss(&model, &train, cfg.slate_miss_policy)?;
    let initial_loss = initial_total / initial_count.max(1) as f64;
    info!(
        "training on {} dialogues, {} parameters, initial loss {initial_loss:.4}",
        train.len(),
        model.store.num_scalars()
    );

    let mut adam = AdamState::new(&model.store, cfg.learning_rate);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epochs = Vec::new();
    let mut best: Option<(f64, usize, TrackerModel<T>)> = None;
    for epoch in 1..=cfg.max_epochs {
        order.sort_unstable();
        order.shuffle(&mut rng_for(cfg.seed, &format!("shuffle/{epoch}")));
        let (mut epoch_loss, mut epoch_count) = (0.0, 0usize);
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut batch_loss = 0.0;
            for &i in batch {
                let grads = {
                    let mut g = Graph::new(&model.store);
                    let dl = dialogue_loss(&mut g, &model, &train[i], cfg.slate_miss_policy)?;
                    let Some(loss) = dl.loss else { continue };
                    batch_loss += g.scalar_value(loss).f64();
                    epoch_count += dl.instances;
                    g.backward(loss)
                };
                model.store.accumulate(&grads);
            }
            if !batch_loss.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite loss {batch_loss} in epoch {epoch}, batch {b} (dialogues {:?})",
                    batch.iter().map(|&i| train[i].id.as_str()).collect::<Vec<_>>()
                )));
            }
            epoch_loss += batch_loss;
            adam_step(&mut model.store, &mut adam);
        }
        let train_loss = epoch_loss / epoch_count.max(1) as f64;
        let dev_jga = joint_accuracy(&model, &dev, TRAINING_THRESHOLD)?;
        debug!("epoch {epoch}: loss {train_loss:.5}, dev jga {dev_jga:.4}");
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            dev_jga,
        });
        if best.as_ref().map_or(true, |(acc, _, _)| dev_jga > *acc) {
            best = Some((dev_jga, epoch, model.clone()));
        }
        let best_epoch = best.as_ref().map_or(epoch, |b| b.1);
        if epoch - best_epoch >= cfg.patience {
            info!("stopping after epoch {epoch}, best dev jga at epoch {best_epoch}");
            break;
        }
    }
    let (_, chosen_epoch, mut model) = best.expect("at least one epoch");
    let tracked = track_all(&model, &dev)?;
    let threshold = tune_threshold_tracked(&tracked, &dev, &default_threshold_grid())?;
    model.config.threshold = threshold;
    Ok((
        model,
        TrainHistory {
            initial_loss,
            epochs,
            chosen_epoch,
            slate_miss_rate: examples.miss_rate(),
            threshold,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialogue::{DialogueAct, DialogueState, SlotSpan, Turn};

    fn span(slot: &str, value: &str, start: usize) -> SlotSpan {
        SlotSpan {
            slot: slot.into(),
            value: value.into(),
            start,
            end: start + value.split(' ').count(),
        }
    }

    fn state(pairs: &[(&str, StateValue)]) -> DialogueState {
        let mut s = DialogueState::new();
        for (k, v) in pairs {
            s.set(k, v.clone());
        }
        s
    }

    fn time_dialogue(gold_second: StateValue) -> Dialogue {
        let t1 = Turn {
            user_tokens: "table at 6 pm".split(' ').map(String::from).collect(),
            user_acts: vec![DialogueAct::with_value("inform", "time", "6 pm")],
            user_spans: vec![span("time", "6 pm", 2)],
            gold_state: state(&[("time", StateValue::value("6 pm"))]),
            ..Turn::default()
        };
        let t2 = Turn {
            system_tokens: "6 pm is full".split(' ').map(String::from).collect(),
            system_acts: vec![DialogueAct::with_value("inform", "time", "6 pm")],
            system_spans: vec![span("time", "6 pm", 0)],
            user_tokens: "then 7 pm".split(' ').map(String::from).collect(),
            user_acts: vec![DialogueAct::with_value("inform", "time", "7 pm")],
            user_spans: vec![span("time", "7 pm", 1)],
            gold_state: state(&[("time", gold_second)]),
        };
        Dialogue {
            id: "d".into(),
            domain: "toy".into(),
            turns: vec![t1, t2],
        }
    }

    fn slots(_: &str) -> Result<Vec<String>> {
        Ok(vec!["time".into(), "area".into()])
    }

    #[test]
    fn labels_from_gold_replay() {
        let d = time_dialogue(StateValue::value("7 pm"));
        let ex = make_examples(&[d], slots, 7, SlateMissPolicy::Skip).unwrap();
        assert_eq!(ex.instances.len(), 4);
        assert_eq!(ex.misses, 0);
        let t2 = &ex.instances[2];
        assert_eq!((t2.turn, t2.slot.as_str()), (1, "time"));
        // user mention first, then the system's, then nothing held over
        assert_eq!(t2.slate.candidates().collect::<Vec<_>>(), vec!["7 pm", "6 pm"]);
        assert_eq!(t2.label, 0);
        let area = &ex.instances[3];
        assert_eq!(area.label, area.slate.null_index());
    }

    #[test]
    fn dontcare_and_misses() {
        let d = time_dialogue(StateValue::DontCare);
        let ex = make_examples(&[d], slots, 7, SlateMissPolicy::Skip).unwrap();
        assert_eq!(ex.instances[2].label, 7);

        let d = time_dialogue(StateValue::value("8 pm"));
        let ex = make_examples(std::slice::from_ref(&d), slots, 7, SlateMissPolicy::Skip).unwrap();
        assert_eq!((ex.instances.len(), ex.misses, ex.slot_turns), (3, 1, 4));
        let ex = make_examples(&[d], slots, 7, SlateMissPolicy::MapToNull).unwrap();
        assert_eq!((ex.instances.len(), ex.misses), (4, 1));
        assert_eq!(ex.instances[2].label, ex.instances[2].slate.null_index());
    }
}
