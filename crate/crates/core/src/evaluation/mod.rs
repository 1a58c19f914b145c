//! Assignments from distributions, joint goal accuracy, threshold tuning,
//! reports, and a rule-based reference tracker.

mod baseline;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::candidates::{Distribution, SlateEntry};
use crate::dialogue::{Dialogue, DialogueState, StateValue};
use crate::error::{Error, Result};
use crate::neural::Real;
use crate::tracker::{track_dialogue, TrackedTurn, TrackerModel};

pub use baseline::rule_baseline_track;

/// Pick at most one assignment per slot: the most probable candidate or
/// dontcare whose probability exceeds `threshold`, earliest slate position
/// on ties. Slots with nothing above the threshold stay unset.
pub fn select_assignments(dists: &[Distribution], threshold: f64) -> DialogueState {
    let mut state = DialogueState::new();
    for d in dists {
        let mut best: Option<(usize, f64)> = None;
        for (i, e) in d.slate.entries().iter().enumerate() {
            if matches!(e, SlateEntry::Pad | SlateEntry::Null) {
                continue;
            }
            let p = d.probs[i];
            if p > threshold && best.map_or(true, |(_, b)| p > b) {
                best = Some((i, p));
            }
        }
        if let Some((i, _)) = best {
            let v = match &d.slate.entries()[i] {
                SlateEntry::Candidate(v) => StateValue::Value(v.clone()),
                SlateEntry::DontCare => StateValue::DontCare,
                _ => unreachable!("PAD and null are skipped"),
            };
            state.set(&d.slate.slot, v);
        }
    }
    state
}

/// Fraction of turns whose predicted state matches gold on every slot.
pub fn joint_goal_accuracy(pred: &[DialogueState], gold: &[DialogueState]) -> Result<f64> {
    if pred.len() != gold.len() {
        return Err(Error::shape("joint goal accuracy turns", gold.len(), pred.len()));
    }
    if gold.is_empty() {
        return Err(Error::invalid("joint goal accuracy over zero turns"));
    }
    let correct = pred.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(correct as f64 / gold.len() as f64)
}

/// Thresholds 0.05, 0.10, ..., 0.95.
pub fn default_threshold_grid() -> Vec<f64> {
    (1..=19).map(|i| i as f64 / 20.0).collect()
}

/// Track every dialogue once with `model`.
pub fn track_all<T: Real>(model: &TrackerModel<T>, dialogues: &[Dialogue]) -> Result<Vec<Vec<TrackedTurn>>> {
    dialogues.iter().map(|d| track_dialogue(d, model)).collect()
}

pub(crate) fn assignments_at(tracked: &[Vec<TrackedTurn>], threshold: f64) -> Vec<Vec<DialogueState>> {
    tracked
        .iter()
        .map(|turns| {
            turns
                .iter()
                .map(|t| select_assignments(&t.track.distributions(), threshold))
                .collect()
        })
        .collect()
}

pub(crate) fn gold_states(dialogues: &[Dialogue]) -> Vec<Vec<DialogueState>> {
    dialogues
        .iter()
        .map(|d| d.turns.iter().map(|t| t.gold_state.clone()).collect())
        .collect()
}

pub(crate) fn pooled_jga(pred: &[Vec<DialogueState>], gold: &[Vec<DialogueState>]) -> Result<f64> {
    let p: Vec<DialogueState> = pred.iter().flatten().cloned().collect();
    let g: Vec<DialogueState> = gold.iter().flatten().cloned().collect();
    joint_goal_accuracy(&p, &g)
}

/// Best threshold on already-tracked dialogues; ties go to the lower value.
pub fn tune_threshold_tracked(tracked: &[Vec<TrackedTurn>], dialogues: &[Dialogue], grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::invalid("empty threshold grid"));
    }
    if let Some(bad) = grid.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(Error::invalid(format!("threshold {bad} outside (0, 1)")));
    }
    let gold = gold_states(dialogues);
    let mut sorted = grid.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite thresholds"));
    let mut best = (sorted[0], f64::NEG_INFINITY);
    for t in sorted {
        let acc = pooled_jga(&assignments_at(tracked, t), &gold)?;
        if acc > best.1 {
            best = (t, acc);
        }
    }
    Ok(best.0)
}

pub fn tune_threshold<T: Real>(model: &TrackerModel<T>, dev: &[Dialogue], grid: &[f64]) -> Result<f64> {
    let tracked = track_all(model, dev)?;
    tune_threshold_tracked(&tracked, dev, grid)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DialogueMetrics {
    pub id: String,
    pub turns: usize,
    pub correct_turns: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub joint_goal_accuracy: f64,
    pub per_slot_accuracy: BTreeMap<String, f64>,
    /// Fraction of gold values present in their turn's slate; `None` when
    /// no slates exist (rule tracker) or no gold values occur.
    pub slate_recall: Option<f64>,
    pub threshold: Option<f64>,
    pub dialogues: usize,
    pub turns: usize,
    pub truncation_warnings: usize,
    pub per_dialogue: Vec<DialogueMetrics>,
}

impl MetricsReport {
    /// Score predictions against gold states.
    pub fn from_predictions(dialogues: &[Dialogue], slots: &[String], pred: &[Vec<DialogueState>]) -> Result<Self> {
        if pred.len() != dialogues.len() {
            return Err(Error::shape("predicted dialogues", dialogues.len(), pred.len()));
        }
        let gold = gold_states(dialogues);
        let mut slot_correct: BTreeMap<String, usize> = slots.iter().map(|s| (s.clone(), 0)).collect();
        let mut per_dialogue = Vec::with_capacity(dialogues.len());
        let mut turns = 0;
        let mut correct = 0;
        for ((d, p), g) in dialogues.iter().zip(pred).zip(&gold) {
            if p.len() != g.len() {
                return Err(Error::Validation {
                    dialogue: d.id.clone(),
                    message: format!("{} predicted turns for {} gold turns", p.len(), g.len()),
                });
            }
            let ok = p.iter().zip(g).filter(|(a, b)| a == b).count();
            for (a, b) in p.iter().zip(g) {
                for s in slots {
                    if a.get(s) == b.get(s) {
                        *slot_correct.get_mut(s).expect("slot listed") += 1;
                    }
                }
            }
            turns += g.len();
            correct += ok;
            per_dialogue.push(DialogueMetrics {
                id: d.id.clone(),
                turns: g.len(),
                correct_turns: ok,
            });
        }
        if turns == 0 {
            return Err(Error::invalid("no turns to evaluate"));
        }
        Ok(MetricsReport {
            joint_goal_accuracy: correct as f64 / turns as f64,
            per_slot_accuracy: slot_correct
                .into_iter()
                .map(|(s, c)| (s, c as f64 / turns as f64))
                .collect(),
            slate_recall: None,
            threshold: None,
            dialogues: dialogues.len(),
            turns,
            truncation_warnings: 0,
            per_dialogue,
        })
    }

    /// `key=value` lines.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "joint_goal_accuracy={:.6}", self.joint_goal_accuracy);
        for (s, a) in &self.per_slot_accuracy {
            let _ = writeln!(out, "slot_accuracy.{s}={a:.6}");
        }
        match self.slate_recall {
            Some(r) => {
                let _ = writeln!(out, "slate_recall={r:.6}");
            }
            None => {
                let _ = writeln!(out, "slate_recall=NA");
            }
        }
        match self.threshold {
            Some(t) => {
                let _ = writeln!(out, "threshold={t}");
            }
            None => {
                let _ = writeln!(out, "threshold=NA");
            }
        }
        let _ = writeln!(out, "dialogues={}", self.dialogues);
        let _ = writeln!(out, "turns={}", self.turns);
        let _ = writeln!(out, "truncation_warnings={}", self.truncation_warnings);
        out
    }

    /// Tab-separated per-dialogue breakdown with a header row.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("dialogue_id\tturns\tcorrect_turns\tjoint_goal_accuracy\n");
        for d in &self.per_dialogue {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{:.6}",
                d.id,
                d.turns,
                d.correct_turns,
                d.correct_turns as f64 / d.turns.max(1) as f64
            );
        }
        out
    }
}

/// Metrics for already-tracked dialogues at `threshold`.
pub fn evaluate_tracked(
    tracked: &[Vec<TrackedTurn>],
    dialogues: &[Dialogue],
    slots: &[String],
    threshold: f64,
) -> Result<MetricsReport> {
    let pred = assignments_at(tracked, threshold);
    let mut report = MetricsReport::from_predictions(dialogues, slots, &pred)?;
    let (mut hits, mut total, mut truncated) = (0usize, 0usize, 0usize);
    for (turns, d) in tracked.iter().zip(dialogues) {
        for (tt, turn) in turns.iter().zip(&d.turns) {
            truncated += tt.track.truncated();
            for (slot, v) in turn.gold_state.iter() {
                if let StateValue::Value(v) = v {
                    total += 1;
                    let present = tt
                        .track
                        .slots
                        .iter()
                        .any(|s| s.set.slot == *slot && s.dist.slate.index_of(v).is_some());
                    hits += usize::from(present);
                }
            }
        }
    }
    report.slate_recall = (total > 0).then(|| hits as f64 / total as f64);
    report.threshold = Some(threshold);
    report.truncation_warnings = truncated;
    Ok(report)
}

pub fn evaluate<T: Real>(model: &TrackerModel<T>, dialogues: &[Dialogue], threshold: f64) -> Result<MetricsReport> {
    let tracked = track_all(model, dialogues)?;
    let slots = match dialogues.first() {
        Some(d) => model.slots_for(&d.domain)?.to_vec(),
        None => return Err(Error::invalid("no dialogues to evaluate")),
    };
    evaluate_tracked(&tracked, dialogues, &slots, threshold)
}

/// Metrics of the rule-based tracker.
pub fn evaluate_baseline(dialogues: &[Dialogue], slots: &[String]) -> Result<MetricsReport> {
    let pred: Vec<Vec<DialogueState>> = dialogues.iter().map(rule_baseline_track).collect();
    MetricsReport::from_predictions(dialogues, slots, &pred)
}
