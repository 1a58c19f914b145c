use serde::{Deserialize, Serialize};

use super::features::{featurize_candidate, featurize_slot, featurize_utterances, ActVectors, PreviousSlot};
use super::{ScorerTurn, TrackerModel};
use crate::candidates::{
    build_slate, initial_distribution, update_candidate_set, Distribution, ScoredCandidateSet, ValueSlate,
};
use crate::delex::{delexicalize, DelexUtterance};
use crate::dialogue::{Dialogue, DialogueAct, DialogueState, StateValue, Turn};
use crate::error::{Error, Result};
use crate::evaluation::select_assignments;
use crate::neural::{Graph, Node, ParamId, Real};

/// One slot's state after a turn.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotTrackState {
    /// Candidates scored with this turn's probabilities.
    pub set: ScoredCandidateSet,
    pub dist: Distribution,
    /// Mentions dropped this turn because more than K arrived.
    pub truncated: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurnTrackState {
    pub slots: Vec<SlotTrackState>,
}

impl TurnTrackState {
    /// Empty candidate sets with all mass on null.
    pub fn initial(slots: &[String], capacity: usize) -> Self {
        let slots = slots
            .iter()
            .map(|s| {
                let set = ScoredCandidateSet::new(s, capacity);
                let dist = initial_distribution(&build_slate(&set)).expect("empty slate");
                SlotTrackState {
                    set,
                    dist,
                    truncated: 0,
                }
            })
            .collect();
        TurnTrackState { slots }
    }

    pub fn distributions(&self) -> Vec<Distribution> {
        self.slots.iter().map(|s| s.dist.clone()).collect()
    }

    pub fn truncated(&self) -> usize {
        self.slots.iter().map(|s| s.truncated).sum()
    }
}

/// Previous distributions as input nodes of a fresh graph.
pub fn previous_from_state<T: Real>(g: &mut Graph<'_, T>, state: &TurnTrackState) -> Vec<PreviousSlot> {
    state
        .slots
        .iter()
        .map(|s| PreviousSlot {
            slate: s.dist.slate.clone(),
            probs: g.input(s.dist.probs.iter().map(|p| T::of(*p)).collect()),
        })
        .collect()
}

/// Output of one slot for one turn inside a graph.
#[derive(Debug, Clone)]
pub struct SlotForward {
    pub slot: String,
    /// Updated candidates, still carrying previous-turn scores.
    pub set: ScoredCandidateSet,
    pub slate: ValueSlate,
    pub probs: Node,
    pub truncated: usize,
}

impl SlotForward {
    pub fn distribution<T: Real>(&self, g: &Graph<'_, T>) -> Distribution {
        Distribution {
            slate: self.slate.clone(),
            probs: g.value(self.probs).iter().map(|p| p.f64()).collect(),
        }
    }

    pub fn into_state<T: Real>(self, g: &Graph<'_, T>) -> SlotTrackState {
        let dist = self.distribution(g);
        let mut set = self.set;
        set.rescore(&dist);
        SlotTrackState {
            set,
            dist,
            truncated: self.truncated,
        }
    }
}

fn token_ids<T: Real>(model: &TrackerModel<T>, u: &DelexUtterance) -> Vec<usize> {
    let vocab = &model.config.vocabulary;
    if u.tokens.is_empty() {
        return vec![vocab.boundary_id() as usize];
    }
    u.tokens.iter().map(|t| vocab.lookup(t) as usize).collect()
}

fn mentions<'a>(slot: &str, spans: impl Iterator<Item = (&'a str, &'a str)>) -> Vec<&'a str> {
    spans.filter(|(s, _)| *s == slot).map(|(_, v)| v).collect()
}

/// Run one turn for `slots`, given the previous candidate sets and
/// distributions (as nodes of `g`).
pub fn forward_turn<T: Real>(
    g: &mut Graph<'_, T>,
    model: &TrackerModel<T>,
    turn: &Turn,
    sets: &[ScoredCandidateSet],
    prev: &[PreviousSlot],
) -> Result<Vec<SlotForward>> {
    if sets.len() != prev.len() {
        return Err(Error::shape("previous slot state", sets.len(), prev.len()));
    }
    let capacity = model.config.capacity;
    let user = delexicalize(&turn.user_tokens, &turn.user_spans)?;
    let system_present = !turn.system_tokens.is_empty();
    let system = if system_present {
        delexicalize(&turn.system_tokens, &turn.system_spans)?
    } else {
        DelexUtterance::default()
    };
    let no_acts: &[DialogueAct] = &[];
    let acts = ActVectors {
        user_inventory: &model.config.user_acts,
        system_inventory: &model.config.system_acts,
        user_acts: &turn.user_acts,
        system_acts: if system_present { &turn.system_acts } else { no_acts },
    };
    let feats = featurize_utterances(
        g,
        &model.encoder,
        &token_ids(model, &user),
        &token_ids(model, &system),
        &acts,
    )?;
    let state_dim = model.encoder.state_dim();

    // r_utt partial products, once per distinct scorer
    let mut turn_cache: Vec<(ParamId, ScorerTurn)> = Vec::new();
    let mut out = Vec::with_capacity(sets.len());
    for (set, p) in sets.iter().zip(prev) {
        let slot = set.slot.as_str();
        let user_mentions = mentions(slot, turn.user_spans.iter().map(|s| (s.slot.as_str(), s.value.as_str())));
        let system_mentions = mentions(
            slot,
            acts.system_acts
                .iter()
                .filter_map(|a| Some((a.slot.as_deref()?, a.value.as_deref()?))),
        );
        let update = update_candidate_set(set, user_mentions, system_mentions, [], capacity);
        let slate = build_slate(&update.set);

        let scorer = *model.scorer_for(slot)?;
        let key = scorer.w1;
        let st = match turn_cache.iter().find(|(k, _)| *k == key) {
            Some((_, st)) => *st,
            None => {
                let st = scorer.begin_turn(g, feats.r_utt);
                turn_cache.push((key, st));
                st
            }
        };
        let r_slot = featurize_slot(g, slot, &acts, p);
        let mut r_cands = Vec::with_capacity(slate.n_candidates());
        for value in slate.candidates() {
            r_cands.push(featurize_candidate(
                g, value, slot, &user, &system, &feats, state_dim, &acts, p,
            )?);
        }
        let probs = scorer.score(g, &st, r_slot, &r_cands, capacity)?;
        out.push(SlotForward {
            slot: slot.to_string(),
            set: update.set,
            slate,
            probs,
            truncated: update.truncated,
        });
    }
    Ok(out)
}

/// One inference step.
pub fn track_turn<T: Real>(prev: &TurnTrackState, turn: &Turn, model: &TrackerModel<T>) -> Result<TurnTrackState> {
    let mut g = Graph::new(&model.store);
    let nodes = previous_from_state(&mut g, prev);
    let sets: Vec<ScoredCandidateSet> = prev.slots.iter().map(|s| s.set.clone()).collect();
    let outs = forward_turn(&mut g, model, turn, &sets, &nodes)?;
    Ok(TurnTrackState {
        slots: outs.into_iter().map(|o| o.into_state(&g)).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackedTurn {
    pub state: DialogueState,
    pub track: TurnTrackState,
}

/// Track every turn of `d` and assign values with the model's threshold.
pub fn track_dialogue<T: Real>(d: &Dialogue, model: &TrackerModel<T>) -> Result<Vec<TrackedTurn>> {
    let slots = model.slots_for(&d.domain)?;
    let mut state = TurnTrackState::initial(slots, model.config.capacity);
    let mut out = Vec::with_capacity(d.turns.len());
    for (i, turn) in d.turns.iter().enumerate() {
        state = track_turn(&state, turn, model).map_err(|e| Error::Validation {
            dialogue: d.id.clone(),
            message: format!("turn {i}: {e}"),
        })?;
        let assigned = select_assignments(&state.distributions(), model.config.threshold);
        out.push(TrackedTurn {
            state: assigned,
            track: state.clone(),
        });
    }
    Ok(out)
}

/// One line of tracking output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingRecord {
    pub dialogue_id: String,
    pub turn: usize,
    pub slot: String,
    pub slate: Vec<String>,
    pub probabilities: Vec<f64>,
    /// Assigned value, `__dontcare__`, or null when unset.
    pub assignment: Option<String>,
}

pub fn tracking_records(dialogue_id: &str, turns: &[TrackedTurn]) -> Vec<TrackingRecord> {
    let mut out = Vec::new();
    for (t, tt) in turns.iter().enumerate() {
        for s in &tt.track.slots {
            let assignment = match tt.state.get(&s.set.slot) {
                StateValue::Unset => None,
                v => Some(v.to_string()),
            };
            out.push(TrackingRecord {
                dialogue_id: dialogue_id.to_string(),
                turn: t,
                slot: s.set.slot.clone(),
                slate: s.dist.slate.entries().iter().map(|e| e.to_string()).collect(),
                probabilities: s.dist.probs.clone(),
                assignment,
            });
        }
    }
    out
}
