//! Utterance, slot and candidate feature vectors.
//!
//! r_utt  = c ⊕ a_u ⊕ c' ⊕ a'_u
//! r_slot = a_s ⊕ a'_s ⊕ p_prev(dontcare) ⊕ p_prev(null)
//! r_cand = a_c ⊕ a'_c ⊕ p_prev(candidate) ⊕ Σ_user h_k ⊕ Σ_system h'_k
//!
//! Primed terms come from the system utterance.

use crate::candidates::ValueSlate;
use crate::delex::DelexUtterance;
use crate::dialogue::DialogueAct;
use crate::error::{Error, Result};
use crate::neural::{EncodedUtterance, Encoder, Graph, Node, Real};

/// Binary act indicators over the user and system act inventories. Each
/// vector has one entry per act name; which acts count depends on the form
/// (bare, slot only, slot and value).
#[derive(Debug, Clone, Copy)]
pub struct ActVectors<'a> {
    pub user_inventory: &'a [String],
    pub system_inventory: &'a [String],
    pub user_acts: &'a [DialogueAct],
    pub system_acts: &'a [DialogueAct],
}

fn indicator(inventory: &[String], acts: &[DialogueAct], keep: impl Fn(&DialogueAct) -> bool) -> Vec<f64> {
    let mut v = vec![0.0; inventory.len()];
    for a in acts.iter().filter(|a| keep(a)) {
        if let Some(i) = inventory.iter().position(|x| *x == a.act) {
            v[i] = 1.0;
        }
    }
    v
}

impl<'a> ActVectors<'a> {
    /// a_u: user acts without a slot.
    pub fn user_free(&self) -> Vec<f64> {
        indicator(self.user_inventory, self.user_acts, |a| a.slot.is_none())
    }

    /// a'_u
    pub fn system_free(&self) -> Vec<f64> {
        indicator(self.system_inventory, self.system_acts, |a| a.slot.is_none())
    }

    /// a_s: user acts naming `slot` without a value.
    pub fn user_slot(&self, slot: &str) -> Vec<f64> {
        indicator(self.user_inventory, self.user_acts, |a| {
            a.slot.as_deref() == Some(slot) && a.value.is_none()
        })
    }

    /// a'_s
    pub fn system_slot(&self, slot: &str) -> Vec<f64> {
        indicator(self.system_inventory, self.system_acts, |a| {
            a.slot.as_deref() == Some(slot) && a.value.is_none()
        })
    }

    /// a_c: user acts carrying `slot = value`.
    pub fn user_value(&self, slot: &str, value: &str) -> Vec<f64> {
        indicator(self.user_inventory, self.user_acts, |a| {
            a.slot.as_deref() == Some(slot) && a.value.as_deref() == Some(value)
        })
    }

    /// a'_c
    pub fn system_value(&self, slot: &str, value: &str) -> Vec<f64> {
        indicator(self.system_inventory, self.system_acts, |a| {
            a.slot.as_deref() == Some(slot) && a.value.as_deref() == Some(value)
        })
    }
}

fn input<T: Real>(g: &mut Graph<'_, T>, v: &[f64]) -> Node {
    g.input(v.iter().map(|x| T::of(*x)).collect())
}

/// Turn-level features shared by every slot.
#[derive(Debug, Clone)]
pub struct UtteranceFeatures {
    pub r_utt: Node,
    pub user: EncodedUtterance,
    pub system: EncodedUtterance,
}

/// Encode both utterances and assemble r_utt.
pub fn featurize_utterances<T: Real>(
    g: &mut Graph<'_, T>,
    encoder: &Encoder,
    user_ids: &[usize],
    system_ids: &[usize],
    acts: &ActVectors<'_>,
) -> Result<UtteranceFeatures> {
    let user = encoder.encode(g, user_ids)?;
    let system = encoder.encode(g, system_ids)?;
    let a_u = input(g, &acts.user_free());
    let a_su = input(g, &acts.system_free());
    let r_utt = g.concat(&[user.summary, a_u, system.summary, a_su]);
    Ok(UtteranceFeatures { r_utt, user, system })
}

/// Previous-turn output of one slot as seen from the current graph.
#[derive(Debug, Clone)]
pub struct PreviousSlot {
    pub slate: ValueSlate,
    pub probs: Node,
}

pub fn featurize_slot<T: Real>(
    g: &mut Graph<'_, T>,
    slot: &str,
    acts: &ActVectors<'_>,
    prev: &PreviousSlot,
) -> Node {
    let a_s = input(g, &acts.user_slot(slot));
    let a_ss = input(g, &acts.system_slot(slot));
    let p_dontcare = g.pick(prev.probs, prev.slate.dontcare_index());
    let p_null = g.pick(prev.probs, prev.slate.null_index());
    g.concat(&[a_s, a_ss, p_dontcare, p_null])
}

fn sum_states<T: Real>(g: &mut Graph<'_, T>, states: &[Node], positions: &[usize], dim: usize) -> Result<Node> {
    if positions.is_empty() {
        return Ok(g.zeros(dim));
    }
    let mut picked = Vec::with_capacity(positions.len());
    for &k in positions {
        picked.push(*states.get(k).ok_or_else(|| {
            Error::invalid(format!("delexicalized position {k} beyond {} encoder states", states.len()))
        })?);
    }
    Ok(if picked.len() == 1 { picked[0] } else { g.add(&picked) })
}

#[allow(clippy::too_many_arguments)]
pub fn featurize_candidate<T: Real>(
    g: &mut Graph<'_, T>,
    value: &str,
    slot: &str,
    user: &DelexUtterance,
    system: &DelexUtterance,
    feats: &UtteranceFeatures,
    state_dim: usize,
    acts: &ActVectors<'_>,
    prev: &PreviousSlot,
) -> Result<Node> {
    let a_c = input(g, &acts.user_value(slot, value));
    let a_sc = input(g, &acts.system_value(slot, value));
    let p = match prev.slate.index_of(value) {
        Some(i) => g.pick(prev.probs, i),
        None => g.scalar(T::zero()),
    };
    let h_user = sum_states(g, &feats.user.states, &user.positions_for(slot, value), state_dim)?;
    let h_system = sum_states(g, &feats.system.states, &system.positions_for(slot, value), state_dim)?;
    Ok(g.concat(&[a_c, a_sc, p, h_user, h_system]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inv(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn negate_forms_land_in_different_vectors() {
        let ui = inv(&["inform", "negate", "affirm"]);
        let si = inv(&["request", "inform"]);
        let slot_negate = [DialogueAct::with_slot("negate", "time")];
        let acts = ActVectors {
            user_inventory: &ui,
            system_inventory: &si,
            user_acts: &slot_negate,
            system_acts: &[],
        };
        assert_eq!(acts.user_slot("time"), vec![0.0, 1.0, 0.0]);
        assert_eq!(acts.user_free(), vec![0.0; 3]);
        assert_eq!(acts.user_slot("date"), vec![0.0; 3]);

        let bare = [DialogueAct::bare("negate")];
        let acts = ActVectors {
            user_acts: &bare,
            ..acts
        };
        assert_eq!(acts.user_free(), vec![0.0, 1.0, 0.0]);
        assert_eq!(acts.user_slot("time"), vec![0.0; 3]);
    }

    #[test]
    fn system_inform_sets_value_bit() {
        let ui = inv(&["inform"]);
        let si = inv(&["request", "inform", "offer"]);
        let sys = [
            DialogueAct::with_value("inform", "price", "cheap"),
            DialogueAct::with_slot("request", "area"),
        ];
        let acts = ActVectors {
            user_inventory: &ui,
            system_inventory: &si,
            user_acts: &[],
            system_acts: &sys,
        };
        assert_eq!(acts.system_value("price", "cheap"), vec![0.0, 1.0, 0.0]);
        assert_eq!(acts.system_value("price", "expensive"), vec![0.0; 3]);
        assert_eq!(acts.system_slot("area"), vec![1.0, 0.0, 0.0]);
        assert_eq!(acts.user_value("price", "cheap"), vec![0.0]);
    }
}
