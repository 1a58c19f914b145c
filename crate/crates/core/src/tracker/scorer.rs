//! The candidate scorer.
//!
//! l_c    = W2 · σ(W1 · f_c + b1) + b2,   f_c = g ⊕ r_cand(c)
//! l_dc   = W4 · σ(W3 · g + b3) + b4,     g = r_utt ⊕ r_slot
//! l_null = learned scalar
//! p      = softmax over candidates, dontcare and null; PAD masked out.
//!
//! W1 and W3 are applied block by block so the r_utt part is computed once
//! per turn and the r_slot part once per slot.

use crate::candidates::{Distribution, ValueSlate};
use crate::error::{Error, Result};
use crate::neural::{Graph, Init, Node, ParamId, ParameterStore, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScorerParams {
    pub l_null: ParamId,
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
    pub w3: ParamId,
    pub b3: ParamId,
    pub w4: ParamId,
    pub b4: ParamId,
}

/// Per-turn partial products of one scorer.
#[derive(Debug, Clone, Copy)]
pub struct ScorerTurn {
    utt_dim: usize,
    candidate_pre: Node,
    dontcare_pre: Node,
    l_null: Node,
}

impl ScorerParams {
    pub fn register<T: Real>(
        store: &mut ParameterStore<T>,
        key: &str,
        g_dim: usize,
        f_dim: usize,
        hidden: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut add = |name: &str, shape: &[usize], init: Init| {
            store.add(&format!("scorer.{key}.{name}"), shape, init, seed)
        };
        Ok(ScorerParams {
            l_null: add("l_null", &[1], Init::Zeros)?,
            w1: add("w1", &[hidden, f_dim], Init::Xavier)?,
            b1: add("b1", &[hidden], Init::Zeros)?,
            w2: add("w2", &[1, hidden], Init::Xavier)?,
            b2: add("b2", &[1], Init::Zeros)?,
            w3: add("w3", &[hidden, g_dim], Init::Xavier)?,
            b3: add("b3", &[hidden], Init::Zeros)?,
            w4: add("w4", &[1, hidden], Init::Xavier)?,
            b4: add("b4", &[1], Init::Zeros)?,
        })
    }

    pub fn lookup<T: Real>(store: &ParameterStore<T>, key: &str) -> Result<Self> {
        let get = |name: &str| store.require(&format!("scorer.{key}.{name}"));
        Ok(ScorerParams {
            l_null: get("l_null")?,
            w1: get("w1")?,
            b1: get("b1")?,
            w2: get("w2")?,
            b2: get("b2")?,
            w3: get("w3")?,
            b3: get("b3")?,
            w4: get("w4")?,
            b4: get("b4")?,
        })
    }

    pub fn ids(&self) -> [ParamId; 9] {
        [
            self.l_null, self.w1, self.b1, self.w2, self.b2, self.w3, self.b3, self.w4, self.b4,
        ]
    }

    /// Width of f (columns of W1).
    pub fn f_dim<T: Real>(&self, store: &ParameterStore<T>) -> usize {
        store.tensor(self.w1).rows_cols().1
    }

    /// Width of g (columns of W3).
    pub fn g_dim<T: Real>(&self, store: &ParameterStore<T>) -> usize {
        store.tensor(self.w3).rows_cols().1
    }

    /// Partial products depending only on r_utt.
    pub fn begin_turn<T: Real>(&self, g: &mut Graph<'_, T>, r_utt: Node) -> ScorerTurn {
        ScorerTurn {
            utt_dim: g.value(r_utt).len(),
            candidate_pre: g.affine(&[(self.w1, 0, r_utt)], Some(self.b1)),
            dontcare_pre: g.affine(&[(self.w3, 0, r_utt)], Some(self.b3)),
            l_null: g.param(self.l_null),
        }
    }

    /// Distribution node over the slate for one slot.
    pub fn score<T: Real>(
        &self,
        g: &mut Graph<'_, T>,
        turn: &ScorerTurn,
        r_slot: Node,
        r_cands: &[Node],
        capacity: usize,
    ) -> Result<Node> {
        let store = g.store();
        let g_dim = turn.utt_dim + g.value(r_slot).len();
        if g_dim != self.g_dim(store) {
            return Err(Error::shape("scorer input g", self.g_dim(store), g_dim));
        }
        if r_cands.len() > capacity {
            return Err(Error::shape("slate candidates", capacity, r_cands.len()));
        }
        let slot_pre = g.affine(&[(self.w1, turn.utt_dim, r_slot)], None);
        let mut logits = Vec::with_capacity(capacity + 2);
        for &rc in r_cands {
            let f_dim = g_dim + g.value(rc).len();
            if f_dim != self.f_dim(store) {
                return Err(Error::shape("scorer input f", self.f_dim(store), f_dim));
            }
            let cand_pre = g.affine(&[(self.w1, g_dim, rc)], None);
            let pre = g.add(&[turn.candidate_pre, slot_pre, cand_pre]);
            let hidden = g.sigmoid(pre);
            logits.push(Some(g.affine(&[(self.w2, 0, hidden)], Some(self.b2))));
        }
        logits.resize(capacity, None);
        let dc_slot = g.affine(&[(self.w3, turn.utt_dim, r_slot)], None);
        let dc_pre = g.add(&[turn.dontcare_pre, dc_slot]);
        let dc_hidden = g.sigmoid(dc_pre);
        logits.push(Some(g.affine(&[(self.w4, 0, dc_hidden)], Some(self.b4))));
        logits.push(Some(turn.l_null));
        Ok(g.softmax(&logits))
    }
}

/// Score a slate from explicit feature vectors: `g` = r_utt ⊕ r_slot and
/// one r_cand per real candidate.
pub fn score_slate<T: Real>(
    store: &ParameterStore<T>,
    params: &ScorerParams,
    slate: &ValueSlate,
    g_features: &[T],
    r_cands: &[Vec<T>],
) -> Result<Distribution> {
    if r_cands.len() != slate.n_candidates() {
        return Err(Error::shape("candidate features", slate.n_candidates(), r_cands.len()));
    }
    let mut g = Graph::new(store);
    let r_utt = g.input(g_features.to_vec());
    let r_slot = g.input(Vec::new());
    let turn = params.begin_turn(&mut g, r_utt);
    let cands: Vec<Node> = r_cands.iter().map(|v| g.input(v.clone())).collect();
    let probs = params.score(&mut g, &turn, r_slot, &cands, slate.capacity())?;
    Ok(Distribution {
        slate: slate.clone(),
        probs: g.value(probs).iter().map(|p| p.f64()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidates::{build_slate, ScoredCandidateSet};

    fn slate(values: &[&str], k: usize) -> ValueSlate {
        build_slate(
            &ScoredCandidateSet::from_entries("s", k, values.iter().map(|v| (v.to_string(), 0.0)).collect())
                .unwrap(),
        )
    }

    fn zeroed(g_dim: usize, f_dim: usize, hidden: usize) -> (ParameterStore<f64>, ScorerParams) {
        let mut s = ParameterStore::new();
        let p = ScorerParams::register(&mut s, "shared", g_dim, f_dim, hidden, 0).unwrap();
        for id in p.ids() {
            s.values_mut(id).iter_mut().for_each(|v| *v = 0.0);
        }
        (s, p)
    }

    #[test]
    fn zero_parameters_are_uniform_over_real_entries() {
        let (s, p) = zeroed(3, 5, 4);
        let d = score_slate(&s, &p, &slate(&["a", "b"], 3), &[0.2, -1.0, 3.0], &[vec![1.0, 2.0], vec![0.5, 0.0]])
            .unwrap();
        assert_eq!(d.probs, vec![0.25, 0.25, 0.0, 0.25, 0.25]);
        let d = score_slate(&s, &p, &slate(&[], 3), &[0.2, -1.0, 3.0], &[]).unwrap();
        assert_eq!(d.probs, vec![0.0, 0.0, 0.0, 0.5, 0.5]);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let (s, p) = zeroed(3, 5, 4);
        assert!(score_slate(&s, &p, &slate(&["a"], 3), &[0.0; 2], &[vec![0.0; 2]]).is_err());
        assert!(score_slate(&s, &p, &slate(&["a"], 3), &[0.0; 3], &[vec![0.0; 3]]).is_err());
    }
}
