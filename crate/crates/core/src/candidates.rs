//! Bounded per-slot candidate sets and the fixed-size slates scored over them.
//!
//! A slate for capacity `K` has `K + 2` positions: the candidates packed
//! first, PAD up to `K`, then dontcare at `K` and null at `K + 1`.

use std::fmt;

use crate::error::{Error, Result};

/// Candidate values of one slot with their previous-turn scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidateSet {
    pub slot: String,
    entries: Vec<(String, f64)>,
    capacity: usize,
}

impl ScoredCandidateSet {
    pub fn new(slot: &str, capacity: usize) -> Self {
        assert!(capacity >= 1, "candidate capacity must be positive");
        ScoredCandidateSet {
            slot: slot.to_string(),
            entries: Vec::new(),
            capacity,
        }
    }

    /// Build from explicit entries; fails on duplicates or overflow.
    pub fn from_entries(slot: &str, capacity: usize, entries: Vec<(String, f64)>) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("candidate capacity must be positive"));
        }
        if entries.len() > capacity {
            return Err(Error::invalid(format!(
                "{} candidates exceed capacity {capacity}",
                entries.len()
            )));
        }
        for (i, (v, _)) in entries.iter().enumerate() {
            if entries[..i].iter().any(|(w, _)| w == v) {
                return Err(Error::invalid(format!("duplicate candidate '{v}'")));
            }
        }
        Ok(ScoredCandidateSet {
            slot: slot.to_string(),
            entries,
            capacity,
        })
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, value: &str) -> bool {
        self.entries.iter().any(|(v, _)| v == value)
    }

    pub fn score(&self, value: &str) -> Option<f64> {
        self.entries.iter().find(|(v, _)| v == value).map(|(_, s)| *s)
    }

    pub fn values(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(v, _)| v.as_str())
    }

    /// Overwrite scores with the probabilities of `dist` at matching slate
    /// positions.
    pub fn rescore(&mut self, dist: &Distribution) {
        for (i, (_, score)) in self.entries.iter_mut().enumerate() {
            *score = dist.probs[i];
        }
    }

    fn push_if_room(&mut self, value: &str, score: f64) -> bool {
        if self.contains(value) {
            return true;
        }
        if self.entries.len() < self.capacity {
            self.entries.push((value.to_string(), score));
            true
        } else {
            false
        }
    }
}

/// Result of one candidate-set update.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateUpdate {
    pub set: ScoredCandidateSet,
    /// Distinct user/system mentions dropped because more than K arrived in
    /// one turn.
    pub truncated: usize,
}

/// One turn of candidate-set maintenance.
///
/// Inserts user mentions, then system mentions, then external mentions
/// (entries new to the set score 0), then previous candidates by descending score,
/// skipping duplicates and stopping at `capacity`. Equal scores keep their
/// previous order.
pub fn update_candidate_set<'a>(
    prev: &ScoredCandidateSet,
    user_mentions: impl IntoIterator<Item = &'a str>,
    system_mentions: impl IntoIterator<Item = &'a str>,
    extra_mentions: impl IntoIterator<Item = &'a str>,
    capacity: usize,
) -> CandidateUpdate {
    let mut next = ScoredCandidateSet::new(&prev.slot, capacity);
    let mut dropped: Vec<&str> = Vec::new();
    // a mention keeps its previous score if it was already a candidate
    let prior = |v: &str| prev.score(v).unwrap_or(0.0);
    for v in user_mentions.into_iter().chain(system_mentions) {
        if !next.push_if_room(v, prior(v)) && !dropped.contains(&v) {
            dropped.push(v);
        }
    }
    for v in extra_mentions {
        next.push_if_room(v, prior(v));
    }
    let mut carried: Vec<&(String, f64)> = prev.entries.iter().collect();
    // stable sort keeps insertion order among ties
    carried.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    for (v, s) in carried {
        if next.len() >= capacity {
            break;
        }
        if !next.contains(v) {
            next.entries.push((v.clone(), *s));
        }
    }
    CandidateUpdate {
        set: next,
        truncated: dropped.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SlateEntry {
    Candidate(String),
    Pad,
    DontCare,
    Null,
}

impl fmt::Display for SlateEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlateEntry::Candidate(v) => f.write_str(v),
            SlateEntry::Pad => f.write_str("__pad__"),
            SlateEntry::DontCare => f.write_str("__dontcare__"),
            SlateEntry::Null => f.write_str("__null__"),
        }
    }
}

/// Fixed-size scoring universe of one slot at one turn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValueSlate {
    pub slot: String,
    entries: Vec<SlateEntry>,
    n_candidates: usize,
}

impl ValueSlate {
    pub fn capacity(&self) -> usize {
        self.entries.len() - 2
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn entries(&self) -> &[SlateEntry] {
        &self.entries
    }

    pub fn n_candidates(&self) -> usize {
        self.n_candidates
    }

    pub fn candidates(&self) -> impl Iterator<Item = &str> {
        self.entries[..self.n_candidates].iter().map(|e| match e {
            SlateEntry::Candidate(v) => v.as_str(),
            _ => unreachable!("candidates are packed first"),
        })
    }

    pub fn dontcare_index(&self) -> usize {
        self.capacity()
    }

    pub fn null_index(&self) -> usize {
        self.capacity() + 1
    }

    pub fn index_of(&self, value: &str) -> Option<usize> {
        self.candidates().position(|v| v == value)
    }

    /// Real-candidate flags over the first `K` positions.
    pub fn mask(&self) -> Vec<bool> {
        (0..self.capacity()).map(|i| i < self.n_candidates).collect()
    }

    /// Softmax mask over all `K + 2` positions.
    pub fn full_mask(&self) -> Vec<bool> {
        let mut m = self.mask();
        m.extend([true, true]);
        m
    }
}

pub fn build_slate(cs: &ScoredCandidateSet) -> ValueSlate {
    let k = cs.capacity();
    let mut entries: Vec<SlateEntry> = cs
        .values()
        .map(|v| SlateEntry::Candidate(v.to_string()))
        .collect();
    entries.resize(k, SlateEntry::Pad);
    entries.push(SlateEntry::DontCare);
    entries.push(SlateEntry::Null);
    ValueSlate {
        slot: cs.slot.clone(),
        entries,
        n_candidates: cs.len(),
    }
}

/// Probabilities over a slate.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub slate: ValueSlate,
    pub probs: Vec<f64>,
}

impl Distribution {
    pub fn dontcare(&self) -> f64 {
        self.probs[self.slate.dontcare_index()]
    }

    pub fn null(&self) -> f64 {
        self.probs[self.slate.null_index()]
    }

    pub fn prob_of(&self, value: &str) -> f64 {
        self.slate.index_of(value).map_or(0.0, |i| self.probs[i])
    }
}

/// All mass on null; only defined for slates without candidates.
pub fn initial_distribution(slate: &ValueSlate) -> Result<Distribution> {
    if slate.n_candidates() > 0 {
        return Err(Error::invalid(format!(
            "initial distribution for slot '{}' requested on a slate with {} candidates",
            slate.slot,
            slate.n_candidates()
        )));
    }
    let mut probs = vec![0.0; slate.len()];
    probs[slate.null_index()] = 1.0;
    Ok(Distribution {
        slate: slate.clone(),
        probs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(entries: &[(&str, f64)], k: usize) -> ScoredCandidateSet {
        ScoredCandidateSet::from_entries(
            "time",
            k,
            entries.iter().map(|(v, s)| (v.to_string(), *s)).collect(),
        )
        .unwrap()
    }

    fn none() -> Vec<&'static str> {
        Vec::new()
    }

    #[test]
    fn first_mention_enters_with_zero_score() {
        let prev = ScoredCandidateSet::new("restaurant", 7);
        let u = update_candidate_set(&prev, ["cascal"], none(), none(), 7);
        assert_eq!(u.set.entries(), &[("cascal".to_string(), 0.0)]);
        assert_eq!(u.truncated, 0);
    }

    #[test]
    fn new_user_value_goes_before_carried_value() {
        let prev = set(&[("6 pm", 0.42)], 7);
        let u = update_candidate_set(&prev, ["7 pm"], none(), none(), 7);
        assert_eq!(
            u.set.entries(),
            &[("7 pm".to_string(), 0.0), ("6 pm".to_string(), 0.42)]
        );
    }

    #[test]
    fn lowest_score_is_evicted() {
        let prev = set(&[("a", 0.6), ("b", 0.3)], 2);
        let u = update_candidate_set(&prev, ["c"], none(), none(), 2);
        assert_eq!(
            u.set.entries(),
            &[("c".to_string(), 0.0), ("a".to_string(), 0.6)]
        );
    }

    #[test]
    fn no_mentions_from_empty_stays_empty() {
        let prev = ScoredCandidateSet::new("x", 7);
        assert!(update_candidate_set(&prev, none(), none(), none(), 7).set.is_empty());
    }

    #[test]
    fn carried_sorted_by_score_ties_stable() {
        let prev = set(&[("a", 0.1), ("b", 0.5), ("c", 0.1), ("d", 0.5)], 4);
        let u = update_candidate_set(&prev, none(), none(), none(), 4);
        let order: Vec<&str> = u.set.values().collect();
        assert_eq!(order, vec!["b", "d", "a", "c"]);
    }

    #[test]
    fn duplicate_mentions_keep_first_occurrence() {
        let prev = set(&[("x", 0.9)], 3);
        let u = update_candidate_set(&prev, ["x", "y"], ["y", "z"], ["x"], 3);
        assert_eq!(
            u.set.entries(),
            &[
                ("x".to_string(), 0.9),
                ("y".to_string(), 0.0),
                ("z".to_string(), 0.0)
            ]
        );
    }

    #[test]
    fn overflow_truncates_and_counts() {
        let prev = ScoredCandidateSet::new("x", 2);
        let u = update_candidate_set(&prev, ["a", "b"], ["c"], ["d"], 2);
        assert_eq!(u.set.values().collect::<Vec<_>>(), vec!["a", "b"]);
        assert_eq!(u.truncated, 1);
        // a dropped value mentioned twice is one warning
        let u = update_candidate_set(&prev, ["a", "b", "c"], ["c"], [], 2);
        assert_eq!(u.truncated, 1);
    }

    #[test]
    fn slate_layout() {
        let s = build_slate(&set(&[("6 pm", 0.0), ("7 pm", 0.0)], 2));
        assert_eq!(
            s.entries(),
            &[
                SlateEntry::Candidate("6 pm".into()),
                SlateEntry::Candidate("7 pm".into()),
                SlateEntry::DontCare,
                SlateEntry::Null
            ]
        );
        assert_eq!(s.mask(), vec![true, true]);

        let s = build_slate(&set(&[("cascal", 0.0)], 7));
        assert_eq!(s.len(), 9);
        assert_eq!(s.mask(), vec![true, false, false, false, false, false, false]);

        let s = build_slate(&ScoredCandidateSet::new("x", 7));
        assert!(s.entries()[..7].iter().all(|e| *e == SlateEntry::Pad));
    }

    #[test]
    fn initial_distribution_is_all_null() {
        let s = build_slate(&ScoredCandidateSet::new("x", 7));
        let d = initial_distribution(&s).unwrap();
        assert_eq!(d.null(), 1.0);
        assert_eq!(d.dontcare(), 0.0);
        assert_eq!(d.probs.iter().sum::<f64>(), 1.0);
        let s = build_slate(&set(&[("a", 0.0)], 3));
        assert!(initial_distribution(&s).is_err());
    }
}
