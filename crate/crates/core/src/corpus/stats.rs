use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use super::{Corpus, Split};
use crate::dialogue::{Dialogue, StateValue};
use crate::error::{Error, Result};

fn gold_pairs<'a>(ds: &'a [Dialogue]) -> impl Iterator<Item = (&'a str, &'a str)> + 'a {
    ds.iter().flat_map(|d| {
        d.turns.iter().flat_map(|t| {
            t.gold_state.iter().filter_map(|(s, v)| match v {
                StateValue::Value(v) => Some((s.as_str(), v.as_str())),
                _ => None,
            })
        })
    })
}

/// Fraction of distinct (slot, value) pairs in test gold states never seen in
/// train gold states or train user spans.
pub fn compute_oov_rate(train: &[Dialogue], test: &[Dialogue]) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::invalid("OOV rate needs a non-empty test set"));
    }
    let mut seen: BTreeSet<(&str, &str)> = gold_pairs(train).collect();
    for d in train {
        for t in &d.turns {
            for s in &t.user_spans {
                seen.insert((s.slot.as_str(), s.value.as_str()));
            }
        }
    }
    let test_pairs: BTreeSet<(&str, &str)> = gold_pairs(test).collect();
    if test_pairs.is_empty() {
        return Ok(0.0);
    }
    let unseen = test_pairs.iter().filter(|p| !seen.contains(*p)).count();
    Ok(unseen as f64 / test_pairs.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub domain: String,
    pub dialogues: BTreeMap<Split, usize>,
    pub turns: usize,
    pub min_turns: usize,
    pub max_turns: usize,
    pub mean_turns: f64,
    pub oov_rate: Option<f64>,
    /// Distinct gold values per slot, over all splits.
    pub slot_values: BTreeMap<String, usize>,
}

impl CorpusStats {
    /// `key=value` lines.
    pub fn to_report(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "domain={}", self.domain);
        for (split, n) in &self.dialogues {
            let _ = writeln!(out, "dialogues.{split}={n}");
        }
        let _ = writeln!(out, "turns={}", self.turns);
        let _ = writeln!(out, "turns_per_dialogue.min={}", self.min_turns);
        let _ = writeln!(out, "turns_per_dialogue.max={}", self.max_turns);
        let _ = writeln!(out, "turns_per_dialogue.mean={:.4}", self.mean_turns);
        match self.oov_rate {
            Some(r) => {
                let _ = writeln!(out, "oov_rate={r:.4}");
            }
            None => {
                let _ = writeln!(out, "oov_rate=NA");
            }
        }
        for (slot, n) in &self.slot_values {
            let _ = writeln!(out, "values.{slot}={n}");
        }
        out
    }
}

pub fn corpus_stats(c: &Corpus) -> CorpusStats {
    let dialogues = Split::ALL
        .into_iter()
        .map(|s| (s, c.split(s).len()))
        .collect();
    let lengths: Vec<usize> = c.dialogues().map(|(_, d)| d.turns.len()).collect();
    let turns: usize = lengths.iter().sum();
    let mut values: BTreeMap<String, BTreeSet<&str>> =
        c.schema.slots.iter().map(|s| (s.clone(), BTreeSet::new())).collect();
    for split in Split::ALL {
        for (s, v) in gold_pairs(c.split(split)) {
            values.entry(s.to_string()).or_default().insert(v);
        }
    }
    CorpusStats {
        domain: c.schema.domain.clone(),
        dialogues,
        turns,
        min_turns: lengths.iter().copied().min().unwrap_or(0),
        max_turns: lengths.iter().copied().max().unwrap_or(0),
        mean_turns: if lengths.is_empty() {
            0.0
        } else {
            turns as f64 / lengths.len() as f64
        },
        oov_rate: compute_oov_rate(&c.train, &c.test).ok(),
        slot_values: values.into_iter().map(|(k, v)| (k, v.len())).collect(),
    }
}
