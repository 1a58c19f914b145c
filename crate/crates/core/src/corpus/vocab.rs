use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::delex::delexicalize;
use crate::dialogue::Dialogue;

pub const UNK_TOKEN: &str = "<unk>";
pub const BOUNDARY_TOKEN: &str = "<s>";

pub fn delex_token(slot: &str) -> String {
    format!("delex({slot})")
}

/// Dense token ids. Id 0 is UNK, id 1 the sentence boundary, then one
/// `delex(slot)` per slot, then corpus tokens by (count desc, token asc).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary { tokens, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

impl Vocabulary {
    pub fn unk_id(&self) -> u32 {
        0
    }

    pub fn boundary_id(&self) -> u32 {
        1
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    /// Id of `token`, or UNK.
    pub fn lookup(&self, token: &str) -> u32 {
        self.get(token).unwrap_or(0)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Append tokens not yet present, keeping existing ids stable.
    pub fn extend<I: IntoIterator<Item = String>>(&mut self, tokens: I) {
        for t in tokens {
            if !self.index.contains_key(&t) {
                self.index.insert(t.clone(), self.tokens.len() as u32);
                self.tokens.push(t);
            }
        }
    }
}

/// Count delexicalized tokens of both sides of every turn.
pub(crate) fn count_tokens<'a>(
    dialogues: impl IntoIterator<Item = &'a Dialogue>,
) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for d in dialogues {
        for turn in &d.turns {
            for (tokens, spans) in [
                (&turn.system_tokens, &turn.system_spans),
                (&turn.user_tokens, &turn.user_spans),
            ] {
                let delexed = delexicalize(tokens, spans)
                    .map(|u| u.tokens)
                    .unwrap_or_else(|_| tokens.clone());
                for t in delexed {
                    *counts.entry(t).or_insert(0) += 1;
                }
            }
        }
    }
    counts
}

pub(crate) fn vocab_from_counts(
    counts: &BTreeMap<String, usize>,
    slots: &[String],
    min_count: usize,
) -> Vocabulary {
    let mut tokens = vec![UNK_TOKEN.to_string(), BOUNDARY_TOKEN.to_string()];
    tokens.extend(slots.iter().map(|s| delex_token(s)));
    let mut vocab = Vocabulary::from(tokens);
    let mut ranked: Vec<(&String, &usize)> = counts
        .iter()
        .filter(|(_, &c)| c >= min_count.max(1))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
    vocab.extend(ranked.into_iter().map(|(t, _)| t.clone()));
    vocab
}

/// Vocabulary over delexicalized training utterances.
pub fn build_vocab(train: &[Dialogue], slots: &[String], min_count: usize) -> Vocabulary {
    vocab_from_counts(&count_tokens(train), slots, min_count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialogue::Turn;

    fn corpus() -> Vec<Dialogue> {
        let turn = Turn {
            user_tokens: vec!["a".into(), "a".into(), "b".into()],
            ..Default::default()
        };
        vec![Dialogue {
            id: "d".into(),
            domain: "x".into(),
            turns: vec![turn],
        }]
    }

    #[test]
    fn min_count_one_keeps_everything() {
        let v = build_vocab(&corpus(), &["food".into()], 1);
        assert_eq!(v.tokens(), &["<unk>", "<s>", "delex(food)", "a", "b"]);
        assert_ne!(v.lookup("b"), v.unk_id());
    }

    #[test]
    fn min_count_two_drops_rare_tokens() {
        let v = build_vocab(&corpus(), &["food".into()], 2);
        assert!(v.get("b").is_none());
        assert_eq!(v.lookup("b"), v.unk_id());
        assert_eq!(v.lookup("a"), 3);
        assert_eq!(v.get("delex(food)"), Some(2));
    }

    #[test]
    fn deterministic_ids() {
        let a = build_vocab(&corpus(), &["food".into()], 1);
        let b = build_vocab(&corpus(), &["food".into()], 1);
        assert_eq!(a, b);
    }

    #[test]
    fn serde_as_token_list() {
        let v = build_vocab(&corpus(), &["food".into()], 1);
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
    }
}
