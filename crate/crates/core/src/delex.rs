//! Delexicalization: LU value spans become `delex(slot)` placeholder tokens.
//! Slot names in the surrounding text are left alone.

use crate::corpus::delex_token;
use crate::dialogue::SlotSpan;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Occurrence {
    pub position: usize,
    pub slot: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DelexUtterance {
    pub tokens: Vec<String>,
    pub occurrences: Vec<Occurrence>,
}

impl DelexUtterance {
    /// Positions holding `delex(slot)` whose original value was `value`.
    pub fn positions_for(&self, slot: &str, value: &str) -> Vec<usize> {
        self.occurrences
            .iter()
            .filter(|o| o.slot == slot && o.value == value)
            .map(|o| o.position)
            .collect()
    }
}

/// Replace each span with a single `delex(slot)` token.
pub fn delexicalize(tokens: &[String], spans: &[SlotSpan]) -> Result<DelexUtterance> {
    let mut sorted: Vec<&SlotSpan> = spans.iter().collect();
    sorted.sort_by_key(|s| (s.start, s.end));
    for s in &sorted {
        if s.start >= s.end || s.end > tokens.len() {
            return Err(Error::invalid(format!(
                "span {}='{}' [{}, {}) out of bounds for {} tokens",
                s.slot,
                s.value,
                s.start,
                s.end,
                tokens.len()
            )));
        }
    }
    for pair in sorted.windows(2) {
        if pair[1].start < pair[0].end {
            return Err(Error::invalid(format!(
                "overlapping spans {}='{}' and {}='{}'",
                pair[0].slot, pair[0].value, pair[1].slot, pair[1].value
            )));
        }
    }

    let mut out = DelexUtterance::default();
    let mut next = 0;
    for s in sorted {
        out.tokens.extend_from_slice(&tokens[next..s.start]);
        out.occurrences.push(Occurrence {
            position: out.tokens.len(),
            slot: s.slot.clone(),
            value: s.value.clone(),
        });
        out.tokens.push(delex_token(&s.slot));
        next = s.end;
    }
    out.tokens.extend_from_slice(&tokens[next..]);
    Ok(out)
}
