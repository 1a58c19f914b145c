//! In-memory dialogues: turns, dialogue acts, LU slot spans and gold states.
//!
//! Everything here is plain data. Value comparison across the crate always
//! goes through [`canonicalize_value`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::DomainSchema;

/// Wire marker for a dontcare state entry.
pub const DONTCARE_MARKER: &str = "__dontcare__";

/// Lowercase, trim and collapse internal whitespace runs to one space.
pub fn canonicalize_value(raw: &str) -> String {
    raw.split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

const DETACHED: &[char] = &['.', ',', '?', '!', ';'];

/// Lowercase whitespace tokenizer that detaches leading and trailing
/// punctuation as separate tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let word = word.to_lowercase();
        let head_len = word.len() - word.trim_start_matches(DETACHED).len();
        let (head, rest) = word.split_at(head_len);
        let core = rest.trim_end_matches(DETACHED);
        let tail = &rest[core.len()..];
        out.extend(head.chars().map(String::from));
        if !core.is_empty() {
            out.push(core.to_string());
        }
        out.extend(tail.chars().map(String::from));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DialogueAct {
    pub act: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
}

impl DialogueAct {
    pub fn bare(act: &str) -> Self {
        DialogueAct {
            act: act.to_string(),
            slot: None,
            value: None,
        }
    }

    pub fn with_slot(act: &str, slot: &str) -> Self {
        DialogueAct {
            act: act.to_string(),
            slot: Some(slot.to_string()),
            value: None,
        }
    }

    pub fn with_value(act: &str, slot: &str, value: &str) -> Self {
        DialogueAct {
            act: act.to_string(),
            slot: Some(slot.to_string()),
            value: Some(canonicalize_value(value)),
        }
    }
}

impl fmt::Display for DialogueAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.slot, &self.value) {
            (Some(s), Some(v)) => write!(f, "{}({}=\"{}\")", self.act, s, v),
            (Some(s), None) => write!(f, "{}({})", self.act, s),
            _ => write!(f, "{}", self.act),
        }
    }
}

/// A slot value recognized by LU, covering tokens `start..end`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SlotSpan {
    pub slot: String,
    pub value: String,
    pub start: usize,
    pub end: usize,
}

/// Per-slot state: a concrete value, dontcare, or not yet specified.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum StateValue {
    Value(String),
    DontCare,
    #[default]
    Unset,
}

impl StateValue {
    pub fn value(v: &str) -> Self {
        StateValue::Value(canonicalize_value(v))
    }

    pub fn is_unset(&self) -> bool {
        matches!(self, StateValue::Unset)
    }

    pub fn as_value(&self) -> Option<&str> {
        match self {
            StateValue::Value(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for StateValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateValue::Value(v) => f.write_str(v),
            StateValue::DontCare => f.write_str(DONTCARE_MARKER),
            StateValue::Unset => f.write_str("__unset__"),
        }
    }
}

/// Mapping slot → state value. Absent slots are unset; unset is never stored.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DialogueState(BTreeMap<String, StateValue>);

impl DialogueState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, slot: &str) -> StateValue {
        self.0.get(slot).cloned().unwrap_or_default()
    }

    pub fn set(&mut self, slot: &str, value: StateValue) {
        if value.is_unset() {
            self.0.remove(slot);
        } else {
            self.0.insert(slot.to_string(), value);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &StateValue)> {
        self.0.iter()
    }

    pub fn slots(&self) -> impl Iterator<Item = &String> {
        self.0.keys()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<(String, StateValue)> for DialogueState {
    fn from_iter<I: IntoIterator<Item = (String, StateValue)>>(iter: I) -> Self {
        let mut s = DialogueState::new();
        for (k, v) in iter {
            s.set(&k, v);
        }
        s
    }
}

impl Serialize for DialogueState {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            match v {
                StateValue::Value(s) => map.serialize_entry(k, s)?,
                StateValue::DontCare => map.serialize_entry(k, DONTCARE_MARKER)?,
                StateValue::Unset => {}
            }
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for DialogueState {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = BTreeMap::<String, String>::deserialize(deserializer)?;
        Ok(raw
            .into_iter()
            .map(|(k, v)| {
                let sv = if v == DONTCARE_MARKER {
                    StateValue::DontCare
                } else {
                    StateValue::Value(v)
                };
                (k, sv)
            })
            .collect())
    }
}

/// A system utterance followed by the user's reply.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Turn {
    pub system_tokens: Vec<String>,
    pub system_acts: Vec<DialogueAct>,
    pub system_spans: Vec<SlotSpan>,
    pub user_tokens: Vec<String>,
    pub user_acts: Vec<DialogueAct>,
    pub user_spans: Vec<SlotSpan>,
    #[serde(rename = "state")]
    pub gold_state: DialogueState,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dialogue {
    pub id: String,
    pub domain: String,
    pub turns: Vec<Turn>,
}

/// One invariant violation found by [`validate_dialogue`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub turn: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.turn {
            Some(t) => write!(f, "turn {}: {}", t, self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Check every structural invariant of `d` against `schema`.
///
/// Violations are returned as data; an empty report means the dialogue is
/// well formed.
pub fn validate_dialogue(d: &Dialogue, schema: &DomainSchema) -> Vec<Violation> {
    let mut report = Vec::new();
    let slots: BTreeSet<&str> = schema.slots.iter().map(String::as_str).collect();
    if d.id.is_empty() {
        report.push(Violation {
            turn: None,
            message: "empty dialogue id".into(),
        });
    }
    if d.domain != schema.domain {
        report.push(Violation {
            turn: None,
            message: format!(
                "domain '{}' does not match schema domain '{}'",
                d.domain, schema.domain
            ),
        });
    }
    if d.turns.is_empty() {
        report.push(Violation {
            turn: None,
            message: "dialogue has no turns".into(),
        });
    }
    for (t, turn) in d.turns.iter().enumerate() {
        let mut push = |message: String| {
            report.push(Violation {
                turn: Some(t),
                message,
            })
        };
        for (side, acts, inventory) in [
            ("system", &turn.system_acts, &schema.system_act_inventory),
            ("user", &turn.user_acts, &schema.user_act_inventory),
        ] {
            for act in acts {
                if !inventory.iter().any(|a| a == &act.act) {
                    push(format!("{side} act '{}' not in act inventory", act.act));
                }
                if act.value.is_some() && act.slot.is_none() {
                    push(format!("{side} act '{}' has a value but no slot", act.act));
                }
                if let Some(s) = &act.slot {
                    if !slots.contains(s.as_str()) {
                        push(format!("{side} act '{act}' names unknown slot '{s}'"));
                    }
                }
                if let Some(v) = &act.value {
                    if canonicalize_value(v) != *v || v.is_empty() {
                        push(format!("{side} act '{act}' value is not canonical"));
                    }
                }
            }
        }
        for (side, tokens, spans) in [
            ("system", &turn.system_tokens, &turn.system_spans),
            ("user", &turn.user_tokens, &turn.user_spans),
        ] {
            for span in spans {
                if !(span.start < span.end && span.end <= tokens.len()) {
                    push(format!(
                        "{side} span {}='{}' [{}, {}) out of bounds for {} tokens",
                        span.slot,
                        span.value,
                        span.start,
                        span.end,
                        tokens.len()
                    ));
                    continue;
                }
                let covered = canonicalize_value(&tokens[span.start..span.end].join(" "));
                if covered != span.value {
                    push(format!(
                        "{side} span {}='{}' covers '{}'",
                        span.slot, span.value, covered
                    ));
                }
                if !slots.contains(span.slot.as_str()) {
                    push(format!("{side} span names unknown slot '{}'", span.slot));
                }
            }
            let mut sorted: Vec<&SlotSpan> = spans.iter().collect();
            sorted.sort_by_key(|s| (s.start, s.end));
            for pair in sorted.windows(2) {
                if pair[1].start < pair[0].end {
                    push(format!(
                        "{side} spans {}='{}' and {}='{}' overlap",
                        pair[0].slot, pair[0].value, pair[1].slot, pair[1].value
                    ));
                }
            }
        }
        for (slot, value) in turn.gold_state.iter() {
            if !slots.contains(slot.as_str()) {
                push(format!("gold state names unknown slot '{slot}'"));
            }
            if let StateValue::Value(v) = value {
                if v.is_empty() || v == DONTCARE_MARKER || canonicalize_value(v) != *v {
                    push(format!("gold state value '{v}' for '{slot}' is not canonical"));
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn schema() -> DomainSchema {
        DomainSchema::new(
            "restaurant",
            &["restaurant", "#people", "time"],
            &["inform", "negate", "affirm"],
            &["greeting", "offer", "request"],
        )
    }

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    fn fig1() -> Dialogue {
        let t1 = Turn {
            user_tokens: toks("book me a table for two at cascal ."),
            user_acts: vec![
                DialogueAct::with_value("inform", "#people", "two"),
                DialogueAct::with_value("inform", "restaurant", "cascal"),
            ],
            user_spans: vec![
                SlotSpan {
                    slot: "#people".into(),
                    value: "two".into(),
                    start: 5,
                    end: 6,
                },
                SlotSpan {
                    slot: "restaurant".into(),
                    value: "cascal".into(),
                    start: 7,
                    end: 8,
                },
            ],
            gold_state: [
                ("restaurant".to_string(), StateValue::value("cascal")),
                ("#people".to_string(), StateValue::value("two")),
            ]
            .into_iter()
            .collect(),
            ..Default::default()
        };
        let mut t2 = Turn {
            system_tokens: toks("i found a table at 6 pm . does that work ?"),
            system_acts: vec![DialogueAct::with_value("offer", "time", "6 pm")],
            system_spans: vec![SlotSpan {
                slot: "time".into(),
                value: "6 pm".into(),
                start: 5,
                end: 7,
            }],
            user_tokens: toks("6 pm is not good for us . how about 7 pm ?"),
            user_acts: vec![
                DialogueAct::with_slot("negate", "time"),
                DialogueAct::with_value("inform", "time", "7 pm"),
            ],
            user_spans: vec![
                SlotSpan {
                    slot: "time".into(),
                    value: "6 pm".into(),
                    start: 0,
                    end: 2,
                },
                SlotSpan {
                    slot: "time".into(),
                    value: "7 pm".into(),
                    start: 10,
                    end: 12,
                },
            ],
            gold_state: t1.gold_state.clone(),
        };
        t2.gold_state.set("time", StateValue::value("7 pm"));
        Dialogue {
            id: "fig1".into(),
            domain: "restaurant".into(),
            turns: vec![t1, t2],
        }
    }

    #[test]
    fn canonical_examples() {
        assert_eq!(canonicalize_value("  Cascal "), "cascal");
        assert_eq!(canonicalize_value("6 PM"), "6 pm");
        assert_eq!(canonicalize_value("a \t  b\nc"), "a b c");
        assert_eq!(canonicalize_value(""), "");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn canonicalize_is_idempotent(s in "\\PC{0,40}") {
            let once = canonicalize_value(&s);
            prop_assert_eq!(canonicalize_value(&once), once);
        }
    }

    #[test]
    fn tokenizer_detaches_punctuation() {
        assert_eq!(
            tokenize("Does that work? Yes, 7:30 PM."),
            vec!["does", "that", "work", "?", "yes", ",", "7:30", "pm", "."]
        );
        assert_eq!(tokenize("?!"), vec!["?", "!"]);
        assert!(tokenize("   ").is_empty());
    }

    #[test]
    fn well_formed_dialogue_has_empty_report() {
        assert!(validate_dialogue(&fig1(), &schema()).is_empty());
    }

    #[test]
    fn out_of_bounds_span_is_reported() {
        let mut d = fig1();
        let n = d.turns[0].user_tokens.len();
        d.turns[0].user_spans[1].start = n - 1;
        d.turns[0].user_spans[1].end = n + 1;
        let report = validate_dialogue(&d, &schema());
        assert_eq!(report.len(), 1, "{report:?}");
        assert_eq!(report[0].turn, Some(0));
        assert!(report[0].message.contains("restaurant"));
    }

    #[test]
    fn unknown_gold_slot_is_reported() {
        let mut d = fig1();
        d.turns[1].gold_state.set("color", StateValue::value("red"));
        let report = validate_dialogue(&d, &schema());
        assert_eq!(report.len(), 1);
        assert!(report[0].message.contains("color"));
    }

    #[test]
    fn overlap_and_inventory_violations() {
        let mut d = fig1();
        d.turns[1].user_spans[1].start = 1;
        d.turns[1].user_spans[1].end = 2;
        d.turns[1].user_spans[1].value = "pm".into();
        d.turns[0].user_acts.push(DialogueAct::bare("shout"));
        let report = validate_dialogue(&d, &schema());
        assert!(report.iter().any(|v| v.message.contains("overlap")));
        assert!(report.iter().any(|v| v.message.contains("shout")));
    }

    #[test]
    fn value_without_slot_is_reported() {
        let mut d = fig1();
        d.turns[0].user_acts.push(DialogueAct {
            act: "inform".into(),
            slot: None,
            value: Some("x".into()),
        });
        let report = validate_dialogue(&d, &schema());
        assert_eq!(report.len(), 1);
    }

    #[test]
    fn validation_is_deterministic() {
        let mut d = fig1();
        d.turns[0].user_spans[0].end = 99;
        assert_eq!(
            validate_dialogue(&d, &schema()),
            validate_dialogue(&d, &schema())
        );
    }

    #[test]
    fn state_round_trips_through_wire_form() {
        let mut s = DialogueState::new();
        s.set("time", StateValue::value("7 pm"));
        s.set("area", StateValue::DontCare);
        s.set("food", StateValue::Unset);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"{"area":"__dontcare__","time":"7 pm"}"#);
        let back: DialogueState = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.get("food"), StateValue::Unset);
    }
}
