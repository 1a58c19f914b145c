//! Line-oriented corpus files.
//!
//! Line 1 is a header object
//! `{"format_version","domain","slots","user_act_inventory","system_act_inventory"}`.
//! Every following line holds one dialogue `{"id","split","turns"}`, where each
//! turn is
//! `{"system_tokens","system_acts","system_spans","user_tokens","user_acts","user_spans","state"}`.
//! Keys are written in exactly this order, without insignificant whitespace,
//! and dialogues are written train first, then dev, then test.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Corpus, DomainSchema, Split};
use crate::dialogue::{Dialogue, Turn};
use crate::error::{Error, Result};

pub const CORPUS_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format_version: u32,
    domain: String,
    slots: Vec<String>,
    user_act_inventory: Vec<String>,
    system_act_inventory: Vec<String>,
}

#[derive(Serialize)]
struct DialogueOut<'a> {
    id: &'a str,
    split: Split,
    turns: &'a [Turn],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DialogueIn {
    id: String,
    split: Split,
    turns: Vec<Turn>,
}

/// Canonical text of a corpus.
pub fn render_corpus(c: &Corpus) -> String {
    let header = Header {
        format_version: CORPUS_FORMAT_VERSION,
        domain: c.schema.domain.clone(),
        slots: c.schema.slots.clone(),
        user_act_inventory: c.schema.user_act_inventory.clone(),
        system_act_inventory: c.schema.system_act_inventory.clone(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for (split, d) in c.dialogues() {
        let line = DialogueOut {
            id: &d.id,
            split,
            turns: &d.turns,
        };
        out.push_str(&serde_json::to_string(&line).expect("dialogue serializes"));
        out.push('\n');
    }
    out
}

pub fn write_corpus(c: &Corpus, path: &Path) -> Result<()> {
    std::fs::write(path, render_corpus(c)).map_err(|e| Error::io(path, e))
}

/// Parse and validate corpus text. `path` only labels error messages.
pub fn read_corpus(text: &str, path: &Path) -> Result<Corpus> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    let (_, first) = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing header line".into()))?;
    let header: Header =
        serde_json::from_str(first).map_err(|e| parse_err(1, format!("header: {e}")))?;
    if header.format_version != CORPUS_FORMAT_VERSION {
        return Err(Error::Version {
            found: header.format_version,
            expected: CORPUS_FORMAT_VERSION,
        });
    }
    let schema = DomainSchema {
        domain: header.domain,
        slots: header.slots,
        user_act_inventory: header.user_act_inventory,
        system_act_inventory: header.system_act_inventory,
        value_inventory: Default::default(),
    };
    let mut corpus = Corpus::empty(schema);
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let raw: DialogueIn = serde_json::from_str(line).map_err(|e| parse_err(i + 1, e.to_string()))?;
        let dialogue = Dialogue {
            id: raw.id,
            domain: corpus.schema.domain.clone(),
            turns: raw.turns,
        };
        corpus.split_mut(raw.split).push(dialogue);
    }
    corpus.validate()?;
    Ok(corpus)
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_corpus(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialogue::{tokenize, DialogueAct, SlotSpan, StateValue};

    fn schema() -> DomainSchema {
        DomainSchema::new("toy", &["food"], &["inform", "affirm"], &["request"])
    }

    fn dialogue(id: &str, food: &str) -> Dialogue {
        let mut turn = Turn {
            system_tokens: tokenize("what food ?"),
            system_acts: vec![DialogueAct::with_slot("request", "food")],
            user_tokens: tokenize(&format!("{food} please")),
            user_acts: vec![DialogueAct::with_value("inform", "food", food)],
            user_spans: vec![SlotSpan {
                slot: "food".into(),
                value: food.into(),
                start: 0,
                end: 1,
            }],
            ..Default::default()
        };
        turn.gold_state.set("food", StateValue::value(food));
        Dialogue {
            id: id.into(),
            domain: "toy".into(),
            turns: vec![turn],
        }
    }

    #[test]
    fn three_dialogues_round_trip_in_order() {
        let mut c = Corpus::empty(schema());
        c.train = vec![dialogue("a", "thai"), dialogue("b", "greek")];
        c.test = vec![dialogue("c", "thai")];
        let text = render_corpus(&c);
        let back = read_corpus(&text, Path::new("mem")).unwrap();
        assert_eq!(back, c);
        assert_eq!(render_corpus(&back), text);
        assert_eq!(back.train[0].id, "a");
        assert_eq!(back.train[1].id, "b");
    }

    #[test]
    fn canonical_key_order() {
        let mut c = Corpus::empty(schema());
        c.dev = vec![dialogue("x", "thai")];
        let text = render_corpus(&c);
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            r#"{"format_version":1,"domain":"toy","slots":["food"],"user_act_inventory":["inform","affirm"],"system_act_inventory":["request"]}"#
        );
        assert_eq!(
            lines.next().unwrap(),
            r#"{"id":"x","split":"dev","turns":[{"system_tokens":["what","food","?"],"system_acts":[{"act":"request","slot":"food"}],"system_spans":[],"user_tokens":["thai","please"],"user_acts":[{"act":"inform","slot":"food","value":"thai"}],"user_spans":[{"slot":"food","value":"thai","start":0,"end":1}],"state":{"food":"thai"}}]}"#
        );
    }

    #[test]
    fn empty_corpus_is_header_only() {
        let text = render_corpus(&Corpus::empty(schema()));
        assert_eq!(text.lines().count(), 1);
        let back = read_corpus(&text, Path::new("mem")).unwrap();
        assert!(back.train.is_empty() && back.dev.is_empty() && back.test.is_empty());
    }

    #[test]
    fn overlapping_spans_fail_validation_with_dialogue_id() {
        let mut d = dialogue("bad-one", "thai");
        d.turns[0].user_spans.push(SlotSpan {
            slot: "food".into(),
            value: "thai".into(),
            start: 0,
            end: 1,
        });
        let mut c = Corpus::empty(schema());
        c.train = vec![d];
        let err = read_corpus(&render_corpus(&c), Path::new("mem")).unwrap_err();
        match err {
            Error::Validation { dialogue, message } => {
                assert_eq!(dialogue, "bad-one");
                assert!(message.contains("overlap"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn parse_error_names_line() {
        let mut text = render_corpus(&Corpus::empty(schema()));
        text.push_str("{\"id\": 3}\n");
        match read_corpus(&text, Path::new("c.jsonl")).unwrap_err() {
            Error::Parse { line, path, .. } => {
                assert_eq!(line, 2);
                assert_eq!(path, Path::new("c.jsonl"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn version_mismatch_is_reported() {
        let text = render_corpus(&Corpus::empty(schema())).replace("\"format_version\":1", "\"format_version\":7");
        assert!(matches!(
            read_corpus(&text, Path::new("m")),
            Err(Error::Version { found: 7, .. })
        ));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut c = Corpus::empty(schema());
        c.train = vec![dialogue("a", "thai")];
        c.test = vec![dialogue("a", "thai")];
        assert!(matches!(
            read_corpus(&render_corpus(&c), Path::new("m")),
            Err(Error::Validation { .. })
        ));
    }
}
