//! Converters from public dataset layouts into [`Corpus`].
//!
//! DSTC2 carries no LU spans, so spans are recovered by locating each act
//! value's tokens in the transcript. The simulated-dialogue datasets carry
//! token spans directly.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use super::{Corpus, DomainSchema, Split};
use crate::dialogue::{canonicalize_value, tokenize, Dialogue, DialogueAct, DialogueState, SlotSpan, StateValue, Turn};
use crate::error::{Error, Result};

/// Informable slots tracked for DSTC2.
pub const DSTC2_SLOTS: &[&str] = &["pricerange", "area", "food"];

/// Slot renames applied to the simulated datasets so they share names with
/// the built-in schemas.
pub const SIM_SLOT_RENAMES: &[(&str, &str)] = &[
    ("price_range", "pricerange"),
    ("location", "area"),
    ("restaurant_name", "restaurant"),
    ("category", "food"),
    ("num_people", "#people"),
    ("theatre_name", "theatre"),
];

const DONTCARE_VALUES: &[&str] = &["dontcare", "dont care", "do n't care", "don't care"];

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

fn bad(path: &Path, what: &str) -> Error {
    Error::invalid(format!("{}: {what}", path.display()))
}

fn str_field<'a>(v: &'a Value, key: &str) -> Option<&'a str> {
    v.get(key).and_then(Value::as_str)
}

fn is_dontcare(value: &str) -> bool {
    DONTCARE_VALUES.contains(&value)
}

/// Accumulates act inventories and slots in first-seen order.
#[derive(Default)]
struct Inventories {
    slots: Vec<String>,
    user_acts: Vec<String>,
    system_acts: Vec<String>,
}

fn note(list: &mut Vec<String>, x: &str) {
    if !list.iter().any(|y| y == x) {
        list.push(x.to_string());
    }
}

impl Inventories {
    fn note_turn(&mut self, turn: &Turn) {
        for a in &turn.user_acts {
            note(&mut self.user_acts, &a.act);
        }
        for a in &turn.system_acts {
            note(&mut self.system_acts, &a.act);
        }
    }
}

/// Span over the first unclaimed occurrence of `value`'s tokens.
fn locate(tokens: &[String], slot: &str, value: &str, taken: &[SlotSpan]) -> Option<SlotSpan> {
    let needle = tokenize(value);
    if needle.is_empty() || needle.len() > tokens.len() || canonicalize_value(&needle.join(" ")) != value {
        return None;
    }
    (0..=tokens.len() - needle.len())
        .find(|&i| {
            tokens[i..i + needle.len()] == needle[..]
                && taken.iter().all(|s| s.end <= i || i + needle.len() <= s.start)
        })
        .map(|start| SlotSpan {
            slot: slot.to_string(),
            value: value.to_string(),
            start,
            end: start + needle.len(),
        })
}

fn spans_from_acts(tokens: &[String], acts: &[DialogueAct]) -> Vec<SlotSpan> {
    let mut spans: Vec<SlotSpan> = Vec::new();
    for a in acts {
        if let (Some(s), Some(v)) = (&a.slot, &a.value) {
            if spans.iter().any(|x| x.slot == *s && x.value == *v) {
                continue;
            }
            if let Some(span) = locate(tokens, s, v, &spans) {
                spans.push(span);
            }
        }
    }
    spans.sort_by_key(|s| s.start);
    spans
}

/// DSTC2 act list (`[{"act", "slots": [[slot, value], ...]}]`) restricted to
/// the tracked slots. `requested` resolves `this=dontcare`.
fn dstc2_acts(raw: &Value, requested: Option<&str>) -> Vec<DialogueAct> {
    let mut out: Vec<DialogueAct> = Vec::new();
    let mut push = |a: DialogueAct| {
        if !out.contains(&a) {
            out.push(a);
        }
    };
    for act in raw.as_array().into_iter().flatten() {
        let Some(name) = str_field(act, "act") else { continue };
        let name = canonicalize_value(name);
        let pairs: Vec<(String, String)> = act
            .get("slots")
            .and_then(Value::as_array)
            .into_iter()
            .flatten()
            .filter_map(|p| {
                let p = p.as_array()?;
                Some((p.first()?.as_str()?.to_string(), p.get(1)?.as_str()?.to_string()))
            })
            .collect();
        if pairs.is_empty() {
            push(DialogueAct::bare(&name));
        }
        for (slot, value) in pairs {
            let value = canonicalize_value(&value);
            // request(slot=food) names the slot in the value position
            let (slot, value) = if slot == "slot" { (value, None) } else { (slot, Some(value)) };
            let slot = if slot == "this" {
                match requested {
                    Some(r) => r.to_string(),
                    None => {
                        push(DialogueAct::bare(&name));
                        continue;
                    }
                }
            } else {
                slot
            };
            if !DSTC2_SLOTS.contains(&slot.as_str()) {
                push(DialogueAct::bare(&name));
                continue;
            }
            match value {
                Some(v) if is_dontcare(&v) => push(DialogueAct::with_slot("dontcare", &slot)),
                Some(v) if !v.is_empty() => push(DialogueAct::with_value(&name, &slot, &v)),
                _ => push(DialogueAct::with_slot(&name, &slot)),
            }
        }
    }
    out
}

fn dstc2_flist(root: &Path, split: Split) -> Option<PathBuf> {
    let name = format!("dstc2_{}.flist", split.as_str());
    [root.join(&name), root.join("scripts").join("config").join(&name)]
        .into_iter()
        .find(|p| p.exists())
}

fn dstc2_session_dir(root: &Path, entry: &str) -> Option<PathBuf> {
    [root.join("data").join(entry), root.join(entry)]
        .into_iter()
        .find(|p| p.join("log.json").exists() && p.join("label.json").exists())
}

fn dstc2_dialogue(dir: &Path) -> Result<Dialogue> {
    let log_path = dir.join("log.json");
    let label_path = dir.join("label.json");
    let log = read_json(&log_path)?;
    let label = read_json(&label_path)?;
    let id = str_field(&log, "session-id")
        .ok_or_else(|| bad(&log_path, "missing session-id"))?
        .to_string();
    let log_turns = log
        .get("turns")
        .and_then(Value::as_array)
        .ok_or_else(|| bad(&log_path, "missing turns"))?;
    let label_turns = label
        .get("turns")
        .and_then(Value::as_array)
        .ok_or_else(|| bad(&label_path, "missing turns"))?;
    if log_turns.len() != label_turns.len() {
        return Err(bad(dir, "log.json and label.json disagree on the number of turns"));
    }
    let mut turns = Vec::with_capacity(log_turns.len());
    for (lt, bt) in log_turns.iter().zip(label_turns) {
        let output = lt.get("output").unwrap_or(&Value::Null);
        let system_tokens = tokenize(str_field(output, "transcript").unwrap_or(""));
        let system_acts = dstc2_acts(output.get("dialog-acts").unwrap_or(&Value::Null), None);
        let requested = system_acts
            .iter()
            .find(|a| a.act == "request" && a.value.is_none())
            .and_then(|a| a.slot.clone());
        let user_tokens = tokenize(str_field(bt, "transcription").unwrap_or(""));
        let semantics = bt.get("semantics").and_then(|s| s.get("json")).unwrap_or(&Value::Null);
        let user_acts = dstc2_acts(semantics, requested.as_deref());
        let mut gold_state = DialogueState::new();
        if let Some(goals) = bt.get("goal-labels").and_then(Value::as_object) {
            for slot in DSTC2_SLOTS {
                if let Some(v) = goals.get(*slot).and_then(Value::as_str) {
                    let v = canonicalize_value(v);
                    let sv = if is_dontcare(&v) { StateValue::DontCare } else { StateValue::Value(v) };
                    gold_state.set(slot, sv);
                }
            }
        }
        turns.push(Turn {
            system_spans: spans_from_acts(&system_tokens, &system_acts),
            user_spans: spans_from_acts(&user_tokens, &user_acts),
            system_tokens,
            system_acts,
            user_tokens,
            user_acts,
            gold_state,
        });
    }
    Ok(Dialogue {
        id,
        domain: "dstc2".into(),
        turns,
    })
}

/// Convert an unpacked DSTC2 release. `root` holds the `dstc2_{train,dev,test}.flist`
/// files (directly or under `scripts/config`) and the session directories
/// they list (directly or under `data`). Transcripts and the annotated
/// semantics stand in for ASR and LU output.
pub fn convert_dstc2(root: &Path) -> Result<Corpus> {
    let mut inv = Inventories {
        slots: DSTC2_SLOTS.iter().map(|s| s.to_string()).collect(),
        ..Inventories::default()
    };
    let mut splits: BTreeMap<Split, Vec<Dialogue>> = BTreeMap::new();
    for split in Split::ALL {
        let Some(flist) = dstc2_flist(root, split) else {
            return Err(bad(root, &format!("no dstc2_{}.flist found", split.as_str())));
        };
        let text = fs::read_to_string(&flist).map_err(|e| Error::io(&flist, e))?;
        let mut dialogues = Vec::new();
        for entry in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let dir = dstc2_session_dir(root, entry)
                .ok_or_else(|| bad(&flist, &format!("session '{entry}' has no log.json/label.json")))?;
            let d = dstc2_dialogue(&dir)?;
            d.turns.iter().for_each(|t| inv.note_turn(t));
            dialogues.push(d);
        }
        splits.insert(split, dialogues);
    }
    finish("dstc2", inv, splits)
}

fn rename_sim_slot(slot: &str) -> String {
    let slot = canonicalize_value(slot);
    SIM_SLOT_RENAMES
        .iter()
        .find(|(from, _)| *from == slot)
        .map_or(slot.clone(), |(_, to)| to.to_string())
}

fn sim_acts(raw: Option<&Value>, inv: &mut Inventories) -> Vec<DialogueAct> {
    let mut out = Vec::new();
    for a in raw.and_then(Value::as_array).into_iter().flatten() {
        let Some(kind) = str_field(a, "type") else { continue };
        let kind = canonicalize_value(kind);
        let slot = str_field(a, "slot").map(rename_sim_slot);
        let value = str_field(a, "value").map(canonicalize_value).filter(|v| !v.is_empty());
        let act = match (slot, value) {
            (Some(s), Some(v)) if is_dontcare(&v) => DialogueAct::with_slot("dontcare", &s),
            (Some(s), Some(v)) => DialogueAct::with_value(&kind, &s, &v),
            (Some(s), None) => DialogueAct::with_slot(&kind, &s),
            (None, _) => DialogueAct::bare(&kind),
        };
        if let Some(s) = &act.slot {
            note(&mut inv.slots, s);
        }
        out.push(act);
    }
    out
}

/// Tokens and spans of a `{"tokens", "slots": [{"slot", "start", "exclusive_end"}]}` utterance.
fn sim_utterance(raw: Option<&Value>, inv: &mut Inventories) -> (Vec<String>, Vec<SlotSpan>) {
    let Some(u) = raw else { return (Vec::new(), Vec::new()) };
    let tokens: Vec<String> = match u.get("tokens").and_then(Value::as_array) {
        Some(ts) => ts.iter().filter_map(Value::as_str).map(canonicalize_value).filter(|t| !t.is_empty()).collect(),
        None => tokenize(str_field(u, "text").unwrap_or("")),
    };
    let mut spans = Vec::new();
    for s in u.get("slots").and_then(Value::as_array).into_iter().flatten() {
        let (Some(slot), Some(start), Some(end)) = (
            str_field(s, "slot"),
            s.get("start").and_then(Value::as_u64),
            s.get("exclusive_end").and_then(Value::as_u64),
        ) else {
            continue;
        };
        let (start, end) = (start as usize, end as usize);
        if !(start < end && end <= tokens.len()) {
            continue;
        }
        let slot = rename_sim_slot(slot);
        note(&mut inv.slots, &slot);
        spans.push(SlotSpan {
            slot,
            value: canonicalize_value(&tokens[start..end].join(" ")),
            start,
            end,
        });
    }
    spans.sort_by_key(|s| (s.start, s.end));
    spans.dedup_by(|b, a| b.start < a.end);
    (tokens, spans)
}

fn sim_dialogue(raw: &Value, domain: &str, inv: &mut Inventories, path: &Path) -> Result<Dialogue> {
    let id = str_field(raw, "dialogue_id")
        .ok_or_else(|| bad(path, "dialogue without dialogue_id"))?
        .to_string();
    let mut turns = Vec::new();
    for t in raw.get("turns").and_then(Value::as_array).into_iter().flatten() {
        let system_acts = sim_acts(t.get("system_acts"), inv);
        let mut user_acts = sim_acts(t.get("user_acts"), inv);
        let (system_tokens, system_spans) = sim_utterance(t.get("system_utterance"), inv);
        let (user_tokens, user_spans) = sim_utterance(t.get("user_utterance"), inv);
        // slot-only user acts take their value from the utterance span
        for a in user_acts.iter_mut() {
            if a.value.is_none() && a.act != "dontcare" && a.act != "request" {
                if let Some(span) = a.slot.as_ref().and_then(|s| user_spans.iter().find(|x| x.slot == *s)) {
                    a.value = Some(span.value.clone());
                }
            }
        }
        let mut gold_state = DialogueState::new();
        for s in t.get("dialogue_state").and_then(Value::as_array).into_iter().flatten() {
            let (Some(slot), Some(value)) = (str_field(s, "slot"), str_field(s, "value")) else { continue };
            let slot = rename_sim_slot(slot);
            note(&mut inv.slots, &slot);
            let value = canonicalize_value(value);
            let sv = if is_dontcare(&value) { StateValue::DontCare } else { StateValue::Value(value) };
            gold_state.set(&slot, sv);
        }
        let turn = Turn {
            system_tokens,
            system_acts,
            system_spans,
            user_tokens,
            user_acts,
            user_spans,
            gold_state,
        };
        inv.note_turn(&turn);
        turns.push(turn);
    }
    Ok(Dialogue {
        id,
        domain: domain.to_string(),
        turns,
    })
}

/// Convert one simulated-dialogue domain directory holding `train.json`,
/// `dev.json` and `test.json`, each a JSON list of dialogues.
pub fn convert_simdialogue(root: &Path, domain: &str) -> Result<Corpus> {
    let mut inv = Inventories::default();
    let mut splits: BTreeMap<Split, Vec<Dialogue>> = BTreeMap::new();
    for split in Split::ALL {
        let path = root.join(format!("{}.json", split.as_str()));
        let raw = read_json(&path)?;
        let list = raw.as_array().ok_or_else(|| bad(&path, "expected a JSON list of dialogues"))?;
        let dialogues = list
            .iter()
            .map(|d| sim_dialogue(d, domain, &mut inv, &path))
            .collect::<Result<Vec<_>>>()?;
        splits.insert(split, dialogues);
    }
    finish(domain, inv, splits)
}

fn finish(domain: &str, inv: Inventories, mut splits: BTreeMap<Split, Vec<Dialogue>>) -> Result<Corpus> {
    let schema = DomainSchema {
        domain: domain.to_string(),
        slots: inv.slots,
        user_act_inventory: inv.user_acts,
        system_act_inventory: inv.system_acts,
        value_inventory: BTreeMap::new(),
    };
    let mut c = Corpus::empty(schema);
    for split in Split::ALL {
        *c.split_mut(split) = splits.remove(&split).unwrap_or_default();
    }
    c.validate()?;
    Ok(c)
}
