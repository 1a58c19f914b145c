//! Hand-written reference tracker.
//!
//! Per turn, in order:
//! 1. `negate(s)` / `deny(s)` clears slot s; with a value argument only if
//!    that value is the one held.
//! 2. `affirm` adopts every value the system offered, confirmed or informed
//!    in the same turn.
//! 3. `dontcare(s)` sets s to dontcare.
//! 4. User `inform(s = v)` acts, then user value spans in token order; the
//!    last mention of a slot wins.

use crate::dialogue::{Dialogue, DialogueState, StateValue};

const CLEARING_ACTS: &[&str] = &["negate", "deny"];
const ADOPTED_SYSTEM_ACTS: &[&str] = &["offer", "confirm", "inform", "expl-conf", "impl-conf"];

pub fn rule_baseline_track(d: &Dialogue) -> Vec<DialogueState> {
    let mut state = DialogueState::new();
    let mut out = Vec::with_capacity(d.turns.len());
    for turn in &d.turns {
        for a in turn.user_acts.iter().filter(|a| CLEARING_ACTS.contains(&a.act.as_str())) {
            let Some(slot) = &a.slot else { continue };
            let held = state.get(slot);
            let matches = match &a.value {
                Some(v) => held.as_value() == Some(v.as_str()),
                None => true,
            };
            if matches {
                state.set(slot, StateValue::Unset);
            }
        }
        if turn.user_acts.iter().any(|a| a.act == "affirm") {
            for a in &turn.system_acts {
                if !ADOPTED_SYSTEM_ACTS.contains(&a.act.as_str()) {
                    continue;
                }
                if let (Some(s), Some(v)) = (&a.slot, &a.value) {
                    state.set(s, StateValue::Value(v.clone()));
                }
            }
        }
        for a in turn.user_acts.iter().filter(|a| a.act == "dontcare") {
            if let Some(s) = &a.slot {
                state.set(s, StateValue::DontCare);
            }
        }
        for a in turn.user_acts.iter().filter(|a| a.act == "inform") {
            if let (Some(s), Some(v)) = (&a.slot, &a.value) {
                state.set(s, StateValue::Value(v.clone()));
            }
        }
        let mut spans: Vec<_> = turn.user_spans.iter().collect();
        spans.sort_by_key(|s| s.start);
        for s in spans {
            state.set(&s.slot, StateValue::Value(s.value.clone()));
        }
        out.push(state.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialogue::{tokenize, DialogueAct, SlotSpan, Turn};

    fn turn(user: &str, acts: Vec<DialogueAct>, spans: &[(&str, &str, usize, usize)]) -> Turn {
        Turn {
            user_tokens: tokenize(user),
            user_acts: acts,
            user_spans: spans
                .iter()
                .map(|(s, v, a, b)| SlotSpan {
                    slot: s.to_string(),
                    value: v.to_string(),
                    start: *a,
                    end: *b,
                })
                .collect(),
            ..Turn::default()
        }
    }

    fn dialogue(turns: Vec<Turn>) -> Dialogue {
        Dialogue {
            id: "d".into(),
            domain: "toy".into(),
            turns,
        }
    }

    #[test]
    fn latest_user_mention_wins_over_system_offer() {
        let mut t2 = turn(
            "6 pm isn't good for us . how about 7 pm ?",
            vec![
                DialogueAct::with_slot("negate", "time"),
                DialogueAct::with_value("inform", "time", "7 pm"),
            ],
            &[("time", "6 pm", 0, 2), ("time", "7 pm", 8, 10)],
        );
        t2.system_acts = vec![DialogueAct::with_value("inform", "time", "6 pm")];
        let d = dialogue(vec![
            turn(
                "book a table for two at cascal",
                vec![
                    DialogueAct::with_value("inform", "#people", "two"),
                    DialogueAct::with_value("inform", "restaurant", "cascal"),
                ],
                &[("#people", "two", 4, 5), ("restaurant", "cascal", 6, 7)],
            ),
            t2,
        ]);
        let states = rule_baseline_track(&d);
        assert_eq!(states[1].get("time"), StateValue::value("7 pm"));
        assert_eq!(states[1].get("restaurant"), StateValue::value("cascal"));
    }

    #[test]
    fn no_informs_means_unset() {
        let d = dialogue(vec![
            turn("hello", vec![DialogueAct::bare("greeting")], &[]),
            turn("thanks", vec![DialogueAct::bare("thank_you")], &[]),
        ]);
        assert!(rule_baseline_track(&d).iter().all(|s| s.is_empty()));
    }

    #[test]
    fn inform_then_negate_clears() {
        let d = dialogue(vec![
            turn("at 6 pm", vec![DialogueAct::with_value("inform", "time", "6 pm")], &[("time", "6 pm", 1, 3)]),
            turn("no , not that time", vec![DialogueAct::with_slot("negate", "time")], &[]),
        ]);
        let s = rule_baseline_track(&d);
        assert_eq!(s[0].get("time"), StateValue::value("6 pm"));
        assert_eq!(s[1].get("time"), StateValue::Unset);
    }

    #[test]
    fn affirm_adopts_offer_and_dontcare_is_explicit() {
        let mut t = turn(
            "yes please , any area is fine",
            vec![DialogueAct::bare("affirm"), DialogueAct::with_slot("dontcare", "area")],
            &[],
        );
        t.system_acts = vec![DialogueAct::with_value("offer", "restaurant", "cascal")];
        let s = rule_baseline_track(&dialogue(vec![t]));
        assert_eq!(s[0].get("restaurant"), StateValue::value("cascal"));
        assert_eq!(s[0].get("area"), StateValue::DontCare);
    }
}
