//! Synthetic corpora from an agenda-based user simulator talking to a
//! rule-based booking policy, lexicalized through template pools.
//!
//! Per dialogue the user samples a goal where each slot is a concrete value,
//! dontcare, or left open for the system to offer. The policy requests
//! missing slots, offers values for open ones and closes once everything is
//! settled. The user informs what is asked (sometimes volunteering another
//! slot), rejects some offers with or without a replacement, accepts the
//! rest either explicitly or by simply moving on, and says goodbye.
//!
//! OOV control: every slot's value inventory is split into a train-visible
//! part and a held-out part before sampling. Train dialogues draw from the
//! visible part; dev and test dialogues draw from the values train actually
//! realized plus the held-out part.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{compute_oov_rate, Corpus, DomainSchema, Split};
use crate::dialogue::{canonicalize_value, tokenize, Dialogue, DialogueAct, SlotSpan, StateValue, Turn};
use crate::error::{Error, Result};
use crate::rng::rng_for;

const OOV_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    /// Target fraction of distinct test values unseen in train.
    pub oov_target: f64,
    pub max_turns: usize,
    /// Per goal slot: the user has no preference.
    pub dontcare_prob: f64,
    /// Per goal slot: the user leaves the value to the system's offer.
    pub offer_prob: f64,
    /// Per offer: the user rejects it.
    pub negate_prob: f64,
    /// Per accepted offer: the user accepts by moving on instead of affirming.
    pub implicit_accept_prob: f64,
    /// Per turn: the user volunteers an extra slot.
    pub extra_inform_prob: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_train: 500,
            n_dev: 100,
            n_test: 200,
            oov_target: 0.4,
            max_turns: 14,
            dontcare_prob: 0.1,
            offer_prob: 0.25,
            negate_prob: 0.3,
            implicit_accept_prob: 0.35,
            extra_inform_prob: 0.3,
        }
    }
}

impl GenConfig {
    fn check(&self) -> Result<()> {
        let probs = [
            ("dontcare_prob", self.dontcare_prob),
            ("offer_prob", self.offer_prob),
            ("negate_prob", self.negate_prob),
            ("implicit_accept_prob", self.implicit_accept_prob),
            ("extra_inform_prob", self.extra_inform_prob),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name}={p} is not a probability")));
            }
        }
        if self.dontcare_prob + self.offer_prob > 1.0 {
            return Err(Error::invalid("dontcare_prob + offer_prob exceeds 1"));
        }
        if !(0.0..1.0).contains(&self.oov_target) {
            return Err(Error::invalid(format!(
                "oov target {} must lie in [0, 1)",
                self.oov_target
            )));
        }
        if self.max_turns < 2 {
            return Err(Error::invalid("max_turns must be at least 2"));
        }
        Ok(())
    }
}

/// Generate one corpus per schema. Fully determined by `seed`.
pub fn generate_synthetic(schemas: &[DomainSchema], config: &GenConfig, seed: u64) -> Result<Vec<Corpus>> {
    config.check()?;
    let plans = schemas
        .iter()
        .map(|s| plan_partition(s, config.oov_target, seed))
        .collect::<Result<Vec<_>>>()?;
    schemas
        .iter()
        .zip(plans)
        .map(|(schema, plan)| generate_one(schema, config, seed, plan))
        .collect()
}

struct Partition {
    visible: BTreeMap<String, Vec<String>>,
    held_out: BTreeMap<String, Vec<String>>,
}

fn plan_partition(schema: &DomainSchema, target: f64, seed: u64) -> Result<Partition> {
    schema.check()?;
    let mut visible = BTreeMap::new();
    let mut held_out = BTreeMap::new();
    let (mut total, mut held) = (0usize, 0usize);
    for slot in &schema.slots {
        let inventory = schema
            .value_inventory
            .get(slot)
            .filter(|v| !v.is_empty())
            .ok_or_else(|| {
                Error::invalid(format!(
                    "schema '{}' has no value inventory for slot '{slot}'",
                    schema.domain
                ))
            })?;
        let mut values: Vec<String> = inventory
            .iter()
            .map(|v| canonicalize_value(v))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let n = values.len();
        let mut n_held = (target * n as f64).round() as usize;
        if target > 0.0 {
            if n < 2 {
                return Err(Error::invalid(format!(
                    "slot '{slot}' needs at least 2 values to hold some out for an OOV target of {target}"
                )));
            }
            n_held = n_held.clamp(1, n - 1);
        }
        values.shuffle(&mut rng_for(seed, &format!("partition/{}/{slot}", schema.domain)));
        let held_vals = values.split_off(n - n_held);
        total += n;
        held += n_held;
        visible.insert(slot.clone(), values);
        held_out.insert(slot.clone(), held_vals);
    }
    let expected = held as f64 / total.max(1) as f64;
    if (expected - target).abs() > OOV_TOLERANCE {
        return Err(Error::invalid(format!(
            "OOV target {target} is infeasible for schema '{}': inventory sizes allow about {expected:.3}",
            schema.domain
        )));
    }
    Ok(Partition { visible, held_out })
}

fn generate_one(schema: &DomainSchema, config: &GenConfig, seed: u64, plan: Partition) -> Result<Corpus> {
    let mut corpus = Corpus::empty(DomainSchema {
        value_inventory: BTreeMap::new(),
        ..schema.clone()
    });
    let sim = Simulator { schema, config };

    for i in 0..config.n_train {
        let d = sim.dialogue(Split::Train, i, &plan.visible, seed);
        corpus.train.push(d);
    }

    // dev/test draw from realized train values plus the held-out values
    let mut seen: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for d in &corpus.train {
        for t in &d.turns {
            for (s, v) in t.gold_state.iter() {
                if let StateValue::Value(v) = v {
                    seen.entry(s.clone()).or_default().insert(v.clone());
                }
            }
            for span in &t.user_spans {
                seen.entry(span.slot.clone()).or_default().insert(span.value.clone());
            }
        }
    }
    let mut eval_pool: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for slot in &schema.slots {
        let mut pool: Vec<String> = seen.get(slot).map(|s| s.iter().cloned().collect()).unwrap_or_default();
        if pool.is_empty() {
            pool = plan.visible[slot].clone();
        }
        // size the held-out share so that, under uniform draws, the expected
        // fraction of unseen distinct values matches the target
        let held = &plan.held_out[slot];
        let want = if config.oov_target > 0.0 && config.oov_target < 1.0 {
            let r = config.oov_target / (1.0 - config.oov_target);
            ((r * pool.len() as f64).round() as usize).clamp(1, held.len().max(1))
        } else {
            held.len()
        };
        pool.extend(held.iter().take(want).cloned());
        eval_pool.insert(slot.clone(), pool);
    }
    for i in 0..config.n_dev {
        corpus.dev.push(sim.dialogue(Split::Dev, i, &eval_pool, seed));
    }
    for i in 0..config.n_test {
        corpus.test.push(sim.dialogue(Split::Test, i, &eval_pool, seed));
    }

    corpus.validate()?;
    if config.n_test > 0 && config.n_train > 0 {
        let realized = compute_oov_rate(&corpus.train, &corpus.test)?;
        if (realized - config.oov_target).abs() > OOV_TOLERANCE {
            return Err(Error::invalid(format!(
                "realized test OOV rate {realized:.3} for '{}' misses target {} by more than {OOV_TOLERANCE}; \
                 use more test dialogues or larger inventories",
                schema.domain, config.oov_target
            )));
        }
    }
    Ok(corpus)
}

mod templates {
    pub const SYSTEM_GREETING: &[&str] = &[
        "hello , welcome to the {domain} service . how can i help you ?",
        "hi there , what can i do for you ?",
        "hello , how may i help you today ?",
        "welcome ! what are you looking for ?",
        "good day . how can i help ?",
    ];
    pub const SYSTEM_REQUEST: &[&str] = &[
        "what {slot} would you like ?",
        "which {slot} do you prefer ?",
        "do you have a {slot} in mind ?",
        "could you tell me the {slot} ?",
        "what should the {slot} be ?",
        "and the {slot} ?",
    ];
    pub const SYSTEM_OFFER: &[&str] = &[
        "how about {v} ?",
        "i found {v} for the {slot} . does that work ?",
        "{v} is available . is that ok ?",
        "would {v} work for the {slot} ?",
        "i can offer {v} . shall i go ahead ?",
        "there is {v} for the {slot} . what do you think ?",
    ];
    pub const SYSTEM_CONFIRM: &[&str] = &[
        "ok , {v} for the {slot} .",
        "got it , {v} .",
        "sure , {slot} {v} .",
        "noted , {v} for the {slot} .",
        "alright , {v} .",
    ];
    pub const SYSTEM_DONE: &[&str] = &[
        "your booking is confirmed .",
        "i have made the reservation .",
        "all set , the booking is done .",
        "done ! you are booked .",
        "great , everything is reserved .",
    ];
    pub const SYSTEM_SUMMARY: &[&str] = &[
        "your booking for {v} is confirmed .",
        "i have reserved {v} for you .",
        "all set with {v} .",
        "done , {v} is booked .",
        "you are booked for {v} .",
    ];
    pub const SYSTEM_GOODBYE: &[&str] = &[
        "goodbye .",
        "have a nice day .",
        "enjoy , bye .",
        "thanks for calling .",
        "bye for now .",
    ];
    pub const USER_GREETING: &[&str] = &["hi ,", "hello ,", "hey ,", "good evening ,", "hi there ,"];
    pub const USER_INFORM: &[&str] = &[
        "i want {v} for the {slot}",
        "the {slot} should be {v}",
        "{slot} {v}",
        "i would like {v} as the {slot}",
        "make the {slot} {v}",
        "i am looking for {v} for {slot}",
    ];
    pub const USER_ANSWER: &[&str] = &[
        "{v} please",
        "{v}",
        "i want {v}",
        "{v} would be great",
        "let us do {v}",
        "the {slot} should be {v}",
    ];
    pub const USER_DONTCARE: &[&str] = &[
        "i do not care about the {slot}",
        "any {slot} is fine",
        "the {slot} does not matter",
        "i have no preference for {slot}",
        "whatever {slot} works",
    ];
    pub const USER_AFFIRM: &[&str] = &[
        "yes , that works",
        "sounds good",
        "yes please",
        "perfect",
        "that is fine",
        "great , go ahead",
    ];
    pub const USER_NEGATE: &[&str] = &[
        "no , that does not work",
        "no",
        "no thanks , something else",
        "i do not want that",
        "nope , try another one",
    ];
    /// Rejected value first, replacement second.
    pub const USER_REPLACE_OLD_FIRST: &[&str] = &[
        "{old} is not good for us . how about {new} ?",
        "not {old} , i want {new}",
        "no , {old} does not work . {new} please",
        "{old} is not ok , can we do {new} ?",
        "no {old} please , make it {new}",
    ];
    /// Replacement first, rejected value second.
    pub const USER_REPLACE_NEW_FIRST: &[&str] = &[
        "can we do {new} instead ? {old} is not good",
        "{new} would be better than {old}",
        "i would prefer {new} , not {old}",
        "how about {new} ? {old} does not work for me",
        "{new} please , {old} is no good",
    ];
    pub const USER_BYE: &[(&str, &[&str])] = &[
        ("thank you , goodbye", &["thank_you", "goodbye"]),
        ("thanks , bye", &["thank_you", "goodbye"]),
        ("great , thanks a lot", &["thank_you"]),
        ("thank you so much", &["thank_you"]),
        ("that is all , bye", &["goodbye"]),
    ];
}

/// Token buffer that records spans while templates are expanded.
#[derive(Default)]
struct Utterance {
    tokens: Vec<String>,
    spans: Vec<SlotSpan>,
    acts: Vec<DialogueAct>,
}

impl Utterance {
    fn push_words(&mut self, text: &str) {
        self.tokens.extend(tokenize(text));
    }

    fn push_value(&mut self, slot: &str, value: &str) {
        let start = self.tokens.len();
        self.tokens.extend(tokenize(value));
        self.spans.push(SlotSpan {
            slot: slot.to_string(),
            value: value.to_string(),
            start,
            end: self.tokens.len(),
        });
    }

    /// Expand `template`. `values` maps placeholder names to (slot, value);
    /// `{slot}` renders `slot_phrase`.
    fn render(&mut self, template: &str, slot_phrase: &str, values: &[(&str, &str, &str)]) {
        for piece in template.split_whitespace() {
            match piece {
                "{slot}" => self.push_words(slot_phrase),
                p if p.starts_with('{') && p.ends_with('}') => {
                    let key = &p[1..p.len() - 1];
                    match values.iter().find(|(k, _, _)| *k == key) {
                        Some((_, slot, value)) => self.push_value(slot, value),
                        None => self.push_words(key),
                    }
                }
                p => self.push_words(p),
            }
        }
    }
}

fn slot_phrase(slot: &str) -> String {
    slot.trim_start_matches('#').replace('_', " ")
}

#[derive(Debug, Clone, PartialEq)]
enum Goal {
    Value(String),
    DontCare,
    Offer,
}

enum SystemMove {
    Greeting,
    Request(String),
    Offer(String, String),
    Close,
}

struct Simulator<'a> {
    schema: &'a DomainSchema,
    config: &'a GenConfig,
}

impl Simulator<'_> {
    fn dialogue(&self, split: Split, index: usize, pools: &BTreeMap<String, Vec<String>>, seed: u64) -> Dialogue {
        let id = format!("{}-{}-{:05}", self.schema.domain, split, index);
        let mut rng = rng_for(seed, &id);
        let cfg = self.config;
        let slots = &self.schema.slots;
        let pick = |rng: &mut ChaCha8Rng, slot: &str, avoid: &[String]| -> String {
            let pool = &pools[slot];
            let options: Vec<&String> = pool.iter().filter(|v| !avoid.contains(v)).collect();
            if options.is_empty() {
                pool.choose(rng).expect("non-empty pool").clone()
            } else {
                (*options.choose(rng).expect("non-empty")).clone()
            }
        };

        let goal: BTreeMap<String, Goal> = slots
            .iter()
            .map(|s| {
                let r: f64 = rng.gen();
                let g = if r < cfg.dontcare_prob {
                    Goal::DontCare
                } else if r < cfg.dontcare_prob + cfg.offer_prob {
                    Goal::Offer
                } else {
                    Goal::Value(pick(&mut rng, s, &[]))
                };
                (s.clone(), g)
            })
            .collect();

        let mut state = crate::dialogue::DialogueState::new();
        let mut rejected: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut turns = Vec::new();
        let mut closed = false;

        // slots the user still has to convey (values or dontcare), schema order
        let pending_request = |state: &crate::dialogue::DialogueState| -> Vec<String> {
            slots
                .iter()
                .filter(|s| !matches!(goal[*s], Goal::Offer) && state.get(s).is_unset())
                .cloned()
                .collect()
        };
        let pending_offer = |state: &crate::dialogue::DialogueState| -> Vec<String> {
            slots
                .iter()
                .filter(|s| matches!(goal[*s], Goal::Offer) && state.get(s).is_unset())
                .cloned()
                .collect()
        };

        while turns.len() < cfg.max_turns && !closed {
            let mut sys = Utterance::default();
            let mut user = Utterance::default();
            let first = turns.is_empty();

            let requests = pending_request(&state);
            let offers = pending_offer(&state);
            let mv = if first {
                SystemMove::Greeting
            } else if !offers.is_empty() && (requests.is_empty() || rng.gen_bool(0.35)) {
                let slot = offers[0].clone();
                let value = pick(&mut rng, &slot, rejected.get(&slot).map_or(&[][..], |v| &v[..]));
                SystemMove::Offer(slot, value)
            } else if !requests.is_empty() {
                SystemMove::Request(requests[0].clone())
            } else {
                SystemMove::Close
            };

            // system side
            match &mv {
                SystemMove::Greeting => {
                    // user-initiated dialogues have no system utterance
                    if rng.gen_bool(0.5) {
                        let t = templates::SYSTEM_GREETING.choose(&mut rng).unwrap();
                        sys.render(&t.replace("{domain}", &self.schema.domain), "", &[]);
                        sys.acts.push(DialogueAct::bare("greeting"));
                    }
                }
                SystemMove::Request(slot) => {
                    if rng.gen_bool(0.2) {
                        let held: Vec<(String, String)> = state
                            .iter()
                            .filter_map(|(s, v)| v.as_value().map(|v| (s.clone(), v.to_string())))
                            .collect();
                        if let Some((s, v)) = held.choose(&mut rng) {
                            let t = templates::SYSTEM_CONFIRM.choose(&mut rng).unwrap();
                            sys.render(t, &slot_phrase(s), &[("v", s, v)]);
                            sys.acts.push(DialogueAct::with_value("confirm", s, v));
                        }
                    }
                    let t = templates::SYSTEM_REQUEST.choose(&mut rng).unwrap();
                    sys.render(t, &slot_phrase(slot), &[]);
                    sys.acts.push(DialogueAct::with_slot("request", slot));
                }
                SystemMove::Offer(slot, value) => {
                    let t = templates::SYSTEM_OFFER.choose(&mut rng).unwrap();
                    sys.render(t, &slot_phrase(slot), &[("v", slot, value)]);
                    sys.acts.push(DialogueAct::with_value("offer", slot, value));
                }
                SystemMove::Close => {
                    let held: Vec<(String, String)> = state
                        .iter()
                        .filter_map(|(s, v)| v.as_value().map(|v| (s.clone(), v.to_string())))
                        .collect();
                    match held.choose(&mut rng) {
                        Some((s, v)) if rng.gen_bool(0.5) => {
                            let t = templates::SYSTEM_SUMMARY.choose(&mut rng).unwrap();
                            sys.render(t, &slot_phrase(s), &[("v", s, v)]);
                            sys.acts.push(DialogueAct::bare("notify_success"));
                            sys.acts.push(DialogueAct::with_value("inform", s, v));
                        }
                        _ => {
                            let t = templates::SYSTEM_DONE.choose(&mut rng).unwrap();
                            sys.render(t, "", &[]);
                            sys.acts.push(DialogueAct::bare("notify_success"));
                        }
                    }
                    if rng.gen_bool(0.3) {
                        let t = templates::SYSTEM_GOODBYE.choose(&mut rng).unwrap();
                        sys.render(t, "", &[]);
                        sys.acts.push(DialogueAct::bare("goodbye"));
                    }
                }
            }

            // user side
            let volunteer = |user: &mut Utterance, state: &mut crate::dialogue::DialogueState, rng: &mut ChaCha8Rng, slot: &str, answer: bool| {
                if !user.tokens.is_empty() {
                    user.push_words(if rng.gen_bool(0.5) { "and" } else { "," });
                }
                match &goal[slot] {
                    Goal::Value(v) => {
                        let pool = if answer { templates::USER_ANSWER } else { templates::USER_INFORM };
                        let t = pool.choose(rng).unwrap();
                        user.render(t, &slot_phrase(slot), &[("v", slot, v)]);
                        user.acts.push(DialogueAct::with_value("inform", slot, v));
                        state.set(slot, StateValue::Value(v.clone()));
                    }
                    Goal::DontCare => {
                        let t = templates::USER_DONTCARE.choose(rng).unwrap();
                        user.render(t, &slot_phrase(slot), &[]);
                        user.acts.push(DialogueAct::with_slot("dontcare", slot));
                        state.set(slot, StateValue::DontCare);
                    }
                    Goal::Offer => unreachable!("offered slots are never volunteered"),
                }
            };

            match &mv {
                SystemMove::Greeting => {
                    if rng.gen_bool(0.3) {
                        let t = templates::USER_GREETING.choose(&mut rng).unwrap();
                        user.render(t, "", &[]);
                        user.acts.push(DialogueAct::bare("greeting"));
                    }
                    let mut candidates: Vec<String> = pending_request(&state)
                        .into_iter()
                        .filter(|s| matches!(goal[s], Goal::Value(_)))
                        .collect();
                    candidates.shuffle(&mut rng);
                    let k = rng.gen_range(1..=3).min(candidates.len());
                    let mut chosen: Vec<String> = candidates.into_iter().take(k).collect();
                    chosen.sort_by_key(|s| slots.iter().position(|x| x == s));
                    let had_greeting = !user.tokens.is_empty();
                    for (i, s) in chosen.iter().enumerate() {
                        if i == 0 && had_greeting {
                            let t = templates::USER_INFORM.choose(&mut rng).unwrap();
                            if let Goal::Value(v) = &goal[s] {
                                user.render(t, &slot_phrase(s), &[("v", s, v)]);
                                user.acts.push(DialogueAct::with_value("inform", s, v));
                                state.set(s, StateValue::Value(v.clone()));
                            }
                        } else {
                            volunteer(&mut user, &mut state, &mut rng, s, false);
                        }
                    }
                    if user.tokens.is_empty() {
                        let t = templates::USER_GREETING.choose(&mut rng).unwrap();
                        user.render(t, "", &[]);
                        user.acts.push(DialogueAct::bare("greeting"));
                    }
                }
                SystemMove::Request(slot) => {
                    volunteer(&mut user, &mut state, &mut rng, slot, true);
                    let rest = pending_request(&state);
                    if !rest.is_empty() && rng.gen_bool(cfg.extra_inform_prob) {
                        let extra = rest.choose(&mut rng).unwrap().clone();
                        volunteer(&mut user, &mut state, &mut rng, &extra, false);
                    }
                }
                SystemMove::Offer(slot, value) => {
                    if rng.gen_bool(cfg.negate_prob) {
                        rejected.entry(slot.clone()).or_default().push(value.clone());
                        if rng.gen_bool(0.5) {
                            let t = templates::USER_NEGATE.choose(&mut rng).unwrap();
                            user.render(t, "", &[]);
                            user.acts.push(DialogueAct::bare("negate"));
                        } else {
                            let avoid = rejected[slot].clone();
                            let new = pick(&mut rng, slot, &avoid);
                            let pool = if rng.gen_bool(0.5) {
                                templates::USER_REPLACE_OLD_FIRST
                            } else {
                                templates::USER_REPLACE_NEW_FIRST
                            };
                            let t = pool.choose(&mut rng).unwrap();
                            user.render(t, &slot_phrase(slot), &[("old", slot, value), ("new", slot, &new)]);
                            user.acts.push(DialogueAct::with_slot("negate", slot));
                            user.acts.push(DialogueAct::with_value("inform", slot, &new));
                            state.set(slot, StateValue::Value(new));
                        }
                    } else {
                        state.set(slot, StateValue::Value(value.clone()));
                        let rest = pending_request(&state);
                        if !rest.is_empty() && rng.gen_bool(cfg.implicit_accept_prob) {
                            volunteer(&mut user, &mut state, &mut rng, &rest[0], false);
                        } else {
                            let t = templates::USER_AFFIRM.choose(&mut rng).unwrap();
                            user.render(t, "", &[]);
                            user.acts.push(DialogueAct::bare("affirm"));
                        }
                    }
                }
                SystemMove::Close => {
                    let (t, acts) = templates::USER_BYE.choose(&mut rng).unwrap();
                    user.render(t, "", &[]);
                    user.acts.extend(acts.iter().map(|a| DialogueAct::bare(a)));
                    closed = true;
                }
            }

            turns.push(Turn {
                system_tokens: sys.tokens,
                system_acts: sys.acts,
                system_spans: sys.spans,
                user_tokens: user.tokens,
                user_acts: user.acts,
                user_spans: user.spans,
                gold_state: state.clone(),
            });
        }

        Dialogue {
            id,
            domain: self.schema.domain.clone(),
            turns,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{render_corpus, restaurant_schema};

    fn small(oov: f64) -> GenConfig {
        GenConfig {
            n_train: 60,
            n_dev: 10,
            n_test: 40,
            oov_target: oov,
            ..GenConfig::default()
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = generate_synthetic(&[restaurant_schema()], &small(0.4), 3).unwrap();
        let b = generate_synthetic(&[restaurant_schema()], &small(0.4), 3).unwrap();
        assert_eq!(render_corpus(&a[0]), render_corpus(&b[0]));
        let c = generate_synthetic(&[restaurant_schema()], &small(0.4), 4).unwrap();
        assert_ne!(render_corpus(&a[0]), render_corpus(&c[0]));
    }

    #[test]
    fn zero_target_gives_zero_oov() {
        let c = generate_synthetic(&[restaurant_schema()], &small(0.0), 11).unwrap();
        assert_eq!(compute_oov_rate(&c[0].train, &c[0].test).unwrap(), 0.0);
    }

    #[test]
    fn hundred_value_inventory_hits_target() {
        let mut schema = DomainSchema::new("wide", &["x", "y"], &["greeting", "inform", "affirm", "negate", "dontcare", "thank_you", "goodbye"], &["greeting", "request", "offer", "confirm", "inform", "notify_success", "goodbye"]);
        for slot in ["x", "y"] {
            schema
                .value_inventory
                .insert(slot.into(), (0..100).map(|i| format!("{slot} value {i}")).collect());
        }
        let cfg = GenConfig {
            n_train: 400,
            n_dev: 20,
            n_test: 150,
            oov_target: 0.4,
            ..GenConfig::default()
        };
        let c = generate_synthetic(&[schema], &cfg, 5).unwrap();
        let rate = compute_oov_rate(&c[0].train, &c[0].test).unwrap();
        assert!((0.35..=0.45).contains(&rate), "rate {rate}");
    }

    #[test]
    fn infeasible_target_errors_before_generation() {
        let mut schema = restaurant_schema();
        schema.value_inventory.insert("meal".into(), vec!["dinner".into()]);
        assert!(generate_synthetic(&[schema], &small(0.4), 1).is_err());
        let mut schema = restaurant_schema();
        schema.value_inventory.remove("area");
        assert!(generate_synthetic(&[schema], &small(0.0), 1).is_err());
        assert!(generate_synthetic(&[restaurant_schema()], &small(1.0), 1).is_err());
    }
}
