//! The neural state tracker: feature assembly, candidate scoring and the
//! turn-by-turn state update.

mod features;
mod run;
mod scorer;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{DomainSchema, Vocabulary};
use crate::error::{Error, Result};
use crate::neural::{Encoder, ParamIn, ParamOut, ParameterFileIn, ParameterStore, Real, PARAMETER_FORMAT_VERSION};

pub use features::{
    featurize_candidate, featurize_slot, featurize_utterances, ActVectors, PreviousSlot, UtteranceFeatures,
};
pub use run::{
    forward_turn, previous_from_state, track_dialogue, track_turn, tracking_records, SlotForward,
    SlotTrackState, TrackedTurn, TrackingRecord, TurnTrackState,
};
pub use scorer::{score_slate, ScorerParams, ScorerTurn};

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const SHARED_SCORER: &str = "shared";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SharingMode {
    PerSlot,
    Shared,
}

impl fmt::Display for SharingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SharingMode::PerSlot => "per_slot",
            SharingMode::Shared => "shared",
        })
    }
}

impl FromStr for SharingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_slot" => Ok(SharingMode::PerSlot),
            "shared" => Ok(SharingMode::Shared),
            _ => Err(Error::invalid(format!(
                "unknown sharing mode '{s}' (expected per_slot or shared)"
            ))),
        }
    }
}

/// Everything about a model except its parameter values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub vocabulary: Vocabulary,
    pub user_acts: Vec<String>,
    pub system_acts: Vec<String>,
    /// Domain → slots, in schema order.
    pub domains: BTreeMap<String, Vec<String>>,
    pub embedding_dim: usize,
    pub gru_hidden_dim: usize,
    pub scorer_hidden_dim: usize,
    pub capacity: usize,
    pub threshold: f64,
    pub sharing_mode: SharingMode,
}

impl TrackerConfig {
    /// Width of r_utt.
    pub fn utt_dim(&self) -> usize {
        4 * self.gru_hidden_dim + self.user_acts.len() + self.system_acts.len()
    }

    /// Width of r_slot.
    pub fn slot_dim(&self) -> usize {
        self.user_acts.len() + self.system_acts.len() + 2
    }

    /// Width of r_cand.
    pub fn cand_dim(&self) -> usize {
        self.user_acts.len() + self.system_acts.len() + 1 + 8 * self.gru_hidden_dim
    }

    /// Scorer keys in registration order.
    pub fn scorer_keys(&self) -> Vec<String> {
        match self.sharing_mode {
            SharingMode::Shared => vec![SHARED_SCORER.to_string()],
            SharingMode::PerSlot => {
                let mut keys: Vec<String> = Vec::new();
                for slots in self.domains.values() {
                    for s in slots {
                        if !keys.contains(s) {
                            keys.push(s.clone());
                        }
                    }
                }
                keys
            }
        }
    }

    fn check(&self) -> Result<()> {
        let dims = [
            ("embedding_dim", self.embedding_dim),
            ("gru_hidden_dim", self.gru_hidden_dim),
            ("scorer_hidden_dim", self.scorer_hidden_dim),
            ("capacity", self.capacity),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::invalid(format!("threshold {} outside (0, 1)", self.threshold)));
        }
        if self.vocabulary.len() < 2 {
            return Err(Error::invalid("vocabulary lacks reserved tokens"));
        }
        Ok(())
    }
}

/// Parameters plus the layout needed to run them.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerModel<T = f32> {
    pub config: TrackerConfig,
    pub store: ParameterStore<T>,
    pub encoder: Encoder,
    scorers: BTreeMap<String, ScorerParams>,
}

impl<T: Real> TrackerModel<T> {
    /// Fresh model with parameters initialized from `seed`.
    pub fn new(config: TrackerConfig, seed: u64) -> Result<Self> {
        config.check()?;
        let mut store = ParameterStore::new();
        let encoder = Encoder::register(
            &mut store,
            config.vocabulary.len(),
            config.embedding_dim,
            config.gru_hidden_dim,
            seed,
        )?;
        let g_dim = config.utt_dim() + config.slot_dim();
        let f_dim = g_dim + config.cand_dim();
        let mut scorers = BTreeMap::new();
        for key in config.scorer_keys() {
            let p = ScorerParams::register(&mut store, &key, g_dim, f_dim, config.scorer_hidden_dim, seed)?;
            scorers.insert(key, p);
        }
        Ok(TrackerModel {
            config,
            store,
            encoder,
            scorers,
        })
    }

    fn from_parts(config: TrackerConfig, store: ParameterStore<T>) -> Result<Self> {
        config.check()?;
        let encoder = Encoder::lookup(&store)?;
        if encoder.vocab_size != config.vocabulary.len()
            || encoder.embedding_dim != config.embedding_dim
            || encoder.hidden != config.gru_hidden_dim
        {
            return Err(Error::shape(
                "encoder",
                format!(
                    "vocab {}, embedding {}, hidden {}",
                    config.vocabulary.len(),
                    config.embedding_dim,
                    config.gru_hidden_dim
                ),
                format!(
                    "vocab {}, embedding {}, hidden {}",
                    encoder.vocab_size, encoder.embedding_dim, encoder.hidden
                ),
            ));
        }
        let g_dim = config.utt_dim() + config.slot_dim();
        let f_dim = g_dim + config.cand_dim();
        let mut scorers = BTreeMap::new();
        for key in config.scorer_keys() {
            let p = ScorerParams::lookup(&store, &key)?;
            if p.g_dim(&store) != g_dim || p.f_dim(&store) != f_dim {
                return Err(Error::shape(
                    format!("scorer {key}"),
                    format!("g {g_dim}, f {f_dim}"),
                    format!("g {}, f {}", p.g_dim(&store), p.f_dim(&store)),
                ));
            }
            scorers.insert(key, p);
        }
        Ok(TrackerModel {
            config,
            store,
            encoder,
            scorers,
        })
    }

    pub fn scorer_for(&self, slot: &str) -> Result<&ScorerParams> {
        let key = match self.config.sharing_mode {
            SharingMode::Shared => SHARED_SCORER,
            SharingMode::PerSlot => slot,
        };
        self.scorers
            .get(key)
            .ok_or_else(|| Error::invalid(format!("model has no scorer for slot '{slot}'")))
    }

    pub fn scorers(&self) -> &BTreeMap<String, ScorerParams> {
        &self.scorers
    }

    pub fn slots_for(&self, domain: &str) -> Result<&[String]> {
        self.config
            .domains
            .get(domain)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::invalid(format!("model does not know domain '{domain}'")))
    }

    /// Make a new domain's slots trackable. Only shared models can score
    /// slots they were not trained on.
    pub fn register_domain(&mut self, schema: &DomainSchema) -> Result<()> {
        if let Some(slots) = self.config.domains.get(&schema.domain) {
            if *slots == schema.slots {
                return Ok(());
            }
            return Err(Error::invalid(format!(
                "domain '{}' is registered with different slots",
                schema.domain
            )));
        }
        if self.config.sharing_mode == SharingMode::PerSlot {
            if let Some(s) = schema.slots.iter().find(|s| !self.scorers.contains_key(*s)) {
                return Err(Error::invalid(format!(
                    "per-slot model has no scorer for slot '{s}' of domain '{}'; \
                     transfer to new slots needs shared parameters",
                    schema.domain
                )));
            }
        }
        self.config
            .domains
            .insert(schema.domain.clone(), schema.slots.clone());
        Ok(())
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a, T: Serialize> {
            format_version: u32,
            precision: &'static str,
            tracker: &'a TrackerConfig,
            parameters: Vec<ParamOut<'a, T>>,
        }
        let out = Out {
            format_version: MODEL_FORMAT_VERSION,
            precision: T::PRECISION,
            tracker: &self.config,
            parameters: self.store.records(),
        };
        serde_json::to_string(&out).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Version {
            format_version: u32,
        }
        let v: Version = serde_json::from_str(text)
            .map_err(|e| Error::invalid(format!("corrupt model file: {e}")))?;
        if v.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Version {
                found: v.format_version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        #[derive(Deserialize)]
        struct In<'a> {
            tracker: TrackerConfig,
            precision: String,
            #[serde(borrow)]
            parameters: Vec<ParamIn<'a>>,
        }
        let file: In = serde_json::from_str(text)
            .map_err(|e| Error::invalid(format!("corrupt model file: {e}")))?;
        let store = ParameterStore::from_file(ParameterFileIn {
            format_version: PARAMETER_FORMAT_VERSION,
            precision: file.precision,
            parameters: file.parameters,
        })?;
        Self::from_parts(file.tracker, store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Invalid(m) => Error::invalid(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}
