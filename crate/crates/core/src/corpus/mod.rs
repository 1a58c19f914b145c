//! Corpora: schemas, the line-oriented corpus file format, vocabularies,
//! statistics, synthetic generation and converters from public formats.

mod convert;
mod format;
mod generate;
mod schemas;
mod stats;
mod vocab;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dialogue::{validate_dialogue, Dialogue};
use crate::error::{Error, Result};

pub use convert::{convert_dstc2, convert_simdialogue};
pub use format::{load_corpus, read_corpus, render_corpus, write_corpus, CORPUS_FORMAT_VERSION};
pub use generate::{generate_synthetic, GenConfig};
pub use schemas::{builtin_schema, movie_schema, restaurant_schema, BUILTIN_SCHEMAS};
pub use stats::{compute_oov_rate, corpus_stats, CorpusStats};
pub use vocab::{build_vocab, delex_token, Vocabulary, BOUNDARY_TOKEN, UNK_TOKEN};

/// Slots, act inventories and (for generation) value inventories of a domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainSchema {
    pub domain: String,
    pub slots: Vec<String>,
    pub user_act_inventory: Vec<String>,
    pub system_act_inventory: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub value_inventory: BTreeMap<String, Vec<String>>,
}

impl DomainSchema {
    pub fn new(domain: &str, slots: &[&str], user_acts: &[&str], system_acts: &[&str]) -> Self {
        let own = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        DomainSchema {
            domain: domain.to_string(),
            slots: own(slots),
            user_act_inventory: own(user_acts),
            system_act_inventory: own(system_acts),
            value_inventory: BTreeMap::new(),
        }
    }

    /// Uniqueness of slot names and of act names within each inventory.
    pub fn check(&self) -> Result<()> {
        fn unique(kind: &str, xs: &[String]) -> Result<()> {
            let mut seen = BTreeSet::new();
            for x in xs {
                if !seen.insert(x) {
                    return Err(Error::invalid(format!("duplicate {kind} '{x}'")));
                }
            }
            Ok(())
        }
        if self.domain.is_empty() {
            return Err(Error::invalid("schema has an empty domain name"));
        }
        unique("slot", &self.slots)?;
        unique("user act", &self.user_act_inventory)?;
        unique("system act", &self.system_act_inventory)?;
        Ok(())
    }

    /// Load one schema or a JSON list of schemas.
    pub fn load_all(path: &std::path::Path) -> Result<Vec<DomainSchema>> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        let schemas: Vec<DomainSchema> = if value.is_array() {
            serde_json::from_value(value)
        } else {
            serde_json::from_value(value).map(|s| vec![s])
        }
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: e.to_string(),
        })?;
        for s in &schemas {
            s.check()?;
        }
        Ok(schemas)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(Error::invalid(format!(
                "unknown split '{other}' (expected train, dev or test)"
            ))),
        }
    }
}

/// A schema with its train, dev and test dialogues.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub schema: DomainSchema,
    pub train: Vec<Dialogue>,
    pub dev: Vec<Dialogue>,
    pub test: Vec<Dialogue>,
}

impl Corpus {
    pub fn empty(schema: DomainSchema) -> Self {
        Corpus {
            schema,
            train: Vec::new(),
            dev: Vec::new(),
            test: Vec::new(),
        }
    }

    pub fn split(&self, split: Split) -> &[Dialogue] {
        match split {
            Split::Train => &self.train,
            Split::Dev => &self.dev,
            Split::Test => &self.test,
        }
    }

    pub fn split_mut(&mut self, split: Split) -> &mut Vec<Dialogue> {
        match split {
            Split::Train => &mut self.train,
            Split::Dev => &mut self.dev,
            Split::Test => &mut self.test,
        }
    }

    pub fn dialogues(&self) -> impl Iterator<Item = (Split, &Dialogue)> {
        Split::ALL
            .into_iter()
            .flat_map(move |s| self.split(s).iter().map(move |d| (s, d)))
    }

    /// Validate every dialogue against the schema and check id uniqueness.
    pub fn validate(&self) -> Result<()> {
        self.schema.check()?;
        let mut ids = BTreeSet::new();
        for (_, d) in self.dialogues() {
            if !ids.insert(d.id.as_str()) {
                return Err(Error::Validation {
                    dialogue: d.id.clone(),
                    message: "duplicate dialogue id".into(),
                });
            }
            if let Some(v) = validate_dialogue(d, &self.schema).into_iter().next() {
                return Err(Error::Validation {
                    dialogue: d.id.clone(),
                    message: v.to_string(),
                });
            }
        }
        Ok(())
    }
}
