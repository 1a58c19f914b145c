use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tracker::SharingMode;

/// What to do when a gold value is missing from the slate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlateMissPolicy {
    /// Emit no training instance for that slot and turn.
    Skip,
    /// Train towards null instead.
    MapToNull,
}

impl fmt::Display for SlateMissPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SlateMissPolicy::Skip => "skip",
            SlateMissPolicy::MapToNull => "map_to_null",
        })
    }
}

impl FromStr for SlateMissPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "skip" => Ok(SlateMissPolicy::Skip),
            "map_to_null" => Ok(SlateMissPolicy::MapToNull),
            _ => Err(Error::invalid(format!(
                "unknown slate_miss_policy '{s}' (expected skip or map_to_null)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub embedding_dim: usize,
    pub gru_hidden_dim: usize,
    pub scorer_hidden_dim: usize,
    pub learning_rate: f64,
    /// Dialogues per update.
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without dev improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub sharing_mode: SharingMode,
    pub slate_miss_policy: SlateMissPolicy,
    /// Candidate set bound K.
    pub capacity: usize,
    pub min_token_count: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            embedding_dim: 50,
            gru_hidden_dim: 50,
            scorer_hidden_dim: 50,
            learning_rate: 0.001,
            batch_size: 8,
            max_epochs: 50,
            patience: 5,
            seed: 1,
            sharing_mode: SharingMode::Shared,
            slate_miss_policy: SlateMissPolicy::Skip,
            capacity: 7,
            min_token_count: 1,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("bad value '{value}' for {key}")))
}

/// Non-empty, non-comment `key=value` lines.
pub(crate) fn key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("line {}: expected key=value, got '{line}'", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl TrainConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "embedding_dim" => self.embedding_dim = parse(key, value)?,
            "gru_hidden_dim" => self.gru_hidden_dim = parse(key, value)?,
            "scorer_hidden_dim" => self.scorer_hidden_dim = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "max_epochs" => self.max_epochs = parse(key, value)?,
            "patience" => self.patience = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "sharing_mode" => self.sharing_mode = value.parse()?,
            "slate_miss_policy" => self.slate_miss_policy = value.parse()?,
            "capacity" => self.capacity = parse(key, value)?,
            "min_token_count" => self.min_token_count = parse(key, value)?,
            _ => return Err(Error::invalid(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Defaults overridden by the `key=value` lines of `text`.
    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for (k, v) in key_values(text)? {
            cfg.set(&k, &v)?;
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_key_values(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
    }

    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "embedding_dim={}", self.embedding_dim);
        let _ = writeln!(out, "gru_hidden_dim={}", self.gru_hidden_dim);
        let _ = writeln!(out, "scorer_hidden_dim={}", self.scorer_hidden_dim);
        let _ = writeln!(out, "learning_rate={}", self.learning_rate);
        let _ = writeln!(out, "batch_size={}", self.batch_size);
        let _ = writeln!(out, "max_epochs={}", self.max_epochs);
        let _ = writeln!(out, "patience={}", self.patience);
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "sharing_mode={}", self.sharing_mode);
        let _ = writeln!(out, "slate_miss_policy={}", self.slate_miss_policy);
        let _ = writeln!(out, "capacity={}", self.capacity);
        let _ = writeln!(out, "min_token_count={}", self.min_token_count);
        out
    }

    pub fn check(&self) -> Result<()> {
        let positive = [
            ("embedding_dim", self.embedding_dim),
            ("gru_hidden_dim", self.gru_hidden_dim),
            ("scorer_hidden_dim", self.scorer_hidden_dim),
            ("batch_size", self.batch_size),
            ("max_epochs", self.max_epochs),
            ("patience", self.patience),
            ("capacity", self.capacity),
            ("min_token_count", self.min_token_count),
        ];
        for (k, v) in positive {
            if v == 0 {
                return Err(Error::invalid(format!("{k} must be positive")));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Value lists searched by `grid_search`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub embedding_dims: Vec<usize>,
    pub gru_hidden_dims: Vec<usize>,
    pub learning_rates: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            embedding_dims: vec![50, 75, 100],
            gru_hidden_dims: vec![50, 75, 100],
            learning_rates: vec![0.001, 0.01, 0.1],
        }
    }
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

impl GridSpec {
    /// `embedding_dim=50,75`-style lines; other keys set the base config.
    pub fn from_key_values(text: &str) -> Result<(Self, TrainConfig)> {
        let mut grid = GridSpec::default();
        let mut base = TrainConfig::default();
        for (k, v) in key_values(text)? {
            match k.as_str() {
                "embedding_dim" => grid.embedding_dims = list(&k, &v)?,
                "gru_hidden_dim" => grid.gru_hidden_dims = list(&k, &v)?,
                "learning_rate" => grid.learning_rates = list(&k, &v)?,
                _ => base.set(&k, &v)?,
            }
        }
        if grid.embedding_dims.is_empty() || grid.gru_hidden_dims.is_empty() || grid.learning_rates.is_empty() {
            return Err(Error::invalid("every grid dimension needs at least one value"));
        }
        Ok((grid, base))
    }

    pub fn cells(&self) -> usize {
        self.embedding_dims.len() * self.gru_hidden_dims.len() * self.learning_rates.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_errors() {
        let cfg = TrainConfig {
            learning_rate: 0.01,
            sharing_mode: SharingMode::PerSlot,
            slate_miss_policy: SlateMissPolicy::MapToNull,
            ..TrainConfig::default()
        };
        assert_eq!(TrainConfig::from_key_values(&cfg.to_key_values()).unwrap(), cfg);
        assert!(TrainConfig::from_key_values("colour=red").is_err());
        assert!(TrainConfig::from_key_values("batch_size=0").is_err());
        assert!(TrainConfig::from_key_values("learning_rate=-1").is_err());
        assert!(TrainConfig::from_key_values("just words").is_err());
        let c = TrainConfig::from_key_values("# comment\n\nseed = 9\n").unwrap();
        assert_eq!(c.seed, 9);
    }

    #[test]
    fn grid_file() {
        let (g, base) = GridSpec::from_key_values("embedding_dim=16\nlearning_rate=0.01, 0.1\nmax_epochs=3").unwrap();
        assert_eq!(g.embedding_dims, vec![16]);
        assert_eq!(g.gru_hidden_dims, vec![50, 75, 100]);
        assert_eq!(g.learning_rates, vec![0.01, 0.1]);
        assert_eq!(base.max_epochs, 3);
        assert_eq!(GridSpec::default().cells(), 27);
    }
}
