use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use super::{Real, Tensor};
use crate::error::{Error, Result};
use crate::rng::rng_for;

pub const PARAMETER_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// How a parameter is initialized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Uniform in ±sqrt(6 / (fan_in + fan_out)) with fan_in = columns.
    Xavier,
    Zeros,
    Uniform(f64),
}

/// Values drawn for `init`; depends only on (seed, name, shape).
pub fn init_values(init: Init, seed: u64, name: &str, shape: &[usize]) -> Vec<f64> {
    let n: usize = shape.iter().product();
    let bound = match init {
        Init::Zeros => return vec![0.0; n],
        Init::Uniform(b) => b,
        Init::Xavier => {
            let (rows, cols) = match shape {
                [r, c] => (*r, *c),
                [n] => (*n, 1),
                _ => (n, 1),
            };
            (6.0 / (rows + cols) as f64).sqrt()
        }
    };
    let mut rng = rng_for(seed, &format!("init/{name}/{shape:?}"));
    (0..n).map(|_| rng.gen_range(-bound..=bound)).collect()
}

#[derive(Debug, Clone, PartialEq)]
struct Entry<T> {
    name: String,
    value: Tensor<T>,
    grad: Vec<T>,
}

/// Named parameters in registration order, each with a gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterStore<T> {
    entries: Vec<Entry<T>>,
    index: HashMap<String, ParamId>,
}

impl<T: Real> Default for ParameterStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> ParameterStore<T> {
    pub fn new() -> Self {
        ParameterStore {
            entries: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn insert(&mut self, name: &str, value: Tensor<T>) -> Result<ParamId> {
        if self.index.contains_key(name) {
            return Err(Error::invalid(format!("duplicate parameter '{name}'")));
        }
        let id = ParamId(self.entries.len());
        self.entries.push(Entry {
            name: name.to_string(),
            grad: vec![T::zero(); value.len()],
            value,
        });
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn add(&mut self, name: &str, shape: &[usize], init: Init, seed: u64) -> Result<ParamId> {
        let values = init_values(init, seed, name, shape)
            .into_iter()
            .map(T::of)
            .collect();
        self.insert(name, Tensor::from_values(shape, values)?)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<ParamId> {
        self.id(name)
            .ok_or_else(|| Error::invalid(format!("missing parameter '{name}'")))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    pub fn tensor(&self, id: ParamId) -> &Tensor<T> {
        &self.entries[id.0].value
    }

    pub fn values(&self, id: ParamId) -> &[T] {
        self.entries[id.0].value.values()
    }

    pub fn values_mut(&mut self, id: ParamId) -> &mut [T] {
        self.entries[id.0].value.values_mut()
    }

    pub fn grad(&self, id: ParamId) -> &[T] {
        &self.entries[id.0].grad
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut [T] {
        &mut self.entries[id.0].grad
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        for e in &mut self.entries {
            e.grad.iter_mut().for_each(|g| *g = T::zero());
        }
    }

    /// Add `grads` (indexed by parameter) into the accumulators.
    pub fn accumulate(&mut self, grads: &Gradients<T>) {
        for (e, g) in self.entries.iter_mut().zip(&grads.0) {
            if g.is_empty() {
                continue;
            }
            for (a, b) in e.grad.iter_mut().zip(g) {
                *a += *b;
            }
        }
    }

    pub(crate) fn value_and_grad_mut(&mut self, id: ParamId) -> (&mut [T], &mut [T]) {
        let e = &mut self.entries[id.0];
        (e.value.values_mut(), &mut e.grad)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("parameters serialize")
    }

    fn to_file(&self) -> ParameterFileOut<'_, T> {
        ParameterFileOut {
            format_version: PARAMETER_FORMAT_VERSION,
            precision: T::PRECISION,
            parameters: self.records(),
        }
    }

    pub(crate) fn records(&self) -> Vec<ParamOut<'_, T>> {
        self.entries
            .iter()
            .map(|e| ParamOut {
                name: &e.name,
                shape: e.value.shape(),
                values: e.value.values(),
            })
            .collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ParameterFileIn = serde_json::from_str(text)
            .map_err(|e| Error::invalid(format!("corrupt parameter file: {e}")))?;
        Self::from_file(file)
    }

    pub(crate) fn from_file(file: ParameterFileIn<'_>) -> Result<Self> {
        if file.format_version != PARAMETER_FORMAT_VERSION {
            return Err(Error::Version {
                found: file.format_version,
                expected: PARAMETER_FORMAT_VERSION,
            });
        }
        if file.precision != T::PRECISION {
            return Err(Error::invalid(format!(
                "parameters stored at precision {} cannot be loaded as {}",
                file.precision,
                T::PRECISION
            )));
        }
        let mut store = ParameterStore::new();
        for p in file.parameters {
            // parse the literal text so values come back bit-exact
            let values = p
                .values
                .iter()
                .map(|raw| {
                    raw.get().parse::<T>().map_err(|_| {
                        Error::invalid(format!("parameter '{}': bad number {}", p.name, raw.get()))
                    })
                })
                .collect::<Result<Vec<T>>>()?;
            store.insert(&p.name, Tensor::from_values(&p.shape, values)?)?;
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Serialize)]
pub(crate) struct ParamOut<'a, T> {
    pub(crate) name: &'a str,
    pub(crate) shape: &'a [usize],
    pub(crate) values: &'a [T],
}

#[derive(Serialize)]
struct ParameterFileOut<'a, T> {
    format_version: u32,
    precision: &'static str,
    parameters: Vec<ParamOut<'a, T>>,
}

#[derive(Deserialize)]
pub(crate) struct ParamIn<'a> {
    pub(crate) name: String,
    pub(crate) shape: Vec<usize>,
    #[serde(borrow)]
    pub(crate) values: Vec<&'a RawValue>,
}

#[derive(Deserialize)]
pub(crate) struct ParameterFileIn<'a> {
    pub(crate) format_version: u32,
    pub(crate) precision: String,
    #[serde(borrow)]
    pub(crate) parameters: Vec<ParamIn<'a>>,
}

/// Per-parameter gradients produced by one backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T>(pub(crate) Vec<Vec<T>>);

impl<T: Real> Gradients<T> {
    pub fn zeros_like(store: &ParameterStore<T>) -> Self {
        Gradients(store.entries.iter().map(|e| vec![T::zero(); e.value.len()]).collect())
    }

    pub fn get(&self, id: ParamId) -> &[T] {
        &self.0[id.0]
    }

    pub(crate) fn get_mut(&mut self, id: ParamId) -> &mut [T] {
        &mut self.0[id.0]
    }

    pub fn is_all_zero(&self, id: ParamId) -> bool {
        self.0[id.0].iter().all(|g| *g == T::zero())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store<T: Real>() -> ParameterStore<T> {
        let mut s = ParameterStore::new();
        s.add("w", &[3, 4], Init::Xavier, 9).unwrap();
        s.add("b", &[3], Init::Zeros, 9).unwrap();
        s.add("e", &[5, 2], Init::Uniform(0.1), 9).unwrap();
        s
    }

    #[test]
    fn init_is_pure_and_bounded() {
        let a = init_values(Init::Xavier, 1, "w", &[3, 4]);
        assert_eq!(a, init_values(Init::Xavier, 1, "w", &[3, 4]));
        assert_ne!(a, init_values(Init::Xavier, 1, "v", &[3, 4]));
        assert_ne!(a, init_values(Init::Xavier, 2, "w", &[3, 4]));
        let bound = (6.0f64 / 7.0).sqrt();
        assert!(a.iter().all(|x| x.abs() <= bound));
        assert!(init_values(Init::Uniform(0.1), 1, "e", &[50, 4]).iter().all(|x| x.abs() <= 0.1));
        assert!(init_values(Init::Zeros, 1, "b", &[4]).iter().all(|x| *x == 0.0));
    }

    #[test]
    fn save_load_is_bit_exact() {
        let s32 = store::<f32>();
        let back = ParameterStore::<f32>::from_json(&s32.to_json()).unwrap();
        assert_eq!(back, s32);
        let s64 = store::<f64>();
        let back = ParameterStore::<f64>::from_json(&s64.to_json()).unwrap();
        for id in s64.ids() {
            let a: Vec<u64> = s64.values(id).iter().map(|x| x.to_bits()).collect();
            let b: Vec<u64> = back.values(id).iter().map(|x| x.to_bits()).collect();
            assert_eq!(a, b);
        }
        assert_eq!(back.names().collect::<Vec<_>>(), vec!["w", "b", "e"]);
    }

    #[test]
    fn version_and_precision_are_checked() {
        let text = store::<f32>().to_json().replace("\"format_version\":1", "\"format_version\":9");
        assert!(matches!(
            ParameterStore::<f32>::from_json(&text),
            Err(Error::Version { found: 9, .. })
        ));
        assert!(ParameterStore::<f64>::from_json(&store::<f32>().to_json()).is_err());
        assert!(ParameterStore::<f32>::from_json("{not json").is_err());
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut s = store::<f64>();
        assert!(s.add("w", &[1], Init::Zeros, 0).is_err());
    }
}
