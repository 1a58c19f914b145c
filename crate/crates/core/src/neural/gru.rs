use super::graph::{Graph, GruIds, Node};
use super::params::{Init, ParamId, ParameterStore};
use super::Real;
use crate::error::{Error, Result};

/// Parameters of one GRU layer in one direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GruLayerParams {
    pub input_dim: usize,
    pub hidden: usize,
    pub ids: GruIds,
}

const GATES: [&str; 3] = ["z", "r", "h"];

impl GruLayerParams {
    /// Registers `{prefix}.{w,u,b}_{z,r,h}`.
    pub fn register<T: Real>(
        store: &mut ParameterStore<T>,
        prefix: &str,
        input_dim: usize,
        hidden: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut w = Vec::new();
        let mut u = Vec::new();
        let mut b = Vec::new();
        for g in GATES {
            w.push(store.add(&format!("{prefix}.w_{g}"), &[hidden, input_dim], Init::Xavier, seed)?);
            u.push(store.add(&format!("{prefix}.u_{g}"), &[hidden, hidden], Init::Xavier, seed)?);
            b.push(store.add(&format!("{prefix}.b_{g}"), &[hidden], Init::Zeros, seed)?);
        }
        Ok(GruLayerParams {
            input_dim,
            hidden,
            ids: GruIds {
                w: [w[0], w[1], w[2]],
                u: [u[0], u[1], u[2]],
                b: [b[0], b[1], b[2]],
            },
        })
    }

    /// Looks up a layer registered under `prefix`, checking shapes.
    pub fn lookup<T: Real>(store: &ParameterStore<T>, prefix: &str) -> Result<Self> {
        let get = |kind: &str, g: &str| store.require(&format!("{prefix}.{kind}_{g}"));
        let w = [get("w", "z")?, get("w", "r")?, get("w", "h")?];
        let u = [get("u", "z")?, get("u", "r")?, get("u", "h")?];
        let b = [get("b", "z")?, get("b", "r")?, get("b", "h")?];
        let (hidden, input_dim) = store.tensor(w[0]).rows_cols();
        for k in 0..3 {
            let ok = store.tensor(w[k]).shape() == [hidden, input_dim]
                && store.tensor(u[k]).shape() == [hidden, hidden]
                && store.tensor(b[k]).shape() == [hidden];
            if !ok {
                return Err(Error::shape(
                    format!("GRU layer {prefix}"),
                    format!("hidden {hidden}, input {input_dim}"),
                    format!("gate {}", GATES[k]),
                ));
            }
        }
        Ok(GruLayerParams {
            input_dim,
            hidden,
            ids: GruIds { w, u, b },
        })
    }
}

/// One GRU step evaluated outside any larger graph.
pub fn gru_cell_step<T: Real>(
    store: &ParameterStore<T>,
    layer: &GruLayerParams,
    x: &[T],
    h_prev: &[T],
) -> Result<Vec<T>> {
    if x.len() != layer.input_dim {
        return Err(Error::shape("GRU input", layer.input_dim, x.len()));
    }
    if h_prev.len() != layer.hidden {
        return Err(Error::shape("GRU state", layer.hidden, h_prev.len()));
    }
    let mut g = Graph::new(store);
    let xn = g.input(x.to_vec());
    let hn = g.input(h_prev.to_vec());
    let out = g.gru_step(&layer.ids, xn, hn);
    Ok(g.value(out).to_vec())
}

/// Token embeddings followed by a two-layer bidirectional GRU stack.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoder {
    pub embedding: ParamId,
    pub vocab_size: usize,
    pub embedding_dim: usize,
    pub hidden: usize,
    /// `layers[layer][direction]`, direction 0 = forward.
    pub layers: [[GruLayerParams; 2]; 2],
}

/// Encoder outputs as graph nodes.
#[derive(Debug, Clone)]
pub struct EncodedUtterance {
    /// Final forward and backward states of the top layer (2d).
    pub summary: Node,
    /// Per token: layer-1 forward, layer-1 backward, layer-2 forward,
    /// layer-2 backward states (4d).
    pub states: Vec<Node>,
}

fn layer_name(layer: usize, dir: usize) -> String {
    format!("encoder.l{}.{}", layer + 1, if dir == 0 { "fw" } else { "bw" })
}

impl Encoder {
    pub fn register<T: Real>(
        store: &mut ParameterStore<T>,
        vocab_size: usize,
        embedding_dim: usize,
        hidden: usize,
        seed: u64,
    ) -> Result<Self> {
        let embedding = store.add(
            "embedding",
            &[vocab_size, embedding_dim],
            Init::Uniform(0.1),
            seed,
        )?;
        let mut reg = |layer: usize, dir: usize, input: usize| {
            GruLayerParams::register(store, &layer_name(layer, dir), input, hidden, seed)
        };
        let l1 = [reg(0, 0, embedding_dim)?, reg(0, 1, embedding_dim)?];
        let l2 = [reg(1, 0, 2 * hidden)?, reg(1, 1, 2 * hidden)?];
        Ok(Encoder {
            embedding,
            vocab_size,
            embedding_dim,
            hidden,
            layers: [l1, l2],
        })
    }

    pub fn lookup<T: Real>(store: &ParameterStore<T>) -> Result<Self> {
        let embedding = store.require("embedding")?;
        let (vocab_size, embedding_dim) = store.tensor(embedding).rows_cols();
        let get = |l, d| GruLayerParams::lookup(store, &layer_name(l, d));
        let layers = [[get(0, 0)?, get(0, 1)?], [get(1, 0)?, get(1, 1)?]];
        let hidden = layers[0][0].hidden;
        let consistent = layers.iter().flatten().all(|p| p.hidden == hidden)
            && layers[0].iter().all(|p| p.input_dim == embedding_dim)
            && layers[1].iter().all(|p| p.input_dim == 2 * hidden);
        if !consistent {
            return Err(Error::shape(
                "encoder",
                format!("embedding {embedding_dim}, hidden {hidden}"),
                "inconsistent layer shapes",
            ));
        }
        Ok(Encoder {
            embedding,
            vocab_size,
            embedding_dim,
            hidden,
            layers,
        })
    }

    /// Dimension of the utterance summary vector.
    pub fn summary_dim(&self) -> usize {
        2 * self.hidden
    }

    /// Dimension of a per-token state vector.
    pub fn state_dim(&self) -> usize {
        4 * self.hidden
    }

    fn run_direction<T: Real>(
        &self,
        g: &mut Graph<'_, T>,
        layer: &GruLayerParams,
        inputs: &[Node],
        backward: bool,
    ) -> Vec<Node> {
        let n = inputs.len();
        let mut out = vec![None; n];
        let mut h = g.zeros(self.hidden);
        for step in 0..n {
            let k = if backward { n - 1 - step } else { step };
            h = g.gru_step(&layer.ids, inputs[k], h);
            out[k] = Some(h);
        }
        out.into_iter().map(|x| x.expect("every position visited")).collect()
    }

    pub fn encode<T: Real>(&self, g: &mut Graph<'_, T>, token_ids: &[usize]) -> Result<EncodedUtterance> {
        if token_ids.is_empty() {
            return Err(Error::invalid("cannot encode an empty token sequence"));
        }
        if let Some(bad) = token_ids.iter().find(|&&t| t >= self.vocab_size) {
            return Err(Error::invalid(format!(
                "token id {bad} outside vocabulary of size {}",
                self.vocab_size
            )));
        }
        let emb: Vec<Node> = token_ids.iter().map(|&t| g.embed(self.embedding, t)).collect();
        let f1 = self.run_direction(g, &self.layers[0][0], &emb, false);
        let b1 = self.run_direction(g, &self.layers[0][1], &emb, true);
        let mid: Vec<Node> = f1.iter().zip(&b1).map(|(a, b)| g.concat(&[*a, *b])).collect();
        let f2 = self.run_direction(g, &self.layers[1][0], &mid, false);
        let b2 = self.run_direction(g, &self.layers[1][1], &mid, true);
        let n = token_ids.len();
        let summary = g.concat(&[f2[n - 1], b2[0]]);
        let states = (0..n).map(|k| g.concat(&[f1[k], b1[k], f2[k], b2[k]])).collect();
        Ok(EncodedUtterance { summary, states })
    }
}

/// Encode one utterance in isolation: (summary vector, per-token states).
pub fn encode_utterance<T: Real>(
    store: &ParameterStore<T>,
    encoder: &Encoder,
    token_ids: &[usize],
) -> Result<(Vec<T>, Vec<Vec<T>>)> {
    let mut g = Graph::new(store);
    let enc = encoder.encode(&mut g, token_ids)?;
    let states = enc.states.iter().map(|n| g.value(*n).to_vec()).collect();
    Ok((g.value(enc.summary).to_vec(), states))
}
