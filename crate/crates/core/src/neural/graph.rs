//! Reverse-mode differentiation over vector-valued nodes.
//!
//! A `Graph` records the operations of one forward pass against a frozen
//! parameter store. `backward` returns gradients for every parameter.

use super::params::{Gradients, ParamId, ParameterStore};
use super::Real;

/// Probability floor used by `nll` before taking the logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Node(usize);

/// Parameter ids of one GRU layer in one direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GruIds {
    /// Input weights for update gate, reset gate and candidate.
    pub w: [ParamId; 3],
    /// Recurrent weights, same order.
    pub u: [ParamId; 3],
    pub b: [ParamId; 3],
}

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param(ParamId),
    Embed(ParamId, usize),
    Affine {
        terms: Vec<(ParamId, usize, Node)>,
        bias: Option<ParamId>,
    },
    Add(Vec<Node>),
    Sigmoid(Node),
    Tanh(Node),
    Concat(Vec<Node>),
    Pick(Node, usize),
    Gru {
        ids: GruIds,
        x: Node,
        h: Node,
    },
    Softmax(Vec<Option<Node>>),
    Nll(Node, usize),
}

#[derive(Debug, Clone)]
struct NodeData<T> {
    op: Op,
    value: Vec<T>,
    /// Saved activations (GRU gates).
    aux: Vec<T>,
}

pub struct Graph<'s, T> {
    store: &'s ParameterStore<T>,
    nodes: Vec<NodeData<T>>,
}

fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// y[r] += Σ_j W[r, off + j] · x[j]
fn gemv_block<T: Real>(w: &[T], cols: usize, off: usize, x: &[T], y: &mut [T]) {
    for (r, yr) in y.iter_mut().enumerate() {
        let row = &w[r * cols + off..r * cols + off + x.len()];
        let mut acc = T::zero();
        for (a, b) in row.iter().zip(x) {
            acc += *a * *b;
        }
        *yr += acc;
    }
}

/// dx[j] += Σ_r W[r, off + j] · dy[r];  dW[r, off + j] += dy[r] · x[j]
fn gemv_block_back<T: Real>(
    w: &[T],
    dw: &mut [T],
    cols: usize,
    off: usize,
    x: &[T],
    dy: &[T],
    mut dx: Option<&mut [T]>,
) {
    for (r, &d) in dy.iter().enumerate() {
        if d == T::zero() {
            continue;
        }
        let base = r * cols + off;
        let drow = &mut dw[base..base + x.len()];
        for (g, xv) in drow.iter_mut().zip(x) {
            *g += d * *xv;
        }
        if let Some(dx) = dx.as_deref_mut() {
            let row = &w[base..base + x.len()];
            for (g, wv) in dx.iter_mut().zip(row) {
                *g += d * *wv;
            }
        }
    }
}

impl<'s, T: Real> Graph<'s, T> {
    pub fn new(store: &'s ParameterStore<T>) -> Self {
        Graph {
            store,
            nodes: Vec::new(),
        }
    }

    pub fn store(&self) -> &'s ParameterStore<T> {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, n: Node) -> &[T] {
        &self.nodes[n.0].value
    }

    pub fn scalar_value(&self, n: Node) -> T {
        self.nodes[n.0].value[0]
    }

    fn push(&mut self, op: Op, value: Vec<T>) -> Node {
        self.nodes.push(NodeData {
            op,
            value,
            aux: Vec::new(),
        });
        Node(self.nodes.len() - 1)
    }

    pub fn input(&mut self, value: Vec<T>) -> Node {
        self.push(Op::Input, value)
    }

    pub fn zeros(&mut self, n: usize) -> Node {
        self.input(vec![T::zero(); n])
    }

    pub fn scalar(&mut self, x: T) -> Node {
        self.input(vec![x])
    }

    /// The whole parameter tensor as a flat vector.
    pub fn param(&mut self, id: ParamId) -> Node {
        let v = self.store.values(id).to_vec();
        self.push(Op::Param(id), v)
    }

    /// One row of a matrix parameter (embedding lookup).
    pub fn embed(&mut self, id: ParamId, row: usize) -> Node {
        let v = self.store.tensor(id).row(row).to_vec();
        self.push(Op::Embed(id, row), v)
    }

    /// Σ_i W_i[:, off_i .. off_i + |x_i|] · x_i (+ b).
    pub fn affine(&mut self, terms: &[(ParamId, usize, Node)], bias: Option<ParamId>) -> Node {
        let rows = match (terms.first(), bias) {
            (Some((w, _, _)), _) => self.store.tensor(*w).rows_cols().0,
            (None, Some(b)) => self.store.values(b).len(),
            (None, None) => panic!("affine needs a term or a bias"),
        };
        let mut y = match bias {
            Some(b) => self.store.values(b).to_vec(),
            None => vec![T::zero(); rows],
        };
        for &(w, off, x) in terms {
            let t = self.store.tensor(w);
            let (r, cols) = t.rows_cols();
            let xv = &self.nodes[x.0].value;
            assert!(r == rows && off + xv.len() <= cols, "affine block out of range");
            gemv_block(t.values(), cols, off, xv, &mut y);
        }
        self.push(
            Op::Affine {
                terms: terms.to_vec(),
                bias,
            },
            y,
        )
    }

    pub fn add(&mut self, xs: &[Node]) -> Node {
        let n = self.nodes[xs[0].0].value.len();
        let mut y = vec![T::zero(); n];
        for x in xs {
            let v = &self.nodes[x.0].value;
            assert_eq!(v.len(), n, "add of unequal lengths");
            for (a, b) in y.iter_mut().zip(v) {
                *a += *b;
            }
        }
        self.push(Op::Add(xs.to_vec()), y)
    }

    pub fn sigmoid(&mut self, x: Node) -> Node {
        let y = self.nodes[x.0].value.iter().map(|v| sigmoid(*v)).collect();
        self.push(Op::Sigmoid(x), y)
    }

    pub fn tanh(&mut self, x: Node) -> Node {
        let y = self.nodes[x.0].value.iter().map(|v| v.tanh()).collect();
        self.push(Op::Tanh(x), y)
    }

    pub fn concat(&mut self, xs: &[Node]) -> Node {
        let mut y = Vec::new();
        for x in xs {
            y.extend_from_slice(&self.nodes[x.0].value);
        }
        self.push(Op::Concat(xs.to_vec()), y)
    }

    pub fn pick(&mut self, x: Node, i: usize) -> Node {
        let v = self.nodes[x.0].value[i];
        self.push(Op::Pick(x, i), vec![v])
    }

    /// One GRU step: z = σ(Wz x + Uz h + bz), r = σ(Wr x + Ur h + br),
    /// h̃ = tanh(Wh x + Uh (r∘h) + bh), h' = (1−z)∘h + z∘h̃.
    pub fn gru_step(&mut self, ids: &GruIds, x: Node, h: Node) -> Node {
        let s = self.store;
        let xv = &self.nodes[x.0].value;
        let hv = &self.nodes[h.0].value;
        let d = hv.len();
        let gate = |k: usize, inp: &[T]| -> Vec<T> {
            let mut a = s.values(ids.b[k]).to_vec();
            let (_, cols) = s.tensor(ids.w[k]).rows_cols();
            gemv_block(s.values(ids.w[k]), cols, 0, xv, &mut a);
            gemv_block(s.values(ids.u[k]), d, 0, inp, &mut a);
            a
        };
        let z: Vec<T> = gate(0, hv).into_iter().map(sigmoid).collect();
        let r: Vec<T> = gate(1, hv).into_iter().map(sigmoid).collect();
        let rh: Vec<T> = r.iter().zip(hv).map(|(a, b)| *a * *b).collect();
        let ht: Vec<T> = gate(2, &rh).into_iter().map(|v| v.tanh()).collect();
        let out: Vec<T> = (0..d)
            .map(|i| (T::one() - z[i]) * hv[i] + z[i] * ht[i])
            .collect();
        let mut aux = z;
        aux.extend(r);
        aux.extend(ht);
        aux.extend(rh);
        let n = self.push(Op::Gru { ids: *ids, x, h }, out);
        self.nodes[n.0].aux = aux;
        n
    }

    /// Softmax over scalar logit nodes; `None` positions are masked to 0.
    pub fn softmax(&mut self, logits: &[Option<Node>]) -> Node {
        let vals: Vec<Option<T>> = logits
            .iter()
            .map(|l| l.map(|n| self.nodes[n.0].value[0]))
            .collect();
        let max = vals
            .iter()
            .flatten()
            .copied()
            .fold(T::neg_infinity(), T::max);
        assert!(max > T::neg_infinity(), "softmax with every position masked");
        let exps: Vec<T> = vals
            .iter()
            .map(|v| v.map_or(T::zero(), |x| (x - max).exp()))
            .collect();
        let total: T = exps.iter().copied().sum();
        let probs = exps.into_iter().map(|e| e / total).collect();
        self.push(Op::Softmax(logits.to_vec()), probs)
    }

    /// −ln max(p[label], floor)
    pub fn nll(&mut self, probs: Node, label: usize) -> Node {
        let p = self.nodes[probs.0].value[label].max(T::of(PROB_FLOOR));
        self.push(Op::Nll(probs, label), vec![-p.ln()])
    }

    /// Gradients of the scalar node `loss` with respect to all parameters.
    pub fn backward(&self, loss: Node) -> Gradients<T> {
        let mut pg = Gradients::zeros_like(self.store);
        assert_eq!(self.nodes[loss.0].value.len(), 1, "loss must be a scalar node");
        let mut grads: Vec<Vec<T>> = vec![Vec::new(); loss.0 + 1];
        grads[loss.0] = vec![T::one()];

        fn acc<T: Real>(slot: &mut Vec<T>, len: usize) -> &mut [T] {
            if slot.is_empty() {
                *slot = vec![T::zero(); len];
            }
            slot
        }

        for i in (0..=loss.0).rev() {
            let (before, after) = grads.split_at_mut(i);
            let g = &after[0];
            if g.is_empty() {
                continue;
            }
            let node = &self.nodes[i];
            let len_of = |n: Node| self.nodes[n.0].value.len();
            match &node.op {
                Op::Input => {}
                Op::Param(id) => {
                    for (a, b) in pg.get_mut(*id).iter_mut().zip(g) {
                        *a += *b;
                    }
                }
                Op::Embed(id, row) => {
                    let (_, cols) = self.store.tensor(*id).rows_cols();
                    let dst = &mut pg.get_mut(*id)[row * cols..(row + 1) * cols];
                    for (a, b) in dst.iter_mut().zip(g) {
                        *a += *b;
                    }
                }
                Op::Affine { terms, bias } => {
                    if let Some(b) = bias {
                        for (a, v) in pg.get_mut(*b).iter_mut().zip(g) {
                            *a += *v;
                        }
                    }
                    for &(w, off, x) in terms {
                        let t = self.store.tensor(w);
                        let (_, cols) = t.rows_cols();
                        let xv = &self.nodes[x.0].value;
                        let dx = if matches!(self.nodes[x.0].op, Op::Input) {
                            None
                        } else {
                            Some(acc(&mut before[x.0], xv.len()))
                        };
                        gemv_block_back(t.values(), pg.get_mut(w), cols, off, xv, g, dx);
                    }
                }
                Op::Add(xs) => {
                    for x in xs {
                        let dx = acc(&mut before[x.0], g.len());
                        for (a, b) in dx.iter_mut().zip(g) {
                            *a += *b;
                        }
                    }
                }
                Op::Sigmoid(x) => {
                    let dx = acc(&mut before[x.0], g.len());
                    for ((a, y), d) in dx.iter_mut().zip(&node.value).zip(g) {
                        *a += *d * *y * (T::one() - *y);
                    }
                }
                Op::Tanh(x) => {
                    let dx = acc(&mut before[x.0], g.len());
                    for ((a, y), d) in dx.iter_mut().zip(&node.value).zip(g) {
                        *a += *d * (T::one() - *y * *y);
                    }
                }
                Op::Concat(xs) => {
                    let mut off = 0;
                    for x in xs {
                        let n = len_of(*x);
                        let dx = acc(&mut before[x.0], n);
                        for (a, b) in dx.iter_mut().zip(&g[off..off + n]) {
                            *a += *b;
                        }
                        off += n;
                    }
                }
                Op::Pick(x, k) => {
                    let n = len_of(*x);
                    acc(&mut before[x.0], n)[*k] += g[0];
                }
                Op::Gru { ids, x, h } => {
                    self.gru_backward(node, ids, *x, *h, g, before, &mut pg);
                }
                Op::Softmax(logits) => {
                    let p = &node.value;
                    let s: T = p.iter().zip(g).map(|(a, b)| *a * *b).sum();
                    for (k, l) in logits.iter().enumerate() {
                        if let Some(l) = l {
                            acc(&mut before[l.0], 1)[0] += p[k] * (g[k] - s);
                        }
                    }
                }
                Op::Nll(probs, label) => {
                    let p = self.nodes[probs.0].value[*label];
                    if p > T::of(PROB_FLOOR) {
                        let n = len_of(*probs);
                        acc(&mut before[probs.0], n)[*label] -= g[0] / p;
                    }
                }
            }
        }
        pg
    }

    #[allow(clippy::too_many_arguments)]
    fn gru_backward(
        &self,
        node: &NodeData<T>,
        ids: &GruIds,
        x: Node,
        h: Node,
        g: &[T],
        before: &mut [Vec<T>],
        pg: &mut Gradients<T>,
    ) {
        let s = self.store;
        let d = g.len();
        let (z, rest) = node.aux.split_at(d);
        let (r, rest) = rest.split_at(d);
        let (ht, rh) = rest.split_at(d);
        let xv = &self.nodes[x.0].value;
        let hv = &self.nodes[h.0].value;

        let mut dh = vec![T::zero(); d];
        let mut da = [vec![T::zero(); d], vec![T::zero(); d], vec![T::zero(); d]];
        for i in 0..d {
            dh[i] = g[i] * (T::one() - z[i]);
            let dz = g[i] * (ht[i] - hv[i]);
            da[0][i] = dz * z[i] * (T::one() - z[i]);
            da[2][i] = g[i] * z[i] * (T::one() - ht[i] * ht[i]);
        }
        // candidate path: Uh (r∘h)
        let mut drh = vec![T::zero(); d];
        gemv_block_back(s.values(ids.u[2]), pg.get_mut(ids.u[2]), d, 0, rh, &da[2], Some(&mut drh));
        for i in 0..d {
            dh[i] += drh[i] * r[i];
            let dr = drh[i] * hv[i];
            da[1][i] = dr * r[i] * (T::one() - r[i]);
        }
        gemv_block_back(s.values(ids.u[0]), pg.get_mut(ids.u[0]), d, 0, hv, &da[0], Some(&mut dh));
        gemv_block_back(s.values(ids.u[1]), pg.get_mut(ids.u[1]), d, 0, hv, &da[1], Some(&mut dh));

        let x_is_input = matches!(self.nodes[x.0].op, Op::Input);
        let mut dx = vec![T::zero(); xv.len()];
        for k in 0..3 {
            let (_, cols) = s.tensor(ids.w[k]).rows_cols();
            gemv_block_back(
                s.values(ids.w[k]),
                pg.get_mut(ids.w[k]),
                cols,
                0,
                xv,
                &da[k],
                if x_is_input { None } else { Some(&mut dx) },
            );
            for (a, b) in pg.get_mut(ids.b[k]).iter_mut().zip(&da[k]) {
                *a += *b;
            }
        }
        if !x_is_input {
            let slot = &mut before[x.0];
            if slot.is_empty() {
                *slot = dx;
            } else {
                for (a, b) in slot.iter_mut().zip(&dx) {
                    *a += *b;
                }
            }
        }
        if !matches!(self.nodes[h.0].op, Op::Input) {
            let slot = &mut before[h.0];
            if slot.is_empty() {
                *slot = dh;
            } else {
                for (a, b) in slot.iter_mut().zip(&dh) {
                    *a += *b;
                }
            }
        }
    }
}
