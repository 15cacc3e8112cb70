//! Graph convolutional classifier over activity graphs: stacked
//! `tanh(D^-1 (A + I) Z W)` layers, horizontal concatenation, unification
//! to `k` rows, a small 1-D CNN head and a two-class softmax.
//!
//! Gradients are computed by hand; see `backward`.

mod train;

pub use train::{evaluate, fit, train, Adam, Confusion, Metrics, TrainParams};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{extract_features, ActivityGraph, FeatureSet, LabelAlphabet};
use crate::matrix::{matmul, matmul_nt, matmul_tn_acc, Matrix};
use crate::model::Minutes;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub conv_channels: Vec<usize>,
    pub k_fraction: f64,
    /// Overrides `k_fraction` when set.
    #[serde(default)]
    pub k: Option<usize>,
    pub conv1_filters: usize,
    pub pool_size: usize,
    pub conv2_filters: usize,
    pub conv2_kernel: usize,
    pub hidden_units: usize,
    pub dropout: f64,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            conv_channels: vec![32, 32, 32, 1],
            k_fraction: 0.6,
            k: None,
            conv1_filters: 16,
            pool_size: 2,
            conv2_filters: 32,
            conv2_kernel: 5,
            hidden_units: 128,
            dropout: 0.5,
        }
    }
}

impl Architecture {
    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("architecture: {m}")));
        if self.conv_channels.is_empty() || self.conv_channels.contains(&0) {
            return bad("conv_channels must be non-empty and positive");
        }
        if !(self.k_fraction > 0.0 && self.k_fraction <= 1.0) {
            return bad("k_fraction must lie in (0, 1]");
        }
        if self.conv1_filters == 0 || self.conv2_filters == 0 || self.hidden_units == 0 {
            return bad("layer widths must be positive");
        }
        if self.pool_size == 0 || self.conv2_kernel == 0 {
            return bad("pool size and kernel must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if let Some(k) = self.k {
            if k < self.min_k() {
                return bad(&format!("k = {k} is below the head's minimum {}", self.min_k()));
            }
        }
        Ok(())
    }

    pub fn total_channels(&self) -> usize {
        self.conv_channels.iter().sum()
    }

    /// Smallest `k` for which the second convolution has at least one output.
    pub fn min_k(&self) -> usize {
        self.pool_size * self.conv2_kernel
    }

    /// `k` for a corpus: the node count of the graph at the `k_fraction`
    /// quantile (ascending), so that this fraction of graphs fits without
    /// truncation; never below `min_k`.
    pub fn select_k(&self, node_counts: &[usize]) -> Result<usize> {
        if let Some(k) = self.k {
            return Ok(k);
        }
        if node_counts.is_empty() {
            return Err(Error::Config("cannot choose k for an empty corpus".into()));
        }
        let mut sorted = node_counts.to_vec();
        sorted.sort_unstable();
        let idx = ((self.k_fraction * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
        Ok(sorted[idx].max(self.min_k()))
    }
}

/// Layer sizes resolved for an input width and `k`.
#[derive(Debug, Clone, PartialEq)]
struct Dims {
    channels: Vec<usize>,
    total: usize,
    k: usize,
    f1: usize,
    pool: usize,
    pooled: usize,
    f2: usize,
    kernel2: usize,
    l2: usize,
    flat: usize,
    hidden: usize,
}

impl Dims {
    fn new(arch: &Architecture, input: usize, k: usize) -> Result<Self> {
        arch.check()?;
        if k < arch.min_k() {
            return Err(Error::Config(format!("k = {k} is below the head's minimum {}", arch.min_k())));
        }
        if input == 0 {
            return Err(Error::Config("input width must be positive".into()));
        }
        let mut channels = vec![input];
        channels.extend(&arch.conv_channels);
        let pooled = k / arch.pool_size;
        let l2 = pooled + 1 - arch.conv2_kernel;
        Ok(Dims {
            total: arch.total_channels(),
            channels,
            k,
            f1: arch.conv1_filters,
            pool: arch.pool_size,
            pooled,
            f2: arch.conv2_filters,
            kernel2: arch.conv2_kernel,
            l2,
            flat: l2 * arch.conv2_filters,
            hidden: arch.hidden_units,
        })
    }

    fn h(&self) -> usize {
        self.channels.len() - 1
    }

    fn shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut s: Vec<(String, Vec<usize>)> = (0..self.h())
            .map(|t| (format!("graph_w{t}"), vec![self.channels[t], self.channels[t + 1]]))
            .collect();
        s.push(("conv1_w".into(), vec![self.f1, self.total]));
        s.push(("conv1_b".into(), vec![self.f1]));
        s.push(("conv2_w".into(), vec![self.f2, self.kernel2, self.f1]));
        s.push(("conv2_b".into(), vec![self.f2]));
        s.push(("dense_w".into(), vec![self.hidden, self.flat]));
        s.push(("dense_b".into(), vec![self.hidden]));
        s.push(("out_w".into(), vec![2, self.hidden]));
        s.push(("out_b".into(), vec![2]));
        s
    }
}

// Offsets of the head tensors after the graph layers.
const CONV1_W: usize = 0;
const CONV1_B: usize = 1;
const CONV2_W: usize = 2;
const CONV2_B: usize = 3;
const DENSE_W: usize = 4;
const DENSE_B: usize = 5;
const OUT_W: usize = 6;
const OUT_B: usize = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(name: &str, shape: &[usize]) -> Self {
        Tensor { name: name.into(), shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }
}

/// A graph with features ready for the network.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInput {
    pub features: Matrix,
    pub neighbors: Vec<Vec<usize>>,
}

impl GraphInput {
    pub fn new(graph: &ActivityGraph, alphabet: &LabelAlphabet, horizon: Minutes, set: FeatureSet) -> Self {
        GraphInput {
            features: extract_features(graph, alphabet, horizon, set),
            neighbors: graph.neighbors(),
        }
    }

    /// From a dense symmetric 0/1 adjacency with zero diagonal.
    pub fn from_adjacency(a: &[Vec<f64>], features: Matrix) -> Result<Self> {
        check_adjacency(a, features.rows)?;
        let neighbors = a
            .iter()
            .map(|row| row.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(j, _)| j).collect())
            .collect();
        Ok(GraphInput { features, neighbors })
    }

    pub fn n(&self) -> usize {
        self.features.rows
    }
}

fn check_adjacency(a: &[Vec<f64>], n: usize) -> Result<()> {
    if a.len() != n || a.iter().any(|r| r.len() != n) {
        return Err(Error::Shape(format!("adjacency must be {n}x{n}")));
    }
    for i in 0..n {
        if a[i][i] != 0.0 {
            return Err(Error::Shape(format!("adjacency has a self-loop at {i}")));
        }
        for j in 0..n {
            if a[i][j] != a[j][i] || (a[i][j] != 0.0 && a[i][j] != 1.0) {
                return Err(Error::Shape(format!("adjacency is not symmetric 0/1 at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphActivation {
    Tanh,
    /// Linear layers, for checking the propagation rule by hand.
    Identity,
}

/// Outputs `Z^0 = X, Z^1, ..., Z^h` of the graph layers and their
/// concatenation `Z^{1:h}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerActivations {
    pub z: Vec<Matrix>,
    pub concat: Matrix,
}

/// Dense reference form of the graph layers.
pub fn graph_conv_forward(
    a: &[Vec<f64>],
    x: &Matrix,
    weights: &[Matrix],
    activation: GraphActivation,
) -> Result<LayerActivations> {
    let n = x.rows;
    check_adjacency(a, n)?;
    let mut width = x.cols;
    for (t, w) in weights.iter().enumerate() {
        if w.rows != width {
            return Err(Error::Shape(format!("weight {t} has {} rows, expected {width}", w.rows)));
        }
        width = w.cols;
    }
    // D^-1 (A + I), row by row.
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        let deg = 1.0 + a[i].iter().sum::<f64>();
        for j in 0..n {
            let v = if i == j { 1.0 } else { a[i][j] };
            p[i * n + j] = v / deg;
        }
    }
    let mut z = vec![x.clone()];
    for w in weights {
        let prev = z.last().expect("z starts with X");
        let s = matmul(&p, n, n, &prev.data, prev.cols);
        let mut data = matmul(&s, n, prev.cols, &w.data, w.cols);
        if activation == GraphActivation::Tanh {
            data.iter_mut().for_each(|v| *v = v.tanh());
        }
        z.push(Matrix { rows: n, cols: w.cols, data });
    }
    let concat = concat_columns(&z[1..], n);
    Ok(LayerActivations { z, concat })
}

fn concat_columns(blocks: &[Matrix], n: usize) -> Matrix {
    let cols = blocks.iter().map(|b| b.cols).sum();
    let mut out = Matrix::zeros(n, cols);
    for i in 0..n {
        let mut off = 0;
        for b in blocks {
            out.row_mut(i)[off..off + b.cols].copy_from_slice(b.row(i));
            off += b.cols;
        }
    }
    out
}

/// Truncates to the first `k` rows or zero-pads up to `k` rows.
pub fn unify_nodes(z: &Matrix, k: usize) -> Matrix {
    let mut out = Matrix::zeros(k, z.cols);
    let keep = z.rows.min(k) * z.cols;
    out.data[..keep].copy_from_slice(&z.data[..keep]);
    out
}

/// `D^-1 (A + I) M` for neighbour lists.
fn propagate(neighbors: &[Vec<usize>], m: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(m.rows, m.cols);
    for (i, nb) in neighbors.iter().enumerate() {
        let scale = 1.0 / (nb.len() as f64 + 1.0);
        let row = out.row_mut(i);
        for (o, v) in row.iter_mut().zip(m.row(i)) {
            *o = *v;
        }
        for &j in nb {
            for (o, v) in row.iter_mut().zip(m.row(j)) {
                *o += *v;
            }
        }
        row.iter_mut().for_each(|o| *o *= scale);
    }
    out
}

/// `(D^-1 (A + I))^T M`; relies on symmetric neighbour lists.
fn propagate_transpose(neighbors: &[Vec<usize>], m: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(m.rows, m.cols);
    let scale: Vec<f64> = neighbors.iter().map(|nb| 1.0 / (nb.len() as f64 + 1.0)).collect();
    for (j, nb) in neighbors.iter().enumerate() {
        let row = out.row_mut(j);
        for (o, v) in row.iter_mut().zip(m.row(j)) {
            *o = *v * scale[j];
        }
        for &i in nb {
            for (o, v) in row.iter_mut().zip(m.row(i)) {
                *o += *v * scale[i];
            }
        }
    }
    out
}

/// How dropout is applied in a forward pass.
pub enum Dropout<'a> {
    Off,
    Sample(&'a mut ChaCha8Rng),
    /// A pre-drawn mask of already-scaled multipliers.
    Fixed(&'a [f64]),
}

/// Everything the backward pass needs.
#[derive(Debug, Clone)]
pub struct Activations {
    pub graph: LayerActivations,
    propagated: Vec<Matrix>,
    pub unified: Matrix,
    conv1: Matrix,
    pooled: Matrix,
    argmax: Vec<usize>,
    conv2: Matrix,
    flat: Vec<f64>,
    hidden: Vec<f64>,
    pub mask: Option<Vec<f64>>,
    dropped: Vec<f64>,
    pub logits: [f64; 2],
    pub probs: [f64; 2],
}

impl Activations {
    /// Probability of the feasible class.
    pub fn score(&self) -> f64 {
        self.probs[1]
    }

    /// Cross-entropy against `label`.
    pub fn loss(&self, label: u8) -> f64 {
        let [a, b] = self.logits;
        let m = a.max(b);
        let lse = m + ((a - m).exp() + (b - m).exp()).ln();
        lse - self.logits[label as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub architecture: Architecture,
    pub k: usize,
    pub feature_set: FeatureSet,
    pub alphabet: LabelAlphabet,
    pub tensors: Vec<Tensor>,
    pub epochs_trained: usize,
    pub seed: u64,
}

impl Model {
    /// Glorot-uniform weights, zero biases.
    pub fn new(
        architecture: Architecture,
        alphabet: LabelAlphabet,
        feature_set: FeatureSet,
        k: usize,
        seed: u64,
    ) -> Result<Self> {
        let dims = Dims::new(&architecture, feature_set.width(&alphabet), k)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tensors = dims
            .shapes()
            .into_iter()
            .map(|(name, shape)| {
                let mut t = Tensor::zeros(&name, &shape);
                if !name.ends_with("_b") {
                    let (fan_in, fan_out) = match shape.as_slice() {
                        [out, k, inp] => (k * inp, k * out),
                        [a, b] if name.starts_with("graph") => (*a, *b),
                        [out, inp] => (*inp, *out),
                        _ => unreachable!("weights are 2-D or 3-D"),
                    };
                    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    t.data.iter_mut().for_each(|v| *v = rng.gen_range(-limit..limit));
                }
                t
            })
            .collect();
        Ok(Model { architecture, k, feature_set, alphabet, tensors, epochs_trained: 0, seed })
    }

    pub fn input_width(&self) -> usize {
        self.feature_set.width(&self.alphabet)
    }

    fn dims(&self) -> Dims {
        Dims::new(&self.architecture, self.input_width(), self.k).expect("model dimensions were checked at construction")
    }

    /// Tensor shapes agree with the architecture, alphabet and `k`.
    pub fn check(&self) -> Result<()> {
        let dims = Dims::new(&self.architecture, self.input_width(), self.k)?;
        let shapes = dims.shapes();
        if shapes.len() != self.tensors.len() {
            return Err(Error::Shape(format!("expected {} tensors, found {}", shapes.len(), self.tensors.len())));
        }
        for ((name, shape), t) in shapes.iter().zip(&self.tensors) {
            if &t.name != name || &t.shape != shape || t.data.len() != shape.iter().product::<usize>() {
                return Err(Error::Shape(format!("tensor {} does not match {name}{shape:?}", t.name)));
            }
        }
        Ok(())
    }

    pub fn zero_grads(&self) -> Vec<Tensor> {
        self.tensors.iter().map(|t| Tensor::zeros(&t.name, &t.shape)).collect()
    }

    fn head(&self, i: usize) -> &[f64] {
        &self.tensors[self.architecture.conv_channels.len() + i].data
    }

    pub fn graph_input(&self, graph: &ActivityGraph, horizon: Minutes) -> GraphInput {
        GraphInput::new(graph, &self.alphabet, horizon, self.feature_set)
    }

    /// Probability that the plan behind `input` leads to a feasible solution.
    pub fn score(&self, input: &GraphInput) -> Result<f64> {
        Ok(self.forward(input, Dropout::Off)?.score())
    }

    pub fn forward(&self, input: &GraphInput, dropout: Dropout<'_>) -> Result<Activations> {
        let d = self.dims();
        let x = &input.features;
        let n = x.rows;
        if x.cols != d.channels[0] {
            return Err(Error::Shape(format!("features have {} columns, model expects {}", x.cols, d.channels[0])));
        }
        if input.neighbors.len() != n {
            return Err(Error::Shape(format!("{} neighbour lists for {n} nodes", input.neighbors.len())));
        }

        let mut z = vec![x.clone()];
        let mut propagated = Vec::with_capacity(d.h());
        for t in 0..d.h() {
            let s = propagate(&input.neighbors, &z[t]);
            let (ci, co) = (d.channels[t], d.channels[t + 1]);
            let mut data = matmul(&s.data, n, ci, &self.tensors[t].data, co);
            data.iter_mut().for_each(|v| *v = v.tanh());
            propagated.push(s);
            z.push(Matrix { rows: n, cols: co, data });
        }
        let concat = concat_columns(&z[1..], n);
        let unified = unify_nodes(&concat, d.k);

        // conv1: kernel and stride both span one node row.
        let mut conv1 = Matrix {
            rows: d.k,
            cols: d.f1,
            data: matmul_nt(&unified.data, d.k, d.total, self.head(CONV1_W), d.f1),
        };
        let b1 = self.head(CONV1_B);
        for r in 0..d.k {
            for (v, b) in conv1.row_mut(r).iter_mut().zip(b1) {
                *v = (*v + b).max(0.0);
            }
        }

        let mut pooled = Matrix::zeros(d.pooled, d.f1);
        let mut argmax = vec![0; d.pooled * d.f1];
        for p in 0..d.pooled {
            for f in 0..d.f1 {
                let mut best = p * d.pool;
                for r in best + 1..(p + 1) * d.pool {
                    if conv1.get(r, f) > conv1.get(best, f) {
                        best = r;
                    }
                }
                argmax[p * d.f1 + f] = best;
                pooled.set(p, f, conv1.get(best, f));
            }
        }

        let w2 = self.head(CONV2_W);
        let b2 = self.head(CONV2_B);
        let mut conv2 = Matrix::zeros(d.l2, d.f2);
        for l in 0..d.l2 {
            for g in 0..d.f2 {
                let mut acc = b2[g];
                for j in 0..d.kernel2 {
                    let w = &w2[(g * d.kernel2 + j) * d.f1..(g * d.kernel2 + j + 1) * d.f1];
                    acc += w.iter().zip(pooled.row(l + j)).map(|(a, b)| a * b).sum::<f64>();
                }
                conv2.set(l, g, acc.max(0.0));
            }
        }
        let flat = conv2.data.clone();

        let wd = self.head(DENSE_W);
        let hidden: Vec<f64> = self
            .head(DENSE_B)
            .iter()
            .enumerate()
            .map(|(u, b)| (b + dot(&wd[u * d.flat..(u + 1) * d.flat], &flat)).max(0.0))
            .collect();

        let p = self.architecture.dropout;
        let mask = match dropout {
            Dropout::Off => None,
            Dropout::Fixed(m) => {
                if m.len() != d.hidden {
                    return Err(Error::Shape(format!("dropout mask has {} entries, expected {}", m.len(), d.hidden)));
                }
                Some(m.to_vec())
            }
            Dropout::Sample(rng) => Some(
                (0..d.hidden)
                    .map(|_| if rng.gen::<f64>() < p { 0.0 } else { 1.0 / (1.0 - p) })
                    .collect(),
            ),
        };
        let dropped: Vec<f64> = match &mask {
            Some(m) => hidden.iter().zip(m).map(|(h, m)| h * m).collect(),
            None => hidden.clone(),
        };

        let wo = self.head(OUT_W);
        let bo = self.head(OUT_B);
        let logits = [
            bo[0] + dot(&wo[..d.hidden], &dropped),
            bo[1] + dot(&wo[d.hidden..], &dropped),
        ];
        let m = logits[0].max(logits[1]);
        let e = [(logits[0] - m).exp(), (logits[1] - m).exp()];
        let probs = [e[0] / (e[0] + e[1]), e[1] / (e[0] + e[1])];

        Ok(Activations {
            graph: LayerActivations { z, concat },
            propagated,
            unified,
            conv1,
            pooled,
            argmax,
            conv2,
            flat,
            hidden,
            mask,
            dropped,
            logits,
            probs,
        })
    }

    /// Adds `scale * d loss(label) / d theta` to `grads`.
    pub fn backward(&self, input: &GraphInput, act: &Activations, label: u8, scale: f64, grads: &mut [Tensor]) {
        let d = self.dims();
        let h = d.h();
        let n = input.n();

        let mut dlogits = act.probs;
        dlogits[label as usize] -= 1.0;
        dlogits.iter_mut().for_each(|v| *v *= scale);

        let wo = self.head(OUT_W);
        for c in 0..2 {
            let g = &mut grads[h + OUT_W].data[c * d.hidden..(c + 1) * d.hidden];
            for (gv, x) in g.iter_mut().zip(&act.dropped) {
                *gv += dlogits[c] * x;
            }
            grads[h + OUT_B].data[c] += dlogits[c];
        }
        let mut dhidden: Vec<f64> = (0..d.hidden)
            .map(|u| dlogits[0] * wo[u] + dlogits[1] * wo[d.hidden + u])
            .collect();
        if let Some(m) = &act.mask {
            dhidden.iter_mut().zip(m).for_each(|(g, m)| *g *= m);
        }
        for (g, hv) in dhidden.iter_mut().zip(&act.hidden) {
            if *hv <= 0.0 {
                *g = 0.0;
            }
        }

        let wd = self.head(DENSE_W);
        let mut dflat = vec![0.0; d.flat];
        for (u, &g) in dhidden.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let row = &mut grads[h + DENSE_W].data[u * d.flat..(u + 1) * d.flat];
            for (r, x) in row.iter_mut().zip(&act.flat) {
                *r += g * x;
            }
            grads[h + DENSE_B].data[u] += g;
            for (df, w) in dflat.iter_mut().zip(&wd[u * d.flat..(u + 1) * d.flat]) {
                *df += g * w;
            }
        }

        // conv2 (pre-activation gradient is dflat masked by ReLU).
        let w2 = self.head(CONV2_W);
        let mut dpooled = Matrix::zeros(d.pooled, d.f1);
        for l in 0..d.l2 {
            for g in 0..d.f2 {
                let idx = l * d.f2 + g;
                if act.conv2.data[idx] <= 0.0 {
                    continue;
                }
                let dv = dflat[idx];
                grads[h + CONV2_B].data[g] += dv;
                for j in 0..d.kernel2 {
                    let off = (g * d.kernel2 + j) * d.f1;
                    let src = act.pooled.row(l + j);
                    for f in 0..d.f1 {
                        grads[h + CONV2_W].data[off + f] += dv * src[f];
                        dpooled.data[(l + j) * d.f1 + f] += dv * w2[off + f];
                    }
                }
            }
        }

        // Max-pool routes to the winning row; then conv1's ReLU.
        let mut dconv1 = Matrix::zeros(d.k, d.f1);
        for p in 0..d.pooled {
            for f in 0..d.f1 {
                let r = act.argmax[p * d.f1 + f];
                if act.conv1.get(r, f) > 0.0 {
                    dconv1.data[r * d.f1 + f] += dpooled.get(p, f);
                }
            }
        }
        matmul_tn_acc(&dconv1.data, d.k, d.f1, &act.unified.data, d.total, &mut grads[h + CONV1_W].data);
        for r in 0..d.k {
            for (b, g) in grads[h + CONV1_B].data.iter_mut().zip(dconv1.row(r)) {
                *b += g;
            }
        }
        // Only the rows that survived unification receive gradient.
        let dunified = matmul(&dconv1.data, d.k, d.f1, self.head(CONV1_W), d.total);

        let rows = n.min(d.k);
        let mut offsets = vec![0];
        for t in 1..=h {
            offsets.push(offsets[t - 1] + d.channels[t]);
        }
        let mut dz: Vec<Matrix> = (1..=h).map(|t| Matrix::zeros(n, d.channels[t])).collect();
        for i in 0..rows {
            for t in 1..=h {
                let src = &dunified[i * d.total + offsets[t - 1]..i * d.total + offsets[t]];
                dz[t - 1].row_mut(i).copy_from_slice(src);
            }
        }
        for t in (0..h).rev() {
            let (ci, co) = (d.channels[t], d.channels[t + 1]);
            let zt1 = &act.graph.z[t + 1];
            let mut dpre = std::mem::replace(&mut dz[t], Matrix::zeros(0, 0));
            for (g, zv) in dpre.data.iter_mut().zip(&zt1.data) {
                *g *= 1.0 - zv * zv;
            }
            matmul_tn_acc(&act.propagated[t].data, n, ci, &dpre.data, co, &mut grads[t].data);
            if t > 0 {
                let ds = Matrix { rows: n, cols: ci, data: matmul_nt(&dpre.data, n, co, &self.tensors[t].data, ci) };
                let back = propagate_transpose(&input.neighbors, &ds);
                for (a, b) in dz[t - 1].data.iter_mut().zip(&back.data) {
                    *a += b;
                }
            }
        }
    }

    /// Loss and gradient of one example, for checking against finite differences.
    pub fn loss_and_grad(&self, input: &GraphInput, label: u8, dropout: Dropout<'_>) -> Result<(f64, Vec<Tensor>)> {
        let act = self.forward(input, dropout)?;
        let mut grads = self.zero_grads();
        self.backward(input, &act, label, 1.0, &mut grads);
        Ok((act.loss(label), grads))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
