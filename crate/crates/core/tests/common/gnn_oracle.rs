use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tusp_core::gnn::{Architecture, Dropout, GraphInput, Model};
use tusp_core::graph::{ActivityGraph, Edge, EdgeClass, FeatureSet, LabelAlphabet, Node};
use tusp_core::matrix::Matrix;

pub fn alphabet(width: usize) -> LabelAlphabet {
    let mut labels = vec!["UNK".to_string()];
    labels.extend((1..width).map(|i| format!("l{i:02}")));
    LabelAlphabet { labels }
}

pub fn small_architecture() -> Architecture {
    Architecture {
        conv_channels: vec![3, 2, 1],
        conv1_filters: 4,
        conv2_filters: 3,
        conv2_kernel: 2,
        hidden_units: 6,
        ..Architecture::default()
    }
}

/// Random symmetric 0/1 adjacency and dense features in [-1, 1].
pub fn random_input(rng: &mut ChaCha8Rng, n: usize, width: usize) -> (Vec<Vec<f64>>, GraphInput) {
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(0.4) {
                a[i][j] = 1.0;
                a[j][i] = 1.0;
            }
        }
    }
    let x = Matrix {
        rows: n,
        cols: width,
        data: (0..n * width).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    };
    let input = GraphInput::from_adjacency(&a, x).expect("valid adjacency");
    (a, input)
}

/// Overwrites every tensor (biases included) with values in [-scale, scale].
pub fn randomize(model: &mut Model, rng: &mut ChaCha8Rng, scale: f64) {
    for t in &mut model.tensors {
        t.data.iter_mut().for_each(|v| *v = rng.gen_range(-scale..scale));
    }
}

pub fn dropout_mask(rng: &mut ChaCha8Rng, len: usize, p: f64) -> Vec<f64> {
    (0..len).map(|_| if rng.gen::<f64>() < p { 0.0 } else { 1.0 / (1.0 - p) }).collect()
}

/// Per-tensor relative error `|g - g_fd| / max(|g|, |g_fd|)` of the analytic
/// gradient against central differences with step `h`. With `sample`, only
/// that many entries per tensor are compared (the norms then run over the
/// sampled entries). Tensors whose gradients are both below 1e-9 in norm
/// report 0.
pub fn gradient_errors(
    model: &Model,
    input: &GraphInput,
    label: u8,
    mask: &[f64],
    h: f64,
    sample: Option<(usize, &mut ChaCha8Rng)>,
) -> Vec<(String, f64)> {
    let (_, grads) = model.loss_and_grad(input, label, Dropout::Fixed(mask)).expect("forward");
    let loss = |m: &Model| m.forward(input, Dropout::Fixed(mask)).expect("forward").loss(label);
    let mut probe = model.clone();
    let mut sample = sample;
    let mut out = Vec::new();
    for (ti, g) in grads.iter().enumerate() {
        let len = g.data.len();
        let entries: Vec<usize> = match sample.as_mut() {
            Some((k, rng)) if *k < len => (0..*k).map(|_| rng.gen_range(0..len)).collect(),
            _ => (0..len).collect(),
        };
        let (mut diff, mut na, mut nf) = (0.0, 0.0, 0.0);
        for j in entries {
            let orig = probe.tensors[ti].data[j];
            probe.tensors[ti].data[j] = orig + h;
            let up = loss(&probe);
            probe.tensors[ti].data[j] = orig - h;
            let down = loss(&probe);
            probe.tensors[ti].data[j] = orig;
            let fd = (up - down) / (2.0 * h);
            let an = g.data[j];
            diff += (an - fd) * (an - fd);
            na += an * an;
            nf += fd * fd;
        }
        let (diff, na, nf) = (diff.sqrt(), na.sqrt(), nf.sqrt());
        let err = if na.max(nf) < 1e-9 { 0.0 } else { diff / na.max(nf) };
        out.push((g.name.clone(), err));
    }
    out
}

/// Straight-line forward pass written from the layer definitions with plain
/// loops and no shared helpers; returns the class-1 probability.
pub fn reference_score(model: &Model, a: &[Vec<f64>], x: &[Vec<f64>]) -> f64 {
    let arch = &model.architecture;
    let n = x.len();
    let t = |name: &str| &model.tensors.iter().find(|t| t.name == name).expect("tensor").data;

    let mut z = x.to_vec();
    let mut blocks: Vec<Vec<Vec<f64>>> = Vec::new();
    for (layer, &co) in arch.conv_channels.iter().enumerate() {
        let w = t(&format!("graph_w{layer}"));
        let ci = z[0].len();
        let mut next = vec![vec![0.0; co]; n];
        for i in 0..n {
            let deg = 1.0 + a[i].iter().sum::<f64>();
            for c in 0..co {
                let mut s = 0.0;
                for j in 0..n {
                    let aij = if i == j { 1.0 } else { a[i][j] };
                    for q in 0..ci {
                        s += aij / deg * z[j][q] * w[q * co + c];
                    }
                }
                next[i][c] = s.tanh();
            }
        }
        blocks.push(next.clone());
        z = next;
    }
    let total: usize = arch.conv_channels.iter().sum();
    let k = model.k;
    let mut u = vec![vec![0.0; total]; k];
    for (i, row) in u.iter_mut().enumerate().take(n.min(k)) {
        *row = blocks.iter().flat_map(|b| b[i].iter().copied()).collect();
    }

    let (w1, b1) = (t("conv1_w"), t("conv1_b"));
    let f1 = arch.conv1_filters;
    let c1: Vec<Vec<f64>> = (0..k)
        .map(|r| (0..f1).map(|f| (b1[f] + (0..total).map(|c| w1[f * total + c] * u[r][c]).sum::<f64>()).max(0.0)).collect())
        .collect();
    let pl = k / arch.pool_size;
    let pooled: Vec<Vec<f64>> = (0..pl)
        .map(|p| {
            (0..f1)
                .map(|f| (0..arch.pool_size).map(|d| c1[p * arch.pool_size + d][f]).fold(f64::NEG_INFINITY, f64::max))
                .collect()
        })
        .collect();
    let (w2, b2) = (t("conv2_w"), t("conv2_b"));
    let (f2, kk) = (arch.conv2_filters, arch.conv2_kernel);
    let mut flat = Vec::new();
    for l in 0..pl + 1 - kk {
        for g in 0..f2 {
            let mut s = b2[g];
            for d in 0..kk {
                for f in 0..f1 {
                    s += w2[(g * kk + d) * f1 + f] * pooled[l + d][f];
                }
            }
            flat.push(s.max(0.0));
        }
    }
    let (wd, bd) = (t("dense_w"), t("dense_b"));
    let hdim = arch.hidden_units;
    let hidden: Vec<f64> = (0..hdim)
        .map(|j| (bd[j] + flat.iter().enumerate().map(|(i, v)| wd[j * flat.len() + i] * v).sum::<f64>()).max(0.0))
        .collect();
    let (wo, bo) = (t("out_w"), t("out_b"));
    let l0 = bo[0] + (0..hdim).map(|j| wo[j] * hidden[j]).sum::<f64>();
    let l1 = bo[1] + (0..hdim).map(|j| wo[hdim + j] * hidden[j]).sum::<f64>();
    1.0 / (1.0 + (l0 - l1).exp())
}

/// Path graphs whose nodes all carry label "a" (class 1) or "b" (class 0).
pub fn separable_graphs(count: usize, seed: u64) -> Vec<(ActivityGraph, u8)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let label = (i % 2) as u8;
            let n = rng.gen_range(5..=14);
            let name = if label == 1 { "a" } else { "b" };
            let nodes = (0..n)
                .map(|j| Node { label: name.into(), start: 10 * j as i64, end: 10 * j as i64 + 5, unit_ids: vec![1] })
                .collect();
            let edges = (1..n).map(|j| Edge { from: j - 1, to: j, edge_class: EdgeClass::UnitOrder }).collect();
            (ActivityGraph { nodes, edges }, label)
        })
        .collect()
}

pub fn inputs_for(model: &Model, graphs: &[(ActivityGraph, u8)]) -> Vec<(GraphInput, u8)> {
    graphs.iter().map(|(g, y)| (model.graph_input(g, 1440), *y)).collect()
}

pub fn label_only() -> FeatureSet {
    FeatureSet::Labels
}
