//! Independent reference implementations used by the integration tests.
//! Nothing here calls into the code under test except for plain data access.

#![allow(dead_code)]

use rand::Rng;
use spargcp::autodiff::{Matrix, Tape, Tensor};
use spargcp::graph::AttributedGraph;
use spargcp::nn::{Backbone, GnnModel};
use spargcp::rng::Rng as ChaRng;

pub fn random_matrix(rng: &mut ChaRng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// Values in `[lo, hi)` whose magnitude stays at least `gap` away from 0.
pub fn random_away_from_zero(rng: &mut ChaRng, rows: usize, cols: usize, gap: f64) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| {
            let m = rng.random_range(gap..2.0);
            if rng.random_bool(0.5) { m } else { -m }
        })
        .collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// Random directed graph, possibly with self-loops and isolated nodes.
pub fn random_graph(rng: &mut ChaRng, max_nodes: usize, feature_dim: usize, classes: usize) -> AttributedGraph {
    let n = rng.random_range(1..=max_nodes);
    let density = rng.random_range(0.0..0.4);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if rng.random_bool(density) {
                edges.push((u, v));
            }
        }
    }
    let features = random_matrix(rng, n, feature_dim, -1.0, 1.0);
    let labels = (0..n).map(|_| Some(rng.random_range(0..classes))).collect();
    AttributedGraph::new(n, edges, features, labels, classes).unwrap()
}

/// `|a - b| <= rtol * max(|a|, |b|) + atol`.
pub fn close(a: f64, b: f64, rtol: f64, atol: f64) -> bool {
    (a - b).abs() <= rtol * a.abs().max(b.abs()) + atol
}

pub type OpFn = dyn for<'t> Fn(&[Tensor<'t>]) -> spargcp::Result<Tensor<'t>>;

/// Compares tape gradients of `sum(f(inputs) * R)` for a random `R` against
/// central differences. Returns the worst relative error seen.
pub fn check_gradient(rng: &mut ChaRng, inputs: &[Matrix], f: &OpFn, rtol: f64) -> Result<f64, String> {
    let out_shape = {
        let tape = Tape::new();
        let ts: Vec<Tensor> = inputs.iter().map(|m| tape.constant(m.clone())).collect();
        f(&ts).map_err(|e| e.to_string())?.shape()
    };
    let weights = random_matrix(rng, out_shape.0, out_shape.1, -1.0, 1.0);
    let eval = |xs: &[Matrix]| -> f64 {
        let tape = Tape::new();
        let ts: Vec<Tensor> = xs.iter().map(|m| tape.constant(m.clone())).collect();
        let out = f(&ts).unwrap().value();
        out.data().iter().zip(weights.data()).map(|(a, b)| a * b).sum()
    };

    let tape = Tape::new();
    let params: Vec<Tensor> = inputs.iter().map(|m| tape.param(m.clone())).collect();
    let out = f(&params).map_err(|e| e.to_string())?;
    let loss = out.mul(tape.constant(weights.clone())).unwrap().sum().unwrap();
    let grads = loss.backward().map_err(|e| e.to_string())?;

    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for (i, p) in params.iter().enumerate() {
        let analytic = grads.wrt(*p);
        for j in 0..inputs[i].len() {
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[j] += h;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[j] -= h;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let a = analytic.data()[j];
            if !close(a, numeric, rtol, 1e-8) {
                return Err(format!("input {i} entry {j}: tape {a} vs numeric {numeric}"));
            }
            let scale = a.abs().max(numeric.abs());
            if scale > 1e-8 {
                worst = worst.max((a - numeric).abs() / scale);
            }
        }
    }
    Ok(worst)
}

/// Distinct undirected neighbours, ignoring self-loops.
pub fn undirected_neighbours(graph: &AttributedGraph) -> Vec<Vec<usize>> {
    let n = graph.num_nodes();
    let mut adj = vec![vec![false; n]; n];
    for (u, v) in graph.edges() {
        if u != v {
            adj[u][v] = true;
            adj[v][u] = true;
        }
    }
    adj.iter()
        .map(|row| (0..n).filter(|&v| row[v]).collect())
        .collect()
}

/// Removes any node of degree below `k` until none is left.
pub fn naive_kcore(graph: &AttributedGraph, k: usize) -> Vec<bool> {
    let adj = undirected_neighbours(graph);
    let mut alive = vec![true; graph.num_nodes()];
    loop {
        let victim = (0..alive.len())
            .find(|&u| alive[u] && adj[u].iter().filter(|&&v| alive[v]).count() < k);
        match victim {
            Some(u) => alive[u] = false,
            None => return alive,
        }
    }
}

/// APS score by enumeration: mass of every label that precedes `label`
/// in (probability desc, id asc) order, plus its own.
pub fn brute_aps(row: &[f64], label: usize) -> f64 {
    let py = row[label];
    row.iter()
        .enumerate()
        .filter(|&(j, &p)| p > py || (p == py && j <= label))
        .map(|(_, p)| p)
        .sum()
}

/// `ceil(num/den)` on integers.
pub fn ceil_div(num: usize, den: usize) -> usize {
    num.div_ceil(den)
}

/// The `j`-th smallest score with `j = ceil((1 - alpha)(n + 1))` clipped to
/// `[1, n]`, alpha given as `percent / 100`.
pub fn brute_threshold(scores: &[f64], alpha_percent: usize) -> f64 {
    let n = scores.len();
    let j = ceil_div((100 - alpha_percent) * (n + 1), 100).clamp(1, n);
    // smallest t with at least j scores <= t
    let mut candidates = scores.to_vec();
    candidates.sort_by(f64::total_cmp);
    *candidates
        .iter()
        .find(|&&t| scores.iter().filter(|&&s| s <= t).count() >= j)
        .unwrap()
}

fn param<'a>(model: &'a GnnModel, name: &str) -> &'a Matrix {
    let (_, m) = model
        .params()
        .entries()
        .iter()
        .find(|(n, _)| n == name)
        .unwrap_or_else(|| panic!("no parameter {name}"));
    m
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

fn elu(x: f64) -> f64 {
    if x > 0.0 { x } else { x.exp_m1() }
}

fn dense_matmul(a: &[Vec<f64>], w: &Matrix) -> Vec<Vec<f64>> {
    a.iter()
        .map(|row| {
            (0..w.cols())
                .map(|c| row.iter().enumerate().map(|(k, x)| x * w.get(k, c)).sum())
                .collect()
        })
        .collect()
}

/// Layer-by-layer forward over the whole graph with explicit loops.
/// Messages flow along `u -> v` plus a self-loop at every node; degrees
/// count non-self edges.
pub fn dense_forward(model: &GnnModel, graph: &AttributedGraph) -> Vec<Vec<f64>> {
    let n = graph.num_nodes();
    let spec = model.spec();
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut out_deg = vec![0usize; n];
    for (u, v) in graph.edges() {
        if u != v {
            incoming[v].push(u);
            out_deg[u] += 1;
        }
    }
    let mut h: Vec<Vec<f64>> = (0..n).map(|u| graph.features().row(u).to_vec()).collect();
    for layer in 0..spec.num_layers {
        let last = layer + 1 == spec.num_layers;
        let prefix = format!("layer{layer}");
        let bias = param(model, &format!("{prefix}.bias"));
        let next: Vec<Vec<f64>> = match spec.backbone {
            Backbone::Gcn => {
                let z = dense_matmul(&h, param(model, &format!("{prefix}.weight")));
                (0..n)
                    .map(|v| {
                        let din = incoming[v].len() as f64;
                        (0..z[0].len())
                            .map(|c| {
                                let mut acc = z[v][c] / ((out_deg[v] as f64 + 1.0) * (din + 1.0)).sqrt();
                                for &u in &incoming[v] {
                                    acc += z[u][c] / ((out_deg[u] as f64 + 1.0) * (din + 1.0)).sqrt();
                                }
                                let x = acc + bias.get(0, c);
                                if last { x } else { relu(x) }
                            })
                            .collect()
                    })
                    .collect()
            }
            Backbone::Gat => {
                let out_dim = bias.cols();
                let mut sum = vec![vec![0.0; out_dim]; n];
                for head in 0..spec.heads {
                    let hp = format!("{prefix}.head{head}");
                    let z = dense_matmul(&h, param(model, &format!("{hp}.weight")));
                    let a_src = param(model, &format!("{hp}.attn_src"));
                    let a_dst = param(model, &format!("{hp}.attn_dst"));
                    let dot = |x: &[f64], a: &Matrix| -> f64 { x.iter().enumerate().map(|(k, v)| v * a.get(k, 0)).sum() };
                    for v in 0..n {
                        let mut nbrs = incoming[v].clone();
                        nbrs.push(v);
                        let logits: Vec<f64> = nbrs
                            .iter()
                            .map(|&u| {
                                let e = dot(&z[u], a_src) + dot(&z[v], a_dst);
                                if e > 0.0 { e } else { 0.2 * e }
                            })
                            .collect();
                        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        let w: Vec<f64> = logits.iter().map(|e| (e - m).exp()).collect();
                        let total: f64 = w.iter().sum();
                        for (&u, wi) in nbrs.iter().zip(&w) {
                            for c in 0..out_dim {
                                sum[v][c] += wi / total * z[u][c];
                            }
                        }
                    }
                }
                sum.iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .map(|(c, s)| {
                                let x = s / spec.heads as f64 + bias.get(0, c);
                                if last { x } else { elu(x) }
                            })
                            .collect()
                    })
                    .collect()
            }
        };
        h = next;
    }
    h
}
