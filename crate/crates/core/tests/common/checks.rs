//! Oracle-suite criteria. Each check returns a one-line summary on success
//! and the first violation on failure.

use std::collections::BTreeMap;

use ndarray::{Array2, Zip};
use rand::Rng;

use rwnsgcn::dpp::{build_dpp_kernel, build_negative_graph, label_propagation, min_eigenvalue, KDppSampler};
use rwnsgcn::graph::sym_normalized_operator;
use rwnsgcn::metrics::mad;
use rwnsgcn::model::{
    backward, forward, init_params, loss_cross_entropy, predict, train, Features, ModelParams,
    Supervision, TrainConfig,
};
use rwnsgcn::walk::{bfs_layers, pagerank_scores, rwr_scores, PageRankMode, RandomWalk};
use rwnsgcn::{Graph, LinearOperator};

use super::*;

pub type Check = std::result::Result<String, String>;

pub fn bfs_matches_floyd_warshall(graphs: usize) -> Check {
    let mut r = rng(11);
    let mut sources = 0;
    for gi in 0..graphs {
        let n = r.random_range(2..=50);
        let p = r.random_range(0.02..0.3);
        let g = random_graph(n, p, &mut r);
        let dist = floyd_warshall(&g);
        let l_max = n - 1;
        for (s, row) in dist.iter().enumerate() {
            let layers = bfs_layers(&g, s, l_max).map_err(|e| e.to_string())?;
            for l in 1..=l_max {
                let expect: Vec<usize> = (0..n).filter(|&v| row[v] == l).collect();
                if layers.layer(l) != expect.as_slice() {
                    return Err(format!("graph {gi}, source {s}, layer {l}: {:?} != {expect:?}", layers.layer(l)));
                }
            }
            let reached: Vec<usize> = (0..n).filter(|&v| v != s && dist[s][v] != usize::MAX).collect();
            let mut all = layers.all_reached.clone();
            all.sort_unstable();
            if all != reached {
                return Err(format!("graph {gi}, source {s}: all_reached differs"));
            }
            sources += 1;
        }
    }
    Ok(format!("{graphs} graphs, {sources} sources, exact"))
}

pub fn rwr_matches_dense_solve(graphs: usize) -> Check {
    let mut r = rng(12);
    let (mut worst, mut worst_sum) = (0.0f64, 0.0f64);
    for gi in 0..graphs {
        let n = r.random_range(2..=50);
        let g = connected_graph(n, r.random_range(0.0..0.2), &mut r);
        let alpha = r.random_range(0.0..0.95);
        let walk = RandomWalk::new(&g);
        let s = r.random_range(0..n);
        let it = rwr_scores(&walk, s, alpha, 1e-8, 1000).map_err(|e| e.to_string())?;
        let err = max_abs_diff(&it.values, &rwr_dense(&g, s, alpha));
        let pr = pagerank_scores(&walk, alpha, PageRankMode::Converged, 1e-8, 1000)
            .map_err(|e| e.to_string())?;
        let pr_err = max_abs_diff(&pr.values, &pagerank_dense(&g, alpha));
        let sums = [it.values.iter().sum::<f64>(), pr.values.iter().sum::<f64>()];
        let sum_err = sums.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
        if err >= 1e-6 || pr_err >= 1e-6 || sum_err > 1e-6 {
            return Err(format!(
                "graph {gi} (n={n}, alpha={alpha:.3}): rwr err {err:.2e}, pagerank err {pr_err:.2e}, sum err {sum_err:.2e}"
            ));
        }
        if it.values.iter().chain(&pr.values).any(|&x| x < 0.0) {
            return Err(format!("graph {gi}: negative score"));
        }
        worst = worst.max(err.max(pr_err));
        worst_sum = worst_sum.max(sum_err);
    }
    Ok(format!("{graphs} graphs, max err {worst:.1e}, max |sum - 1| {worst_sum:.1e}"))
}

/// Random nonnegative bag-of-words rows; about one row in ten is empty.
pub fn random_features(n: usize, f: usize, r: &mut ChaCha8Rng) -> Array2<f64> {
    let mut x = Array2::zeros((n, f));
    for i in 0..n {
        if r.random::<f64>() < 0.1 {
            continue;
        }
        for j in 0..f {
            if r.random::<f64>() < 0.3 {
                x[[i, j]] = r.random_range(0.0..1.0);
            }
        }
    }
    x
}

pub fn dpp_kernels_psd(sets: usize) -> Check {
    let mut r = rng(13);
    let mut worst = f64::INFINITY;
    let mut done = 0;
    while done < sets {
        let n = r.random_range(4..=30);
        let g = random_graph(n, r.random_range(0.05..0.4), &mut r);
        let x = random_features(n, r.random_range(2..=12), &mut r);
        let comm = label_propagation(&g, x.view(), r.random(), 100).map_err(|e| e.to_string())?;
        for _ in 0..10 {
            let size = r.random_range(1..=8.min(n - 1));
            let mut nodes: Vec<usize> = (0..n).collect();
            nodes.shuffle(&mut r);
            let source = nodes[0];
            let cands = &nodes[1..=size];
            let k = build_dpp_kernel(source, cands, x.view(), &comm, 1e-8).map_err(|e| e.to_string())?;
            let asym = (&k.l - &k.l.t()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let pre = min_eigenvalue(&k.unjittered());
            let post = min_eigenvalue(&k.l);
            if asym > 1e-10 || pre < -1e-8 || post < k.jitter / 2.0 {
                return Err(format!(
                    "set {done}: asymmetry {asym:.1e}, min eig {pre:.2e} before jitter, {post:.2e} after"
                ));
            }
            worst = worst.min(pre);
            done += 1;
            if done == sets {
                break;
            }
        }
    }
    Ok(format!("{sets} candidate sets, smallest eigenvalue {worst:.1e}"))
}

/// `(n, k)` shapes exercised by the sampler frequency test.
pub const KDPP_SHAPES: [(usize, usize); 6] = [(3, 1), (4, 2), (5, 2), (5, 3), (6, 1), (6, 3)];

pub fn kdpp_frequencies_match_enumeration(draws: usize) -> Check {
    let mut r = rng(14);
    let mut worst = 0.0f64;
    let mut compared = 0;
    for (ci, &(n, k)) in KDPP_SHAPES.iter().enumerate() {
        let l = random_psd(n, n, &mut r);
        let exact = kdpp_enumeration(&l, k);
        let sampler = KDppSampler::new(&l);
        let mut counts: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        for _ in 0..draws {
            let s = sampler.sample(k, &mut r).map_err(|e| e.to_string())?;
            *counts.entry(s).or_default() += 1;
        }
        for (subset, p) in &exact {
            if *p < 0.05 {
                continue;
            }
            let freq = counts.get(subset).copied().unwrap_or(0) as f64 / draws as f64;
            let rel = (freq - p).abs() / p;
            if rel > 0.02 {
                return Err(format!("case {ci} (n={n}, k={k}), subset {subset:?}: p {p:.4}, observed {freq:.4}"));
            }
            worst = worst.max(rel);
            compared += 1;
        }
        let total: usize = counts.values().sum();
        if counts.keys().any(|s| s.len() != k) || total != draws {
            return Err(format!("case {ci}: wrong subset sizes"));
        }
    }
    Ok(format!(
        "{} kernels, {draws} draws each, {compared} subsets with mass >= 0.05, max rel err {:.2}%",
        KDPP_SHAPES.len(),
        100.0 * worst
    ))
}

pub struct ModelInstance {
    pub graph: Graph,
    pub x: Features,
    pub pos: LinearOperator,
    pub neg: LinearOperator,
    pub labels: Vec<usize>,
    pub mask: Vec<usize>,
    pub params: ModelParams,
}

/// N ≤ 8 nodes, dims ≤ [6, 5, 4], a random negative graph and λ in (0, 1).
pub fn model_instance(seed: u64) -> ModelInstance {
    let mut r = rng(1000 + seed);
    let n = r.random_range(4..=8);
    let dims = [r.random_range(2..=6), r.random_range(2..=5), r.random_range(2..=4)];
    let graph = connected_graph(n, 0.3, &mut r);
    let mut negs: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for s in 0..n {
        let others: Vec<usize> = (0..n).filter(|&j| j != s && !graph.has_edge(s, j)).collect();
        if !others.is_empty() && r.random::<f64>() < 0.7 {
            negs.entry(s).or_default().push(others[r.random_range(0..others.len())]);
        }
    }
    let ng = build_negative_graph(&negs, n).unwrap();
    let x = Array2::from_shape_simple_fn((n, dims[0]), || r.random_range(-1.0..1.0));
    let labels = (0..n).map(|_| r.random_range(0..dims[2])).collect();
    let mut mask: Vec<usize> = (0..n).filter(|_| r.random::<f64>() < 0.7).collect();
    if mask.is_empty() {
        mask.push(0);
    }
    let params = init_params(&dims, r.random_range(0.05..1.0), 0.0, r.random()).unwrap();
    ModelInstance {
        pos: sym_normalized_operator(&graph, true),
        neg: sym_normalized_operator(&ng.graph, false),
        graph,
        x: Features::Dense(x),
        labels,
        mask,
        params,
    }
}

fn loss(inst: &ModelInstance, p: &ModelParams) -> f64 {
    let t = forward(p, &inst.x, &inst.pos, &inst.neg, None).unwrap();
    loss_cross_entropy(&t.logits, &inst.labels, &inst.mask).unwrap()
}

fn gates(inst: &ModelInstance, p: &ModelParams) -> Vec<bool> {
    let t = forward(p, &inst.x, &inst.pos, &inst.neg, None).unwrap();
    let mut out = Vec::new();
    for (pp, pn) in t.pre_pos.iter().zip(&t.pre_neg) {
        out.extend(pp.iter().map(|&v| v > 0.0));
        if let Some(pn) = pn {
            out.extend(pn.iter().map(|&v| v > 0.0));
        }
    }
    out
}

/// Central differences with h = 1e-4. Coordinates whose ±h step flips a
/// ReLU gate are skipped: the loss is not differentiable across the kink.
pub fn gradients_match_finite_differences(instances: u64) -> Check {
    let h = 1e-4;
    let (mut worst, mut checked, mut skipped) = (0.0f64, 0usize, 0usize);
    for seed in 0..instances {
        let inst = model_instance(seed);
        let p = &inst.params;
        let t = forward(p, &inst.x, &inst.pos, &inst.neg, None).map_err(|e| e.to_string())?;
        let g = backward(&t, p, &inst.x, &inst.pos, &inst.neg, &inst.labels, &inst.mask)
            .map_err(|e| e.to_string())?;
        let base = gates(&inst, p);
        for branch in 0..2 {
            // the classifier's negative weights never enter the forward pass
            let layers = if branch == 0 { p.num_layers() } else { p.num_layers() - 1 };
            for l in 0..layers {
                let analytic = if branch == 0 { &g.weights[l] } else { &g.weights_dpp[l] };
                for idx in ndarray::indices(analytic.dim()) {
                    let shift = |d: f64| {
                        let mut q = p.clone();
                        let w = if branch == 0 { &mut q.weights[l] } else { &mut q.weights_dpp[l] };
                        w[idx] += d;
                        q
                    };
                    let (up, down) = (shift(h), shift(-h));
                    if gates(&inst, &up) != base || gates(&inst, &down) != base {
                        skipped += 1;
                        continue;
                    }
                    let numeric = (loss(&inst, &up) - loss(&inst, &down)) / (2.0 * h);
                    let a = analytic[idx];
                    let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3);
                    if rel >= 1e-4 {
                        return Err(format!(
                            "instance {seed}, branch {branch}, layer {l}, {idx:?}: analytic {a:.6e}, numeric {numeric:.6e}"
                        ));
                    }
                    worst = worst.max(rel);
                    checked += 1;
                }
            }
        }
    }
    if skipped * 20 > checked + skipped {
        return Err(format!("{skipped} of {} coordinates sat on a ReLU kink", checked + skipped));
    }
    Ok(format!(
        "{instances} instances, {checked} coordinates, {skipped} kink-skipped, max rel err {worst:.1e}"
    ))
}

/// Trains the λ = 0 model for a few epochs (with a non-empty negative graph
/// present) and compares its logits with a dense plain-GCN forward.
pub fn zero_lambda_matches_plain_gcn(instances: u64) -> Check {
    let mut worst = 0.0f64;
    for seed in 0..instances {
        let inst = model_instance(seed);
        let n = inst.graph.num_nodes();
        let cfg = TrainConfig {
            epochs: 5,
            hidden: 4,
            layers: 3,
            lambda: 0.0,
            dropout: 0.5,
            ..TrainConfig::default()
        };
        let sup = Supervision {
            labels: &inst.labels,
            train: &inst.mask,
            val: &inst.mask,
        };
        let (model, _) = train(&inst.x, &inst.pos, &inst.neg, sup, &cfg, seed).map_err(|e| e.to_string())?;
        let pred = predict(&model, &inst.x, &inst.pos, &inst.neg).map_err(|e| e.to_string())?;
        let Features::Dense(x) = &inst.x else { unreachable!() };
        let oracle = plain_gcn_dense(&inst.graph, x, &model.params.weights);
        if oracle.shape() != pred.logits.dim() {
            return Err(format!("instance {seed}: shape mismatch"));
        }
        for i in 0..n {
            for c in 0..pred.logits.ncols() {
                worst = worst.max((pred.logits[[i, c]] - oracle[(i, c)]).abs());
            }
        }
        if worst > 1e-9 {
            return Err(format!("instance {seed}: logits differ by {worst:.2e}"));
        }
    }
    Ok(format!("{instances} trained instances, max |diff| {worst:.1e}"))
}

pub fn random_embeddings(r: &mut ChaCha8Rng) -> Array2<f64> {
    let n = r.random_range(2..=40);
    let d = r.random_range(2..=16);
    let mut e = Array2::from_shape_simple_fn((n, d), || r.random_range(-1.0..1.0));
    // a zero row and a duplicated row exercise the skip rules
    if n > 3 {
        e.row_mut(0).fill(0.0);
        let copy = e.row(1).to_owned();
        e.row_mut(2).assign(&copy);
    }
    e
}

pub fn mad_matches_brute_force(sets: usize) -> Check {
    let mut r = rng(15);
    let mut worst = 0.0f64;
    for si in 0..sets {
        let e = random_embeddings(&mut r);
        let rows: Vec<Vec<f64>> = e.outer_iter().map(|row| row.to_vec()).collect();
        let oracle = mad_brute_force(&rows).ok_or("oracle: too few usable rows")?;
        let got = mad(e.view()).map_err(|err| err.to_string())?.value;
        let diff = (got - oracle).abs();
        if diff > 1e-9 {
            return Err(format!("set {si}: {got} vs oracle {oracle}"));
        }
        worst = worst.max(diff);
    }
    Ok(format!("{sets} embedding sets, max |diff| {worst:.1e}"))
}

/// Elementwise `max |a - b|`.
pub fn max_abs_diff2(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let mut m = 0.0f64;
    Zip::from(a).and(b).for_each(|x, y| m = m.max((x - y).abs()));
    m
}
