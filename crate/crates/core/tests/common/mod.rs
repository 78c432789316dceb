//! Random instance generators and independent dense / brute-force oracles
//! shared by the integration tests and the acceptance target.
#![allow(dead_code)]

use std::collections::{BTreeMap, VecDeque};

use nalgebra::DMatrix;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rwnsgcn::Graph;

pub mod checks;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Erdős–Rényi edges on `n` nodes.
pub fn random_edges(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<(usize, usize, f64)> {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push((u, v, 1.0));
            }
        }
    }
    edges
}

pub fn random_graph(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Graph {
    Graph::build(n, &random_edges(n, p, rng)).unwrap()
}

/// Random spanning tree plus Erdős–Rényi extras, so the graph is connected.
pub fn connected_graph(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Graph {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = random_edges(n, p, rng);
    for i in 1..n {
        let parent = order[rng.random_range(0..i)];
        edges.push((order[i], parent, 1.0));
    }
    Graph::build(n, &edges).unwrap()
}

pub fn dense_adjacency(g: &Graph) -> DMatrix<f64> {
    let n = g.num_nodes();
    let mut a = DMatrix::zeros(n, n);
    for e in g.edges() {
        a[(e.u, e.v)] = e.weight;
        a[(e.v, e.u)] = e.weight;
    }
    a
}

/// All-pairs hop distances; `usize::MAX` for unreachable pairs.
pub fn floyd_warshall(g: &Graph) -> Vec<Vec<usize>> {
    let n = g.num_nodes();
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for (u, row) in d.iter_mut().enumerate() {
        row[u] = 0;
    }
    for e in g.edges() {
        d[e.u][e.v] = 1;
        d[e.v][e.u] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    for row in d.iter_mut() {
        for x in row.iter_mut() {
            if *x >= inf {
                *x = usize::MAX;
            }
        }
    }
    d
}

/// Dense `D⁻¹A`; rows of isolated nodes stay zero.
pub fn dense_transition(g: &Graph) -> DMatrix<f64> {
    let mut p = dense_adjacency(g);
    for i in 0..p.nrows() {
        let s: f64 = p.row(i).sum();
        if s > 0.0 {
            p.row_mut(i).scale_mut(1.0 / s);
        }
    }
    p
}

/// `(1 − α)(I − αPᵀ)⁻¹ e_s` by LU solve. Assumes no isolated nodes.
pub fn rwr_dense(g: &Graph, source: usize, alpha: f64) -> Vec<f64> {
    let n = g.num_nodes();
    let m = DMatrix::identity(n, n) - dense_transition(g).transpose() * alpha;
    let mut b = nalgebra::DVector::zeros(n);
    b[source] = 1.0 - alpha;
    m.lu().solve(&b).unwrap().iter().copied().collect()
}

/// Stationary PageRank with uniform teleport. Assumes no isolated nodes.
pub fn pagerank_dense(g: &Graph, alpha: f64) -> Vec<f64> {
    let n = g.num_nodes();
    let m = DMatrix::identity(n, n) - dense_transition(g).transpose() * alpha;
    let b = nalgebra::DVector::from_element(n, (1.0 - alpha) / n as f64);
    m.lu().solve(&b).unwrap().iter().copied().collect()
}

pub fn determinant(m: &Array2<f64>, idx: &[usize]) -> f64 {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[[idx[i], idx[j]]]).determinant()
}

pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Random PSD matrix `B Bᵀ` with `B` of shape n × r.
pub fn random_psd(n: usize, r: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let b = Array2::from_shape_simple_fn((n, r), || rng.random_range(-1.0..1.0));
    b.dot(&b.t())
}

/// Exact k-DPP probabilities `det(L_S) / Σ det(L_T)` over all k-subsets.
pub fn kdpp_enumeration(l: &Array2<f64>, k: usize) -> Vec<(Vec<usize>, f64)> {
    let subsets = k_subsets(l.nrows(), k);
    let dets: Vec<f64> = subsets.iter().map(|s| determinant(l, s).max(0.0)).collect();
    let z: f64 = dets.iter().sum();
    subsets.into_iter().zip(dets).map(|(s, d)| (s, d / z)).collect()
}

/// Edge betweenness by enumerating every shortest path between every
/// unordered node pair.
pub fn betweenness_brute_force(g: &Graph) -> BTreeMap<(usize, usize), f64> {
    let n = g.num_nodes();
    let dist = floyd_warshall(g);
    let mut score: BTreeMap<(usize, usize), f64> =
        g.edges().iter().map(|e| ((e.u, e.v), 0.0)).collect();
    for s in 0..n {
        for t in s + 1..n {
            if dist[s][t] == usize::MAX {
                continue;
            }
            let mut paths: Vec<Vec<usize>> = Vec::new();
            let mut stack = vec![vec![s]];
            while let Some(path) = stack.pop() {
                let last = *path.last().unwrap();
                if last == t {
                    paths.push(path);
                    continue;
                }
                for &v in g.neighbors(last) {
                    if dist[s][v] == path.len() && dist[v][t] == dist[s][t] - path.len() {
                        let mut next = path.clone();
                        next.push(v);
                        stack.push(next);
                    }
                }
            }
            let share = 1.0 / paths.len() as f64;
            for path in &paths {
                for w in path.windows(2) {
                    let key = (w[0].min(w[1]), w[0].max(w[1]));
                    *score.get_mut(&key).unwrap() += share;
                }
            }
        }
    }
    score
}

/// Quotient-of-sums MAD over ordered pairs, ×100, coded from scratch.
pub fn mad_brute_force(rows: &[Vec<f64>]) -> Option<f64> {
    let norm = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut d_i = Vec::new();
    for (i, a) in rows.iter().enumerate() {
        let mut dists = Vec::new();
        for (j, b) in rows.iter().enumerate() {
            if i == j {
                continue;
            }
            let denom = norm(a) * norm(b);
            let cos = if denom == 0.0 {
                0.0
            } else {
                a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / denom
            };
            let d = 1.0 - cos;
            if d >= 1e-12 {
                dists.push(d);
            }
        }
        if !dists.is_empty() {
            let num: f64 = dists.iter().sum();
            let den: f64 = dists.iter().map(|d| 1.0 / d).sum();
            d_i.push(num / den);
        }
    }
    if d_i.len() < 2 {
        return None;
    }
    let num: f64 = d_i.iter().sum();
    let den: f64 = d_i.iter().map(|d| 1.0 / d).sum();
    Some(100.0 * num / den)
}

/// Plain GCN logits: ReLU hidden layers over `D̃^{-1/2}(A + I)D̃^{-1/2}`,
/// linear classifier on the last layer.
pub fn plain_gcn_dense(g: &Graph, x: &Array2<f64>, weights: &[Array2<f64>]) -> DMatrix<f64> {
    let n = g.num_nodes();
    let a = dense_adjacency(g) + DMatrix::identity(n, n);
    let d: Vec<f64> = (0..n).map(|i| a.row(i).sum()).collect();
    let a_hat = DMatrix::from_fn(n, n, |i, j| a[(i, j)] / (d[i] * d[j]).sqrt());
    let to_na = |m: &Array2<f64>| DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]]);
    let mut h = to_na(x);
    for (l, w) in weights.iter().enumerate() {
        h = &a_hat * &h * to_na(w);
        if l + 1 < weights.len() {
            h.apply(|v| *v = v.max(0.0));
        }
    }
    h
}

/// Hop distances from `source` by plain BFS.
pub fn bfs_distances(g: &Graph, source: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; g.num_nodes()];
    dist[source] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        for &v in g.neighbors(u) {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}


/// Citation data root: `RWNSGCN_DATA_DIR` or `<workspace>/data`.
pub fn data_dir() -> std::path::PathBuf {
    match std::env::var_os("RWNSGCN_DATA_DIR") {
        Some(d) => d.into(),
        None => std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"),
    }
}

/// `data_dir()/name` when its `.content` file exists.
pub fn dataset_dir(name: &str) -> Option<std::path::PathBuf> {
    let dir = data_dir().join(name);
    dir.join(format!("{name}.content")).exists().then_some(dir)
}
