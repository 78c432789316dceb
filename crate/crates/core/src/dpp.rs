//! Diversity-aware negative sampling with k-DPPs.
//!
//! For every source the candidate nodes get a quality–diversity kernel
//!
//! ```text
//! L = (Q · S_com S_comᵀ · Qᵀ) ⊙ exp(S_node − 1)
//! ```
//!
//! where `S_node` is the cosine similarity of candidate features, `S_com`
//! that of their communities' mean features, and `Q = diag(q)` holds the
//! similarity of the source's features to each candidate's community. Both
//! Hadamard factors are PSD, so `L` is PSD.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::seed;
use crate::walk::CandidateSet;

#[derive(Debug, Clone, PartialEq)]
pub struct CommunityAssignment {
    /// Community id of every node, compacted to `0..count`.
    pub labels: Vec<usize>,
    /// Mean feature row of each community's members.
    pub community_features: Array2<f64>,
    pub iterations_run: usize,
}

impl CommunityAssignment {
    pub fn count(&self) -> usize {
        self.community_features.nrows()
    }
}

/// Asynchronous label propagation.
///
/// Nodes start in singleton communities and, in a freshly shuffled order
/// every sweep, adopt the most frequent label among their neighbors (ties to
/// the smallest label). Stops after a sweep without changes or `max_iter`
/// sweeps.
pub fn label_propagation(
    g: &Graph,
    features: ArrayView2<'_, f64>,
    seed: u64,
    max_iter: usize,
) -> Result<CommunityAssignment> {
    let n = g.num_nodes();
    if features.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: features.nrows(),
        });
    }
    let mut rng = seed::stream(seed, "label-propagation", 0);
    let mut labels: Vec<usize> = (0..n).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut scratch: Vec<usize> = Vec::new();
    let mut iterations_run = 0;
    for _ in 0..max_iter {
        iterations_run += 1;
        order.shuffle(&mut rng);
        let mut changed = false;
        for &u in &order {
            let neighbors = g.neighbors(u);
            if neighbors.is_empty() {
                continue;
            }
            scratch.clear();
            scratch.extend(neighbors.iter().map(|&v| labels[v]));
            scratch.sort_unstable();
            let mut best = (0usize, usize::MAX);
            let mut i = 0;
            while i < scratch.len() {
                let mut j = i;
                while j < scratch.len() && scratch[j] == scratch[i] {
                    j += 1;
                }
                // ascending scan keeps the smallest label on ties
                if j - i > best.0 {
                    best = (j - i, scratch[i]);
                }
                i = j;
            }
            if best.1 != labels[u] {
                labels[u] = best.1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    // compact in order of first appearance by node id
    let mut remap = vec![usize::MAX; n];
    let mut count = 0;
    for l in labels.iter_mut() {
        if remap[*l] == usize::MAX {
            remap[*l] = count;
            count += 1;
        }
        *l = remap[*l];
    }
    let mut sums = Array2::<f64>::zeros((count, features.ncols()));
    let mut sizes = vec![0usize; count];
    for (u, &c) in labels.iter().enumerate() {
        sums.row_mut(c).scaled_add(1.0, &features.row(u));
        sizes[c] += 1;
    }
    for (c, mut row) in sums.axis_iter_mut(Axis(0)).enumerate() {
        row.mapv_inplace(|x| x / sizes[c] as f64);
    }
    Ok(CommunityAssignment {
        labels,
        community_features: sums,
        iterations_run,
    })
}

/// Pairwise cosine similarity between the rows of `a` and `b`; a zero-norm
/// row has similarity 0 with everything.
pub fn cosine_rows(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.ncols(),
            actual: b.ncols(),
        });
    }
    let norms = |m: ArrayView2<'_, f64>| -> Array1<f64> {
        m.outer_iter().map(|r| r.dot(&r).sqrt()).collect()
    };
    let (na, nb) = (norms(a), norms(b));
    let mut out = a.dot(&b.t());
    for ((i, j), x) in out.indexed_iter_mut() {
        let d = na[i] * nb[j];
        *x = if d > 0.0 { *x / d } else { 0.0 };
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DppKernel {
    pub source: usize,
    /// Candidate node ids, in kernel row order.
    pub items: Vec<usize>,
    pub l: Array2<f64>,
    pub s_node: Array2<f64>,
    pub s_com: Array2<f64>,
    /// `diag(q)`.
    pub q: Array2<f64>,
    pub jitter: f64,
}

impl DppKernel {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Kernel without the diagonal jitter.
    pub fn unjittered(&self) -> Array2<f64> {
        let mut l = self.l.clone();
        l.diag_mut().mapv_inplace(|x| x - self.jitter);
        l
    }
}

pub fn build_dpp_kernel(
    source: usize,
    candidates: &[usize],
    features: ArrayView2<'_, f64>,
    communities: &CommunityAssignment,
    jitter: f64,
) -> Result<DppKernel> {
    if candidates.is_empty() {
        return Err(Error::InvalidParameter("kernel needs at least one candidate".into()));
    }
    let n_nodes = features.nrows();
    if let Some(&bad) = candidates.iter().chain([&source]).find(|&&u| u >= n_nodes) {
        return Err(Error::InvalidParameter(format!("node {bad} outside 0..{n_nodes}")));
    }
    let cand_x = features.select(Axis(0), candidates);
    let cand_comm: Vec<usize> = candidates.iter().map(|&c| communities.labels[c]).collect();
    let cand_f = communities.community_features.select(Axis(0), &cand_comm);

    let s_node = cosine_rows(cand_x.view(), cand_x.view())?;
    let s_com = cosine_rows(cand_f.view(), cand_f.view())?;
    let source_row = features.row(source).insert_axis(Axis(0));
    let q_vec = cosine_rows(source_row, cand_f.view())?.row(0).to_owned();
    let q = Array2::from_diag(&q_vec);

    let gram = s_com.dot(&s_com.t());
    let n = candidates.len();
    let mut l = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            l[[i, j]] = q_vec[i] * gram[[i, j]] * q_vec[j] * (s_node[[i, j]] - 1.0).exp();
        }
        l[[i, i]] += jitter;
    }
    Ok(DppKernel {
        source,
        items: candidates.to_vec(),
        l,
        s_node,
        s_com,
        q,
        jitter,
    })
}

fn to_nalgebra(m: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

pub fn min_eigenvalue(m: &Array2<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SymmetricEigen::new(to_nalgebra(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Rank below which eigenvalues count as zero.
const RANK_TOL: f64 = 1e-10;

/// Exact k-DPP sampler over one kernel; the eigendecomposition is computed
/// once and reused across draws.
#[derive(Debug, Clone)]
pub struct KDppSampler {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl KDppSampler {
    pub fn new(l: &Array2<f64>) -> KDppSampler {
        let eig = SymmetricEigen::new(to_nalgebra(l));
        KDppSampler {
            eigenvalues: eig.eigenvalues.iter().map(|&x| x.max(0.0)).collect(),
            eigenvectors: eig.eigenvectors,
        }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn numerical_rank(&self) -> usize {
        self.eigenvalues.iter().filter(|&&x| x > RANK_TOL).count()
    }

    /// `e[l][m]`: elementary symmetric polynomial of degree `l` in the first
    /// `m` eigenvalues.
    fn elementary_symmetric(&self, k: usize) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut e = vec![vec![0.0; n + 1]; k + 1];
        e[0].iter_mut().for_each(|x| *x = 1.0);
        for l in 1..=k {
            for m in 1..=n {
                e[l][m] = e[l][m - 1] + self.eigenvalues[m - 1] * e[l - 1][m - 1];
            }
        }
        e
    }

    /// Draws item indices (ascending). `k` above the numerical rank is
    /// clamped to it.
    pub fn sample<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<Vec<usize>> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be positive".into()));
        }
        let n = self.len();
        if k > n {
            return Err(Error::InvalidParameter(format!("k = {k} exceeds {n} items")));
        }
        let rank = self.numerical_rank();
        let k = if k > rank {
            log::warn!("k-DPP: k = {k} exceeds numerical rank {rank}; clamping");
            rank
        } else {
            k
        };
        if k == 0 {
            return Ok(Vec::new());
        }

        // choose k eigenvectors
        let e = self.elementary_symmetric(k);
        let mut selected = Vec::with_capacity(k);
        let mut remaining = k;
        for m in (1..=n).rev() {
            if remaining == 0 {
                break;
            }
            let p = self.eigenvalues[m - 1] * e[remaining - 1][m - 1] / e[remaining][m];
            if rng.random::<f64>() < p {
                selected.push(m - 1);
                remaining -= 1;
            }
        }

        // project and sample items from the elementary DPP
        let mut v: Vec<Vec<f64>> = selected
            .iter()
            .map(|&j| self.eigenvectors.column(j).iter().copied().collect())
            .collect();
        let mut items = Vec::with_capacity(k);
        while !v.is_empty() {
            let weights: Vec<f64> = (0..n)
                .map(|i| v.iter().map(|col| col[i] * col[i]).sum::<f64>())
                .collect();
            let total: f64 = weights.iter().sum();
            let mut target = rng.random::<f64>() * total;
            let mut item = n - 1;
            for (i, &w) in weights.iter().enumerate() {
                if target < w {
                    item = i;
                    break;
                }
                target -= w;
            }
            items.push(item);

            // eliminate the column with the largest component along `item`
            let pivot = (0..v.len())
                .max_by(|&a, &b| v[a][item].abs().total_cmp(&v[b][item].abs()))
                .expect("nonempty basis");
            let pivot_col = v.swap_remove(pivot);
            for col in v.iter_mut() {
                let ratio = col[item] / pivot_col[item];
                for (x, p) in col.iter_mut().zip(&pivot_col) {
                    *x -= ratio * p;
                }
            }
            // Gram–Schmidt
            for c in 0..v.len() {
                for prev in 0..c {
                    let dot: f64 = v[c].iter().zip(&v[prev]).map(|(a, b)| a * b).sum();
                    let (head, tail) = v.split_at_mut(c);
                    for (x, p) in tail[0].iter_mut().zip(&head[prev]) {
                        *x -= dot * p;
                    }
                }
                let norm = v[c].iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    v[c].iter_mut().for_each(|x| *x /= norm);
                }
            }
        }
        items.sort_unstable();
        Ok(items)
    }
}

/// Exact k-DPP draw from `kernel`, returned as node ids.
pub fn kdpp_sample_exact<R: Rng + ?Sized>(
    kernel: &DppKernel,
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let picked = KDppSampler::new(&kernel.l).sample(k, rng)?;
    Ok(picked.into_iter().map(|i| kernel.items[i]).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedySelection {
    /// Selected node ids, ascending.
    pub items: Vec<usize>,
    /// `(node, log-det gain)` in selection order.
    pub gains: Vec<(usize, f64)>,
}

fn log_det(m: &DMatrix<f64>) -> f64 {
    match m.clone().cholesky() {
        Some(ch) => 2.0 * ch.l().diagonal().iter().map(|x| x.ln()).sum::<f64>(),
        None => {
            let d = m.determinant();
            if d > 0.0 {
                d.ln()
            } else {
                f64::NEG_INFINITY
            }
        }
    }
}

/// Greedy MAP: repeatedly adds the item with the largest log-determinant
/// gain, ties to the smallest node id.
pub fn dpp_map_greedy(kernel: &DppKernel, k: usize) -> Result<GreedySelection> {
    let n = kernel.len();
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    if k > n {
        return Err(Error::InvalidParameter(format!("k = {k} exceeds {n} items")));
    }
    let full = to_nalgebra(&kernel.l);
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let mut gains = Vec::with_capacity(k);
    let mut current = 0.0;
    for _ in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..n {
            if chosen.contains(&i) {
                continue;
            }
            let mut idx = chosen.clone();
            idx.push(i);
            let sub = DMatrix::from_fn(idx.len(), idx.len(), |a, b| full[(idx[a], idx[b])]);
            let gain = log_det(&sub) - current;
            let better = match best {
                None => true,
                Some((b, g)) => {
                    gain > g || (gain == g && kernel.items[i] < kernel.items[b])
                }
            };
            if better {
                best = Some((i, gain));
            }
        }
        let (i, gain) = best.expect("k <= n leaves a candidate");
        chosen.push(i);
        current += gain;
        gains.push((kernel.items[i], gain));
    }
    let mut items: Vec<usize> = chosen.iter().map(|&i| kernel.items[i]).collect();
    items.sort_unstable();
    Ok(GreedySelection { items, gains })
}

/// Unit-weight symmetric graph linking every source to its sampled negatives.
#[derive(Debug, Clone, PartialEq)]
pub struct NegativeGraph {
    pub graph: Graph,
}

impl NegativeGraph {
    pub fn degrees(&self) -> &[f64] {
        self.graph.degrees()
    }

    /// Sampled pairs as `(min, max)`.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.graph.edges().into_iter().map(|e| (e.u, e.v)).collect()
    }
}

pub fn build_negative_graph(
    samples: &BTreeMap<usize, Vec<usize>>,
    num_nodes: usize,
) -> Result<NegativeGraph> {
    let list: Vec<(usize, usize, f64)> = samples
        .iter()
        .flat_map(|(&s, negs)| negs.iter().map(move |&j| (s, j, 1.0)))
        .collect();
    Ok(NegativeGraph {
        graph: Graph::build(num_nodes, &list)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    #[default]
    Exact,
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    /// Negatives per source, capped by the candidate count.
    pub k_dpp: usize,
    pub sampler: SamplerKind,
    pub jitter: f64,
    pub lpa_max_iter: usize,
    /// Redraw negatives every this many epochs; `None` samples once.
    pub resample_every: Option<usize>,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            k_dpp: 3,
            sampler: SamplerKind::Exact,
            jitter: 1e-8,
            lpa_max_iter: 100,
            resample_every: None,
        }
    }
}

/// Draws negatives for every source with candidates. Each source samples
/// from its own stream keyed by `(seed, source)`.
pub fn sample_negatives(
    features: ArrayView2<'_, f64>,
    candidates: &BTreeMap<usize, CandidateSet>,
    communities: &CommunityAssignment,
    cfg: &SamplingConfig,
    seed: u64,
) -> Result<BTreeMap<usize, Vec<usize>>> {
    if cfg.k_dpp == 0 {
        return Err(Error::InvalidParameter("k_dpp must be positive".into()));
    }
    let mut out = BTreeMap::new();
    for (&source, set) in candidates {
        let nodes = set.nodes();
        if nodes.is_empty() {
            continue;
        }
        let kernel = build_dpp_kernel(source, &nodes, features, communities, cfg.jitter)?;
        let k = cfg.k_dpp.min(kernel.len());
        let picked = match cfg.sampler {
            SamplerKind::Exact => {
                let mut rng = seed::stream(seed, "dpp", source as u64);
                kdpp_sample_exact(&kernel, k, &mut rng)?
            }
            SamplerKind::Greedy => dpp_map_greedy(&kernel, k)?.items,
        };
        out.insert(source, picked);
    }
    Ok(out)
}
