//! Graph perturbations: removal of high-betweenness edges (topology attack)
//! and Gaussian noise on edge weights (weight attack).

use std::collections::{BTreeMap, VecDeque};

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, Graph};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    Ctbca,
    Twpa,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub kind: AttackKind,
    /// Fraction of edges removed, or noise standard deviation.
    pub intensity: f64,
    pub seed: u64,
}

impl AttackSpec {
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            AttackKind::Ctbca if !(0.0..=1.0).contains(&self.intensity) => Err(
                Error::InvalidParameter(format!("fraction {} outside [0, 1]", self.intensity)),
            ),
            AttackKind::Twpa if !self.intensity.is_finite() || self.intensity < 0.0 => Err(
                Error::InvalidParameter(format!("sigma {} must be finite and >= 0", self.intensity)),
            ),
            _ => Ok(()),
        }
    }

    pub fn apply(&self, g: &Graph) -> Result<Graph> {
        match self.kind {
            AttackKind::Ctbca => ctbca_remove(g, self.intensity, self.seed),
            AttackKind::Twpa => twpa_perturb(g, self.intensity, self.seed),
        }
    }
}

/// Edge betweenness over unweighted shortest paths, keyed by `(u, v)` with
/// `u < v`. Each unordered node pair contributes once.
pub fn edge_betweenness(g: &Graph) -> BTreeMap<(usize, usize), f64> {
    let n = g.num_nodes();
    let mut scores: BTreeMap<(usize, usize), f64> =
        g.edges().iter().map(|e| ((e.u, e.v), 0.0)).collect();

    let mut dist = vec![usize::MAX; n];
    let mut sigma = vec![0.0f64; n];
    let mut delta = vec![0.0f64; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    for s in 0..n {
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        sigma.iter_mut().for_each(|x| *x = 0.0);
        delta.iter_mut().for_each(|x| *x = 0.0);
        order.clear();
        dist[s] = 0;
        sigma[s] = 1.0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &w in g.neighbors(v) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                }
            }
        }
        for &w in order.iter().rev() {
            for &v in g.neighbors(w) {
                if dist[v] != usize::MAX && dist[v] + 1 == dist[w] {
                    let c = sigma[v] / sigma[w] * (1.0 + delta[w]);
                    *scores.get_mut(&(v.min(w), v.max(w))).expect("edge exists") += c;
                    delta[v] += c;
                }
            }
        }
    }
    // every unordered pair was counted from both endpoints
    scores.values_mut().for_each(|x| *x /= 2.0);
    scores
}

/// Scores closer than this (relative) are treated as tied.
const TIE_TOL: f64 = 1e-9;

/// Removes the `⌈fraction·|E|⌉` edges with the highest betweenness. Tied
/// scores are ordered lexicographically, then shuffled within each tie group
/// by the seeded stream.
pub fn ctbca_remove(g: &Graph, fraction: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidParameter(format!("fraction {fraction} outside [0, 1]")));
    }
    let m = g.num_edges();
    // the epsilon keeps products like (1/7)·7 from rounding up to 2
    let count = ((fraction * m as f64 - 1e-9).ceil().max(0.0) as usize).min(m);
    if count == 0 {
        return Ok(g.clone());
    }
    let mut ranked: Vec<((usize, usize), f64)> = edge_betweenness(g).into_iter().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut rng = seed::stream(seed, "ctbca", 0);
    let mut start = 0;
    while start < ranked.len() {
        let head = ranked[start].1;
        let tol = TIE_TOL * head.abs().max(1.0);
        let mut end = start + 1;
        while end < ranked.len() && (head - ranked[end].1).abs() <= tol {
            end += 1;
        }
        if end - start > 1 {
            ranked[start..end].shuffle(&mut rng);
        }
        if end >= count {
            break;
        }
        start = end;
    }

    let removed: std::collections::BTreeSet<(usize, usize)> =
        ranked[..count].iter().map(|&(key, _)| key).collect();
    let kept: Vec<Edge> = g
        .edges()
        .into_iter()
        .filter(|e| !removed.contains(&(e.u, e.v)))
        .collect();
    g.with_edges(&kept)
}

/// Adds `Normal(0, σ²)` noise to every edge weight, clamping at 0. Draws
/// follow lexicographic edge order; the edge set never changes.
pub fn twpa_perturb(g: &Graph, sigma: f64, seed: u64) -> Result<Graph> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::InvalidParameter(format!("sigma {sigma} must be finite and >= 0")));
    }
    if sigma == 0.0 {
        return Ok(g.clone());
    }
    let normal = Normal::new(0.0, sigma)
        .map_err(|e| Error::InvalidParameter(format!("noise distribution: {e}")))?;
    let mut rng = seed::stream(seed, "twpa", 0);
    let noisy: Vec<Edge> = g
        .edges()
        .into_iter()
        .map(|e| Edge {
            weight: (e.weight + normal.sample(&mut rng)).max(0.0),
            ..e
        })
        .collect();
    g.with_edges(&noisy)
}
