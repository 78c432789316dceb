//! Hop-distance layering of non-neighbors and random-walk scoring.
//!
//! Every node `v_i` gets layers `N_l(v_i)` of nodes at exact BFS distance
//! `l`. Nodes in the chosen layers are ranked by
//! `s = β·rwr_i + (1 − β)·pagerank`, and the top scorers per layer become
//! the negative-sample candidates of `v_i`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{transition_operator, Graph};
use crate::sparse::CsrMatrix;

/// Nodes grouped by hop distance from `source`, up to `l_max`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayeredNeighborhood {
    pub source: usize,
    pub l_max: usize,
    /// `layers[l - 1]` holds the nodes at distance exactly `l`, ascending.
    pub layers: Vec<Vec<usize>>,
    /// Shortest-path pool: the two outermost layers directly, the
    /// neighborhoods of every node in the inner layers.
    pub pool: Vec<usize>,
    /// Union of all layers.
    pub all_reached: Vec<usize>,
}

impl LayeredNeighborhood {
    /// Nodes at distance `l` (empty outside `1..=l_max`).
    pub fn layer(&self, l: usize) -> &[usize] {
        if l == 0 || l > self.l_max {
            return &[];
        }
        &self.layers[l - 1]
    }
}

pub fn bfs_layers(g: &Graph, source: usize, l_max: usize) -> Result<LayeredNeighborhood> {
    if source >= g.num_nodes() {
        return Err(Error::InvalidParameter(format!(
            "source {source} outside 0..{}",
            g.num_nodes()
        )));
    }
    if l_max == 0 {
        return Err(Error::InvalidParameter("l_max must be at least 1".into()));
    }
    let mut seen = vec![false; g.num_nodes()];
    seen[source] = true;
    let mut layers = Vec::with_capacity(l_max);
    let mut frontier = vec![source];
    for _ in 0..l_max {
        let mut next = Vec::new();
        for &u in &frontier {
            for &v in g.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    next.push(v);
                }
            }
        }
        next.sort_unstable();
        layers.push(next.clone());
        frontier = next;
    }

    let mut pool = BTreeSet::new();
    for (i, layer) in layers.iter().enumerate() {
        let len = i + 1;
        if len == l_max || len + 1 == l_max {
            pool.extend(layer.iter().copied());
        } else {
            for &j in layer {
                pool.extend(g.neighbors(j).iter().copied());
            }
        }
    }
    let mut all_reached: Vec<usize> = layers.iter().flatten().copied().collect();
    all_reached.sort_unstable();

    Ok(LayeredNeighborhood {
        source,
        l_max,
        layers,
        pool: pool.into_iter().collect(),
        all_reached,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreKind {
    Rwr,
    Pgr,
    Combined,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub values: Vec<f64>,
    pub kind: ScoreKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PageRankMode {
    /// Power iteration to the fixed point.
    #[default]
    Converged,
    /// Two damped propagation steps from the uniform vector.
    TwoStep,
}

/// Column-propagation form of the random-walk matrix, `Pᵀ`, plus the set of
/// dangling (zero-degree) nodes. Built once per graph and shared by every
/// score computation on it.
#[derive(Debug, Clone)]
pub struct RandomWalk {
    p_transpose: CsrMatrix,
    dangling: Vec<usize>,
}

impl RandomWalk {
    pub fn new(g: &Graph) -> RandomWalk {
        let p_transpose = transition_operator(g).matrix().transpose();
        let dangling = (0..g.num_nodes()).filter(|&u| g.degrees()[u] <= 0.0).collect();
        RandomWalk {
            p_transpose,
            dangling,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.p_transpose.rows()
    }

    fn dangling_mass(&self, r: &[f64]) -> f64 {
        self.dangling.iter().map(|&u| r[u]).sum()
    }

    /// `α Pᵀ r` into `out`, returning the mass that sat on dangling nodes.
    fn propagate(&self, alpha: f64, r: &[f64], out: &mut [f64]) -> f64 {
        self.p_transpose.mul_vec_into(r, out);
        for x in out.iter_mut() {
            *x *= alpha;
        }
        self.dangling_mass(r)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in [0, 1), got {alpha}"
        )));
    }
    Ok(())
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Random walk with restart to `source`:
/// `r = (1 − α)(I − αPᵀ)^{-1} e_source`, by fixed-point iteration.
///
/// Mass reaching a dangling node restarts at the source.
pub fn rwr_scores(
    walk: &RandomWalk,
    source: usize,
    alpha: f64,
    tol: f64,
    max_iter: usize,
) -> Result<ScoreVector> {
    check_alpha(alpha)?;
    let n = walk.num_nodes();
    if source >= n {
        return Err(Error::InvalidParameter(format!("source {source} outside 0..{n}")));
    }
    let mut r = vec![0.0; n];
    r[source] = 1.0;
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let dangling = walk.propagate(alpha, &r, &mut next);
        next[source] += alpha * dangling + (1.0 - alpha);
        residual = max_abs_diff(&r, &next);
        std::mem::swap(&mut r, &mut next);
        if residual < tol {
            return Ok(ScoreVector {
                values: r,
                kind: ScoreKind::Rwr,
            });
        }
    }
    Err(Error::NotConverged {
        what: "random walk with restart",
        iterations: max_iter,
        residual,
    })
}

/// Global PageRank with uniform teleport and uniform dangling redistribution.
pub fn pagerank_scores(
    walk: &RandomWalk,
    alpha: f64,
    mode: PageRankMode,
    tol: f64,
    max_iter: usize,
) -> Result<ScoreVector> {
    check_alpha(alpha)?;
    let n = walk.num_nodes();
    if n == 0 {
        return Ok(ScoreVector {
            values: Vec::new(),
            kind: ScoreKind::Pgr,
        });
    }
    let uniform = 1.0 / n as f64;
    let step = |r: &[f64], out: &mut [f64]| {
        let dangling = walk.propagate(alpha, r, out);
        let teleport = (alpha * dangling + (1.0 - alpha)) * uniform;
        for x in out.iter_mut() {
            *x += teleport;
        }
    };

    let mut r = vec![uniform; n];
    let mut next = vec![0.0; n];
    match mode {
        PageRankMode::TwoStep => {
            step(&r, &mut next);
            step(&next, &mut r);
            Ok(ScoreVector {
                values: r,
                kind: ScoreKind::Pgr,
            })
        }
        PageRankMode::Converged => {
            let mut residual = f64::INFINITY;
            for _ in 0..max_iter {
                step(&r, &mut next);
                residual = max_abs_diff(&r, &next);
                std::mem::swap(&mut r, &mut next);
                if residual < tol {
                    return Ok(ScoreVector {
                        values: r,
                        kind: ScoreKind::Pgr,
                    });
                }
            }
            Err(Error::NotConverged {
                what: "pagerank",
                iterations: max_iter,
                residual,
            })
        }
    }
}

/// `β·rwr + (1 − β)·pgr`, elementwise.
pub fn combined_scores(rwr: &ScoreVector, pgr: &ScoreVector, beta: f64) -> Result<ScoreVector> {
    if rwr.values.len() != pgr.values.len() {
        return Err(Error::DimensionMismatch {
            expected: rwr.values.len(),
            actual: pgr.values.len(),
        });
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidParameter(format!(
            "beta must lie in [0, 1], got {beta}"
        )));
    }
    let values = rwr
        .values
        .iter()
        .zip(&pgr.values)
        .map(|(r, p)| beta * r + (1.0 - beta) * p)
        .collect();
    Ok(ScoreVector {
        values,
        kind: ScoreKind::Combined,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub node: usize,
    pub score: f64,
    pub layer: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub source: usize,
    pub chosen: Vec<Candidate>,
    pub levels_used: Vec<usize>,
}

impl CandidateSet {
    pub fn nodes(&self) -> Vec<usize> {
        self.chosen.iter().map(|c| c.node).collect()
    }
}

/// Top `k_per_level` scorers of every requested layer; ties go to the
/// smaller node id. Empty layers contribute nothing.
pub fn select_candidates(
    layers: &LayeredNeighborhood,
    scores: &ScoreVector,
    levels: &[usize],
    k_per_level: usize,
) -> CandidateSet {
    let mut chosen = Vec::new();
    let mut levels_used = Vec::new();
    for &l in levels {
        let members = layers.layer(l);
        if members.is_empty() {
            continue;
        }
        let mut ranked: Vec<usize> = members.to_vec();
        ranked.sort_by(|&a, &b| {
            scores.values[b]
                .total_cmp(&scores.values[a])
                .then(a.cmp(&b))
        });
        for &node in ranked.iter().take(k_per_level) {
            chosen.push(Candidate {
                node,
                score: scores.values[node],
                layer: l,
            });
        }
        levels_used.push(l);
    }
    CandidateSet {
        source: layers.source,
        chosen,
        levels_used,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoringConfig {
    pub alpha: f64,
    pub beta: f64,
    pub l_max: usize,
    /// Layers eligible for candidates. When unset, `2..l_max`.
    pub levels: Option<Vec<usize>>,
    pub k_per_level: usize,
    pub pgr_mode: PageRankMode,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig {
            alpha: 0.85,
            beta: 0.5,
            l_max: 5,
            levels: None,
            k_per_level: 1,
            pgr_mode: PageRankMode::Converged,
            tol: 1e-8,
            max_iter: 1000,
        }
    }
}

impl ScoringConfig {
    /// Layers used for selection; defaults to `{2, …, l_max − 1}`.
    pub fn effective_levels(&self) -> Vec<usize> {
        match &self.levels {
            Some(levels) => levels.clone(),
            None => (2..self.l_max).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidParameter(format!(
                "beta must lie in [0, 1], got {}",
                self.beta
            )));
        }
        if self.l_max < 2 {
            return Err(Error::InvalidParameter(
                "l_max must be at least 2; layer 1 holds positive samples".into(),
            ));
        }
        let levels = self.effective_levels();
        if levels.is_empty() {
            return Err(Error::InvalidParameter("no candidate levels selected".into()));
        }
        if let Some(&bad) = levels.iter().find(|&&l| l < 2 || l > self.l_max) {
            return Err(Error::InvalidParameter(format!(
                "level {bad} outside 2..={}; level 1 is reserved for positive samples",
                self.l_max
            )));
        }
        if self.k_per_level == 0 {
            return Err(Error::InvalidParameter("k_per_level must be positive".into()));
        }
        Ok(())
    }
}

/// Candidate sets for every source. PageRank is computed once; the
/// per-source walks are independent.
pub fn score_all_sources(
    g: &Graph,
    sources: &[usize],
    cfg: &ScoringConfig,
) -> Result<BTreeMap<usize, CandidateSet>> {
    cfg.validate()?;
    let mut out = BTreeMap::new();
    if sources.is_empty() {
        return Ok(out);
    }
    let walk = RandomWalk::new(g);
    let levels = cfg.effective_levels();
    let pgr = pagerank_scores(&walk, cfg.alpha, cfg.pgr_mode, cfg.tol, cfg.max_iter)?;
    for &source in sources {
        let layers = bfs_layers(g, source, cfg.l_max)?;
        let scores = if cfg.beta == 0.0 {
            // the walk term vanishes; skip the per-source iteration
            ScoreVector {
                values: pgr.values.clone(),
                kind: ScoreKind::Combined,
            }
        } else {
            let rwr = rwr_scores(&walk, source, cfg.alpha, cfg.tol, cfg.max_iter)?;
            combined_scores(&rwr, &pgr, cfg.beta)?
        };
        out.insert(source, select_candidates(&layers, &scores, &levels, cfg.k_per_level));
    }
    Ok(out)
}

/// Serialized candidate cache: `{"config_hash": .., "candidates": {source: [[node, score, layer], ..]}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateCache {
    pub config_hash: String,
    pub candidates: BTreeMap<usize, Vec<(usize, f64, usize)>>,
}

impl CandidateCache {
    pub fn from_sets(config_hash: &str, sets: &BTreeMap<usize, CandidateSet>) -> Self {
        let candidates = sets
            .iter()
            .map(|(&s, set)| {
                (
                    s,
                    set.chosen.iter().map(|c| (c.node, c.score, c.layer)).collect(),
                )
            })
            .collect();
        CandidateCache {
            config_hash: config_hash.to_string(),
            candidates,
        }
    }

    pub fn into_sets(self) -> BTreeMap<usize, CandidateSet> {
        self.candidates
            .into_iter()
            .map(|(source, chosen)| {
                let chosen: Vec<Candidate> = chosen
                    .into_iter()
                    .map(|(node, score, layer)| Candidate { node, score, layer })
                    .collect();
                let mut levels_used: Vec<usize> = chosen.iter().map(|c| c.layer).collect();
                levels_used.dedup();
                (
                    source,
                    CandidateSet {
                        source,
                        chosen,
                        levels_used,
                    },
                )
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn graph(n: usize, edges: &[(usize, usize)]) -> Graph {
        let list: Vec<_> = edges.iter().map(|&(u, v)| (u, v, 1.0)).collect();
        Graph::build(n, &list).unwrap()
    }

    fn path(n: usize) -> Graph {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        graph(n, &edges)
    }

    fn triangle() -> Graph {
        graph(3, &[(0, 1), (1, 2), (0, 2)])
    }

    #[test]
    fn layers_on_path_and_triangle() {
        let nb = bfs_layers(&path(5), 0, 4).unwrap();
        assert_eq!(nb.layers, vec![vec![1], vec![2], vec![3], vec![4]]);
        assert_eq!(nb.all_reached, vec![1, 2, 3, 4]);

        let nb = bfs_layers(&triangle(), 0, 2).unwrap();
        assert_eq!(nb.layers, vec![vec![1, 2], vec![]]);
    }

    #[test]
    fn shortest_path_pool_trace() {
        let nb = bfs_layers(&path(6), 0, 5).unwrap();
        assert_eq!(nb.pool, vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(nb.layer(4), &[4]);
        assert_eq!(nb.layer(5), &[5]);
    }

    #[test]
    fn rwr_examples() {
        let g = path(4);
        let walk = RandomWalk::new(&g);
        let r = rwr_scores(&walk, 2, 0.0, 1e-12, 10).unwrap();
        assert_eq!(r.values, vec![0.0, 0.0, 1.0, 0.0]);

        let edge = RandomWalk::new(&path(2));
        let r = rwr_scores(&edge, 0, 0.5, 1e-12, 1000).unwrap();
        assert_abs_diff_eq!(r.values[0], 2.0 / 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(r.values[1], 1.0 / 3.0, epsilon = 1e-10);

        let tri = RandomWalk::new(&triangle());
        for alpha in [0.1, 0.5, 0.85, 0.99] {
            let r = rwr_scores(&tri, 0, alpha, 1e-12, 10_000).unwrap();
            assert_abs_diff_eq!(r.values[1], r.values[2], epsilon = 1e-12);
        }
    }

    #[test]
    fn rwr_reports_non_convergence() {
        let walk = RandomWalk::new(&path(10));
        match rwr_scores(&walk, 0, 0.99, 1e-14, 3) {
            Err(Error::NotConverged { iterations, residual, .. }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(rwr_scores(&walk, 0, 1.0, 1e-8, 10).is_err());
    }

    #[test]
    fn isolated_source_keeps_all_mass() {
        let g = graph(3, &[(0, 1)]);
        let r = rwr_scores(&RandomWalk::new(&g), 2, 0.85, 1e-10, 100).unwrap();
        assert_eq!(r.values, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn pagerank_examples() {
        let tri = RandomWalk::new(&triangle());
        for mode in [PageRankMode::Converged, PageRankMode::TwoStep] {
            let p = pagerank_scores(&tri, 0.85, mode, 1e-12, 1000).unwrap();
            for x in p.values {
                assert_abs_diff_eq!(x, 1.0 / 3.0, epsilon = 1e-12);
            }
        }
        let edge = RandomWalk::new(&path(2));
        for alpha in [0.0, 0.3, 0.85] {
            let p = pagerank_scores(&edge, alpha, PageRankMode::Converged, 1e-12, 1000).unwrap();
            assert_abs_diff_eq!(p.values[0], 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(p.values[1], 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn pagerank_path_center_dominates() {
        // dense oracle for path 0-1-2, α = 0.85: r = (1-α)/3 · (I - αPᵀ)^{-1} 1
        let p = pagerank_scores(&RandomWalk::new(&path(3)), 0.85, PageRankMode::Converged, 1e-13, 5000)
            .unwrap();
        let a = 0.85f64;
        // symmetric: r0 = r2 = x, r1 = y; x = a·y/2 + c, y = 2·a·x + c, c = (1-a)/3
        let c = (1.0 - a) / 3.0;
        let x = (c + a * c / 2.0) / (1.0 - a * a);
        let y = 2.0 * a * x + c;
        assert_abs_diff_eq!(p.values[0], x, epsilon = 1e-10);
        assert_abs_diff_eq!(p.values[1], y, epsilon = 1e-10);
        assert!(p.values[1] > p.values[0]);
    }

    #[test]
    fn pagerank_handles_dangling_nodes() {
        let g = graph(4, &[(0, 1), (1, 2)]);
        let walk = RandomWalk::new(&g);
        for mode in [PageRankMode::Converged, PageRankMode::TwoStep] {
            let p = pagerank_scores(&walk, 0.85, mode, 1e-12, 1000).unwrap();
            assert_abs_diff_eq!(p.values.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn combined_examples() {
        let rwr = ScoreVector {
            values: vec![0.6, 0.4],
            kind: ScoreKind::Rwr,
        };
        let pgr = ScoreVector {
            values: vec![0.2, 0.8],
            kind: ScoreKind::Pgr,
        };
        assert_eq!(combined_scores(&rwr, &pgr, 1.0).unwrap().values, rwr.values);
        assert_eq!(combined_scores(&rwr, &pgr, 0.0).unwrap().values, pgr.values);
        let mid = combined_scores(&rwr, &pgr, 0.5).unwrap().values;
        assert_abs_diff_eq!(mid[0], 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(mid[1], 0.6, epsilon = 1e-15);

        let short = ScoreVector {
            values: vec![1.0],
            kind: ScoreKind::Pgr,
        };
        assert!(matches!(
            combined_scores(&rwr, &short, 0.5),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn selection_examples() {
        let g = path(5);
        let nb = bfs_layers(&g, 0, 5).unwrap();
        let flat = ScoreVector {
            values: vec![0.2; 5],
            kind: ScoreKind::Combined,
        };
        let set = select_candidates(&nb, &flat, &[2, 3, 4], 1);
        assert_eq!(set.nodes(), vec![2, 3, 4]);
        assert_eq!(set.levels_used, vec![2, 3, 4]);

        let nb = bfs_layers(&triangle(), 0, 5).unwrap();
        assert!(select_candidates(&nb, &flat, &[2, 3, 4], 1).chosen.is_empty());

        // star of paths: 0 - {1, 2}, 1 - 3, 2 - 4; layer 2 = {3, 4}
        let g = graph(5, &[(0, 1), (0, 2), (1, 3), (2, 4)]);
        let nb = bfs_layers(&g, 0, 5).unwrap();
        let tied = ScoreVector {
            values: vec![0.0, 0.1, 0.1, 0.3, 0.3],
            kind: ScoreKind::Combined,
        };
        let set = select_candidates(&nb, &tied, &[2], 1);
        assert_eq!(set.nodes(), vec![3]);
        let set = select_candidates(&nb, &tied, &[2], 5);
        assert_eq!(set.nodes(), vec![3, 4]);
    }

    #[test]
    fn config_rejects_level_one() {
        let cfg = ScoringConfig {
            levels: Some(vec![1]),
            ..ScoringConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert_eq!(ScoringConfig::default().effective_levels(), vec![2, 3, 4]);
        let six = ScoringConfig {
            l_max: 6,
            ..ScoringConfig::default()
        };
        assert_eq!(six.effective_levels(), vec![2, 3, 4, 5]);
    }

    #[test]
    fn empty_sources_give_empty_map() {
        let map = score_all_sources(&path(5), &[], &ScoringConfig::default()).unwrap();
        assert!(map.is_empty());
    }

    #[test]
    fn cache_round_trip() {
        let g = path(7);
        let sets = score_all_sources(&g, &[0, 3, 6], &ScoringConfig::default()).unwrap();
        let cache = CandidateCache::from_sets("abc", &sets);
        let text = serde_json::to_string(&cache).unwrap();
        let back: CandidateCache = serde_json::from_str(&text).unwrap();
        assert_eq!(back.config_hash, "abc");
        assert_eq!(back.into_sets(), sets);
    }
}
