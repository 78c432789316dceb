//! Undirected weighted graphs and the propagation operators built from them.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Undirected graph with symmetric CSR adjacency and weighted degrees.
///
/// Edge weights are always stored, unit-valued or not, so weight
/// perturbations flow through the same operators as clean graphs.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    adjacency: CsrMatrix,
    degrees: Vec<f64>,
    dropped_self_loops: usize,
    duplicate_edges: usize,
}

/// Undirected edge with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

impl Graph {
    /// Builds a graph from `(u, v, weight)` triples.
    ///
    /// `(u, v)` and `(v, u)` name the same edge; repeated entries collapse
    /// with the last weight winning. Self-loops are dropped and counted.
    pub fn build(num_nodes: usize, edge_list: &[(usize, usize, f64)]) -> Result<Graph> {
        let mut unique: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let mut dropped_self_loops = 0;
        let mut duplicate_edges = 0;
        for (index, &(u, v, weight)) in edge_list.iter().enumerate() {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::NodeOutOfRange {
                    index,
                    u,
                    v,
                    num_nodes,
                });
            }
            if !weight.is_finite() || weight < 0.0 {
                return Err(Error::InvalidWeight { index, u, v, weight });
            }
            if u == v {
                dropped_self_loops += 1;
                continue;
            }
            let key = (u.min(v), u.max(v));
            if unique.insert(key, weight).is_some() {
                duplicate_edges += 1;
            }
        }
        if dropped_self_loops > 0 {
            log::warn!("dropped {dropped_self_loops} self-loop(s) while building graph");
        }

        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); num_nodes];
        for (&(u, v), &w) in &unique {
            rows[u].push((v, w));
            rows[v].push((u, w));
        }
        let degrees = rows.iter().map(|r| r.iter().map(|&(_, w)| w).sum()).collect();
        Ok(Graph {
            num_nodes,
            adjacency: CsrMatrix::from_rows(num_nodes, rows),
            degrees,
            dropped_self_loops,
            duplicate_edges,
        })
    }

    pub fn from_edges(num_nodes: usize, edges: &[Edge]) -> Result<Graph> {
        let list: Vec<_> = edges.iter().map(|e| (e.u, e.v, e.weight)).collect();
        Graph::build(num_nodes, &list)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.adjacency.nnz() / 2
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    /// Weighted degree (diagonal of D).
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// Number of incident edges, ignoring weights.
    pub fn unweighted_degree(&self, u: usize) -> usize {
        self.adjacency.row_ptr()[u + 1] - self.adjacency.row_ptr()[u]
    }

    pub fn dropped_self_loops(&self) -> usize {
        self.dropped_self_loops
    }

    pub fn duplicate_edges(&self) -> usize {
        self.duplicate_edges
    }

    /// Neighbors of `u` in ascending id order.
    pub fn neighbors(&self, u: usize) -> &[usize] {
        let span = self.adjacency.row_ptr()[u]..self.adjacency.row_ptr()[u + 1];
        &self.adjacency.col_idx()[span]
    }

    pub fn neighbor_weights(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.adjacency.row(u)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<f64> {
        self.has_edge(u, v).then(|| self.adjacency.get(u, v))
    }

    /// Undirected edges in lexicographic `(u, v)` order with `u < v`.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::with_capacity(self.num_edges());
        for u in 0..self.num_nodes {
            for (v, weight) in self.adjacency.row(u) {
                if u < v {
                    out.push(Edge { u, v, weight });
                }
            }
        }
        out
    }

    /// Graph with the same node set and the given edges; weights replaced.
    pub fn with_edges(&self, edges: &[Edge]) -> Result<Graph> {
        Graph::from_edges(self.num_nodes, edges)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    SymNormalized,
    RowStochastic,
}

/// Sparse linear operator over the node set.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOperator {
    kind: OperatorKind,
    self_loops: bool,
    matrix: CsrMatrix,
}

impl LinearOperator {
    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn self_loops(&self) -> bool {
        self.self_loops
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// Sparse mat-vec; each output accumulates in ascending column order.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.matrix.mul_vec(x)
    }

    pub fn apply_block(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.matrix.mul_dense(x)
    }

    /// `opᵀ · x`, used when propagating gradients backwards.
    pub fn apply_transpose_block(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.matrix.transpose_mul_dense(x)
    }

    pub fn transpose(&self) -> LinearOperator {
        LinearOperator {
            kind: self.kind,
            self_loops: self.self_loops,
            matrix: self.matrix.transpose(),
        }
    }
}

/// `D^{-1/2} A D^{-1/2}` over `A` or `A + I`; zero-degree rows stay zero.
pub fn sym_normalized_operator(g: &Graph, self_loops: bool) -> LinearOperator {
    let loop_w = if self_loops { 1.0 } else { 0.0 };
    let deg: Vec<f64> = g.degrees().iter().map(|d| d + loop_w).collect();
    let inv_sqrt: Vec<f64> = deg
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let rows = (0..g.num_nodes())
        .map(|u| {
            let mut row: Vec<(usize, f64)> = g
                .neighbor_weights(u)
                .map(|(v, w)| (v, w * (inv_sqrt[u.min(v)] * inv_sqrt[u.max(v)])))
                .collect();
            if self_loops {
                row.push((u, loop_w * inv_sqrt[u] * inv_sqrt[u]));
            }
            row
        })
        .collect();
    LinearOperator {
        kind: OperatorKind::SymNormalized,
        self_loops,
        matrix: CsrMatrix::from_rows(g.num_nodes(), rows),
    }
}

/// Row-stochastic random-walk matrix `P = D^{-1} A`.
pub fn transition_operator(g: &Graph) -> LinearOperator {
    let rows = (0..g.num_nodes())
        .map(|u| {
            let d = g.degrees()[u];
            if d > 0.0 {
                g.neighbor_weights(u).map(|(v, w)| (v, w / d)).collect()
            } else {
                g.neighbors(u).iter().map(|&v| (v, 0.0)).collect()
            }
        })
        .collect();
    LinearOperator {
        kind: OperatorKind::RowStochastic,
        self_loops: false,
        matrix: CsrMatrix::from_rows(g.num_nodes(), rows),
    }
}
