//! Citation-network ingestion, splits, and subgraph extraction.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::graph::{Edge, Graph};
use crate::seed;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graph: Graph,
    /// Dense `N × F` feature matrix.
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    pub node_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(
        graph: Graph,
        features: Array2<f64>,
        labels: Vec<usize>,
        class_names: Vec<String>,
        node_names: Option<Vec<String>>,
    ) -> Result<Dataset> {
        let n = graph.num_nodes();
        if features.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: features.nrows(),
            });
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: labels.len(),
            });
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::InvalidParameter(format!(
                "label {bad} outside 0..{}",
                class_names.len()
            )));
        }
        if let Some(names) = &node_names {
            if names.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: names.len(),
                });
            }
        }
        Ok(Dataset {
            graph,
            features,
            labels,
            class_names,
            node_names,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn sparse_features(&self) -> CsrMatrix {
        CsrMatrix::from_dense(self.features.view())
    }

    /// Same nodes, features, and labels over a different graph.
    pub fn with_graph(&self, graph: Graph) -> Result<Dataset> {
        Dataset::new(
            graph,
            self.features.clone(),
            self.labels.clone(),
            self.class_names.clone(),
            self.node_names.clone(),
        )
    }
}

/// Scales every nonzero row to sum to one.
pub fn row_normalize(features: &mut Array2<f64>) {
    for mut row in features.axis_iter_mut(Axis(0)) {
        let s: f64 = row.sum();
        if s != 0.0 {
            row.mapv_inplace(|x| x / s);
        }
    }
}

/// Counters gathered while reading `.content` / `.cites` text.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub raw_edges: usize,
    pub unknown_edges_dropped: usize,
    pub self_loops_dropped: usize,
    pub duplicate_edges: usize,
    pub undirected_edges: usize,
}

/// Parses a `.content` table (`id f_1 .. f_F label`) and a `.cites` edge list
/// (`cited citing`). Node ids are indexed by first appearance, class labels
/// by lexicographic order.
pub fn load_content_cites(
    content_text: &str,
    cites_text: &str,
    normalize_rows: bool,
) -> Result<(Dataset, LoadReport)> {
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut node_names = Vec::new();
    let mut raw_labels = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut arity: Option<usize> = None;

    for (line_no, line) in content_text.lines().enumerate() {
        let line_no = line_no + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 2 {
            return Err(Error::Parse {
                line: line_no,
                message: "content row needs an id and a label".into(),
            });
        }
        let f = fields.len() - 2;
        match arity {
            None => arity = Some(f),
            Some(expected) if expected != f => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected {expected} feature columns, found {f}"),
                });
            }
            Some(_) => {}
        }
        let id = fields[0];
        if ids.contains_key(id) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("duplicate node id `{id}`"),
            });
        }
        for tok in &fields[1..=f] {
            let x: f64 = tok.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("bad feature value `{tok}`"),
            })?;
            values.push(x);
        }
        ids.insert(id.to_string(), node_names.len());
        node_names.push(id.to_string());
        raw_labels.push(fields[f + 1].to_string());
    }

    let n = node_names.len();
    let f = arity.unwrap_or(0);
    let mut features =
        Array2::from_shape_vec((n, f), values).expect("row arity checked while parsing");
    if normalize_rows {
        row_normalize(&mut features);
    }

    let class_names: Vec<String> = raw_labels
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let class_index: HashMap<&str, usize> = class_names
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let labels = raw_labels.iter().map(|l| class_index[l.as_str()]).collect();

    let mut report = LoadReport::default();
    let mut edge_list = Vec::new();
    for (line_no, line) in cites_text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                line: line_no + 1,
                message: "cites row must hold exactly two ids".into(),
            });
        }
        report.raw_edges += 1;
        match (ids.get(fields[0]), ids.get(fields[1])) {
            (Some(&a), Some(&b)) => edge_list.push((a, b, 1.0)),
            _ => report.unknown_edges_dropped += 1,
        }
    }
    let graph = Graph::build(n, &edge_list)?;
    report.self_loops_dropped = graph.dropped_self_loops();
    report.duplicate_edges = graph.duplicate_edges();
    report.undirected_edges = graph.num_edges();
    if report.unknown_edges_dropped > 0 {
        log::warn!(
            "dropped {} citation(s) referencing unknown ids",
            report.unknown_edges_dropped
        );
    }

    let ds = Dataset::new(graph, features, labels, class_names, Some(node_names))?;
    Ok((ds, report))
}

pub fn load_content_cites_files(
    content: &Path,
    cites: &Path,
    normalize_rows: bool,
) -> Result<(Dataset, LoadReport)> {
    let content_text = std::fs::read_to_string(content).map_err(|e| Error::io(content, e))?;
    let cites_text = std::fs::read_to_string(cites).map_err(|e| Error::io(cites, e))?;
    load_content_cites(&content_text, &cites_text, normalize_rows)
}

#[derive(Serialize)]
struct BundleOut<'a> {
    num_nodes: usize,
    edges: Vec<(usize, usize, f64)>,
    features: Vec<Vec<f64>>,
    labels: &'a [usize],
    class_names: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    node_names: Option<&'a Vec<String>>,
}

pub fn bundle_to_string(ds: &Dataset) -> Result<String> {
    let bundle = BundleOut {
        num_nodes: ds.num_nodes(),
        edges: ds
            .graph
            .edges()
            .into_iter()
            .map(|e| (e.u, e.v, e.weight))
            .collect(),
        features: ds.features.outer_iter().map(|r| r.to_vec()).collect(),
        labels: &ds.labels,
        class_names: &ds.class_names,
        node_names: ds.node_names.as_ref(),
    };
    Ok(serde_json::to_string(&bundle)?)
}

fn field<T: serde::de::DeserializeOwned>(obj: &mut serde_json::Map<String, Value>, name: &str) -> Result<T> {
    let value = obj.remove(name).ok_or_else(|| Error::Schema {
        field: name.into(),
        message: "missing".into(),
    })?;
    serde_json::from_value(value).map_err(|e| Error::Schema {
        field: name.into(),
        message: e.to_string(),
    })
}

pub fn bundle_from_str(text: &str) -> Result<Dataset> {
    let value: Value = serde_json::from_str(text)?;
    let Value::Object(mut obj) = value else {
        return Err(Error::Schema {
            field: "<root>".into(),
            message: "expected an object".into(),
        });
    };
    let num_nodes: usize = field(&mut obj, "num_nodes")?;
    let edges: Vec<(usize, usize, f64)> = field(&mut obj, "edges")?;
    let rows: Vec<Vec<f64>> = field(&mut obj, "features")?;
    let labels: Vec<usize> = field(&mut obj, "labels")?;
    let class_names: Vec<String> = field(&mut obj, "class_names")?;
    let node_names: Option<Vec<String>> = match obj.remove("node_names") {
        None | Some(Value::Null) => None,
        Some(v) => Some(serde_json::from_value(v).map_err(|e| Error::Schema {
            field: "node_names".into(),
            message: e.to_string(),
        })?),
    };

    let schema = |field: &str, message: String| Error::Schema {
        field: field.into(),
        message,
    };
    let graph = Graph::build(num_nodes, &edges).map_err(|e| schema("edges", e.to_string()))?;
    if rows.len() != num_nodes {
        return Err(schema(
            "features",
            format!("{} rows for {num_nodes} nodes", rows.len()),
        ));
    }
    let f = rows.first().map_or(0, Vec::len);
    if let Some(i) = rows.iter().position(|r| r.len() != f) {
        return Err(schema("features", format!("row {i} has inconsistent arity")));
    }
    let features = Array2::from_shape_vec((num_nodes, f), rows.concat())
        .map_err(|e| schema("features", e.to_string()))?;
    if labels.len() != num_nodes {
        return Err(schema(
            "labels",
            format!("{} labels for {num_nodes} nodes", labels.len()),
        ));
    }
    if let Some(bad) = labels.iter().find(|&&l| l >= class_names.len()) {
        return Err(schema("labels", format!("label {bad} has no class name")));
    }
    Dataset::new(graph, features, labels, class_names, node_names)
}

pub fn save_json_bundle(ds: &Dataset, path: &Path) -> Result<()> {
    std::fs::write(path, bundle_to_string(ds)?).map_err(|e| Error::io(path, e))
}

pub fn load_json_bundle(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    bundle_from_str(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub per_class: usize,
    pub num_val: usize,
    pub num_test: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            per_class: 20,
            num_val: 500,
            num_test: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitMasks {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Planetoid-style split: `per_class` training nodes from every class, then
/// validation and test nodes, all drawn from one seeded permutation.
pub fn planetoid_split(ds: &Dataset, cfg: &SplitConfig, seed: u64) -> Result<SplitMasks> {
    let n = ds.num_nodes();
    let mut counts = vec![0usize; ds.class_count()];
    for &l in &ds.labels {
        counts[l] += 1;
    }
    for (c, &count) in counts.iter().enumerate() {
        if count < cfg.per_class {
            return Err(Error::InsufficientClass {
                class: ds.class_names[c].clone(),
                available: count,
                required: cfg.per_class,
            });
        }
    }
    let remaining = n - cfg.per_class * ds.class_count();
    if remaining < cfg.num_val + cfg.num_test {
        return Err(Error::InvalidParameter(format!(
            "{remaining} nodes left after training split, {} + {} requested",
            cfg.num_val, cfg.num_test
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::stream(seed, "split", 0));

    let mut taken = vec![0usize; ds.class_count()];
    let mut train = Vec::new();
    let mut rest = Vec::new();
    for &u in &order {
        let c = ds.labels[u];
        if taken[c] < cfg.per_class {
            taken[c] += 1;
            train.push(u);
        } else {
            rest.push(u);
        }
    }
    let mut val = rest[..cfg.num_val].to_vec();
    let mut test = rest[cfg.num_val..cfg.num_val + cfg.num_test].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(SplitMasks {
        train,
        val,
        test,
        seed,
    })
}

/// Induced subgraph on `nodes`, reindexed in ascending original-id order.
pub fn induced_subgraph(ds: &Dataset, nodes: &[usize]) -> Result<Dataset> {
    let mut keep: Vec<usize> = nodes.to_vec();
    keep.sort_unstable();
    keep.dedup();
    let mut index = vec![usize::MAX; ds.num_nodes()];
    for (new, &old) in keep.iter().enumerate() {
        index[old] = new;
    }
    let edges: Vec<Edge> = ds
        .graph
        .edges()
        .into_iter()
        .filter(|e| index[e.u] != usize::MAX && index[e.v] != usize::MAX)
        .map(|e| Edge {
            u: index[e.u],
            v: index[e.v],
            weight: e.weight,
        })
        .collect();
    let graph = Graph::from_edges(keep.len(), &edges)?;
    let features = ds.features.select(Axis(0), &keep);
    let labels = keep.iter().map(|&u| ds.labels[u]).collect();
    let node_names = ds
        .node_names
        .as_ref()
        .map(|names| keep.iter().map(|&u| names[u].clone()).collect());
    Dataset::new(graph, features, labels, ds.class_names.clone(), node_names)
}

/// Breadth-first node collection from `seed_node` until `target_size` nodes
/// are gathered, then the induced subgraph.
///
/// Frontiers are expanded in ascending id order; an exhausted component
/// restarts from the lowest-id unvisited node.
pub fn bfs_subgraph(ds: &Dataset, seed_node: usize, target_size: usize) -> Result<Dataset> {
    let n = ds.num_nodes();
    if target_size == 0 {
        return Err(Error::InvalidParameter("target_size must be positive".into()));
    }
    if target_size > n {
        return Err(Error::InvalidParameter(format!(
            "target_size {target_size} exceeds {n} nodes"
        )));
    }
    if seed_node >= n {
        return Err(Error::InvalidParameter(format!("seed node {seed_node} >= {n}")));
    }
    let g = &ds.graph;
    let mut visited = vec![false; n];
    let mut collected = Vec::with_capacity(target_size);
    let mut next_restart = 0;
    let mut frontier = vec![seed_node];
    visited[seed_node] = true;
    'outer: loop {
        for &u in &frontier {
            collected.push(u);
            if collected.len() == target_size {
                break 'outer;
            }
        }
        let mut next: Vec<usize> = Vec::new();
        for &u in &frontier {
            for &v in g.neighbors(u) {
                if !visited[v] {
                    visited[v] = true;
                    next.push(v);
                }
            }
        }
        if next.is_empty() {
            while visited[next_restart] {
                next_restart += 1;
            }
            visited[next_restart] = true;
            next.push(next_restart);
        }
        next.sort_unstable();
        frontier = next;
    }
    induced_subgraph(ds, &collected)
}

/// Highest unweighted degree, ties to the smallest id.
pub fn highest_degree_node(g: &Graph) -> Option<usize> {
    (0..g.num_nodes()).max_by_key(|&u| (g.unweighted_degree(u), std::cmp::Reverse(u)))
}

/// Nodes whose unweighted degree lies in `lo..=hi`, ascending.
pub fn degree_filtered_nodes(g: &Graph, lo: usize, hi: usize) -> Vec<usize> {
    (0..g.num_nodes())
        .filter(|&u| (lo..=hi).contains(&g.unweighted_degree(u)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn toy(n: usize, edges: &[(usize, usize)], labels: Vec<usize>, classes: usize) -> Dataset {
        let list: Vec<_> = edges.iter().map(|&(u, v)| (u, v, 1.0)).collect();
        let graph = Graph::build(n, &list).unwrap();
        let features = Array2::from_shape_fn((n, 3), |(i, j)| ((i + j) % 3) as f64);
        let class_names = (0..classes).map(|c| format!("c{c}")).collect();
        Dataset::new(graph, features, labels, class_names, None).unwrap()
    }

    #[test]
    fn toy_content_cites() {
        let content = "p1\t1\t0\t1\tbeta\np2\t0\t1\t1\talpha\n";
        let cites = "p1\tp2\n";
        let (ds, report) = load_content_cites(content, cites, false).unwrap();
        assert_eq!(ds.num_nodes(), 2);
        assert_eq!(ds.graph.num_edges(), 1);
        assert_eq!(ds.class_names, vec!["alpha", "beta"]);
        assert_eq!(ds.labels, vec![1, 0]);
        assert_eq!(ds.features, array![[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]]);
        assert_eq!(report.raw_edges, 1);
        assert_eq!(report.unknown_edges_dropped, 0);
    }

    #[test]
    fn unknown_ids_are_dropped_and_counted() {
        let content = "a 1 x\nb 1 y\nc 0 x\n";
        let cites = "a b\nb zz\nqq a\nc a\n";
        let (ds, report) = load_content_cites(content, cites, true).unwrap();
        assert_eq!(report.raw_edges, 4);
        assert_eq!(report.unknown_edges_dropped, 2);
        assert_eq!(ds.graph.num_edges(), 2);
        // zero row stays zero under normalization
        assert_eq!(ds.features.row(2).sum(), 0.0);
        assert_eq!(ds.features.row(0).sum(), 1.0);
    }

    #[test]
    fn inconsistent_arity_reports_row() {
        let content = "a 1 0 x\nb 1 y\n";
        match load_content_cites(content, "", false) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bundle_round_trip_preserves_weights() {
        let graph = Graph::build(3, &[(0, 1, 0.1 + 0.2), (1, 2, 1e-300)]).unwrap();
        let features = array![[0.1, 1.0 / 3.0], [2.0, 0.0], [f64::EPSILON, 7.0]];
        let ds = Dataset::new(
            graph,
            features,
            vec![0, 1, 0],
            vec!["a".into(), "b".into()],
            None,
        )
        .unwrap();
        let back = bundle_from_str(&bundle_to_string(&ds).unwrap()).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.graph.weight(0, 1).unwrap().to_bits(), (0.1f64 + 0.2).to_bits());
    }

    #[test]
    fn bundle_missing_labels_names_field() {
        let text = r#"{"num_nodes":1,"edges":[],"features":[[1.0]],"class_names":["a"]}"#;
        match bundle_from_str(text) {
            Err(Error::Schema { field, .. }) => assert_eq!(field, "labels"),
            other => panic!("unexpected {other:?}"),
        }
        let text = r#"{"num_nodes":1,"edges":[[0,3,1.0]],"features":[[1.0]],"labels":[0],"class_names":["a"]}"#;
        match bundle_from_str(text) {
            Err(Error::Schema { field, .. }) => assert_eq!(field, "edges"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn split_toy_three_classes() {
        let ds = toy(9, &[], vec![0, 1, 2, 0, 1, 2, 0, 1, 2], 3);
        let cfg = SplitConfig {
            per_class: 1,
            num_val: 3,
            num_test: 3,
        };
        let masks = planetoid_split(&ds, &cfg, 5).unwrap();
        assert_eq!(masks.train.len(), 3);
        let classes: BTreeSet<_> = masks.train.iter().map(|&u| ds.labels[u]).collect();
        assert_eq!(classes.len(), 3);
        let all: BTreeSet<_> = masks.train.iter().chain(&masks.val).chain(&masks.test).collect();
        assert_eq!(all.len(), 9);
        assert_eq!(masks, planetoid_split(&ds, &cfg, 5).unwrap());
    }

    #[test]
    fn split_rejects_small_class() {
        let ds = toy(4, &[], vec![0, 0, 0, 1], 2);
        let cfg = SplitConfig {
            per_class: 2,
            num_val: 0,
            num_test: 0,
        };
        match planetoid_split(&ds, &cfg, 0) {
            Err(Error::InsufficientClass { class, .. }) => assert_eq!(class, "c1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bfs_subgraph_examples() {
        let path = toy(4, &[(0, 1), (1, 2), (2, 3)], vec![0; 4], 1);
        let sub = bfs_subgraph(&path, 0, 2).unwrap();
        assert_eq!(sub.num_nodes(), 2);
        assert_eq!(sub.graph.num_edges(), 1);

        let two = toy(
            6,
            &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)],
            vec![0; 6],
            1,
        );
        let sub = bfs_subgraph(&two, 0, 4).unwrap();
        assert_eq!(sub.num_nodes(), 4);
        assert_eq!(sub.graph.num_edges(), 3);
        assert_eq!(sub.features, two.features.select(Axis(0), &[0, 1, 2, 3]));

        assert!(bfs_subgraph(&two, 0, 0).is_err());
    }

    #[test]
    fn degree_filter_examples() {
        let star = toy(4, &[(0, 1), (0, 2), (0, 3)], vec![0; 4], 1);
        assert_eq!(degree_filtered_nodes(&star.graph, 3, 6), vec![0]);
        let path = toy(4, &[(0, 1), (1, 2), (2, 3)], vec![0; 4], 1);
        assert!(degree_filtered_nodes(&path.graph, 3, 6).is_empty());
        assert_eq!(highest_degree_node(&star.graph), Some(0));
    }

    proptest! {
        #[test]
        fn bfs_subgraph_is_induced(
            n in 2usize..30,
            raw in proptest::collection::vec((0usize..30, 0usize..30), 0..60),
            seed_pick in 0usize..30,
            size_pick in 1usize..30,
        ) {
            let edges: Vec<_> = raw.into_iter().filter(|&(u, v)| u < n && v < n).collect();
            let ds = toy(n, &edges, vec![0; n], 1);
            let seed_node = seed_pick % n;
            let size = 1 + size_pick % n;
            let sub = bfs_subgraph(&ds, seed_node, size).unwrap();
            prop_assert_eq!(sub.num_nodes(), size);

            // recover the selected original ids through the feature rows' positions
            let names: Vec<String> = (0..n).map(|u| u.to_string()).collect();
            let named = Dataset { node_names: Some(names), ..ds.clone() };
            let sub = bfs_subgraph(&named, seed_node, size).unwrap();
            let picked: Vec<usize> = sub.node_names.unwrap().iter().map(|s| s.parse().unwrap()).collect();
            let expected: BTreeSet<(usize, usize)> = ds.graph.edges().iter()
                .filter(|e| picked.contains(&e.u) && picked.contains(&e.v))
                .map(|e| (e.u, e.v)).collect();
            let got: BTreeSet<(usize, usize)> = sub.graph.edges().iter()
                .map(|e| (picked[e.u], picked[e.v])).collect();
            prop_assert_eq!(got, expected);
            prop_assert!(picked.contains(&seed_node));
        }

        #[test]
        fn splits_are_disjoint(seed in any::<u64>()) {
            let labels: Vec<usize> = (0..40).map(|i| i % 4).collect();
            let ds = toy(40, &[], labels, 4);
            let cfg = SplitConfig { per_class: 3, num_val: 10, num_test: 15 };
            let m = planetoid_split(&ds, &cfg, seed).unwrap();
            let all: BTreeSet<_> = m.train.iter().chain(&m.val).chain(&m.test).collect();
            prop_assert_eq!(all.len(), 12 + 10 + 15);
        }
    }
}
