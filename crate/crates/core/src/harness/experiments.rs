use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Axis;
use serde::{Deserialize, Serialize};

use super::config::{AttackConfig, DatasetConfig, DatasetFormat, ExperimentConfig, SourceSelection};
use super::report::{Aggregate, PhaseTimes, RunRecord, RunReport};
use crate::attacks::AttackSpec;
use crate::datasets::{
    bfs_subgraph, degree_filtered_nodes, highest_degree_node, load_content_cites_files,
    load_json_bundle, planetoid_split, Dataset,
};
use crate::dpp::{build_negative_graph, label_propagation, sample_negatives, NegativeGraph};
use crate::error::{Error, Result};
use crate::graph::{sym_normalized_operator, Graph, LinearOperator};
use crate::metrics::{accuracy, mad};
use crate::model::{predict, train_with_resampling, Features, Supervision};
use crate::seed;
use crate::walk::{score_all_sources, CandidateSet};

/// `.content` / `.cites` paths for a dataset given as a directory
/// (`data/cora` → `data/cora/cora.*`) or as a file prefix.
pub fn content_cites_paths(path: &Path) -> (PathBuf, PathBuf) {
    let prefix = if path.is_dir() {
        let name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        path.join(name)
    } else {
        path.to_path_buf()
    };
    let with = |ext: &str| {
        let mut p = prefix.clone().into_os_string();
        p.push(ext);
        PathBuf::from(p)
    };
    (with(".content"), with(".cites"))
}

pub fn dataset_name(cfg: &DatasetConfig) -> String {
    let base = cfg
        .path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    match &cfg.subgraph {
        Some(s) => format!("{base}-sub{}", s.target_size),
        None => base,
    }
}

pub fn load_dataset(cfg: &DatasetConfig) -> Result<Dataset> {
    let ds = match cfg.format {
        DatasetFormat::ContentCites => {
            let (content, cites) = content_cites_paths(&cfg.path);
            let (ds, report) = load_content_cites_files(&content, &cites, cfg.normalize_features)?;
            log::info!(
                "loaded {}: {} nodes, {} edges ({} unknown-id rows dropped)",
                cfg.path.display(),
                ds.num_nodes(),
                ds.graph.num_edges(),
                report.unknown_edges_dropped
            );
            ds
        }
        DatasetFormat::JsonBundle => load_json_bundle(&cfg.path)?,
    };
    match &cfg.subgraph {
        None => Ok(ds),
        Some(sub) => {
            let start = match sub.seed_node {
                Some(s) => s,
                None => highest_degree_node(&ds.graph)
                    .ok_or_else(|| Error::InvalidParameter("empty graph".into()))?,
            };
            bfs_subgraph(&ds, start, sub.target_size)
        }
    }
}

pub fn select_sources(g: &Graph, sel: SourceSelection) -> Vec<usize> {
    match sel {
        SourceSelection::All => (0..g.num_nodes()).collect(),
        SourceSelection::DegreeRange { lo, hi } => degree_filtered_nodes(g, lo, hi),
    }
}

/// Dataset plus everything that does not change between runs.
pub struct Prepared<'a> {
    pub dataset: &'a Dataset,
    pub name: String,
    features: Features,
    sources: Vec<usize>,
}

impl<'a> Prepared<'a> {
    pub fn new(dataset: &'a Dataset, name: &str, sources: SourceSelection) -> Prepared<'a> {
        Prepared {
            dataset,
            name: name.to_string(),
            features: Features::Sparse(dataset.sparse_features()),
            sources: select_sources(&dataset.graph, sources),
        }
    }

    pub fn sources(&self) -> &[usize] {
        &self.sources
    }
}

fn negatives_for(
    prep: &Prepared<'_>,
    g: &Graph,
    candidates: &BTreeMap<usize, CandidateSet>,
    cfg: &ExperimentConfig,
    run_seed: u64,
) -> Result<NegativeGraph> {
    let x = prep.dataset.features.view();
    let comm = label_propagation(g, x, run_seed, cfg.sampling.lpa_max_iter)?;
    let samples = sample_negatives(x, candidates, &comm, &cfg.sampling, run_seed)?;
    build_negative_graph(&samples, g.num_nodes())
}

/// One complete run: attack, score, sample, train, evaluate.
/// `clean_candidates` is reused when the graph is not attacked.
pub fn run_once(
    prep: &Prepared<'_>,
    cfg: &ExperimentConfig,
    run: usize,
    clean_candidates: Option<&BTreeMap<usize, CandidateSet>>,
) -> Result<RunRecord> {
    let ds = prep.dataset;
    let run_seed = cfg.base_seed + run as u64;
    let mut times = PhaseTimes::default();

    let clock = Instant::now();
    let graph = match cfg.attack {
        Some(a) => AttackSpec {
            kind: a.kind,
            intensity: a.intensity,
            seed: run_seed,
        }
        .apply(&ds.graph)?,
        None => ds.graph.clone(),
    };
    times.attack = clock.elapsed().as_secs_f64();

    let masks = planetoid_split(ds, &cfg.split, run_seed)?;
    let use_negatives = cfg.model.lambda != 0.0;

    let clock = Instant::now();
    let owned;
    let candidates = if !use_negatives {
        None
    } else if let (None, Some(c)) = (cfg.attack, clean_candidates) {
        Some(c)
    } else {
        owned = score_all_sources(&graph, &prep.sources, &cfg.scoring)?;
        Some(&owned)
    };
    times.scoring = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let negatives = match candidates {
        Some(c) => negatives_for(prep, &graph, c, cfg, run_seed)?,
        None => build_negative_graph(&BTreeMap::new(), graph.num_nodes())?,
    };
    times.sampling = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let pos = sym_normalized_operator(&graph, true);
    let neg = sym_normalized_operator(&negatives.graph, false);
    let sup = Supervision {
        labels: &ds.labels,
        train: &masks.train,
        val: &masks.val,
    };
    let mut resampler = |epoch: usize| -> Result<LinearOperator> {
        let c = candidates.expect("resampling only with negatives");
        let s = seed::derive_seed(run_seed, "resample", epoch as u64);
        let ng = negatives_for(prep, &graph, c, cfg, s)?;
        Ok(sym_normalized_operator(&ng.graph, false))
    };
    let resample = match (cfg.sampling.resample_every, use_negatives) {
        (Some(every), true) if every > 0 => Some((every, &mut resampler as &mut _)),
        _ => None,
    };
    let (model, _history) =
        train_with_resampling(&prep.features, &pos, &neg, sup, &cfg.model, run_seed, resample)?;
    times.training = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let pred = predict(&model, &prep.features, &pos, &neg)?;
    let acc = 100.0 * accuracy(&pred.classes, &ds.labels, &masks.test)?;
    let test_embeddings = pred.embeddings.select(Axis(0), &masks.test);
    let mad_value = match mad(test_embeddings.view()) {
        Ok(r) => Some(r.value),
        Err(e) => {
            log::warn!("run {run}: MAD undefined ({e})");
            None
        }
    };
    times.evaluation = clock.elapsed().as_secs_f64();

    log::info!(
        "{} run {run} (seed {run_seed}): accuracy {acc:.2}, best epoch {}",
        prep.name,
        model.best_epoch
    );
    Ok(RunRecord {
        run,
        seed: run_seed,
        accuracy: acc,
        mad: mad_value,
        best_epoch: model.best_epoch,
        negative_edges: negatives.graph.num_edges(),
        times,
    })
}

/// All runs of one configuration.
pub fn run_experiment(
    prep: &Prepared<'_>,
    cfg: &ExperimentConfig,
    experiment: &str,
    variant: &str,
) -> Result<RunReport> {
    cfg.validate()?;
    let clean = if cfg.attack.is_none() && cfg.model.lambda != 0.0 {
        Some(score_all_sources(&prep.dataset.graph, &prep.sources, &cfg.scoring)?)
    } else {
        None
    };
    let runs = (0..cfg.runs)
        .map(|r| run_once(prep, cfg, r, clean.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunReport {
        experiment: experiment.to_string(),
        variant: variant.to_string(),
        dataset: prep.name.clone(),
        config_hash: cfg.hash()?,
        config: serde_json::to_value(cfg)?,
        aggregate: Aggregate::from_runs(&runs),
        runs,
    })
}

fn model_variant(cfg: &ExperimentConfig) -> &'static str {
    if cfg.model.lambda == 0.0 {
        "plain-gcn"
    } else {
        "rw-nsgcn"
    }
}

pub fn run_baseline(prep: &Prepared<'_>, cfg: &ExperimentConfig) -> Result<RunReport> {
    run_experiment(prep, cfg, "baseline", model_variant(cfg))
}

/// The configured model alongside the same pipeline with λ = 0.
pub fn run_baseline_pair(prep: &Prepared<'_>, cfg: &ExperimentConfig) -> Result<Vec<RunReport>> {
    let mut plain = cfg.clone();
    plain.model.lambda = 0.0;
    Ok(vec![
        run_experiment(prep, cfg, "baseline", "rw-nsgcn")?,
        run_experiment(prep, &plain, "baseline", "plain-gcn")?,
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedOutcome {
    pub attack: String,
    pub run: usize,
    pub seed: u64,
    pub rw_nsgcn_degradation: f64,
    pub plain_gcn_degradation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackComparison {
    pub reports: Vec<RunReport>,
    pub pairs: Vec<PairedOutcome>,
}

impl AttackComparison {
    /// Runs where the negative-sampling model lost no more accuracy than
    /// the plain GCN, out of all paired runs for `attack`.
    pub fn wins(&self, attack: &str) -> (usize, usize) {
        let rows: Vec<_> = self.pairs.iter().filter(|p| p.attack == attack).collect();
        let wins = rows
            .iter()
            .filter(|p| p.rw_nsgcn_degradation <= p.plain_gcn_degradation)
            .count();
        (wins, rows.len())
    }
}

/// Clean and attacked runs for both model variants under shared seeds;
/// models are retrained on every perturbed graph.
pub fn run_attack_comparison(
    prep: &Prepared<'_>,
    cfg: &ExperimentConfig,
    grid: &[AttackConfig],
) -> Result<AttackComparison> {
    let mut base = cfg.clone();
    base.attack = None;
    let mut plain = base.clone();
    plain.model.lambda = 0.0;

    let rw_clean = run_experiment(prep, &base, "attack", "rw-nsgcn/clean")?;
    let gcn_clean = run_experiment(prep, &plain, "attack", "plain-gcn/clean")?;
    let mut reports = vec![rw_clean.clone(), gcn_clean.clone()];
    let mut pairs = Vec::new();
    for attack in grid {
        let label = attack.label();
        let mut rw_cfg = base.clone();
        rw_cfg.attack = Some(*attack);
        let mut gcn_cfg = plain.clone();
        gcn_cfg.attack = Some(*attack);
        let rw = run_experiment(prep, &rw_cfg, "attack", &format!("rw-nsgcn/{label}"))?;
        let gcn = run_experiment(prep, &gcn_cfg, "attack", &format!("plain-gcn/{label}"))?;
        for r in 0..cfg.runs {
            pairs.push(PairedOutcome {
                attack: label.clone(),
                run: r,
                seed: rw.runs[r].seed,
                rw_nsgcn_degradation: rw_clean.runs[r].accuracy - rw.runs[r].accuracy,
                plain_gcn_degradation: gcn_clean.runs[r].accuracy - gcn.runs[r].accuracy,
            });
        }
        reports.push(rw);
        reports.push(gcn);
    }
    Ok(AttackComparison { reports, pairs })
}

/// RWR-only (β = 1), PageRank-only (β = 0) and combined (β = 0.5).
pub fn run_ablation(prep: &Prepared<'_>, cfg: &ExperimentConfig) -> Result<Vec<RunReport>> {
    [("rwr-only", 1.0), ("pgr-only", 0.0), ("combined", 0.5)]
        .into_iter()
        .map(|(name, beta)| {
            let mut c = cfg.clone();
            c.scoring.beta = beta;
            run_experiment(prep, &c, "ablation", name)
        })
        .collect()
}

pub fn run_l_sweep(
    prep: &Prepared<'_>,
    cfg: &ExperimentConfig,
    l_values: &[usize],
) -> Result<Vec<RunReport>> {
    l_values
        .iter()
        .map(|&l| {
            let mut c = cfg.clone();
            c.scoring.l_max = l;
            run_experiment(prep, &c, "l-sweep", &format!("l_max={l}"))
        })
        .collect()
}

pub fn run_lambda_sweep(
    prep: &Prepared<'_>,
    cfg: &ExperimentConfig,
    lambdas: &[f64],
) -> Result<Vec<RunReport>> {
    lambdas
        .iter()
        .map(|&lambda| {
            let mut c = cfg.clone();
            c.model.lambda = lambda;
            run_experiment(prep, &c, "lambda-sweep", &format!("lambda={lambda}"))
        })
        .collect()
}
