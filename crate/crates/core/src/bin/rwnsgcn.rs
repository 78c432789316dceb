use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rwnsgcn::attacks::AttackKind;
use rwnsgcn::datasets::save_json_bundle;
use rwnsgcn::dpp::SamplerKind;
use rwnsgcn::harness::report::{csv_string, load_reports};
use rwnsgcn::harness::{
    emit_report, load_dataset, run_ablation, run_attack_comparison, run_baseline,
    run_baseline_pair, run_l_sweep, run_lambda_sweep, AttackConfig, DatasetFormat,
    ExperimentConfig, Prepared, SourceSelection, SubgraphConfig,
};
use rwnsgcn::{Error, Result};

#[derive(Parser)]
#[command(name = "rwnsgcn", version, about = "Random-walk negative sampling GCN experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a dataset (optionally a BFS subgraph) into a JSON bundle.
    Prepare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        output: PathBuf,
    },
    /// Default pipeline over all runs.
    Baseline {
        #[command(flatten)]
        common: Common,
        /// Also run the λ = 0 model on the same seeds.
        #[arg(long)]
        with_plain: bool,
    },
    /// Clean vs attacked accuracy for both model variants.
    Attack {
        #[command(flatten)]
        common: Common,
        /// Comma-separated `kind:intensity` pairs, e.g. `ctbca:0.1,twpa:0.5`.
        #[arg(long, default_value = "ctbca:0.1,twpa:0.5")]
        attacks: String,
    },
    /// RWR-only, PageRank-only and combined scoring.
    Ablate {
        #[command(flatten)]
        common: Common,
    },
    /// One report per maximum walk distance.
    SweepL {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "5,6")]
        l_values: Vec<usize>,
    },
    /// One report per balance coefficient.
    SweepLambda {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "0.02,0.05,0.1,0.2,0.5")]
        lambdas: Vec<f64>,
    },
    /// Print a summary (or CSV) of a JSON report file.
    Report {
        input: PathBuf,
        #[arg(long)]
        csv: bool,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory, `.content`/`.cites` prefix, or JSON bundle.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_parser = ["content-cites", "json-bundle"])]
    format: Option<String>,
    /// Use a breadth-first subgraph of this many nodes.
    #[arg(long)]
    subgraph: Option<usize>,
    /// Restrict negative sampling to sources with degree in `lo,hi`.
    #[arg(long, value_delimiter = ',')]
    source_degree: Option<Vec<usize>>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    l_max: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
    #[arg(long)]
    k_per_level: Option<usize>,
    #[arg(long)]
    k_dpp: Option<usize>,
    #[arg(long, value_parser = ["exact", "greedy"])]
    sampler: Option<String>,
    #[arg(long)]
    resample_every: Option<usize>,
    /// Directory for CSV and JSON output.
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(p) = &self.data {
            cfg.dataset.path = p.clone();
            if p.extension().is_some_and(|e| e == "json") {
                cfg.dataset.format = DatasetFormat::JsonBundle;
            }
        }
        if let Some(f) = &self.format {
            cfg.dataset.format = match f.as_str() {
                "json-bundle" => DatasetFormat::JsonBundle,
                _ => DatasetFormat::ContentCites,
            };
        }
        if let Some(n) = self.subgraph {
            cfg.dataset.subgraph = Some(SubgraphConfig {
                target_size: n,
                ..SubgraphConfig::default()
            });
        }
        if let Some(d) = &self.source_degree {
            if d.len() != 2 {
                return Err(Error::InvalidParameter(
                    "--source-degree takes two values: lo,hi".into(),
                ));
            }
            cfg.sources = SourceSelection::DegreeRange { lo: d[0], hi: d[1] };
        }
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = &self.$flag { cfg.$($field).+ = v.clone(); })*
            };
        }
        set!(
            runs => runs,
            seed => base_seed,
            epochs => model.epochs,
            lr => model.lr,
            hidden => model.hidden,
            layers => model.layers,
            dropout => model.dropout,
            weight_decay => model.weight_decay,
            lambda => model.lambda,
            alpha => scoring.alpha,
            beta => scoring.beta,
            l_max => scoring.l_max,
            k_per_level => scoring.k_per_level,
            k_dpp => sampling.k_dpp,
        );
        if let Some(levels) = &self.levels {
            cfg.scoring.levels = Some(levels.clone());
        }
        if let Some(s) = &self.sampler {
            cfg.sampling.sampler = if s == "greedy" {
                SamplerKind::Greedy
            } else {
                SamplerKind::Exact
            };
        }
        if let Some(t) = self.resample_every {
            cfg.sampling.resample_every = Some(t);
        }
        if cfg.dataset.path.as_os_str().is_empty() {
            return Err(Error::InvalidParameter(
                "no dataset: pass --data or set dataset.path in --config".into(),
            ));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_attacks(spec: &str) -> Result<Vec<AttackConfig>> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            let (kind, value) = item.trim().split_once(':').ok_or_else(|| {
                Error::InvalidParameter(format!("attack `{item}` is not kind:intensity"))
            })?;
            let kind = match kind {
                "ctbca" => AttackKind::Ctbca,
                "twpa" => AttackKind::Twpa,
                other => return Err(Error::InvalidParameter(format!("unknown attack `{other}`"))),
            };
            let intensity = value
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad intensity `{value}`")))?;
            Ok(AttackConfig { kind, intensity })
        })
        .collect()
}

fn print_summary(reports: &[rwnsgcn::harness::RunReport]) {
    for r in reports {
        let a = &r.aggregate;
        let mad = a
            .mean_mad
            .map(|m| format!("  MAD {m:.2} ± {:.2}", a.std_mad.unwrap_or(0.0)))
            .unwrap_or_default();
        println!(
            "{:<10} {:<14} {:<24} acc {:.2} ± {:.2} (n={}){mad}",
            r.experiment, r.dataset, r.variant, a.mean_accuracy, a.std_accuracy, a.runs
        );
    }
}

fn with_dataset<T>(
    common: &Common,
    f: impl FnOnce(&Prepared<'_>, &ExperimentConfig) -> Result<T>,
) -> Result<T> {
    let cfg = common.resolve()?;
    let ds = load_dataset(&cfg.dataset)?;
    let name = rwnsgcn::harness::experiments::dataset_name(&cfg.dataset);
    let prep = Prepared::new(&ds, &name, cfg.sources);
    f(&prep, &cfg)
}

fn finish(reports: &[rwnsgcn::harness::RunReport], out: &Path, stem: &str) -> Result<()> {
    emit_report(reports, out, stem)?;
    print_summary(reports);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prepare { common, output } => {
            let cfg = common.resolve()?;
            let ds = load_dataset(&cfg.dataset)?;
            save_json_bundle(&ds, &output)?;
            println!(
                "wrote {} ({} nodes, {} edges, {} features, {} classes)",
                output.display(),
                ds.num_nodes(),
                ds.graph.num_edges(),
                ds.feature_dim(),
                ds.class_count()
            );
            Ok(())
        }
        Command::Baseline { common, with_plain } => {
            let reports = with_dataset(&common, |prep, cfg| {
                if with_plain {
                    run_baseline_pair(prep, cfg)
                } else {
                    Ok(vec![run_baseline(prep, cfg)?])
                }
            })?;
            finish(&reports, &common.out, "baseline")
        }
        Command::Attack { common, attacks } => {
            let grid = parse_attacks(&attacks)?;
            let cmp = with_dataset(&common, |prep, cfg| run_attack_comparison(prep, cfg, &grid))?;
            finish(&cmp.reports, &common.out, "attack")?;
            let pairs_path = common.out.join("attack_pairs.json");
            std::fs::write(&pairs_path, serde_json::to_string_pretty(&cmp.pairs)?)
                .map_err(|e| Error::io(&pairs_path, e))?;
            for a in &grid {
                let (wins, total) = cmp.wins(&a.label());
                println!("{}: rw-nsgcn degrades no more than plain-gcn in {wins}/{total} runs", a.label());
            }
            Ok(())
        }
        Command::Ablate { common } => {
            let reports = with_dataset(&common, run_ablation)?;
            finish(&reports, &common.out, "ablation")
        }
        Command::SweepL { common, l_values } => {
            let reports = with_dataset(&common, |p, c| run_l_sweep(p, c, &l_values))?;
            finish(&reports, &common.out, "l_sweep")
        }
        Command::SweepLambda { common, lambdas } => {
            let reports = with_dataset(&common, |p, c| run_lambda_sweep(p, c, &lambdas))?;
            finish(&reports, &common.out, "lambda_sweep")
        }
        Command::Report { input, csv } => {
            let reports = load_reports(&input)?;
            if csv {
                print!("{}", csv_string(&reports)?);
            } else {
                print_summary(&reports);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
