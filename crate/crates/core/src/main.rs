use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use catcgl::condense::{condense, CondenseConfig, InitMode};
use catcgl::gnn::EncoderConfig;
use catcgl::gradcheck;
use catcgl::graph::io::{load_dataset, write_dataset, FeatureFormat};
use catcgl::graph::{sbm_generate, SbmParams};
use catcgl::harness::{export_embeddings, run_experiment, DatasetSource, ExperimentConfig};
use catcgl::memory::BankPolicy;
use catcgl::metrics::{display_metric, PerformanceMatrix};
use catcgl::trainer::{IlMode, SchemeKind};

#[derive(Parser)]
#[command(name = "catcgl", version, about = "Continual graph learning with condensed replay memory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full continual-learning experiment
    Run(RunArgs),
    /// Condense one dataset into a small replay graph
    Condense(CondenseArgs),
    /// Recompute metrics from a performance-matrix CSV
    Metrics {
        matrix: PathBuf,
        /// Write metrics.json here instead of printing it
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a stochastic-block-model dataset directory
    Synth(SynthArgs),
    /// Run the finite-difference gradient checks
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        seeds: u64,
    },
    /// Export node embeddings from a seeded random encoder as CSV
    Embed(EmbedArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config; flags below override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory (replaces the synthetic source)
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_scheme)]
    scheme: Option<SchemeKind>,
    #[arg(long, value_parser = parse_policy)]
    policy: Option<BankPolicy>,
    #[arg(long, value_parser = parse_il)]
    il_mode: Option<IlMode>,
    #[arg(long)]
    budget_ratio: Option<f64>,
    #[arg(long)]
    classes_per_task: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    encoders: Option<usize>,
    #[arg(long)]
    feature_lr: Option<f64>,
    #[arg(long)]
    condense_hidden: Option<usize>,
    #[arg(long)]
    condense_output: Option<usize>,
    #[arg(long, value_parser = parse_init)]
    init: Option<InitMode>,
    /// Print the resolved config and exit
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct CondenseArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    budget: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    encoders: usize,
    #[arg(long, default_value_t = 0.01)]
    feature_lr: f64,
    #[arg(long, default_value_t = 512)]
    hidden: usize,
    #[arg(long, default_value_t = 512)]
    output: usize,
    #[arg(long, value_parser = parse_init, default_value = "sample")]
    init: InitMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Draw encoders on all cores; output is identical to sequential mode
    #[arg(long)]
    parallel: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    blocks: usize,
    #[arg(long, default_value_t = 100)]
    nodes_per_block: usize,
    #[arg(long, default_value_t = 0.1)]
    p_in: f64,
    #[arg(long, default_value_t = 0.01)]
    p_out: f64,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 3.0)]
    separation: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write features.csv instead of features.bin
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 512)]
    hidden: usize,
    #[arg(long, default_value_t = 512)]
    output: usize,
}

fn from_json<T: serde::de::DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_"))).map_err(|e| e.to_string())
}

fn parse_scheme(s: &str) -> std::result::Result<SchemeKind, String> {
    from_json(s)
}

fn parse_policy(s: &str) -> std::result::Result<BankPolicy, String> {
    from_json(s)
}

fn parse_il(s: &str) -> std::result::Result<IlMode, String> {
    from_json(s)
}

fn parse_init(s: &str) -> std::result::Result<InitMode, String> {
    from_json(s)
}

fn resolve(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(d) = &args.dataset {
        cfg.dataset = DatasetSource::Dir(d.clone());
    }
    macro_rules! set {
        ($($flag:ident => $($field:ident).+),* $(,)?) => {
            $(if let Some(v) = args.$flag.clone() { cfg.$($field).+ = v; })*
        };
    }
    set!(
        scheme => scheme,
        policy => bank_policy,
        il_mode => il_mode,
        budget_ratio => budget_ratio,
        classes_per_task => classes_per_task,
        seed => seed,
        epochs => trainer.epochs,
        lr => trainer.lr,
        hidden => trainer.hidden,
        encoders => condense.encoders,
        feature_lr => condense.feature_lr,
        condense_hidden => condense.hidden,
        condense_output => condense.output,
        init => condense.init,
    );
    if let Some(o) = &args.out {
        cfg.output_dir = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: RunArgs) -> Result<()> {
    let cfg = resolve(&args)?;
    if args.print_config {
        print!("{}", cfg.to_json());
        return Ok(());
    }
    let out = run_experiment(&cfg).context("running experiment")?;
    let k = out.matrix.num_tasks();
    println!(
        "tasks={k} ap={} ap_mean={} bwt={}",
        display_metric(Some(out.matrix.ap(k)?)),
        display_metric(Some(out.matrix.ap_mean(k)?)),
        display_metric(out.matrix.bwt(k)?)
    );
    if let Some(dir) = &cfg.output_dir {
        println!("wrote {}", dir.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => run(args),
        Command::Condense(a) => {
            let g = load_dataset(&a.dataset)?;
            let cfg = CondenseConfig {
                encoders: a.encoders,
                encoder: EncoderConfig::gcn(a.hidden, a.output),
                feature_lr: a.feature_lr,
                init_mode: a.init,
                parallel: a.parallel,
            };
            let cond = condense(&g, a.budget, &cfg, a.seed)?;
            write_dataset(&a.out, &cond.to_graph(), FeatureFormat::Csv)?;
            println!("condensed {} nodes into {} at {}", g.num_nodes(), cond.len(), a.out.display());
            Ok(())
        }
        Command::Metrics { matrix, out } => {
            let text = fs::read_to_string(&matrix).with_context(|| format!("reading {}", matrix.display()))?;
            let m = PerformanceMatrix::from_csv(&text).with_context(|| format!("parsing {}", matrix.display()))?;
            if m.num_tasks() == 0 {
                bail!("{} holds no rows", matrix.display());
            }
            let json = m.report().to_json();
            match out {
                Some(p) => fs::write(&p, json).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{json}"),
            }
            Ok(())
        }
        Command::Synth(a) => {
            let g = sbm_generate(&SbmParams {
                blocks: a.blocks,
                nodes_per_block: a.nodes_per_block,
                p_in: a.p_in,
                p_out: a.p_out,
                feature_dim: a.dim,
                feature_separation: a.separation,
                seed: a.seed,
            })?;
            let fmt = if a.csv { FeatureFormat::Csv } else { FeatureFormat::Bin };
            write_dataset(&a.out, &g, fmt)?;
            println!("wrote {} nodes, {} edges to {}", g.num_nodes(), g.adjacency().num_edges(), a.out.display());
            Ok(())
        }
        Command::Gradcheck { seeds } => {
            let results = gradcheck::run_all(seeds)?;
            let mut failed = 0;
            for r in &results {
                println!(
                    "{:<28} {} max_rel_err={:.3e} tol={:.0e} checked={} skipped={}",
                    r.name,
                    if r.passed() { "PASS" } else { "FAIL" },
                    r.max_rel_err,
                    r.tolerance,
                    r.checked,
                    r.skipped
                );
                failed += usize::from(!r.passed());
            }
            if failed > 0 {
                bail!("{failed} gradient check(s) failed");
            }
            Ok(())
        }
        Command::Embed(a) => {
            let g = load_dataset(&a.dataset)?;
            let csv = export_embeddings(&g, &EncoderConfig::gcn(a.hidden, a.output), a.seed)?;
            fs::write(&a.out, csv).with_context(|| format!("writing {}", a.out.display()))?;
            Ok(())
        }
    }
}
