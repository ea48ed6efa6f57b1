//! `duelrank`: simulate fixed-confidence expert-ranking experiments.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use duelrank_core::harness::{
    emit_records_csv, emit_records_json, emit_table_svg, records_csv_string, report_bounds,
    run_replications, sweep_dimension, sweep_sparsity, AlgoId, ExperimentConfig, ExperimentMode,
    InstanceSpec, Profile, SweepOutcome,
};
use duelrank_core::{gen_chain_instance, gen_sparse_instance, read_matrix, validate_instance};
use duelrank_core::NoiseModel;

const DEFAULT_BUDGET: u64 = 1_000_000_000;

#[derive(Parser)]
#[command(name = "duelrank", version, about = "Active ranking of experts over tasks: adaptive pairwise comparison vs a Borda baseline, with seeded Monte Carlo sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment configuration for several replications
    Simulate(SimulateArgs),
    /// Sweep both algorithms across instance families
    #[command(subcommand)]
    Sweep(SweepCommand),
    /// Print complexity and lower-bound reference values for an instance
    Bounds(BoundsArgs),
}

#[derive(Subcommand)]
enum SweepCommand {
    /// Gap sparsity s = 1..=d on two-expert generated instances
    Sparsity(SparsityArgs),
    /// Task count d at a fixed sparsity rate
    Dimension(DimensionArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Flat `key = value` config file; flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    /// duel | ranking | best-expert
    #[arg(long)]
    mode: Option<String>,
    /// paper | borda
    #[arg(long)]
    algo: Option<String>,
    /// Instance generator: sparse | chain
    #[arg(long)]
    gen: Option<String>,
    /// Plain-text matrix file (overrides --gen)
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Task count
    #[arg(long)]
    d: Option<usize>,
    /// Non-zero gap count of the sparse generator
    #[arg(long)]
    s: Option<usize>,
    /// Expert count of the chain generator
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated consecutive L2 gaps of the chain generator
    #[arg(long)]
    gaps: Option<String>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    reps: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Max oracle queries per replication (0 disables the cap)
    #[arg(long)]
    budget: Option<u64>,
    /// paper | ci
    #[arg(long)]
    profile: Option<String>,
    /// gaussian | bernoulli | noiseless
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv | json
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct SparsityArgs {
    #[arg(long, default_value_t = 10)]
    d: usize,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Duel precision handed to the adaptive algorithm
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 20)]
    reps: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "paper")]
    profile: String,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv | json | svg
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Args)]
struct DimensionArgs {
    /// Sparsity rate s/d kept constant across dimensions
    #[arg(long, default_value_t = 1.0 / 3.0)]
    rate: f64,
    /// Comma-separated task counts
    #[arg(long, default_value = "4,8,16,32,64")]
    dims: String,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Duel precision handed to the adaptive algorithm
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 20)]
    reps: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "paper")]
    profile: String,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv | json | svg
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Args)]
struct BoundsArgs {
    /// Plain-text matrix file
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Instance generator: sparse | chain
    #[arg(long)]
    gen: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    gaps: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// text | json
    #[arg(long, default_value = "text")]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Sweep(SweepCommand::Sparsity(args)) => sparsity(args),
        Command::Sweep(SweepCommand::Dimension(args)) => dimension(args),
        Command::Bounds(args) => bounds(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn parse_gaps(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|e| anyhow!("bad gap value {tok:?}: {e}"))
        })
        .collect()
}

fn parse_dims(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|e| anyhow!("bad dimension {tok:?}: {e}"))
        })
        .collect()
}

/// Flat `key = value` file: one pair per line, `#` starts a comment.
fn parse_kv_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("{}:{}: expected `key = value`", path.display(), lineno + 1))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// File entries merged under flag overrides, with documented defaults last.
struct Draft {
    file: BTreeMap<String, String>,
}

impl Draft {
    fn new(config: Option<&Path>) -> Result<Self> {
        let file = match config {
            Some(path) => {
                let map = parse_kv_file(path)?;
                const KNOWN: &[&str] = &[
                    "mode", "algo", "gen", "matrix", "d", "s", "n", "gaps", "delta", "epsilon",
                    "reps", "seed", "budget", "profile", "noise",
                ];
                if let Some(key) = map.keys().find(|k| !KNOWN.contains(&k.as_str())) {
                    bail!("unknown config key {key:?}");
                }
                map
            }
            None => BTreeMap::new(),
        };
        Ok(Draft { file })
    }

    fn lookup<T, F>(&self, key: &str, flag: Option<T>, parse: F, default: T) -> Result<T>
    where
        F: Fn(&str) -> Result<T>,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.file.get(key) {
            Some(raw) => parse(raw).with_context(|| format!("config key {key:?}")),
            None => Ok(default),
        }
    }
}

fn build_config(args: &SimulateArgs) -> Result<ExperimentConfig> {
    let draft = Draft::new(args.config.as_deref())?;

    let mode = draft.lookup(
        "mode",
        args.mode
            .as_deref()
            .map(|s| {
                ExperimentMode::parse(s).ok_or_else(|| anyhow!("bad --mode {s:?}"))
            })
            .transpose()?,
        |s| ExperimentMode::parse(s).ok_or_else(|| anyhow!("bad mode {s:?}")),
        ExperimentMode::Duel,
    )?;
    let algo = draft.lookup(
        "algo",
        args.algo
            .as_deref()
            .map(|s| AlgoId::parse(s).ok_or_else(|| anyhow!("bad --algo {s:?}")))
            .transpose()?,
        |s| AlgoId::parse(s).ok_or_else(|| anyhow!("bad algo {s:?}")),
        AlgoId::Paper,
    )?;
    let profile = draft.lookup(
        "profile",
        args.profile
            .as_deref()
            .map(|s| Profile::parse(s).ok_or_else(|| anyhow!("bad --profile {s:?}")))
            .transpose()?,
        |s| Profile::parse(s).ok_or_else(|| anyhow!("bad profile {s:?}")),
        Profile::Paper,
    )?;
    let noise = draft.lookup(
        "noise",
        args.noise
            .as_deref()
            .map(|s| NoiseModel::parse(s).ok_or_else(|| anyhow!("bad --noise {s:?}")))
            .transpose()?,
        |s| NoiseModel::parse(s).ok_or_else(|| anyhow!("bad noise {s:?}")),
        NoiseModel::GaussianUnit,
    )?;

    let parse_usize = |s: &str| s.parse::<usize>().map_err(|e| anyhow!("{e}"));
    let d = draft.lookup("d", args.d, parse_usize, 10)?;
    let s = draft.lookup("s", args.s, parse_usize, 3)?;
    let n = draft.lookup("n", args.n, parse_usize, 4)?;
    let gaps_text = draft.lookup(
        "gaps",
        args.gaps.clone(),
        |s| Ok(s.to_string()),
        "0.5,0.3,0.3".to_string(),
    )?;
    let matrix = draft.lookup(
        "matrix",
        args.matrix.clone(),
        |s| Ok(PathBuf::from(s)),
        PathBuf::new(),
    )?;
    let gen = draft.lookup(
        "gen",
        args.gen.clone(),
        |s| Ok(s.to_string()),
        "sparse".to_string(),
    )?;

    let instance = if !matrix.as_os_str().is_empty() {
        InstanceSpec::MatrixFile(matrix)
    } else {
        match gen.as_str() {
            "sparse" => InstanceSpec::Sparse { d, s },
            "chain" => InstanceSpec::Chain {
                n,
                d,
                gaps: parse_gaps(&gaps_text)?,
            },
            other => bail!("unknown generator {other:?} (expected sparse or chain)"),
        }
    };

    let parse_f64 = |s: &str| s.parse::<f64>().map_err(|e| anyhow!("{e}"));
    let budget = draft.lookup(
        "budget",
        args.budget,
        |s| s.parse::<u64>().map_err(|e| anyhow!("{e}")),
        DEFAULT_BUDGET,
    )?;

    Ok(ExperimentConfig {
        mode,
        algo,
        instance,
        delta: draft.lookup("delta", args.delta, parse_f64, 0.1)?,
        epsilon: draft.lookup("epsilon", args.epsilon, parse_f64, 0.0)?,
        replications: draft.lookup(
            "reps",
            args.reps,
            |s| s.parse::<u32>().map_err(|e| anyhow!("{e}")),
            20,
        )?,
        seed: draft.lookup(
            "seed",
            args.seed,
            |s| s.parse::<u64>().map_err(|e| anyhow!("{e}")),
            0,
        )?,
        budget_cap: if budget == 0 { None } else { Some(budget) },
        profile,
        noise,
    })
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let config = build_config(&args)?;
    let records = run_replications(&config)?;
    let correct = records.iter().filter(|r| r.correct).count();
    let mean: f64 =
        records.iter().map(|r| r.queries as f64).sum::<f64>() / records.len() as f64;
    eprintln!(
        "{} replications, {} correct, mean queries {:.1}",
        records.len(),
        correct,
        mean
    );

    let format = args.format.as_deref().unwrap_or("csv");
    match (format, &args.out) {
        ("csv", Some(path)) => emit_records_csv(&records, path)?,
        ("csv", None) => print!("{}", records_csv_string(&records)),
        ("json", Some(path)) => emit_records_json(&records, path)?,
        ("json", None) => {
            println!("{}", serde_json::to_string_pretty(&records)?)
        }
        ("svg", _) => bail!("simulate emits records; svg is only available for sweeps"),
        (other, _) => bail!("unknown format {other:?}"),
    }
    Ok(())
}

fn emit_sweep(sweep: &SweepOutcome, format: &str, out: Option<&Path>) -> Result<()> {
    match (format, out) {
        ("csv", Some(path)) => emit_records_csv(&sweep.records, path)?,
        ("csv", None) => print!("{}", records_csv_string(&sweep.records)),
        ("json", Some(path)) => emit_records_json(&sweep.records, path)?,
        ("json", None) => println!("{}", serde_json::to_string_pretty(&sweep.records)?),
        ("svg", Some(path)) => emit_table_svg(&sweep.table, path)?,
        ("svg", None) => bail!("--format svg needs --out"),
        (other, _) => bail!("unknown format {other:?}"),
    }
    Ok(())
}

fn sparsity(args: SparsityArgs) -> Result<()> {
    let profile =
        Profile::parse(&args.profile).ok_or_else(|| anyhow!("bad --profile {:?}", args.profile))?;
    let budget = if args.budget == 0 {
        None
    } else {
        Some(args.budget)
    };
    let sweep = sweep_sparsity(
        args.d, args.delta, args.epsilon, args.reps, args.seed, profile, budget,
    )?;
    for row in &sweep.table.rows {
        eprintln!(
            "s/d = {:.2}  {:>5}  mean queries {:>14.1}  correct {}/{}",
            row.axis, row.algo, row.mean_queries, row.correct, row.reps
        );
    }
    emit_sweep(&sweep, &args.format, args.out.as_deref())
}

fn dimension(args: DimensionArgs) -> Result<()> {
    let profile =
        Profile::parse(&args.profile).ok_or_else(|| anyhow!("bad --profile {:?}", args.profile))?;
    let dims = parse_dims(&args.dims)?;
    let budget = if args.budget == 0 {
        None
    } else {
        Some(args.budget)
    };
    let sweep = sweep_dimension(
        args.rate, &dims, args.delta, args.epsilon, args.reps, args.seed, profile, budget,
    )?;
    for row in &sweep.table.rows {
        eprintln!(
            "d = {:>3}  {:>5}  mean queries {:>14.1}  correct {}/{}",
            row.axis, row.algo, row.mean_queries, row.correct, row.reps
        );
    }
    emit_sweep(&sweep, &args.format, args.out.as_deref())
}

fn bounds(args: BoundsArgs) -> Result<()> {
    let instance = if let Some(path) = &args.matrix {
        validate_instance(read_matrix(path)?)?
    } else {
        match args.gen.as_deref() {
            Some("chain") | None => {
                let n = args.n.unwrap_or(4);
                let d = args.d.unwrap_or(8);
                let gaps = match &args.gaps {
                    Some(text) => parse_gaps(text)?,
                    None => vec![0.5; n - 1],
                };
                gen_chain_instance(n, d, &gaps)?
            }
            Some("sparse") => {
                gen_sparse_instance(args.d.unwrap_or(10), args.s.unwrap_or(3), args.seed)?
            }
            Some(other) => bail!("unknown generator {other:?}"),
        }
    };
    let report = report_bounds(&instance, args.delta);
    let rendered = match args.format.as_str() {
        "text" => report.to_string(),
        "json" => serde_json::to_string_pretty(&report.to_json())?,
        other => bail!("unknown format {other:?} (expected text or json)"),
    };
    match &args.out {
        Some(path) => fs::write(path, rendered + "\n")?,
        None => println!("{rendered}"),
    }
    Ok(())
}
