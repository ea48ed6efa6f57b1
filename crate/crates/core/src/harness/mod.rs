//! Replication engine: seeded experiment configs, Monte Carlo runs, the
//! sparsity and dimension sweeps, bound reporting, and file emission.

mod emit;

pub use emit::{
    emit_records_csv, emit_records_json, emit_table_svg, records_csv_string, table_csv_string,
};

use std::path::PathBuf;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::baseline::{borda_best_expert, borda_duel, BordaConfig};
use crate::duel::{compare, DuelConfig, DuelConstants, DuelTrace};
use crate::env::{
    derive_seed, gen_chain_instance, gen_sparse_instance, read_matrix, EnvError, NoiseModel,
    PairOracle, SamplingOracle,
};
use crate::model::{complexity_report, validate_instance, ComplexityReport, MonotoneInstance};
use crate::rank::{active_ranking, best_expert};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

/// Which comparison stack a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgoId {
    /// Adaptive task selection via median elimination.
    Paper,
    /// Uniform-task Borda baseline.
    Borda,
}

impl AlgoId {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "paper" => Some(AlgoId::Paper),
            "borda" => Some(AlgoId::Borda),
            _ => None,
        }
    }
}

impl std::fmt::Display for AlgoId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AlgoId::Paper => "paper",
            AlgoId::Borda => "borda",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentMode {
    Duel,
    Ranking,
    BestExpert,
}

impl ExperimentMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "duel" => Some(ExperimentMode::Duel),
            "ranking" => Some(ExperimentMode::Ranking),
            "best_expert" | "best-expert" => Some(ExperimentMode::BestExpert),
            _ => None,
        }
    }
}

/// Constants profile: `paper` for guaranteed runs, `ci` for fast suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Paper,
    Ci,
}

impl Profile {
    pub fn constants(self) -> DuelConstants {
        match self {
            Profile::Paper => DuelConstants::paper(),
            Profile::Ci => DuelConstants::ci(),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "paper" => Some(Profile::Paper),
            "ci" => Some(Profile::Ci),
            _ => None,
        }
    }
}

impl std::fmt::Display for Profile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Profile::Paper => "paper",
            Profile::Ci => "ci",
        })
    }
}

/// Where a run's instance comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum InstanceSpec {
    /// Two experts with an s-sparse gap vector; redrawn per replication.
    Sparse { d: usize, s: usize },
    /// Constant-row chain with the given consecutive L2 gaps.
    Chain { n: usize, d: usize, gaps: Vec<f64> },
    /// Plain-text matrix file.
    MatrixFile(PathBuf),
}

impl InstanceSpec {
    /// The sparsity column recorded for this spec (-1 when not applicable).
    fn s_column(&self) -> i64 {
        match self {
            InstanceSpec::Sparse { s, .. } => *s as i64,
            _ => -1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub mode: ExperimentMode,
    pub algo: AlgoId,
    pub instance: InstanceSpec,
    pub delta: f64,
    pub epsilon: f64,
    pub replications: u32,
    pub seed: u64,
    pub budget_cap: Option<u64>,
    pub profile: Profile,
    pub noise: NoiseModel,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.replications < 1 {
            return Err(HarnessError::Config("replications must be >= 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(HarnessError::Config(format!(
                "delta must be in (0, 1), got {}",
                self.delta
            )));
        }
        if self.epsilon < 0.0 {
            return Err(HarnessError::Config("epsilon must be >= 0".into()));
        }
        if self.mode == ExperimentMode::Ranking && self.algo == AlgoId::Borda {
            return Err(HarnessError::Config(
                "the borda baseline only supports duel and best_expert modes".into(),
            ));
        }
        match &self.instance {
            InstanceSpec::Sparse { d, s } => {
                if *s < 1 || s > d {
                    return Err(HarnessError::Config(format!(
                        "sparse generator needs 1 <= s <= d, got s = {s}, d = {d}"
                    )));
                }
                if self.mode != ExperimentMode::Duel {
                    return Err(HarnessError::Config(
                        "the sparse generator produces two-expert instances; use duel mode".into(),
                    ));
                }
            }
            InstanceSpec::Chain { n, d, gaps } => {
                if *n < 2 || *d < 1 || gaps.len() != n - 1 {
                    return Err(HarnessError::Config(format!(
                        "chain generator needs n >= 2, d >= 1 and n - 1 gaps, got n = {n}, d = {d}, {} gaps",
                        gaps.len()
                    )));
                }
            }
            InstanceSpec::MatrixFile(_) => {}
        }
        Ok(())
    }

    /// Builds the fixed base instance for chain / matrix specs.
    fn base_instance(&self) -> Result<Option<MonotoneInstance>, HarnessError> {
        match &self.instance {
            InstanceSpec::Sparse { .. } => Ok(None),
            InstanceSpec::Chain { n, d, gaps } => Ok(Some(gen_chain_instance(*n, *d, gaps)?)),
            InstanceSpec::MatrixFile(path) => {
                let matrix = read_matrix(path)?;
                Ok(Some(validate_instance(matrix)?))
            }
        }
    }

    /// Degenerate instances never separate at precision zero, so they must
    /// carry a budget cap.
    fn check_identifiability(&self, base: Option<&MonotoneInstance>) -> Result<(), HarnessError> {
        if self.budget_cap.is_some() {
            return Ok(());
        }
        let Some(inst) = base else { return Ok(()) }; // generated instances are strict
        let ok = match self.mode {
            ExperimentMode::Ranking => inst.strict_ranking(),
            ExperimentMode::BestExpert => inst.strict_best(),
            ExperimentMode::Duel => inst.strict_ranking(),
        };
        if ok {
            Ok(())
        } else {
            Err(HarnessError::Config(
                "instance has tied rows; set a budget cap to run anyway".into(),
            ))
        }
    }
}

/// One replication's outcome.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub algo: AlgoId,
    pub n: usize,
    pub d: usize,
    /// Gap sparsity of the generated instance, or -1.
    pub s: i64,
    pub delta: f64,
    pub epsilon: f64,
    pub rep: u32,
    pub seed: u64,
    pub queries: u64,
    pub correct: bool,
    pub wall_time_ms: u64,
}

/// A replication's record plus the duel traces it produced (paper duels only).
#[derive(Debug, Clone)]
pub struct RepOutcome {
    pub record: RunRecord,
    pub traces: Vec<DuelTrace>,
}

// Seed-derivation tags; children of distinct tags are independent streams.
const TAG_REP: u64 = 0x01;
const TAG_GEN: u64 = 0x02;
const TAG_ORACLE: u64 = 0x03;
const TAG_ALG: u64 = 0x04;
const TAG_SWEEP: u64 = 0x05;

fn run_one(
    config: &ExperimentConfig,
    base: Option<&MonotoneInstance>,
    rep: u32,
) -> Result<RepOutcome, HarnessError> {
    let rep_seed = derive_seed(config.seed, TAG_REP, rep as u64);
    let instance = match (&config.instance, base) {
        (InstanceSpec::Sparse { d, s }, _) => {
            gen_sparse_instance(*d, *s, derive_seed(rep_seed, TAG_GEN, 0))?
        }
        (_, Some(inst)) => inst.clone(),
        _ => unreachable!("non-sparse specs carry a base instance"),
    };
    let truth_best = instance.best_expert();
    let truth_order = instance.ordering().to_vec();
    let (n, d) = (instance.n(), instance.d());

    let mut oracle = SamplingOracle::new(instance, config.noise, derive_seed(rep_seed, TAG_ORACLE, 0));
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(rep_seed, TAG_ALG, config.algo as u64));
    let constants = config.profile.constants();

    let started = Instant::now();
    let mut traces = Vec::new();
    let (queries, correct) = match (config.mode, config.algo) {
        (ExperimentMode::Duel, AlgoId::Paper) => {
            let cfg = DuelConfig {
                delta: config.delta,
                epsilon: config.epsilon,
                budget_cap: config.budget_cap,
                constants,
            };
            let mut pair = PairOracle::new(&mut oracle, 0, 1);
            let (out, trace) = compare(&mut pair, &cfg, &mut rng);
            let correct = out.winner(0, 1) == Some(truth_best);
            let queries = trace.queries;
            traces.push(trace);
            (queries, correct)
        }
        (ExperimentMode::Duel, AlgoId::Borda) => {
            let cfg = BordaConfig {
                delta: config.delta,
                budget_cap: config.budget_cap,
                ..BordaConfig::new(config.delta)
            };
            let mut pair = PairOracle::new(&mut oracle, 0, 1);
            let res = borda_duel(&mut pair, &cfg, &mut rng);
            (res.queries, res.outcome.winner(0, 1) == Some(truth_best))
        }
        (ExperimentMode::Ranking, AlgoId::Paper) => {
            let res = active_ranking(
                &mut oracle,
                config.delta,
                config.budget_cap,
                constants,
                &mut rng,
            );
            let correct = res.pi_hat == truth_order;
            let queries = res.queries;
            traces.extend(res.traces);
            (queries, correct)
        }
        (ExperimentMode::BestExpert, AlgoId::Paper) => {
            let res = best_expert(
                &mut oracle,
                config.delta,
                config.budget_cap,
                constants,
                &mut rng,
            );
            (res.queries, res.k_hat == truth_best)
        }
        (ExperimentMode::BestExpert, AlgoId::Borda) => {
            let cfg = BordaConfig {
                delta: config.delta,
                budget_cap: config.budget_cap,
                ..BordaConfig::new(config.delta)
            };
            let res = borda_best_expert(&mut oracle, &cfg, &mut rng);
            (res.queries, res.k_hat == truth_best)
        }
        (ExperimentMode::Ranking, AlgoId::Borda) => {
            unreachable!("rejected by validate()")
        }
    };

    Ok(RepOutcome {
        record: RunRecord {
            algo: config.algo,
            n,
            d,
            s: config.instance.s_column(),
            delta: config.delta,
            epsilon: config.epsilon,
            rep,
            seed: rep_seed,
            queries,
            correct,
            wall_time_ms: started.elapsed().as_millis() as u64,
        },
        traces,
    })
}

/// Runs `config.replications` independent seeded replications in parallel
/// and returns their records sorted by replication index. Deterministic
/// given (config, seed), except for wall-clock columns.
pub fn run_replications(config: &ExperimentConfig) -> Result<Vec<RunRecord>, HarnessError> {
    Ok(run_replications_full(config)?
        .into_iter()
        .map(|o| o.record)
        .collect())
}

/// Like [`run_replications`] but keeps per-duel traces.
pub fn run_replications_full(config: &ExperimentConfig) -> Result<Vec<RepOutcome>, HarnessError> {
    config.validate()?;
    let base = config.base_instance()?;
    config.check_identifiability(base.as_ref())?;
    let mut outcomes: Vec<RepOutcome> = (0..config.replications)
        .into_par_iter()
        .map(|rep| run_one(config, base.as_ref(), rep))
        .collect::<Result<_, _>>()?;
    outcomes.sort_by_key(|o| o.record.rep);
    Ok(outcomes)
}

/// Aggregated sweep output: one row per (axis value, algorithm).
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub axis: f64,
    pub algo: AlgoId,
    pub mean_queries: f64,
    pub reps: u32,
    pub correct: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepTable {
    /// Axis meaning: "s/d" for the sparsity sweep, "d" for the dimension sweep.
    pub axis_label: String,
    pub rows: Vec<SweepRow>,
}

/// Full sweep output: per-run records, aggregate table, and the paper
/// algorithm's duel traces for budget auditing.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub records: Vec<RunRecord>,
    pub table: SweepTable,
    pub paper_traces: Vec<DuelTrace>,
}

fn summarize(records: &[RunRecord], axis_label: &str, axis_of: impl Fn(&RunRecord) -> f64) -> SweepTable {
    let mut rows: Vec<SweepRow> = Vec::new();
    for rec in records {
        let axis = axis_of(rec);
        match rows
            .iter_mut()
            .find(|r| r.axis == axis && r.algo == rec.algo)
        {
            Some(row) => {
                row.mean_queries += rec.queries as f64;
                row.reps += 1;
                row.correct += rec.correct as u32;
            }
            None => rows.push(SweepRow {
                axis,
                algo: rec.algo,
                mean_queries: rec.queries as f64,
                reps: 1,
                correct: rec.correct as u32,
            }),
        }
    }
    for row in &mut rows {
        row.mean_queries /= row.reps as f64;
    }
    rows.sort_by(|a, b| a.axis.partial_cmp(&b.axis).unwrap().then(a.algo.cmp(&b.algo)));
    SweepTable {
        axis_label: axis_label.to_string(),
        rows,
    }
}

/// Runs both algorithms over every sparsity s = 1..=d of the two-expert
/// generated instances: `reps` replications per point, paired instances and
/// oracle seeds across algorithms.
#[allow(clippy::too_many_arguments)]
pub fn sweep_sparsity(
    d: usize,
    delta: f64,
    epsilon: f64,
    reps: u32,
    seed: u64,
    profile: Profile,
    budget_cap: Option<u64>,
) -> Result<SweepOutcome, HarnessError> {
    if d < 1 {
        return Err(HarnessError::Config("d must be >= 1".into()));
    }
    let mut records = Vec::new();
    let mut paper_traces = Vec::new();
    for s in 1..=d {
        let point_seed = derive_seed(seed, TAG_SWEEP, s as u64);
        for algo in [AlgoId::Paper, AlgoId::Borda] {
            let config = ExperimentConfig {
                mode: ExperimentMode::Duel,
                algo,
                instance: InstanceSpec::Sparse { d, s },
                delta,
                epsilon,
                replications: reps,
                seed: point_seed,
                budget_cap,
                profile,
                noise: NoiseModel::GaussianUnit,
            };
            for outcome in run_replications_full(&config)? {
                records.push(outcome.record);
                if algo == AlgoId::Paper {
                    paper_traces.extend(outcome.traces);
                }
            }
        }
    }
    let table = summarize(&records, "s/d", |r| r.s as f64 / r.d as f64);
    Ok(SweepOutcome {
        records,
        table,
        paper_traces,
    })
}

/// Runs both algorithms over task counts `dims` at a fixed sparsity rate;
/// s = max(1, round-half-up(rate * d)).
#[allow(clippy::too_many_arguments)]
pub fn sweep_dimension(
    rate: f64,
    dims: &[usize],
    delta: f64,
    epsilon: f64,
    reps: u32,
    seed: u64,
    profile: Profile,
    budget_cap: Option<u64>,
) -> Result<SweepOutcome, HarnessError> {
    if dims.is_empty() {
        return Err(HarnessError::Config("dims must be non-empty".into()));
    }
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(HarnessError::Config(format!(
            "sparsity rate must be in (0, 1], got {rate}"
        )));
    }
    let mut records = Vec::new();
    let mut paper_traces = Vec::new();
    for &d in dims {
        let s = sparsity_for_rate(rate, d);
        let point_seed = derive_seed(seed, TAG_SWEEP, (d as u64) << 32);
        for algo in [AlgoId::Paper, AlgoId::Borda] {
            let config = ExperimentConfig {
                mode: ExperimentMode::Duel,
                algo,
                instance: InstanceSpec::Sparse { d, s },
                delta,
                epsilon,
                replications: reps,
                seed: point_seed,
                budget_cap,
                profile,
                noise: NoiseModel::GaussianUnit,
            };
            for outcome in run_replications_full(&config)? {
                records.push(outcome.record);
                if algo == AlgoId::Paper {
                    paper_traces.extend(outcome.traces);
                }
            }
        }
    }
    let table = summarize(&records, "d", |r| r.d as f64);
    Ok(SweepOutcome {
        records,
        table,
        paper_traces,
    })
}

/// Round-half-up sparsity for a rate, clamped to [1, d].
pub fn sparsity_for_rate(rate: f64, d: usize) -> usize {
    (((rate * d as f64) + 0.5).floor() as usize).clamp(1, d)
}

/// A complexity report rendered for output.
#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub n: usize,
    pub d: usize,
    pub delta: f64,
    #[serde(flatten)]
    pub report: ComplexityReport,
}

pub fn report_bounds(instance: &MonotoneInstance, delta: f64) -> BoundsReport {
    BoundsReport {
        n: instance.n(),
        d: instance.d(),
        delta,
        report: complexity_report(instance, delta),
    }
}

fn fmt_value(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.4}")
    }
}

impl std::fmt::Display for BoundsReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "instance: n = {}, d = {}, delta = {}", self.n, self.d, self.delta)?;
        writeln!(f, "pair_h:     {}", fmt_value(self.report.pair_h))?;
        let join = |xs: &[f64]| xs.iter().map(|&x| fmt_value(x)).collect::<Vec<_>>().join(", ");
        writeln!(f, "ranking_h:  [{}]", join(&self.report.ranking_h))?;
        writeln!(f, "best_g:     [{}]", join(&self.report.best_g))?;
        writeln!(f, "lb_two:     {}", fmt_value(self.report.lb_two))?;
        writeln!(f, "lb_ranking: {}", fmt_value(self.report.lb_ranking))?;
        write!(f, "lb_best:    {}", fmt_value(self.report.lb_best))
    }
}

impl BoundsReport {
    /// JSON rendering; non-finite values appear as the string "inf".
    pub fn to_json(&self) -> serde_json::Value {
        fn num(v: f64) -> serde_json::Value {
            if v.is_finite() {
                serde_json::json!(v)
            } else {
                serde_json::json!("inf")
            }
        }
        serde_json::json!({
            "n": self.n,
            "d": self.d,
            "delta": self.delta,
            "pair_h": num(self.report.pair_h),
            "ranking_h": self.report.ranking_h.iter().map(|&x| num(x)).collect::<Vec<_>>(),
            "best_g": self.report.best_g.iter().map(|&x| num(x)).collect::<Vec<_>>(),
            "lb_two": num(self.report.lb_two),
            "lb_ranking": num(self.report.lb_ranking),
            "lb_best": num(self.report.lb_best),
        })
    }
}
