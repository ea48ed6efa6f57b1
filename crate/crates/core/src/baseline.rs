//! Borda-score baseline: experts are compared through their average
//! performance over a uniformly drawn task, with anytime-valid stopping.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::duel::DuelOutcome;
use crate::env::{PairOracle, SamplingOracle};
use crate::rank::BestExpertResult;

/// Constants of the anytime confidence radius
/// beta(t, delta) = sqrt((variance_factor / t) * ln(union_factor * t^2 / delta)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BordaConfig {
    pub delta: f64,
    pub budget_cap: Option<u64>,
    pub variance_factor: f64,
    pub union_factor: f64,
}

impl BordaConfig {
    pub fn new(delta: f64) -> Self {
        assert!(delta > 0.0 && delta < 1.0);
        BordaConfig {
            delta,
            budget_cap: None,
            variance_factor: 4.0,
            union_factor: 4.0,
        }
    }

    pub fn with_budget(mut self, cap: u64) -> Self {
        self.budget_cap = Some(cap);
        self
    }
}

/// Running state of a two-expert Borda duel: `t` uniform-task sample pairs
/// drawn so far and the running mean of their differences.
#[derive(Debug, Clone, Serialize)]
pub struct BordaDuelState {
    pub t: u64,
    pub running_mean: f64,
    pub delta: f64,
    variance_factor: f64,
    union_factor: f64,
}

impl BordaDuelState {
    pub fn new(config: &BordaConfig) -> Self {
        BordaDuelState {
            t: 0,
            running_mean: 0.0,
            delta: config.delta,
            variance_factor: config.variance_factor,
            union_factor: config.union_factor,
        }
    }

    pub fn update(&mut self, diff: f64) {
        self.t += 1;
        self.running_mean += (diff - self.running_mean) / self.t as f64;
    }

    /// Anytime radius valid simultaneously over all t at level delta.
    pub fn radius(&self) -> f64 {
        assert!(self.t >= 1);
        let t = self.t as f64;
        ((self.variance_factor / t) * (self.union_factor * t * t / self.delta).ln()).sqrt()
    }

    pub fn decision(&self) -> DuelOutcome {
        if self.t >= 1 && self.running_mean.abs() >= self.radius() {
            if self.running_mean > 0.0 {
                DuelOutcome::FirstBetter
            } else {
                DuelOutcome::SecondBetter
            }
        } else {
            DuelOutcome::Null
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BordaDuelResult {
    pub outcome: DuelOutcome,
    /// Uniform-task sample pairs drawn.
    pub steps: u64,
    pub queries: u64,
    pub budget_exceeded: bool,
}

/// Duels two experts by repeatedly sampling both on a shared uniformly
/// drawn task and stopping once the running mean difference clears the
/// anytime radius. Returns Null only when the budget cap cuts in.
pub fn borda_duel(
    pair: &mut PairOracle<'_>,
    config: &BordaConfig,
    rng: &mut ChaCha8Rng,
) -> BordaDuelResult {
    let d = pair.d();
    let start = pair.total_queries();
    let mut state = BordaDuelState::new(config);
    loop {
        if let Some(cap) = config.budget_cap {
            if pair.total_queries() + 2 > cap {
                return BordaDuelResult {
                    outcome: DuelOutcome::Null,
                    steps: state.t,
                    queries: pair.total_queries() - start,
                    budget_exceeded: true,
                };
            }
        }
        let task = rng.random_range(0..d);
        let (a, b) = pair.sample_pair(task);
        state.update(a - b);
        let decision = state.decision();
        if decision.decided() {
            return BordaDuelResult {
                outcome: decision,
                steps: state.t,
                queries: pair.total_queries() - start,
                budget_exceeded: false,
            };
        }
    }
}

/// Best-expert identification by successive elimination on the experts'
/// uniform-task means: sample every active expert round-robin, keep anytime
/// confidence intervals of radius sqrt((2/t) ln(4 n t^2 / delta)), and drop
/// an expert once its upper bound falls below some lower bound.
pub fn borda_best_expert(
    oracle: &mut SamplingOracle,
    config: &BordaConfig,
    rng: &mut ChaCha8Rng,
) -> BestExpertResult {
    let n = oracle.n();
    let d = oracle.d();
    assert!(n >= 2);
    let start = oracle.total_queries();

    let mut active: Vec<usize> = (0..n).collect();
    let mut t = vec![0u64; n];
    let mut mean = vec![0.0f64; n];
    let mut history: Vec<Vec<usize>> = Vec::new();
    let mut rounds = 0u32;
    let mut budget_hit = false;

    let radius = |samples: u64, delta: f64| {
        let tf = samples as f64;
        ((2.0 / tf) * (4.0 * n as f64 * tf * tf / delta).ln()).sqrt()
    };

    while active.len() > 1 {
        if let Some(cap) = config.budget_cap {
            if oracle.total_queries() + active.len() as u64 > cap {
                budget_hit = true;
                break;
            }
        }
        for &i in &active {
            let task = rng.random_range(0..d);
            let x = oracle.query(i, task).expect("validated indices");
            t[i] += 1;
            mean[i] += (x - mean[i]) / t[i] as f64;
        }
        let best_lcb = active
            .iter()
            .map(|&i| mean[i] - radius(t[i], config.delta))
            .fold(f64::NEG_INFINITY, f64::max);
        let before = active.len();
        active.retain(|&i| mean[i] + radius(t[i], config.delta) >= best_lcb);
        if active.len() < before {
            rounds += 1;
            history.push(active.clone());
        }
    }

    // Sole survivor, or the current empirical leader on a budget exit.
    let k_hat = *active
        .iter()
        .max_by(|&&a, &&b| mean[a].partial_cmp(&mean[b]).unwrap())
        .expect("at least one active expert");

    BestExpertResult {
        k_hat,
        queries: oracle.total_queries() - start,
        rounds,
        survivor_history: history,
        budget_exceeded: budget_hit,
    }
}
