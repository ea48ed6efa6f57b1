//! Full ranking by binary insertion over noisy duels, and best-expert
//! identification by repeated approximate max-search with shrinking
//! precision.

use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::duel::{compare, DuelConfig, DuelConstants, DuelOutcome, DuelTrace};
use crate::env::{PairOracle, SamplingOracle};

/// Outcome of `active_ranking`.
#[derive(Debug, Clone, Serialize)]
pub struct RankingResult {
    /// Estimated ranking, best expert first.
    pub pi_hat: Vec<usize>,
    pub queries: u64,
    pub duel_count: usize,
    pub traces: Vec<DuelTrace>,
    /// The ranking is complete but unreliable past the point where the
    /// budget ran out.
    pub budget_exceeded: bool,
}

/// Outcome of `best_expert` (and of the Borda baseline's elimination).
#[derive(Debug, Clone, Serialize)]
pub struct BestExpertResult {
    pub k_hat: usize,
    pub queries: u64,
    pub rounds: u32,
    /// Surviving candidate set after each round, champion first.
    pub survivor_history: Vec<Vec<usize>>,
    pub budget_exceeded: bool,
}

/// Finds the insertion position of `expert` in `arr[lo..=hi]`, which is
/// sorted ascending by performance (worst at index 0). Classic three-way
/// search: a win moves right, a loss moves left, an undecided duel (possible
/// only under budget caps) settles for `mid`. Each pair is dueled once per
/// node and the cached outcome drives the branch.
pub fn binary_search(
    expert: usize,
    arr: &[usize],
    lo: isize,
    hi: isize,
    duel: &mut impl FnMut(usize, usize) -> DuelOutcome,
) -> usize {
    if lo > hi {
        return lo as usize;
    }
    if lo == hi {
        return match duel(expert, arr[lo as usize]) {
            DuelOutcome::FirstBetter => lo as usize + 1,
            _ => lo as usize,
        };
    }
    let mid = (lo + hi) / 2;
    match duel(expert, arr[mid as usize]) {
        DuelOutcome::FirstBetter => binary_search(expert, arr, mid + 1, hi, duel),
        DuelOutcome::SecondBetter => binary_search(expert, arr, lo, mid - 1, duel),
        DuelOutcome::Null => mid as usize,
    }
}

/// Inserts experts 1..n one by one into an ascending array via
/// `binary_search`. Returns the array (worst first) and the duel count,
/// which never exceeds n * ceil(log2 n).
pub fn insertion_ranking<F>(n: usize, mut duel: F) -> (Vec<usize>, usize)
where
    F: FnMut(usize, usize) -> DuelOutcome,
{
    assert!(n >= 1);
    let mut arr = vec![0usize];
    let mut count = 0usize;
    for expert in 1..n {
        let hi = arr.len() as isize - 1;
        let pos = binary_search(expert, &arr, 0, hi, &mut |a, b| {
            count += 1;
            duel(a, b)
        });
        arr.insert(pos, expert);
    }
    (arr, count)
}

/// Ranks all experts of `oracle` with confidence `delta`.
///
/// Each duel runs `compare` at confidence delta / (n ceil(log2 n)) and
/// precision zero. Requires a unique ranking, or a budget cap: identical
/// rows at precision zero never separate.
pub fn active_ranking(
    oracle: &mut SamplingOracle,
    delta: f64,
    budget_cap: Option<u64>,
    constants: DuelConstants,
    rng: &mut ChaCha8Rng,
) -> RankingResult {
    let n = oracle.n();
    assert!(n >= 2, "ranking needs at least two experts");
    let duel_delta = delta / (n as f64 * (n as f64).log2().ceil());
    let start = oracle.total_queries();

    let mut traces: Vec<DuelTrace> = Vec::new();
    let mut budget_hit = false;
    let (ascending, duel_count) = insertion_ranking(n, |a, b| {
        let cfg = DuelConfig {
            delta: duel_delta,
            epsilon: 0.0,
            budget_cap,
            constants,
        };
        let mut pair = PairOracle::new(oracle, a, b);
        let (out, trace) = compare(&mut pair, &cfg, rng);
        budget_hit |= trace.budget_exceeded;
        traces.push(trace);
        out
    });

    RankingResult {
        pi_hat: ascending.into_iter().rev().collect(),
        queries: oracle.total_queries() - start,
        duel_count,
        traces,
        budget_exceeded: budget_hit,
    }
}

/// One max-search pass: scan the candidates keeping a champion, then
/// re-duel every undecided survivor against the final champion and drop the
/// ones it separates from. Each duel runs at confidence
/// delta / (2 |candidates|) and precision `epsilon`; the factory receives
/// those along with the pair.
///
/// On the good event the true best candidate survives and every survivor is
/// within L2 distance 2 epsilon of it.
pub fn max_search<F>(
    delta: f64,
    candidates: &[usize],
    epsilon: f64,
    mut duel: F,
) -> (Vec<usize>, usize)
where
    F: FnMut(f64, f64, usize, usize) -> DuelOutcome,
{
    assert!(!candidates.is_empty());
    let duel_delta = delta / (2.0 * candidates.len() as f64);

    let mut champion = candidates[0];
    let mut kept: Vec<usize> = vec![champion];
    for &cand in &candidates[1..] {
        match duel(duel_delta, epsilon, champion, cand) {
            DuelOutcome::Null => kept.push(cand),
            DuelOutcome::SecondBetter => {
                kept = vec![cand];
                champion = cand;
            }
            DuelOutcome::FirstBetter => {}
        }
    }

    let mut confirmed = vec![champion];
    for &cand in kept.iter().filter(|&&c| c != champion) {
        // The champion may have changed since `cand` was kept; a decisive
        // win now removes it.
        match duel(duel_delta, epsilon, champion, cand) {
            DuelOutcome::FirstBetter => {}
            _ => confirmed.push(cand),
        }
    }
    (confirmed, champion)
}

/// Identifies the best expert with confidence `delta` by running max-search
/// rounds with precision 1, 1/4, 1/16, ... and per-round confidence
/// delta/2, delta/4, ... until a single candidate survives.
pub fn best_expert(
    oracle: &mut SamplingOracle,
    delta: f64,
    budget_cap: Option<u64>,
    constants: DuelConstants,
    rng: &mut ChaCha8Rng,
) -> BestExpertResult {
    let n = oracle.n();
    assert!(n >= 2, "best-expert needs at least two experts");
    let start = oracle.total_queries();

    let mut survivors: Vec<usize> = (0..n).collect();
    let mut epsilon = 1.0f64;
    let mut round_delta = delta / 2.0;
    let mut history: Vec<Vec<usize>> = Vec::new();
    let mut rounds = 0u32;
    let mut budget_hit = false;

    while survivors.len() > 1 && !budget_hit {
        let (set, _champ) = max_search(round_delta, &survivors, epsilon, |dlt, eps, a, b| {
            let cfg = DuelConfig {
                delta: dlt,
                epsilon: eps,
                budget_cap,
                constants,
            };
            let mut pair = PairOracle::new(oracle, a, b);
            let (out, trace) = compare(&mut pair, &cfg, rng);
            budget_hit |= trace.budget_exceeded;
            out
        });
        survivors = set;
        history.push(survivors.clone());
        rounds += 1;
        epsilon /= 4.0;
        round_delta /= 2.0;
    }

    BestExpertResult {
        k_hat: survivors[0],
        queries: oracle.total_queries() - start,
        rounds,
        survivor_history: history,
        budget_exceeded: budget_hit,
    }
}
