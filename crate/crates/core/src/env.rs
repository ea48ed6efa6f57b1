//! Sampling environment: seeded, query-counting oracles over instances,
//! noise models, instance generators, and the plain-text matrix format.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate_instance, MonotoneInstance, PerformanceMatrix};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("expert {expert} or task {task} out of range for {n} x {d}")]
    BadIndex {
        expert: usize,
        task: usize,
        n: usize,
        d: usize,
    },
    #[error("bad generator parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("matrix file parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer; a strong 64-bit permutation.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent child seed from a master seed; pure, so seed
/// derivation is identical regardless of execution order or thread count.
pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    mix64(
        mix64(master ^ tag.wrapping_mul(0xd134_2543_de82_ef95)).wrapping_add(
            index.wrapping_mul(GOLDEN),
        ),
    )
}

/// Counter-based generator: the k-th sample of a cell is a pure function of
/// (seed, expert, task, k), so streams never depend on query interleaving.
struct CellStream {
    state: u64,
}

impl CellStream {
    #[inline]
    fn at(seed: u64, expert: usize, task: usize, draw: u64) -> Self {
        let cell = ((expert as u64) << 32) | task as u64;
        let base = mix64(seed ^ cell.wrapping_mul(0xd134_2543_de82_ef95));
        CellStream {
            state: base.wrapping_add(draw.wrapping_mul(GOLDEN)),
        }
    }
}

impl RngCore for CellStream {
    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

#[inline]
fn unit_uniform(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Observation noise around a mean entry. Every variant is 1-sub-Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// Normal(mean, 1).
    GaussianUnit,
    /// Bernoulli(mean); requires means in [0, 1].
    Bernoulli,
    /// Point mass at the mean.
    Noiseless,
}

impl NoiseModel {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gaussian" | "gaussian_unit" => Some(NoiseModel::GaussianUnit),
            "bernoulli" => Some(NoiseModel::Bernoulli),
            "noiseless" => Some(NoiseModel::Noiseless),
            _ => None,
        }
    }
}

impl std::fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NoiseModel::GaussianUnit => "gaussian_unit",
            NoiseModel::Bernoulli => "bernoulli",
            NoiseModel::Noiseless => "noiseless",
        })
    }
}

/// A seeded sampling interface over one instance. Every query is counted,
/// per cell and in total; identical (instance, noise, seed, query sequence)
/// yields bit-identical samples.
#[derive(Debug, Clone)]
pub struct SamplingOracle {
    instance: MonotoneInstance,
    noise: NoiseModel,
    seed: u64,
    counts: Vec<u64>,
    total: u64,
}

impl SamplingOracle {
    pub fn new(instance: MonotoneInstance, noise: NoiseModel, seed: u64) -> Self {
        let cells = instance.n() * instance.d();
        SamplingOracle {
            instance,
            noise,
            seed,
            counts: vec![0; cells],
            total: 0,
        }
    }

    pub fn instance(&self) -> &MonotoneInstance {
        &self.instance
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n(&self) -> usize {
        self.instance.n()
    }

    pub fn d(&self) -> usize {
        self.instance.d()
    }

    /// Total queries made so far.
    pub fn total_queries(&self) -> u64 {
        self.total
    }

    pub fn cell_queries(&self, expert: usize, task: usize) -> u64 {
        self.counts[expert * self.d() + task]
    }

    /// Sum of the per-cell ledger; always equals `total_queries`.
    pub fn ledger_sum(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn query(&mut self, expert: usize, task: usize) -> Result<f64, EnvError> {
        if expert >= self.n() || task >= self.d() {
            return Err(EnvError::BadIndex {
                expert,
                task,
                n: self.n(),
                d: self.d(),
            });
        }
        Ok(self.sample(expert, task))
    }

    /// Unchecked query path for validated callers.
    #[inline]
    pub(crate) fn sample(&mut self, expert: usize, task: usize) -> f64 {
        let d = self.instance.d();
        let mean = self.instance.matrix().mean(expert, task);
        let k = &mut self.counts[expert * d + task];
        let draw = *k;
        *k += 1;
        self.total += 1;
        match self.noise {
            NoiseModel::Noiseless => mean,
            NoiseModel::GaussianUnit => {
                let mut stream = CellStream::at(self.seed, expert, task, draw);
                let z: f64 = StandardNormal.sample(&mut stream);
                mean + z
            }
            NoiseModel::Bernoulli => {
                let mut stream = CellStream::at(self.seed, expert, task, draw);
                if unit_uniform(stream.next_u64()) < mean {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// A view of an oracle restricted to two experts, as used by the duel
/// routines. `first`/`second` name the outcome orientation.
pub struct PairOracle<'a> {
    oracle: &'a mut SamplingOracle,
    first: usize,
    second: usize,
}

impl<'a> PairOracle<'a> {
    pub fn new(oracle: &'a mut SamplingOracle, first: usize, second: usize) -> Self {
        assert!(first < oracle.n() && second < oracle.n() && first != second);
        PairOracle {
            oracle,
            first,
            second,
        }
    }

    pub fn d(&self) -> usize {
        self.oracle.d()
    }

    pub fn first(&self) -> usize {
        self.first
    }

    pub fn second(&self) -> usize {
        self.second
    }

    pub fn total_queries(&self) -> u64 {
        self.oracle.total_queries()
    }

    /// One sample of each expert on `task`; two ledger queries.
    #[inline]
    pub fn sample_pair(&mut self, task: usize) -> (f64, f64) {
        (
            self.oracle.sample(self.first, task),
            self.oracle.sample(self.second, task),
        )
    }

    /// Sum of (first - second) over `t` fresh sample pairs on `task`.
    #[inline]
    pub fn sample_diff_sum(&mut self, task: usize, t: u64) -> f64 {
        let mut acc = 0.0;
        for _ in 0..t {
            let (a, b) = self.sample_pair(task);
            acc += a - b;
        }
        acc
    }
}

/// Two-expert instance with an s-sparse gap vector: the worse row is drawn
/// i.i.d. Uniform[0, 1/2); s distinct tasks get gaps (k / 3s)^2 in draw
/// order; the better row adds the gaps. Row placement is randomized.
pub fn gen_sparse_instance(d: usize, s: usize, seed: u64) -> Result<MonotoneInstance, EnvError> {
    if d == 0 || s == 0 || s > d {
        return Err(EnvError::BadParams(format!(
            "need 1 <= s <= d, got s = {s}, d = {d}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let worse: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..0.5)).collect();
    let mut better = worse.clone();
    let chosen = rand::seq::index::sample(&mut rng, d, s);
    for (k, task) in chosen.iter().enumerate() {
        let gap = ((k + 1) as f64 / (3.0 * s as f64)).powi(2);
        better[task] += gap;
    }
    let rows = if rng.random_bool(0.5) {
        vec![better, worse]
    } else {
        vec![worse, better]
    };
    let matrix = PerformanceMatrix::from_rows(&rows)?;
    Ok(validate_instance(matrix)?)
}

/// Instance with constant rows whose consecutive L2 distances equal `gaps`;
/// the top row is all ones. Requires sum(gaps) / sqrt(d) <= 1.
pub fn gen_chain_instance(n: usize, d: usize, gaps: &[f64]) -> Result<MonotoneInstance, EnvError> {
    if n < 1 || d < 1 || gaps.len() != n - 1 {
        return Err(EnvError::BadParams(format!(
            "need n >= 1 and exactly n - 1 gaps, got n = {n}, {} gaps",
            gaps.len()
        )));
    }
    if gaps.iter().any(|&g| !(g > 0.0) || !g.is_finite()) {
        return Err(EnvError::BadParams("gaps must be positive".into()));
    }
    let step = (d as f64).sqrt().recip();
    let total: f64 = gaps.iter().sum::<f64>() * step;
    if total > 1.0 + 1e-12 {
        return Err(EnvError::BadParams(format!(
            "gaps sum {total:.6} exceeds the unit mean range"
        )));
    }
    let mut rows = Vec::with_capacity(n);
    let mut level = 1.0f64;
    rows.push(vec![level; d]);
    for &g in gaps {
        level = (level - g * step).max(0.0);
        rows.push(vec![level; d]);
    }
    let matrix = PerformanceMatrix::from_rows(&rows)?;
    Ok(validate_instance(matrix)?)
}

/// Writes the plain-text matrix format: a `n d` header line, then n rows of
/// d decimal values.
pub fn write_matrix(path: &Path, matrix: &PerformanceMatrix) -> Result<(), EnvError> {
    let mut out = String::new();
    out.push_str(&format!("{} {}\n", matrix.n(), matrix.d()));
    for i in 0..matrix.n() {
        let row: Vec<String> = matrix.row(i).iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<PerformanceMatrix, EnvError> {
    let text = fs::read_to_string(path)?;
    let mut tokens = text.split_whitespace();
    let n: usize = tokens
        .next()
        .ok_or_else(|| EnvError::Parse("missing n".into()))?
        .parse()
        .map_err(|e| EnvError::Parse(format!("bad n: {e}")))?;
    let d: usize = tokens
        .next()
        .ok_or_else(|| EnvError::Parse("missing d".into()))?
        .parse()
        .map_err(|e| EnvError::Parse(format!("bad d: {e}")))?;
    let mut means = Vec::with_capacity(n * d);
    for tok in tokens {
        let v: f64 = tok
            .parse()
            .map_err(|e| EnvError::Parse(format!("bad value {tok:?}: {e}")))?;
        means.push(v);
    }
    if means.len() != n * d {
        return Err(EnvError::Parse(format!(
            "expected {} values, found {}",
            n * d,
            means.len()
        )));
    }
    Ok(PerformanceMatrix::new(n, d, means)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_instance;

    fn noiseless_oracle(rows: &[&[f64]], seed: u64) -> SamplingOracle {
        let m =
            PerformanceMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
                .unwrap();
        SamplingOracle::new(validate_instance(m).unwrap(), NoiseModel::Noiseless, seed)
    }

    #[test]
    fn noiseless_query_returns_mean_and_counts() {
        let mut o = noiseless_oracle(&[&[0.7, 0.2], &[0.1, 0.1]], 7);
        assert_eq!(o.query(0, 0).unwrap(), 0.7);
        assert_eq!(o.total_queries(), 1);
        assert_eq!(o.cell_queries(0, 0), 1);
        assert_eq!(o.cell_queries(1, 0), 0);
    }

    #[test]
    fn bad_index_is_an_error_and_uncounted() {
        let mut o = noiseless_oracle(&[&[0.7], &[0.1]], 7);
        assert!(o.query(2, 0).is_err());
        assert!(o.query(0, 1).is_err());
        assert_eq!(o.total_queries(), 0);
    }

    #[test]
    fn equal_seeds_give_identical_streams() {
        let m = PerformanceMatrix::from_rows(&[vec![0.5, 0.5], vec![0.2, 0.2]]).unwrap();
        let inst = validate_instance(m).unwrap();
        let mut a = SamplingOracle::new(inst.clone(), NoiseModel::GaussianUnit, 42);
        let mut b = SamplingOracle::new(inst, NoiseModel::GaussianUnit, 42);
        for i in 0..200 {
            let (e, t) = (i % 2, (i / 2) % 2);
            assert_eq!(a.query(e, t).unwrap(), b.query(e, t).unwrap());
        }
    }

    #[test]
    fn stream_is_interleaving_independent() {
        // The k-th draw of a cell does not depend on other cells' history.
        let m = PerformanceMatrix::from_rows(&[vec![0.5, 0.5], vec![0.2, 0.2]]).unwrap();
        let inst = validate_instance(m).unwrap();
        let mut a = SamplingOracle::new(inst.clone(), NoiseModel::GaussianUnit, 9);
        let mut b = SamplingOracle::new(inst, NoiseModel::GaussianUnit, 9);
        let mut from_a = Vec::new();
        for _ in 0..10 {
            a.query(1, 1).unwrap();
            from_a.push(a.query(0, 0).unwrap());
        }
        let from_b: Vec<f64> = (0..10).map(|_| b.query(0, 0).unwrap()).collect();
        assert_eq!(from_a, from_b);
    }

    #[test]
    fn gaussian_mean_is_centered() {
        let m = PerformanceMatrix::from_rows(&[vec![0.0], vec![0.0]]).unwrap();
        let inst = validate_instance(m).unwrap();
        let mut o = SamplingOracle::new(inst, NoiseModel::GaussianUnit, 1234);
        let n = 100_000;
        let sum: f64 = (0..n).map(|_| o.query(0, 0).unwrap()).sum();
        let mean = sum / n as f64;
        // CLT radius ~ 3 / sqrt(1e5).
        assert!(mean.abs() < 0.02, "mean = {mean}");
        assert_eq!(o.total_queries(), n);
    }

    #[test]
    fn gaussian_variance_is_near_unit() {
        let m = PerformanceMatrix::from_rows(&[vec![0.0], vec![0.0]]).unwrap();
        let inst = validate_instance(m).unwrap();
        let mut o = SamplingOracle::new(inst, NoiseModel::GaussianUnit, 77);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| o.query(0, 0).unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!((var - 1.0).abs() < 0.03, "var = {var}");
    }

    #[test]
    fn bernoulli_frequency_matches_mean() {
        let m = PerformanceMatrix::from_rows(&[vec![0.3], vec![0.3]]).unwrap();
        let inst = validate_instance(m).unwrap();
        let mut o = SamplingOracle::new(inst, NoiseModel::Bernoulli, 5);
        let n = 100_000;
        let ones: f64 = (0..n).map(|_| o.query(0, 0).unwrap()).sum();
        let freq = ones / n as f64;
        assert!((freq - 0.3).abs() < 0.01, "freq = {freq}");
    }

    #[test]
    fn ledger_total_equals_cell_sum() {
        let m = PerformanceMatrix::from_rows(&[vec![0.5, 0.4, 0.3], vec![0.2, 0.1, 0.0]]).unwrap();
        let inst = validate_instance(m).unwrap();
        let mut o = SamplingOracle::new(inst, NoiseModel::GaussianUnit, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5000 {
            let e = rng.random_range(0..2);
            let t = rng.random_range(0..3);
            o.query(e, t).unwrap();
        }
        assert_eq!(o.total_queries(), 5000);
        assert_eq!(o.ledger_sum(), 5000);
    }

    #[test]
    fn sparse_instance_matches_protocol() {
        for seed in 0..20 {
            let inst = gen_sparse_instance(10, 2, seed).unwrap();
            assert_eq!(inst.n(), 2);
            assert!(inst.strict_ranking());
            let best = inst.best_expert();
            let worst = 1 - best;
            let gaps: Vec<f64> = (0..10)
                .map(|j| inst.matrix().mean(best, j) - inst.matrix().mean(worst, j))
                .collect();
            let mut nonzero: Vec<f64> = gaps.iter().copied().filter(|&g| g > 0.0).collect();
            nonzero.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let expected = [(1.0f64 / 6.0).powi(2), (2.0f64 / 6.0).powi(2)];
            assert_eq!(nonzero.len(), 2);
            for (g, e) in nonzero.iter().zip(expected) {
                assert!((g - e).abs() < 1e-12);
            }
            for j in 0..10 {
                for i in 0..2 {
                    let v = inst.matrix().mean(i, j);
                    assert!((0.0..=0.5 + 1.0 / 9.0 + 1e-12).contains(&v));
                }
            }
        }
    }

    #[test]
    fn sparse_instance_dense_endpoint() {
        let inst = gen_sparse_instance(10, 10, 99).unwrap();
        let best = inst.best_expert();
        let max_gap = (0..10)
            .map(|j| inst.matrix().mean(best, j) - inst.matrix().mean(1 - best, j))
            .fold(0.0f64, f64::max);
        assert!((max_gap - (10.0f64 / 30.0).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn sparse_instance_rejects_bad_params() {
        assert!(gen_sparse_instance(10, 0, 1).is_err());
        assert!(gen_sparse_instance(10, 11, 1).is_err());
    }

    #[test]
    fn chain_instance_examples() {
        let inst = gen_chain_instance(2, 4, &[1.0]).unwrap();
        assert_eq!(inst.matrix().row(0), &[1.0; 4]);
        assert_eq!(inst.matrix().row(1), &[0.5; 4]);
        let dist: f64 = inst
            .matrix()
            .row(0)
            .iter()
            .zip(inst.matrix().row(1))
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        assert!((dist - 1.0).abs() < 1e-12);

        let inst = gen_chain_instance(3, 1, &[0.3, 0.2]).unwrap();
        assert!((inst.matrix().mean(1, 0) - 0.7).abs() < 1e-12);
        assert!((inst.matrix().mean(2, 0) - 0.5).abs() < 1e-12);
        assert_eq!(inst.ordering(), &[0, 1, 2]);
    }

    #[test]
    fn chain_instance_rejects_range_overflow() {
        assert!(gen_chain_instance(3, 4, &[1.5, 0.6]).is_err());
    }

    #[test]
    fn matrix_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.txt");
        let m = PerformanceMatrix::from_rows(&[vec![1.0, 0.5, 0.25], vec![0.0, 0.0, 0.0]]).unwrap();
        write_matrix(&path, &m).unwrap();
        let back = read_matrix(&path).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn matrix_parse_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        fs::write(&path, "2 2\n1.0 0.5\n0.0\n").unwrap();
        assert!(matches!(read_matrix(&path), Err(EnvError::Parse(_))));
    }
}
