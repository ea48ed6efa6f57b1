//! Shared fixtures for the benchmark targets.

use duelrank_core::{gen_sparse_instance, MonotoneInstance, NoiseModel, SamplingOracle};

pub fn sparse_fixture(d: usize, s: usize) -> MonotoneInstance {
    gen_sparse_instance(d, s, 0xBE7C).expect("valid generator params")
}

pub fn gaussian_oracle(instance: MonotoneInstance, seed: u64) -> SamplingOracle {
    SamplingOracle::new(instance, NoiseModel::GaussianUnit, seed)
}
