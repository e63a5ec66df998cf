#![allow(dead_code)]

use kaczmarz::prelude::*;

pub fn system(m: usize, n: usize, seed: u64) -> LinearSystem {
    generate(&GeneratorConfig::new(m, n, seed), m, n).unwrap()
}

pub fn inconsistent(m: usize, n: usize, seed: u64, noise_seed: u64) -> LinearSystem {
    make_inconsistent(&system(m, n, seed), noise_seed).unwrap()
}

pub fn bitwise_eq(u: &[f64], v: &[f64]) -> bool {
    u.len() == v.len() && u.iter().zip(v).all(|(a, b)| a.to_bits() == b.to_bits())
}

pub fn max_abs_diff(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Unrounded 10-seed mean iteration count; every seed must converge.
pub fn mean_iterations(sys: &LinearSystem, cfg: &SolverConfig, exec: Execution) -> f64 {
    let study = measure_iterations(sys, cfg, exec, &Protocol::default()).unwrap();
    assert!(study.all_converged(), "{:?} did not converge on every seed", cfg.variant);
    study.raw_mean().unwrap()
}
