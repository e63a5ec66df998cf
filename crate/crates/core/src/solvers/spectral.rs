//! Extreme singular values of `A` and the optimal uniform averaging weight.

use crate::error::{Error, Extreme, Result};
use crate::linalg::{norm, norm_sq, DenseMatrix};
use crate::sampling::{worker_rows, Prng};

use super::cgls::solve_normal_equations;

const RAYLEIGH_TOL: f64 = 1e-12;
const MAX_OUTER: usize = 5000;
const INNER_TOL: f64 = 1e-12;
const START_SEED: u64 = 0x0005_eed0_fa11;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralStats {
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub frobenius_sq: f64,
    /// σ_min² / ‖A‖_F²
    pub s_min: f64,
    /// σ_max² / ‖A‖_F²
    pub s_max: f64,
}

fn start_vector(n: usize) -> Vec<f64> {
    let mut rng = Prng::new(START_SEED);
    let mut v: Vec<f64> = (0..n).map(|_| rng.next_f64() + 0.5).collect();
    let s = norm(&v);
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// ‖A v‖² for unit `v`, the Rayleigh quotient of AᵀA.
fn rayleigh(a: &DenseMatrix, v: &[f64]) -> Result<f64> {
    Ok(norm_sq(&a.mul_vec(v)?))
}

fn largest_eigenvalue(a: &DenseMatrix) -> Result<f64> {
    let mut v = start_vector(a.cols());
    let mut prev = rayleigh(a, &v)?;
    for _ in 0..MAX_OUTER {
        let w = a.tr_mul_vec(&a.mul_vec(&v)?)?;
        let wn = norm(&w);
        if wn == 0.0 {
            return Ok(0.0);
        }
        v = w.into_iter().map(|x| x / wn).collect();
        let lambda = rayleigh(a, &v)?;
        if (lambda - prev).abs() <= RAYLEIGH_TOL * lambda {
            return Ok(lambda);
        }
        prev = lambda;
    }
    Err(Error::SpectralNotConverged {
        extreme: Extreme::Largest,
        iterations: MAX_OUTER,
    })
}

fn smallest_eigenvalue(a: &DenseMatrix) -> Result<f64> {
    let n = a.cols();
    let inner_max = 20 * n + 200;
    let fail = |iterations| Error::SpectralNotConverged {
        extreme: Extreme::Smallest,
        iterations,
    };
    let mut z = start_vector(n);
    let mut prev = rayleigh(a, &z)?;
    for it in 0..MAX_OUTER {
        let y = solve_normal_equations(a, &z, INNER_TOL, inner_max).ok_or(fail(it))?;
        let yn = norm(&y);
        if !yn.is_finite() || yn == 0.0 {
            return Err(fail(it));
        }
        z = y.into_iter().map(|x| x / yn).collect();
        let mu = rayleigh(a, &z)?;
        if (mu - prev).abs() <= RAYLEIGH_TOL * mu {
            return Ok(mu);
        }
        prev = mu;
    }
    Err(fail(MAX_OUTER))
}

/// σ_max by power iteration on AᵀA, σ_min by inverse iteration with
/// inner CG solves; both matrix-free.
pub fn spectral_stats(a: &DenseMatrix) -> Result<SpectralStats> {
    if a.rows() < a.cols() {
        return Err(Error::RankDeficient {
            worker: 0,
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let frobenius_sq = a.frobenius_sq();
    let lmax = largest_eigenvalue(a)?;
    let lmin = smallest_eigenvalue(a)?;
    if !(lmin > 0.0) {
        return Err(Error::SpectralNotConverged {
            extreme: Extreme::Smallest,
            iterations: 0,
        });
    }
    Ok(SpectralStats {
        sigma_max: lmax.sqrt(),
        sigma_min: lmin.sqrt(),
        frobenius_sq,
        s_min: lmin / frobenius_sq,
        s_max: lmax / frobenius_sq,
    })
}

/// Optimal uniform weight for averaging `q` projections on a consistent
/// system. `q = 1` takes the first branch and gives 1.
pub fn optimal_alpha(stats: &SpectralStats, q: usize) -> f64 {
    let q = q.max(1) as f64;
    let gap = stats.s_max - stats.s_min;
    if q == 1.0 || gap <= 1.0 / (q - 1.0) {
        q / (1.0 + (q - 1.0) * stats.s_min)
    } else {
        2.0 * q / (1.0 + (q - 1.0) * (stats.s_min + stats.s_max))
    }
}

/// One α per worker, each computed only from that worker's contiguous row
/// block `⌊t·m/q⌋ ..= ⌊(t+1)·m/q⌋ − 1`.
pub fn partial_alphas(a: &DenseMatrix, q: usize) -> Result<Vec<f64>> {
    if q == 0 || q > a.rows() {
        return Err(Error::invalid("q", format!("must be in 1..={}", a.rows())));
    }
    (0..q)
        .map(|t| {
            let (lo, hi) = worker_rows(t, q, a.rows())?;
            let rows = hi - lo + 1;
            if rows < a.cols() {
                return Err(Error::RankDeficient {
                    worker: t,
                    rows,
                    cols: a.cols(),
                });
            }
            let block = a.row_block(lo, hi)?;
            let stats = spectral_stats(&block).map_err(|e| match e {
                Error::RankDeficient { rows, cols, .. } => Error::RankDeficient {
                    worker: t,
                    rows,
                    cols,
                },
                other => other,
            })?;
            Ok(optimal_alpha(&stats, q))
        })
        .collect()
}
