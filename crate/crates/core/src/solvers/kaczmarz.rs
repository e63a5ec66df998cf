use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::linalg::{axpy_unchecked, dot_shifted, dot_unchecked, DenseMatrix, RowNormCache};
use crate::sampling::{make_sampler, worker_rows, Prng, RowSampler};
use crate::sysgen::LinearSystem;

use super::monitor::Finished;
use super::{
    cgls, finish_report, resolve_alphas, Diagnostics, Execution, Mode, Monitor, Outcome,
    SamplingScheme, SolverConfig, Variant,
};

/// α·(bᵢ − ⟨A⁽ⁱ⁾, x⟩)/‖A⁽ⁱ⁾‖². Every solver computes its step through
/// here so reductions between variants hold bit for bit.
#[inline]
pub(crate) fn step_scale(alpha: f64, b_i: f64, dot: f64, sq_norm: f64) -> f64 {
    alpha * (b_i - dot) / sq_norm
}

/// Project `x` towards the hyperplane of row `i`, relaxed by `alpha`.
pub fn kaczmarz_step(
    x: &mut [f64],
    a: &DenseMatrix,
    b: &[f64],
    cache: &RowNormCache,
    i: usize,
    alpha: f64,
) {
    let row = a.row(i);
    let s = step_scale(alpha, b[i], dot_unchecked(row, x), cache.sq_norm(i));
    axpy_unchecked(x, s, row);
}

/// x ← x + d/q
#[inline]
pub(crate) fn apply_average(x: &mut [f64], d: &[f64], q: f64) {
    for (xi, di) in x.iter_mut().zip(d) {
        *xi += di / q;
    }
}

/// x ← x + (s·row)/q; bitwise the same as `apply_average` with `d = s·row`.
#[inline]
fn apply_scaled_average(x: &mut [f64], s: f64, row: &[f64], q: f64) {
    for (xi, ri) in x.iter_mut().zip(row) {
        *xi += (s * ri) / q;
    }
}

/// One uniform-weight averaging step: every row in `rows` is projected from
/// the same snapshot of `x` and the `q = rows.len()` updates are averaged.
/// Duplicate rows are allowed.
pub fn rka_combined_step(
    x: &mut [f64],
    a: &DenseMatrix,
    b: &[f64],
    cache: &RowNormCache,
    rows: &[usize],
    alpha: f64,
) {
    let q = rows.len() as f64;
    let scales: Vec<f64> = rows
        .iter()
        .map(|&i| step_scale(alpha, b[i], dot_unchecked(a.row(i), x), cache.sq_norm(i)))
        .collect();
    for (&i, s) in rows.iter().zip(scales) {
        apply_scaled_average(x, s, a.row(i), q);
    }
}

/// `block_size` chained projections on `v`, each on a freshly sampled row.
#[allow(clippy::too_many_arguments)]
pub fn rkab_worker_block(
    v: &mut [f64],
    a: &DenseMatrix,
    b: &[f64],
    cache: &RowNormCache,
    sampler: &RowSampler,
    rng: &mut Prng,
    block_size: usize,
    alpha: f64,
) {
    for _ in 0..block_size {
        let i = sampler.sample(rng);
        kaczmarz_step(v, a, b, cache, i, alpha);
    }
}

/// A worker's RKAB contribution `d = v − x` after `steps` chained
/// projections starting from `x`. Works on the difference directly so that
/// a single step yields exactly `s·A⁽ⁱ⁾`, the RKA contribution.
#[allow(clippy::too_many_arguments)]
#[inline]
pub(crate) fn worker_delta(
    d: &mut [f64],
    x: &[f64],
    a: &DenseMatrix,
    b: &[f64],
    cache: &RowNormCache,
    sampler: &RowSampler,
    rng: &mut Prng,
    steps: usize,
    alpha: f64,
) {
    d.fill(0.0);
    for _ in 0..steps {
        let i = sampler.sample(rng);
        let row = a.row(i);
        let s = step_scale(alpha, b[i], dot_shifted(row, x, d), cache.sq_norm(i));
        axpy_unchecked(d, s, row);
    }
}

/// Samplers for `q` workers under `scheme`.
pub(crate) fn worker_samplers(
    cache: &RowNormCache,
    q: usize,
    scheme: SamplingScheme,
) -> Result<Vec<RowSampler>> {
    let m = cache.sq_norms().len();
    match scheme {
        SamplingScheme::FullAccess => {
            let s = make_sampler(cache, 0, m - 1)?;
            Ok(vec![s; q])
        }
        SamplingScheme::Distributed => (0..q)
            .map(|t| {
                let (lo, hi) = worker_rows(t, q, m)?;
                make_sampler(cache, lo, hi)
            })
            .collect(),
    }
}

trait Stepper {
    fn step(&mut self, x: &mut [f64]);
}

struct Ctx<'a> {
    a: &'a DenseMatrix,
    b: &'a [f64],
    cache: &'a RowNormCache,
}

struct Cyclic<'a> {
    ctx: Ctx<'a>,
    alpha: f64,
    next: usize,
}

impl Stepper for Cyclic<'_> {
    fn step(&mut self, x: &mut [f64]) {
        kaczmarz_step(x, self.ctx.a, self.ctx.b, self.ctx.cache, self.next, self.alpha);
        self.next = (self.next + 1) % self.ctx.a.rows();
    }
}

struct Randomized<'a> {
    ctx: Ctx<'a>,
    sampler: RowSampler,
    rng: Prng,
    alpha: f64,
}

impl Stepper for Randomized<'_> {
    fn step(&mut self, x: &mut [f64]) {
        let i = self.sampler.sample(&mut self.rng);
        kaczmarz_step(x, self.ctx.a, self.ctx.b, self.ctx.cache, i, self.alpha);
    }
}

struct Averaged<'a> {
    ctx: Ctx<'a>,
    samplers: Vec<RowSampler>,
    rngs: Vec<Prng>,
    alphas: Vec<f64>,
    picks: Vec<(usize, f64)>,
}

impl Stepper for Averaged<'_> {
    fn step(&mut self, x: &mut [f64]) {
        let Ctx { a, b, cache } = self.ctx;
        let q = self.samplers.len() as f64;
        self.picks.clear();
        for ((sampler, rng), &alpha) in self.samplers.iter().zip(&mut self.rngs).zip(&self.alphas) {
            let i = sampler.sample(rng);
            let s = step_scale(alpha, b[i], dot_unchecked(a.row(i), x), cache.sq_norm(i));
            self.picks.push((i, s));
        }
        for &(i, s) in &self.picks {
            apply_scaled_average(x, s, a.row(i), q);
        }
    }
}

struct Blocked<'a> {
    ctx: Ctx<'a>,
    samplers: Vec<RowSampler>,
    rngs: Vec<Prng>,
    alphas: Vec<f64>,
    deltas: Vec<Vec<f64>>,
    steps: usize,
}

impl Stepper for Blocked<'_> {
    fn step(&mut self, x: &mut [f64]) {
        let Ctx { a, b, cache } = self.ctx;
        let q = self.samplers.len() as f64;
        for (((sampler, rng), &alpha), d) in self
            .samplers
            .iter()
            .zip(&mut self.rngs)
            .zip(&self.alphas)
            .zip(&mut self.deltas)
        {
            worker_delta(d, x, a, b, cache, sampler, rng, self.steps, alpha);
        }
        for d in &self.deltas {
            apply_average(x, d, q);
        }
    }
}

fn drive<S: Stepper>(stepper: &mut S, x: &mut [f64], monitor: &mut Monitor<'_>) -> (usize, Duration) {
    let start = Instant::now();
    let mut k = 0;
    while !monitor.should_stop(k, x) {
        stepper.step(x);
        k += 1;
    }
    (k, start.elapsed())
}

/// Run any variant single-threaded. RKA and RKAB simulate their `q`
/// workers in a loop, each with its own stream `worker_rng(base_seed, t)`.
pub fn run_sequential(sys: &LinearSystem, cfg: &SolverConfig, mode: Mode<'_>) -> Result<Outcome> {
    cfg.validate()?;
    if cfg.variant == Variant::Cgls {
        return run_cgls(sys, cfg, mode);
    }
    let cache = RowNormCache::new(&sys.a)?;
    let alphas = resolve_alphas(sys, cfg)?;
    let mut monitor = Monitor::new(sys, cfg, mode)?;
    let mut x = vec![0.0; sys.a.cols()];
    let ctx = Ctx {
        a: &sys.a,
        b: &sys.b,
        cache: &cache,
    };

    let (iterations, elapsed) = match cfg.variant {
        Variant::Ck => drive(
            &mut Cyclic {
                ctx,
                alpha: alphas[0],
                next: 0,
            },
            &mut x,
            &mut monitor,
        ),
        Variant::Rk => drive(
            &mut Randomized {
                sampler: make_sampler(&cache, 0, sys.a.rows() - 1)?,
                ctx,
                rng: Prng::new(cfg.base_seed),
                alpha: alphas[0],
            },
            &mut x,
            &mut monitor,
        ),
        Variant::Rka => drive(
            &mut Averaged {
                samplers: worker_samplers(&cache, cfg.q, cfg.scheme)?,
                ctx,
                rngs: (0..cfg.q).map(|t| Prng::worker(cfg.base_seed, t)).collect(),
                alphas: alphas.clone(),
                picks: Vec::with_capacity(cfg.q),
            },
            &mut x,
            &mut monitor,
        ),
        Variant::Rkab => drive(
            &mut Blocked {
                samplers: worker_samplers(&cache, cfg.q, cfg.scheme)?,
                ctx,
                rngs: (0..cfg.q).map(|t| Prng::worker(cfg.base_seed, t)).collect(),
                alphas: alphas.clone(),
                deltas: vec![vec![0.0; sys.a.cols()]; cfg.q],
                steps: cfg.rkab_steps(),
            },
            &mut x,
            &mut monitor,
        ),
        Variant::Cgls => unreachable!(),
    };

    let report = finish_report(
        Finished {
            sys,
            cfg,
            exec: Execution::Sequential,
            alphas: &alphas,
            iterations,
            converged: monitor.converged,
            elapsed,
            error_evaluations: monitor.error_evaluations,
            fixed: monitor.is_fixed(),
        },
        &x,
    );
    Ok(Outcome {
        report,
        x,
        trace: std::mem::take(&mut monitor.records),
        diagnostics: Diagnostics::default(),
    })
}

fn run_cgls(sys: &LinearSystem, cfg: &SolverConfig, mode: Mode<'_>) -> Result<Outcome> {
    if !matches!(mode, Mode::Converge) {
        return Err(Error::Unsupported(
            "cgls only runs to convergence".to_string(),
        ));
    }
    let start = Instant::now();
    let sol = match cgls::cgls(&sys.a, &sys.b, 1e-12, cfg.max_iterations) {
        Ok(s) => s,
        Err(Error::CglsNotConverged { iterations, best, residual }) => cgls::CglsSolution {
            x: best,
            iterations,
            relative_residual: residual,
        },
        Err(e) => return Err(e),
    };
    let elapsed = start.elapsed();
    let reference = sys.reference().ok_or(Error::MissingReference)?;
    let converged = crate::linalg::dist_sq(&sol.x, reference) < cfg.epsilon;
    let report = finish_report(
        Finished {
            sys,
            cfg,
            exec: Execution::Sequential,
            alphas: &[1.0],
            iterations: sol.iterations,
            converged,
            elapsed,
            error_evaluations: 1,
            fixed: false,
        },
        &sol.x,
    );
    Ok(Outcome {
        report,
        x: sol.x,
        trace: Vec::new(),
        diagnostics: Diagnostics::default(),
    })
}

fn with_variant(cfg: &SolverConfig, variant: Variant) -> SolverConfig {
    SolverConfig {
        variant,
        ..cfg.clone()
    }
}

/// Cyclic Kaczmarz: row `k mod m` at iteration `k`.
pub fn solve_ck(sys: &LinearSystem, cfg: &SolverConfig) -> Result<Outcome> {
    run_sequential(sys, &with_variant(cfg, Variant::Ck), Mode::Converge)
}

pub fn solve_rk(sys: &LinearSystem, cfg: &SolverConfig) -> Result<Outcome> {
    run_sequential(sys, &with_variant(cfg, Variant::Rk), Mode::Converge)
}

pub fn solve_rka_seq(sys: &LinearSystem, cfg: &SolverConfig) -> Result<Outcome> {
    run_sequential(sys, &with_variant(cfg, Variant::Rka), Mode::Converge)
}

pub fn solve_rkab_seq(sys: &LinearSystem, cfg: &SolverConfig) -> Result<Outcome> {
    run_sequential(sys, &with_variant(cfg, Variant::Rkab), Mode::Converge)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;

    fn cache(a: &DenseMatrix) -> RowNormCache {
        RowNormCache::new(a).unwrap()
    }

    #[test]
    fn step_examples() {
        let a = DenseMatrix::from_rows(&[[1.0, 0.0], [3.0, 4.0]]).unwrap();
        let c = cache(&a);
        let b = [2.0, 10.0];

        let mut x = vec![0.0, 0.0];
        kaczmarz_step(&mut x, &a, &b, &c, 0, 1.0);
        assert_eq!(x, [2.0, 0.0]);

        let mut x = vec![0.0, 0.0];
        kaczmarz_step(&mut x, &a, &b, &c, 1, 1.0);
        assert!((x[0] - 1.2).abs() < 1e-15 && (x[1] - 1.6).abs() < 1e-15);
        assert!((dot(a.row(1), &x).unwrap() - 10.0).abs() < 1e-12);

        let mut x = vec![0.5, -0.5];
        kaczmarz_step(&mut x, &a, &b, &c, 1, 0.0);
        assert_eq!(x, [0.5, -0.5]);
    }

    #[test]
    fn combined_step_examples() {
        let a = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]]).unwrap();
        let c = cache(&a);
        let b = [1.0, 2.0, 3.0];
        let x0 = vec![0.3, -0.7];

        let mut single = x0.clone();
        kaczmarz_step(&mut single, &a, &b, &c, 1, 1.0);
        let mut q1 = x0.clone();
        rka_combined_step(&mut q1, &a, &b, &c, &[1], 1.0);
        assert_eq!(single, q1);

        let mut dup = x0.clone();
        rka_combined_step(&mut dup, &a, &b, &c, &[1, 1], 1.0);
        for (u, v) in dup.iter().zip(&single) {
            assert!((u - v).abs() < 1e-15);
        }

        let id = DenseMatrix::identity(2).unwrap();
        let mut x = vec![0.0, 0.0];
        rka_combined_step(&mut x, &id, &[2.0, 4.0], &cache(&id), &[0, 1], 1.0);
        assert_eq!(x, [1.0, 2.0]);
    }

    #[test]
    fn worker_block_examples() {
        let id = DenseMatrix::identity(4).unwrap();
        let c = cache(&id);
        let b = [1.0, -2.0, 3.0, 0.5];

        // block_size = 1 is one projection on the sampled row
        let sampler = make_sampler(&c, 2, 2).unwrap();
        let mut v = vec![0.0; 4];
        rkab_worker_block(&mut v, &id, &b, &c, &sampler, &mut Prng::new(0), 1, 1.0);
        assert_eq!(v, [0.0, 0.0, 3.0, 0.0]);

        // orthogonal rows: any order covering all rows lands on b
        let full = make_sampler(&c, 0, 3).unwrap();
        let mut rng = Prng::new(8);
        let mut v = vec![0.0; 4];
        let mut seen = [false; 4];
        let mut probe = rng.clone();
        for _ in 0..64 {
            seen[full.sample(&mut probe)] = true;
        }
        assert!(seen.iter().all(|s| *s));
        rkab_worker_block(&mut v, &id, &b, &c, &full, &mut rng, 64, 1.0);
        assert_eq!(v, b);

        let mut v = vec![1.0; 4];
        rkab_worker_block(&mut v, &id, &b, &c, &full, &mut Prng::new(3), 10, 0.0);
        assert_eq!(v, [1.0; 4]);
    }

    #[test]
    fn single_step_delta_matches_rka_contribution() {
        let a = DenseMatrix::from_rows(&[[1.0, 2.0, 0.5], [3.0, -1.0, 2.0]]).unwrap();
        let c = cache(&a);
        let b = [1.0, 2.0];
        let x = vec![0.25, -1.5, 2.0];
        let s = make_sampler(&c, 0, 1).unwrap();
        let mut d = vec![9.0; 3];
        let mut rng = Prng::new(4);
        let i = s.sample(&mut rng.clone());
        worker_delta(&mut d, &x, &a, &b, &c, &s, &mut rng, 1, 1.3);
        let sc = step_scale(1.3, b[i], dot(a.row(i), &x).unwrap(), c.sq_norm(i));
        for (dj, rj) in d.iter().zip(a.row(i)) {
            assert_eq!(dj.to_bits(), (sc * rj).to_bits());
        }
    }
}
