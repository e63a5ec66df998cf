//! Shared-memory solvers with `q` real OS threads.
//!
//! * [`solve_rk_block_sequential`] keeps plain RK and splits each iteration's
//!   inner product and update across threads by column blocks.
//! * [`solve_rka_parallel`]: each thread projects one sampled row from a
//!   snapshot `x_prev` and adds its share into `x` inside a mutual-exclusion
//!   region.
//! * [`solve_rkab_parallel`]: each thread chains its block of projections on
//!   a private difference vector `d = v − x`, then adds `d/q` into `x` under
//!   mutual exclusion.
//!
//! Both averaging solvers use two barriers per outer iteration and draw
//! their rows from `worker_rng(base_seed, t)`, so they take the same rows
//! as their sequential counterparts. Only the order of the additions into
//! `x` differs.

use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Barrier, Mutex, RwLock};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::linalg::{block_bounds, dist_sq, RowNormCache};
use crate::sampling::{make_sampler, Prng};
use crate::solvers::{
    apply_average, finish_report, resolve_alphas, step_scale, worker_delta, worker_samplers,
    Diagnostics, Execution, Finished, Mode, Outcome, SolverConfig, Variant,
};
use crate::sysgen::LinearSystem;

/// Dispatch a shared-memory solve on `cfg.variant`.
pub fn run_shared(sys: &LinearSystem, cfg: &SolverConfig, mode: Mode<'_>) -> Result<Outcome> {
    match cfg.variant {
        Variant::Rk => solve_rk_block_sequential(sys, cfg, mode),
        Variant::Rka => rka(sys, cfg, mode, None),
        Variant::Rkab => rkab(sys, cfg, mode),
        v => Err(Error::Unsupported(format!(
            "{v} has no shared-memory implementation"
        ))),
    }
}

pub fn solve_rka_parallel(sys: &LinearSystem, cfg: &SolverConfig, mode: Mode<'_>) -> Result<Outcome> {
    rka(sys, cfg, mode, None)
}

pub fn solve_rkab_parallel(sys: &LinearSystem, cfg: &SolverConfig, mode: Mode<'_>) -> Result<Outcome> {
    rkab(sys, cfg, mode)
}

/// Barrier that counts the waits of worker 0.
struct CountingBarrier {
    inner: Barrier,
    waits: AtomicUsize,
}

impl CountingBarrier {
    fn new(q: usize) -> Self {
        Self {
            inner: Barrier::new(q),
            waits: AtomicUsize::new(0),
        }
    }

    fn wait(&self, worker: usize) {
        if worker == 0 {
            self.waits.fetch_add(1, Ordering::Relaxed);
        }
        self.inner.wait();
    }

    fn count(&self) -> usize {
        self.waits.load(Ordering::Relaxed)
    }
}

/// f64 slots written and read in phases separated by barriers.
struct SharedSlots(Vec<AtomicU64>);

impl SharedSlots {
    fn new(len: usize) -> Self {
        Self((0..len).map(|_| AtomicU64::new(0)).collect())
    }

    #[inline]
    fn get(&self, i: usize) -> f64 {
        f64::from_bits(self.0[i].load(Ordering::Relaxed))
    }

    #[inline]
    fn set(&self, i: usize, v: f64) {
        self.0[i].store(v.to_bits(), Ordering::Relaxed)
    }
}

/// Stop rule shared by all workers of one solve.
#[derive(Clone, Copy)]
struct StopRule<'a> {
    reference: Option<&'a [f64]>,
    epsilon: f64,
    budget: usize,
}

impl<'a> StopRule<'a> {
    fn new(sys: &'a LinearSystem, cfg: &SolverConfig, mode: Mode<'_>) -> Result<Self> {
        cfg.validate()?;
        match mode {
            Mode::Converge => Ok(Self {
                reference: Some(sys.reference().ok_or(Error::MissingReference)?),
                epsilon: cfg.epsilon,
                budget: cfg.max_iterations,
            }),
            Mode::Fixed(k) => Ok(Self {
                reference: None,
                epsilon: cfg.epsilon,
                budget: k,
            }),
            Mode::Trace { .. } => Err(Error::Unsupported(
                "traces are recorded with the sequential solvers".to_string(),
            )),
        }
    }

    fn checks_error(&self) -> bool {
        self.reference.is_some()
    }
}

/// What worker 0 brings back from a parallel solve.
struct Lead {
    iterations: usize,
    converged: bool,
    error_evaluations: usize,
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    sys: &LinearSystem,
    cfg: &SolverConfig,
    alphas: &[f64],
    lead: Lead,
    fixed: bool,
    elapsed: Duration,
    x: Vec<f64>,
    barrier_waits: Option<usize>,
) -> Outcome {
    let report = finish_report(
        Finished {
            sys,
            cfg,
            exec: Execution::Shared,
            alphas,
            iterations: lead.iterations,
            converged: lead.converged,
            elapsed,
            error_evaluations: lead.error_evaluations,
            fixed,
        },
        &x,
    );
    Outcome {
        report,
        x,
        trace: Vec::new(),
        diagnostics: Diagnostics {
            barrier_waits,
            ..Diagnostics::default()
        },
    }
}

/// RK with the inner product, the error check and the update split over
/// `q` threads by column blocks. Every thread draws the same row from its
/// own copy of the sequential stream; partial sums are combined in thread
/// order, so every thread reaches the same scale and the same decision.
pub fn solve_rk_block_sequential(sys: &LinearSystem, cfg: &SolverConfig, mode: Mode<'_>) -> Result<Outcome> {
    let cfg = &SolverConfig {
        variant: Variant::Rk,
        ..cfg.clone()
    };
    let stop = StopRule::new(sys, cfg, mode)?;
    let (a, b) = (&sys.a, &sys.b);
    let (m, n) = (a.rows(), a.cols());
    let q = cfg.q.min(n);
    let cache = RowNormCache::new(a)?;
    let sampler = make_sampler(&cache, 0, m - 1)?;
    let alpha = resolve_alphas(sys, cfg)?[0];

    // [parity][worker][dot, err]; parity alternates so one barrier per
    // iteration suffices
    let partials = SharedSlots::new(2 * q * 2);
    let slot = move |parity: usize, t: usize, which: usize| (parity * q + t) * 2 + which;
    let barrier = CountingBarrier::new(q);

    let start = Instant::now();
    let (chunks, lead) = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..q)
            .map(|t| {
                let cols = block_bounds(t, q, n);
                let (cache, sampler, partials, barrier) = (&cache, &sampler, &partials, &barrier);
                scope.spawn(move || {
                    let mut x = vec![0.0; cols.len()];
                    let mut rng = Prng::new(cfg.base_seed);
                    let mut k = 0;
                    let mut evals = 0;
                    let converged = loop {
                        let i = sampler.sample(&mut rng);
                        let row = &a.row(i)[cols.clone()];
                        let mut pd = 0.0;
                        for (aj, xj) in row.iter().zip(&x) {
                            pd += aj * xj;
                        }
                        let pe = stop.reference.map_or(0.0, |r| dist_sq(&x, &r[cols.clone()]));
                        let parity = k % 2;
                        partials.set(slot(parity, t, 0), pd);
                        partials.set(slot(parity, t, 1), pe);
                        barrier.wait(t);
                        if stop.checks_error() {
                            evals += 1;
                            let err: f64 = (0..q).map(|w| partials.get(slot(parity, w, 1))).sum();
                            if err < stop.epsilon {
                                break true;
                            }
                        }
                        if k >= stop.budget {
                            break false;
                        }
                        let dot: f64 = (0..q).map(|w| partials.get(slot(parity, w, 0))).sum();
                        let s = step_scale(alpha, b[i], dot, cache.sq_norm(i));
                        for (xj, aj) in x.iter_mut().zip(row) {
                            *xj += s * aj;
                        }
                        k += 1;
                    };
                    let lead = Lead {
                        iterations: k,
                        converged,
                        error_evaluations: evals,
                    };
                    (cols, x, lead)
                })
            })
            .collect();
        let mut lead = None;
        let mut chunks = Vec::with_capacity(q);
        for h in handles {
            let (cols, x, l) = h.join().expect("worker panicked");
            lead.get_or_insert(l);
            chunks.push((cols, x));
        }
        (chunks, lead.expect("at least one worker"))
    });
    let elapsed = start.elapsed();
    let mut x = vec![0.0; n];
    for (cols, part) in chunks {
        x[cols].copy_from_slice(&part);
    }
    let fixed = !stop.checks_error();
    Ok(assemble(sys, cfg, &[alpha], lead, fixed, elapsed, x, Some(barrier.count())))
}

/// Instrumentation for the averaging solver; test builds only.
#[derive(Default)]
struct Probe {
    /// added to `x[0]` by worker 0 after the snapshot barrier, before it
    /// computes its own scale
    perturb: Option<f64>,
    /// (iteration, worker, row, scale)
    scales: Mutex<Vec<(usize, usize, usize, f64)>>,
    /// x at the start of every outer iteration
    snapshots: Mutex<Vec<Vec<f64>>>,
}

/// Per-iteration shape:
///
/// 1. barrier
/// 2. copy this thread's slice of `x` into `x_prev`; worker 0 decides
///    whether to stop
/// 3. barrier
/// 4. sample a row, scale = α(b_row − ⟨A_row, x_prev⟩)/‖A_row‖²
/// 5. under the write lock: `x += (scale·A_row)/q`
fn rka(sys: &LinearSystem, cfg: &SolverConfig, mode: Mode<'_>, probe: Option<&Probe>) -> Result<Outcome> {
    let cfg = &SolverConfig {
        variant: Variant::Rka,
        ..cfg.clone()
    };
    let stop = StopRule::new(sys, cfg, mode)?;
    let (a, b) = (&sys.a, &sys.b);
    let n = a.cols();
    let q = cfg.q;
    let qf = q as f64;
    let cache = RowNormCache::new(a)?;
    let samplers = worker_samplers(&cache, q, cfg.scheme)?;
    let alphas = resolve_alphas(sys, cfg)?;

    let x = RwLock::new(vec![0.0; n]);
    let x_prev = SharedSlots::new(n);
    let halt = AtomicBool::new(false);
    let barrier = CountingBarrier::new(q);

    let start = Instant::now();
    let lead = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..q)
            .map(|t| {
                let (cache, sampler, alpha) = (&cache, &samplers[t], alphas[t]);
                let (x, x_prev, halt, barrier) = (&x, &x_prev, &halt, &barrier);
                let cols = block_bounds(t, q, n);
                scope.spawn(move || {
                    let mut rng = Prng::worker(cfg.base_seed, t);
                    let mut k = 0;
                    let mut evals = 0;
                    let mut converged = false;
                    loop {
                        barrier.wait(t);
                        {
                            let xr = x.read().unwrap();
                            for j in cols.clone() {
                                x_prev.set(j, xr[j]);
                            }
                            if t == 0 {
                                if let Some(p) = probe {
                                    p.snapshots.lock().unwrap().push(xr.clone());
                                }
                                let mut done = k >= stop.budget;
                                if let Some(r) = stop.reference {
                                    evals += 1;
                                    if dist_sq(&xr, r) < stop.epsilon {
                                        converged = true;
                                        done = true;
                                    }
                                }
                                halt.store(done, Ordering::Relaxed);
                            }
                        }
                        barrier.wait(t);
                        if halt.load(Ordering::Relaxed) {
                            break;
                        }

                        if t == 0 {
                            if let Some(delta) = probe.and_then(|p| p.perturb) {
                                x.write().unwrap()[0] += delta;
                            }
                        }
                        let i = sampler.sample(&mut rng);
                        let row = a.row(i);
                        let mut dot = 0.0;
                        for (j, aj) in row.iter().enumerate() {
                            dot += aj * x_prev.get(j);
                        }
                        let s = step_scale(alpha, b[i], dot, cache.sq_norm(i));
                        if let Some(p) = probe {
                            p.scales.lock().unwrap().push((k, t, i, s));
                        }
                        {
                            let mut xw = x.write().unwrap();
                            for (xj, aj) in xw.iter_mut().zip(row) {
                                *xj += (s * aj) / qf;
                            }
                        }
                        k += 1;
                    }
                    Lead {
                        iterations: k,
                        converged,
                        error_evaluations: evals,
                    }
                })
            })
            .collect();
        let leads: Vec<Lead> = handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect();
        leads.into_iter().next().expect("at least one worker")
    });
    let elapsed = start.elapsed();
    let x = x.into_inner().unwrap();
    let fixed = !stop.checks_error();
    Ok(assemble(sys, cfg, &alphas, lead, fixed, elapsed, x, Some(barrier.count())))
}

/// Per-iteration shape:
///
/// 1. barrier
/// 2. worker 0 decides whether to stop; every thread chains its projections
///    into a private `d`, reading `x` only
/// 3. barrier
/// 4. under the write lock: `x += d/q`
fn rkab(sys: &LinearSystem, cfg: &SolverConfig, mode: Mode<'_>) -> Result<Outcome> {
    let cfg = &SolverConfig {
        variant: Variant::Rkab,
        ..cfg.clone()
    };
    let stop = StopRule::new(sys, cfg, mode)?;
    let (a, b) = (&sys.a, &sys.b);
    let n = a.cols();
    let q = cfg.q;
    let qf = q as f64;
    let steps = cfg.rkab_steps();
    let cache = RowNormCache::new(a)?;
    let samplers = worker_samplers(&cache, q, cfg.scheme)?;
    let alphas = resolve_alphas(sys, cfg)?;

    let x = RwLock::new(vec![0.0; n]);
    let halt = AtomicBool::new(false);
    let barrier = CountingBarrier::new(q);

    let start = Instant::now();
    let lead = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..q)
            .map(|t| {
                let (cache, sampler, alpha) = (&cache, &samplers[t], alphas[t]);
                let (x, halt, barrier) = (&x, &halt, &barrier);
                scope.spawn(move || {
                    let mut rng = Prng::worker(cfg.base_seed, t);
                    let mut d = vec![0.0; n];
                    let mut k = 0;
                    let mut evals = 0;
                    let mut converged = false;
                    loop {
                        barrier.wait(t);
                        {
                            let xr = x.read().unwrap();
                            if t == 0 {
                                let mut done = k >= stop.budget;
                                if let Some(r) = stop.reference {
                                    evals += 1;
                                    if dist_sq(&xr, r) < stop.epsilon {
                                        converged = true;
                                        done = true;
                                    }
                                }
                                halt.store(done, Ordering::Relaxed);
                            }
                            if k < stop.budget {
                                worker_delta(&mut d, &xr, a, b, cache, sampler, &mut rng, steps, alpha);
                            }
                        }
                        barrier.wait(t);
                        if halt.load(Ordering::Relaxed) {
                            break;
                        }
                        apply_average(&mut x.write().unwrap(), &d, qf);
                        k += 1;
                    }
                    Lead {
                        iterations: k,
                        converged,
                        error_evaluations: evals,
                    }
                })
            })
            .collect();
        let leads: Vec<Lead> = handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect();
        leads.into_iter().next().expect("at least one worker")
    });
    let elapsed = start.elapsed();
    let x = x.into_inner().unwrap();
    let fixed = !stop.checks_error();
    Ok(assemble(sys, cfg, &alphas, lead, fixed, elapsed, x, Some(barrier.count())))
}
