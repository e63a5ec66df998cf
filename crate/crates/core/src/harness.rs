//! Measurement protocol: iteration counts over several seeds, a timed
//! replay at a fixed budget, error/residual traces, and CSV output.
//!
//! Seeds run as `base_seed + 0 .. base_seed + n_seeds - 1`. The replay
//! budget is the ceiling of the mean iteration count over the seeds that
//! converged; seeds that needed more than the mean stop short of ε during
//! the replay.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::solvers::{run, run_sequential, Execution, Mode, RunReport, SolverConfig, TraceRecord};
use crate::sysgen::LinearSystem;

/// Records averaged by [`plateau`].
pub const PLATEAU_WINDOW: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Protocol {
    pub n_seeds: usize,
    pub epsilon: f64,
    pub trace_step: usize,
}

impl Default for Protocol {
    fn default() -> Self {
        Self {
            n_seeds: 10,
            epsilon: 1e-8,
            trace_step: 100,
        }
    }
}

impl Protocol {
    pub fn validate(&self) -> Result<()> {
        if self.n_seeds == 0 {
            return Err(Error::invalid("seeds", "must be at least 1"));
        }
        if self.trace_step == 0 {
            return Err(Error::invalid("step", "must be at least 1"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct IterationStudy {
    /// one report per seed, labelled `seed`
    pub per_seed: Vec<RunReport>,
    /// ⌈mean⌉ over converged seeds; `None` if none converged
    pub mean_iterations: Option<usize>,
}

impl IterationStudy {
    pub fn all_converged(&self) -> bool {
        self.per_seed.iter().all(|r| r.converged)
    }

    pub fn counts(&self) -> Vec<usize> {
        self.per_seed.iter().map(|r| r.iterations).collect()
    }

    /// Unrounded mean over converged seeds.
    pub fn raw_mean(&self) -> Option<f64> {
        let done: Vec<f64> = self
            .per_seed
            .iter()
            .filter(|r| r.converged)
            .map(|r| r.iterations as f64)
            .collect();
        (!done.is_empty()).then(|| done.iter().sum::<f64>() / done.len() as f64)
    }
}

/// Run `cfg` to ε once per seed.
pub fn measure_iterations(
    sys: &LinearSystem,
    cfg: &SolverConfig,
    exec: Execution,
    protocol: &Protocol,
) -> Result<IterationStudy> {
    protocol.validate()?;
    let per_seed = (0..protocol.n_seeds as u64)
        .map(|s| {
            let cfg = cfg
                .clone()
                .with_seed(cfg.base_seed.wrapping_add(s))
                .with_epsilon(protocol.epsilon);
            let mut report = run(sys, &cfg, exec, Mode::Converge)?.report;
            report.label = "seed".to_string();
            Ok(report)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut study = IterationStudy {
        per_seed,
        mean_iterations: None,
    };
    study.mean_iterations = study.raw_mean().map(|m| m.ceil() as usize);
    Ok(study)
}

#[derive(Debug, Clone)]
pub struct Replay {
    /// one report per run, labelled `replay`
    pub runs: Vec<RunReport>,
    pub total_s: f64,
}

impl Replay {
    pub fn per_run_s(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.wall_time_s).collect()
    }

    pub fn error_evaluations(&self) -> usize {
        self.runs.iter().map(|r| r.error_evaluations).sum()
    }
}

/// `n_runs` solves of exactly `fixed_iterations` iterations with the
/// stopping check switched off.
pub fn timed_replay(
    sys: &LinearSystem,
    cfg: &SolverConfig,
    exec: Execution,
    fixed_iterations: usize,
    n_runs: usize,
) -> Result<Replay> {
    if fixed_iterations == 0 {
        return Err(Error::invalid("fixed-iterations", "must be at least 1"));
    }
    if n_runs == 0 {
        return Err(Error::invalid("runs", "must be at least 1"));
    }
    let runs = (0..n_runs)
        .map(|_| {
            let mut report = run(sys, cfg, exec, Mode::Fixed(fixed_iterations))?.report;
            report.label = "replay".to_string();
            Ok(report)
        })
        .collect::<Result<Vec<_>>>()?;
    let total_s = runs.iter().map(|r| r.wall_time_s).sum();
    Ok(Replay { runs, total_s })
}

#[derive(Debug, Clone)]
pub struct Bench {
    pub study: IterationStudy,
    pub replay: Option<Replay>,
    pub summary: RunReport,
}

impl Bench {
    /// Per-seed rows followed by the summary row.
    pub fn rows(&self) -> Vec<RunReport> {
        let mut rows = self.study.per_seed.clone();
        rows.push(self.summary.clone());
        rows
    }
}

/// [`measure_iterations`], then [`timed_replay`] at ⌈mean⌉. The summary row
/// carries ⌈mean⌉ as `iterations`, the replay total as `wall_time_s`, and
/// the mean final error and residual of the seed runs.
pub fn bench(
    sys: &LinearSystem,
    cfg: &SolverConfig,
    exec: Execution,
    protocol: &Protocol,
    n_runs: usize,
) -> Result<Bench> {
    let study = measure_iterations(sys, cfg, exec, protocol)?;
    let replay = match study.mean_iterations {
        Some(k) if k > 0 => Some(timed_replay(sys, cfg, exec, k, n_runs)?),
        _ => None,
    };
    let first = &study.per_seed[0];
    let seeds = study.per_seed.len() as f64;
    let errors: Vec<f64> = study.per_seed.iter().filter_map(|r| r.final_error_sq).collect();
    let summary = RunReport {
        label: "summary".to_string(),
        iterations: study.mean_iterations.unwrap_or(0),
        converged: study.all_converged(),
        seed: cfg.base_seed,
        wall_time_s: replay.as_ref().map_or(0.0, |r| r.total_s),
        final_error_sq: (!errors.is_empty()).then(|| errors.iter().sum::<f64>() / errors.len() as f64),
        final_residual: study.per_seed.iter().map(|r| r.final_residual).sum::<f64>() / seeds,
        error_evaluations: replay.as_ref().map_or(0, |r| r.error_evaluations()),
        ..first.clone()
    };
    Ok(Bench {
        study,
        replay,
        summary,
    })
}

/// Exactly `max_iterations` sequential iterations of `cfg`, recording error
/// against `x_ref` and the residual at every `step`-th iteration, `k = 0`
/// included.
pub fn trace_run(
    sys: &LinearSystem,
    cfg: &SolverConfig,
    max_iterations: usize,
    step: usize,
    x_ref: &[f64],
) -> Result<Vec<TraceRecord>> {
    if x_ref.len() != sys.cols() {
        return Err(Error::Dimension {
            context: "trace reference",
            expected: sys.cols(),
            found: x_ref.len(),
        });
    }
    let mode = Mode::Trace {
        iterations: max_iterations,
        step,
        reference: x_ref,
    };
    Ok(run_sequential(sys, cfg, mode)?.trace)
}

/// Mean error norm of the last [`PLATEAU_WINDOW`] records.
pub fn plateau(records: &[TraceRecord]) -> Option<f64> {
    if records.is_empty() {
        return None;
    }
    let tail = &records[records.len().saturating_sub(PLATEAU_WINDOW)..];
    Some(tail.iter().map(|r| r.error_norm).sum::<f64>() / tail.len() as f64)
}

pub fn write_reports<W: Write>(out: W, rows: &[RunReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_reports<R: Read>(input: R) -> Result<Vec<RunReport>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn write_trace<W: Write>(out: W, records: &[TraceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRecord>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub const REPORT_HEADER: &str = "label,variant,execution,q,block_size,alpha_policy,alpha,seed,iterations,converged,wall_time_s,final_error_sq,final_residual,error_evaluations";
pub const TRACE_HEADER: &str = "iteration,error_norm,residual_norm";

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{norm, DenseMatrix};
    use crate::solvers::{AlphaPolicy, Variant};
    use crate::sysgen::{generate, GeneratorConfig};
    use proptest::prelude::*;

    fn one_by_one() -> LinearSystem {
        LinearSystem::consistent_from(DenseMatrix::from_vec(1, 1, vec![2.0]).unwrap(), vec![3.0]).unwrap()
    }

    #[test]
    fn one_by_one_takes_one_iteration() {
        let sys = one_by_one();
        for v in [Variant::Ck, Variant::Rk, Variant::Rka, Variant::Rkab] {
            let study = measure_iterations(&sys, &SolverConfig::new(v), Execution::Sequential, &Protocol::default()).unwrap();
            assert_eq!(study.counts(), vec![1; 10], "{v}");
            assert_eq!(study.mean_iterations, Some(1));
        }
    }

    #[test]
    fn seeds_are_consecutive_and_repeatable() {
        let sys = generate(&GeneratorConfig::new(200, 10, 2), 200, 10).unwrap();
        let cfg = SolverConfig::new(Variant::Rk).with_seed(40);
        let p = Protocol {
            n_seeds: 4,
            ..Protocol::default()
        };
        let a = measure_iterations(&sys, &cfg, Execution::Sequential, &p).unwrap();
        let b = measure_iterations(&sys, &cfg, Execution::Sequential, &p).unwrap();
        assert_eq!(a.counts(), b.counts());
        let seeds: Vec<u64> = a.per_seed.iter().map(|r| r.seed).collect();
        assert_eq!(seeds, vec![40, 41, 42, 43]);
        let mean = a.counts().iter().sum::<usize>() as f64 / 4.0;
        assert_eq!(a.mean_iterations, Some(mean.ceil() as usize));
    }

    #[test]
    fn replay_rejects_zero_and_never_checks_error() {
        let sys = generate(&GeneratorConfig::new(100, 5, 2), 100, 5).unwrap();
        let cfg = SolverConfig::new(Variant::Rka).with_q(2);
        assert!(timed_replay(&sys, &cfg, Execution::Sequential, 0, 3).is_err());
        for exec in [Execution::Sequential, Execution::Shared] {
            let r = timed_replay(&sys, &cfg, exec, 50, 3).unwrap();
            assert_eq!(r.runs.len(), 3);
            assert_eq!(r.error_evaluations(), 0);
            assert!(r.runs.iter().all(|x| x.iterations == 50 && x.final_error_sq.is_none()));
        }
    }

    #[test]
    fn trace_starts_at_origin() {
        let sys = generate(&GeneratorConfig::new(300, 10, 3), 300, 10).unwrap();
        let x = sys.x_star.clone().unwrap();
        let recs = trace_run(&sys, &SolverConfig::new(Variant::Rk), 1000, 100, &x).unwrap();
        assert_eq!(recs.len(), 11);
        assert_eq!(recs[0].iteration, 0);
        assert!((recs[0].error_norm - norm(&x)).abs() < 1e-12);
        assert!((recs[0].residual_norm - norm(&sys.b)).abs() < 1e-12);
        assert!(recs.iter().all(|r| r.iteration % 100 == 0));
        assert!(recs.last().unwrap().error_norm < recs[0].error_norm);
        assert!(plateau(&recs).unwrap() < recs[0].error_norm);
        assert_eq!(plateau(&[]), None);
    }

    #[test]
    fn bench_rows() {
        let sys = generate(&GeneratorConfig::new(200, 10, 4), 200, 10).unwrap();
        let cfg = SolverConfig::new(Variant::Rkab).with_q(2).with_block_size(5);
        let b = bench(&sys, &cfg, Execution::Sequential, &Protocol::default(), 2).unwrap();
        let rows = b.rows();
        assert_eq!(rows.len(), 11);
        assert_eq!(rows[10].label, "summary");
        assert_eq!(rows[10].iterations, b.study.mean_iterations.unwrap());
        let mut buf = Vec::new();
        write_reports(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), REPORT_HEADER);
        assert_eq!(read_reports(text.as_bytes()).unwrap(), rows);
    }

    fn report_strategy() -> impl Strategy<Value = RunReport> {
        (
            prop_oneof![Just(Variant::Ck), Just(Variant::Rk), Just(Variant::Rka), Just(Variant::Rkab), Just(Variant::Cgls)],
            prop_oneof![
                Just(AlphaPolicy::Unit),
                Just(AlphaPolicy::OptimalFull),
                Just(AlphaPolicy::OptimalPartial),
                (-10.0f64..10.0).prop_map(AlphaPolicy::Fixed)
            ],
            (1usize..64, 1usize..100, any::<u64>(), 0usize..1_000_000, any::<bool>()),
            (0.0f64..1e3, proptest::option::of(0.0f64..1e6), 0.0f64..1e6, 0usize..1000),
            -1e3f64..1e3,
        )
            .prop_map(|(variant, alpha_policy, (q, block_size, seed, iterations, converged), (wall, err, res, evals), alpha)| RunReport {
                label: "seed".to_string(),
                variant,
                execution: "shared".to_string(),
                q,
                block_size,
                alpha_policy,
                alpha,
                seed,
                iterations,
                converged,
                wall_time_s: wall,
                final_error_sq: err,
                final_residual: res,
                error_evaluations: evals,
            })
    }

    proptest! {
        #[test]
        fn report_csv_round_trip(rows in proptest::collection::vec(report_strategy(), 1..8)) {
            let mut buf = Vec::new();
            write_reports(&mut buf, &rows).unwrap();
            prop_assert_eq!(read_reports(buf.as_slice()).unwrap(), rows);
        }

        #[test]
        fn trace_csv_round_trip(raw in proptest::collection::vec((0usize..100000, 0.0f64..1e9, 0.0f64..1e9), 1..20)) {
            let recs: Vec<TraceRecord> = raw
                .into_iter()
                .map(|(iteration, error_norm, residual_norm)| TraceRecord { iteration, error_norm, residual_norm })
                .collect();
            let mut buf = Vec::new();
            write_trace(&mut buf, &recs).unwrap();
            prop_assert_eq!(std::str::from_utf8(&buf).unwrap().lines().next().unwrap(), TRACE_HEADER);
            prop_assert_eq!(read_trace(buf.as_slice()).unwrap(), recs);
        }
    }
}
