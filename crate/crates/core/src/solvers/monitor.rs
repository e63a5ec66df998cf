use std::time::Duration;

use crate::error::{Error, Result};
use crate::linalg::{dist_sq, residual_norm, DenseMatrix};
use crate::sysgen::LinearSystem;

use super::{Execution, Mode, RunReport, SolverConfig, TraceRecord};

/// Decides, before each outer iteration, whether a solve stops; records
/// trace samples along the way.
pub(crate) struct Monitor<'a> {
    reference: Option<&'a [f64]>,
    epsilon: f64,
    check_error: bool,
    budget: usize,
    trace: Option<(usize, &'a DenseMatrix, &'a [f64])>,
    pub records: Vec<TraceRecord>,
    pub error_evaluations: usize,
    pub converged: bool,
}

impl<'a> Monitor<'a> {
    pub fn new(sys: &'a LinearSystem, cfg: &SolverConfig, mode: Mode<'a>) -> Result<Self> {
        let mut m = Self::without_trace(sys.reference(), cfg, mode)?;
        if let Mode::Trace { step, .. } = mode {
            m.trace = Some((step, &sys.a, &sys.b));
        }
        Ok(m)
    }

    /// Stopping logic only; used where the full system is not at hand.
    pub fn without_trace(
        reference: Option<&'a [f64]>,
        cfg: &SolverConfig,
        mode: Mode<'a>,
    ) -> Result<Self> {
        let (reference, check_error, budget) = match mode {
            Mode::Converge => (
                Some(reference.ok_or(Error::MissingReference)?),
                true,
                cfg.max_iterations,
            ),
            Mode::Fixed(n) => (None, false, n),
            Mode::Trace {
                iterations,
                step,
                reference,
            } => {
                if step == 0 {
                    return Err(Error::invalid("step", "must be at least 1"));
                }
                (Some(reference), false, iterations)
            }
        };
        Ok(Self {
            reference,
            epsilon: cfg.epsilon,
            check_error,
            budget,
            trace: None,
            records: Vec::new(),
            error_evaluations: 0,
            converged: false,
        })
    }

    pub fn is_fixed(&self) -> bool {
        !self.check_error && self.trace.is_none()
    }

    /// `k` outer iterations have completed and produced `x`.
    pub fn should_stop(&mut self, k: usize, x: &[f64]) -> bool {
        if let Some((step, a, b)) = self.trace {
            if k.is_multiple_of(step) {
                let reference = self.reference.expect("trace has a reference");
                self.records.push(TraceRecord {
                    iteration: k,
                    error_norm: dist_sq(x, reference).sqrt(),
                    residual_norm: residual_norm(a, b, x),
                });
            }
        }
        if self.check_error {
            self.error_evaluations += 1;
            if dist_sq(x, self.reference.expect("checked in new")) < self.epsilon {
                self.converged = true;
                return true;
            }
        }
        k >= self.budget
    }
}

pub(crate) struct Finished<'s> {
    pub sys: &'s LinearSystem,
    pub cfg: &'s SolverConfig,
    pub exec: Execution,
    pub alphas: &'s [f64],
    pub iterations: usize,
    pub converged: bool,
    pub elapsed: Duration,
    pub error_evaluations: usize,
    pub fixed: bool,
}

pub(crate) fn finish_report(f: Finished<'_>, x: &[f64]) -> RunReport {
    let alpha = f.alphas.iter().sum::<f64>() / f.alphas.len().max(1) as f64;
    RunReport {
        label: "run".to_string(),
        variant: f.cfg.variant,
        execution: f.exec.name().to_string(),
        q: f.cfg.q,
        block_size: f.cfg.block_size,
        alpha_policy: f.cfg.alpha,
        alpha,
        seed: f.cfg.base_seed,
        iterations: f.iterations,
        converged: f.converged,
        wall_time_s: round_micros(f.elapsed),
        final_error_sq: if f.fixed {
            None
        } else {
            f.sys.reference().map(|r| dist_sq(x, r))
        },
        final_residual: residual_norm(&f.sys.a, &f.sys.b, x),
        error_evaluations: f.error_evaluations,
    }
}

/// Seconds at microsecond resolution.
pub(crate) fn round_micros(d: Duration) -> f64 {
    d.as_micros() as f64 / 1e6
}
