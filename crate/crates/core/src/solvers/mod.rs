//! Solver configuration, run reports and the sequential reference solvers.
//!
//! The sequential implementations here are the behavioural oracle for the
//! shared-memory ([`crate::parallel`]) and message-passing ([`crate::dist`])
//! versions: given the same `(base_seed, q, scheme)` they draw the same rows.

pub mod cgls;
mod kaczmarz;
mod monitor;
pub mod spectral;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dist::SimOptions;
use crate::error::{Error, Result};
use crate::sysgen::LinearSystem;

pub use cgls::{cgls, cgls_solve, CglsSolution};
pub use kaczmarz::{
    kaczmarz_step, rka_combined_step, rkab_worker_block, run_sequential, solve_ck, solve_rk,
    solve_rka_seq, solve_rkab_seq,
};
pub(crate) use kaczmarz::{apply_average, step_scale, worker_delta, worker_samplers};
pub(crate) use monitor::{finish_report, Finished, Monitor};
pub use spectral::{optimal_alpha, partial_alphas, spectral_stats, SpectralStats};

macro_rules! string_serde {
    ($t:ty) => {
        impl Serialize for $t {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// rows in order `k mod m`
    Ck,
    Rk,
    Rka,
    Rkab,
    Cgls,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Ck => "ck",
            Variant::Rk => "rk",
            Variant::Rka => "rka",
            Variant::Rkab => "rkab",
            Variant::Cgls => "cgls",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ck" => Ok(Variant::Ck),
            "rk" => Ok(Variant::Rk),
            "rka" => Ok(Variant::Rka),
            "rkab" => Ok(Variant::Rkab),
            "cgls" => Ok(Variant::Cgls),
            other => Err(Error::invalid("variant", format!("unknown variant {other:?}"))),
        }
    }
}

string_serde!(Variant);

/// Uniform weight α applied to every projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaPolicy {
    Unit,
    Fixed(f64),
    /// α* from the singular values of the whole matrix, shared by all workers
    OptimalFull,
    /// worker `t` uses α* of its own contiguous row block
    OptimalPartial,
}

impl fmt::Display for AlphaPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaPolicy::Unit => f.write_str("unit"),
            AlphaPolicy::Fixed(v) => write!(f, "{v}"),
            AlphaPolicy::OptimalFull => f.write_str("opt"),
            AlphaPolicy::OptimalPartial => f.write_str("opt-partial"),
        }
    }
}

impl FromStr for AlphaPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unit" => Ok(AlphaPolicy::Unit),
            "opt" | "opt-full" | "optimal" => Ok(AlphaPolicy::OptimalFull),
            "opt-partial" | "partial" => Ok(AlphaPolicy::OptimalPartial),
            other => match other.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(AlphaPolicy::Fixed(v)),
                _ => Err(Error::invalid(
                    "alpha",
                    format!("expected a number, unit, opt or opt-partial; got {other:?}"),
                )),
            },
        }
    }
}

string_serde!(AlphaPolicy);

/// Which rows a worker may sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingScheme {
    /// every worker samples the whole matrix
    FullAccess,
    /// worker `t` samples rows `⌊t·m/q⌋ ..= ⌊(t+1)·m/q⌋ − 1`
    Distributed,
}

impl fmt::Display for SamplingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplingScheme::FullAccess => "full",
            SamplingScheme::Distributed => "distributed",
        })
    }
}

impl FromStr for SamplingScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" | "full-access" | "full_access" => Ok(SamplingScheme::FullAccess),
            "distributed" | "dist" | "partitioned" => Ok(SamplingScheme::Distributed),
            other => Err(Error::invalid("scheme", format!("unknown scheme {other:?}"))),
        }
    }
}

string_serde!(SamplingScheme);

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub variant: Variant,
    /// number of averaged workers (threads or ranks)
    pub q: usize,
    pub alpha: AlphaPolicy,
    /// RKAB: chained row updates per worker per outer iteration
    pub block_size: usize,
    /// stop once ‖x − x_ref‖² < epsilon
    pub epsilon: f64,
    pub max_iterations: usize,
    pub base_seed: u64,
    pub scheme: SamplingScheme,
    /// RKAB: take one extra leading step from the shared iterate, so each
    /// worker uses `block_size + 1` rows per outer iteration. Off by default,
    /// so that `block_size = 1` reduces to RKA.
    pub lead_row: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Rk,
            q: 1,
            alpha: AlphaPolicy::Unit,
            block_size: 1,
            epsilon: 1e-8,
            max_iterations: 1_000_000,
            base_seed: 0,
            scheme: SamplingScheme::FullAccess,
            lead_row: false,
        }
    }
}

impl SolverConfig {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            ..Self::default()
        }
    }

    pub fn with_q(mut self, q: usize) -> Self {
        self.q = q;
        self
    }

    pub fn with_alpha(mut self, alpha: AlphaPolicy) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_block_size(mut self, block_size: usize) -> Self {
        self.block_size = block_size;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn with_seed(mut self, base_seed: u64) -> Self {
        self.base_seed = base_seed;
        self
    }

    pub fn with_scheme(mut self, scheme: SamplingScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_lead_row(mut self, lead_row: bool) -> Self {
        self.lead_row = lead_row;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.q == 0 {
            return Err(Error::invalid("q", "must be at least 1"));
        }
        if self.block_size == 0 {
            return Err(Error::invalid("block-size", "must be at least 1"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon", "must be positive"));
        }
        if let AlphaPolicy::Fixed(a) = self.alpha {
            if !a.is_finite() {
                return Err(Error::invalid("alpha", "must be finite"));
            }
        }
        Ok(())
    }

    /// Row updates each worker performs per outer RKAB iteration.
    pub fn rkab_steps(&self) -> usize {
        self.block_size + usize::from(self.lead_row)
    }
}

/// Where the workers of a solve run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Execution {
    #[default]
    Sequential,
    /// `q` OS threads sharing the iterate
    Shared,
    /// `q` simulated ranks exchanging messages
    Distributed(SimOptions),
}

impl Execution {
    pub fn name(&self) -> &'static str {
        match self {
            Execution::Sequential => "seq",
            Execution::Shared => "shared",
            Execution::Distributed(_) => "dist",
        }
    }
}

/// How long a solve runs and what it watches.
#[derive(Debug, Clone, Copy)]
pub enum Mode<'a> {
    /// Until ‖x − x_ref‖² < ε or `max_iterations`; x_ref is the system's
    /// `x_star`, else `x_ls`.
    Converge,
    /// Exactly this many outer iterations; the error is never evaluated.
    Fixed(usize),
    /// Exactly `iterations` outer iterations, recording error and residual
    /// whenever `k % step == 0`.
    Trace {
        iterations: usize,
        step: usize,
        reference: &'a [f64],
    },
}

/// One solve, as written to result CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// `run`, `seed`, `replay` or `summary`
    pub label: String,
    pub variant: Variant,
    pub execution: String,
    pub q: usize,
    pub block_size: usize,
    pub alpha_policy: AlphaPolicy,
    /// resolved α (mean over workers under `opt-partial`)
    pub alpha: f64,
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_s: f64,
    /// ‖x − x_ref‖²; empty for fixed-budget replays
    pub final_error_sq: Option<f64>,
    /// ‖Ax − b‖
    pub final_residual: f64,
    /// how many times the stopping error was evaluated
    pub error_evaluations: usize,
}

/// (k, ‖x⁽ᵏ⁾ − x_ref‖, ‖Ax⁽ᵏ⁾ − b‖)
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub error_norm: f64,
    pub residual_norm: f64,
}

/// Counters that only some executions produce.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// barrier waits performed by worker 0
    pub barrier_waits: Option<usize>,
    /// messages sent by each rank
    pub messages_per_rank: Option<Vec<usize>>,
    /// per outer iteration, a fingerprint of x on every rank
    pub rank_fingerprints: Option<Vec<Vec<u64>>>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: RunReport,
    pub x: Vec<f64>,
    pub trace: Vec<TraceRecord>,
    pub diagnostics: Diagnostics,
}

/// Per-worker α values (length `q`; length 1 for single-row methods).
pub fn resolve_alphas(sys: &LinearSystem, cfg: &SolverConfig) -> Result<Vec<f64>> {
    let q = match cfg.variant {
        Variant::Rka | Variant::Rkab => cfg.q,
        _ => 1,
    };
    Ok(match cfg.alpha {
        AlphaPolicy::Unit => vec![1.0; q],
        AlphaPolicy::Fixed(v) => vec![v; q],
        AlphaPolicy::OptimalFull => vec![optimal_alpha(&spectral_stats(&sys.a)?, q); q],
        AlphaPolicy::OptimalPartial => partial_alphas(&sys.a, q)?,
    })
}

/// Run `cfg` on `sys` under the given execution model.
pub fn run(sys: &LinearSystem, cfg: &SolverConfig, exec: Execution, mode: Mode<'_>) -> Result<Outcome> {
    match exec {
        Execution::Sequential => run_sequential(sys, cfg, mode),
        Execution::Shared => crate::parallel::run_shared(sys, cfg, mode),
        Execution::Distributed(opts) => crate::dist::run_distributed(sys, cfg, mode, opts),
    }
}
