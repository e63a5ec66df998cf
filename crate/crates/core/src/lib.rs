//! Randomized Kaczmarz solvers for dense overdetermined systems.
//!
//! * [`solvers`]: CK, RK, RKA, RKAB and CGLS, single-threaded, plus the
//!   optimal averaging weight α*.
//! * [`parallel`]: RKA and RKAB on `q` OS threads sharing one iterate.
//! * [`dist`]: RKA and RKAB on simulated message-passing ranks.
//! * [`sysgen`]: seeded test systems and their binary file format.
//! * [`harness`]: seed sweeps, timed replays, traces and CSV output.
//!
//! ```
//! use kaczmarz::prelude::*;
//!
//! let sys = generate(&GeneratorConfig::new(200, 10, 1), 200, 10).unwrap();
//! let cfg = SolverConfig::new(Variant::Rka).with_q(4);
//! let out = run(&sys, &cfg, Execution::Sequential, Mode::Converge).unwrap();
//! assert!(out.report.converged);
//! ```

pub mod cli;
pub mod dist;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod parallel;
pub mod sampling;
pub mod solvers;
pub mod sysgen;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::dist::{run_distributed, solve_rka_dist, solve_rkab_dist, LatencyModel, SimOptions};
    pub use crate::error::{Error, Result};
    pub use crate::harness::{bench, measure_iterations, plateau, timed_replay, trace_run, Protocol};
    pub use crate::linalg::{DenseMatrix, RowNormCache};
    pub use crate::parallel::{solve_rk_block_sequential, solve_rka_parallel, solve_rkab_parallel};
    pub use crate::sampling::{make_sampler, Prng, RowSampler};
    pub use crate::solvers::{
        optimal_alpha, run, run_sequential, spectral_stats, AlphaPolicy, Execution, Mode, Outcome,
        RunReport, SamplingScheme, SolverConfig, TraceRecord, Variant,
    };
    pub use crate::sysgen::{crop, generate, generate_mother, load_system, make_inconsistent, save_system, GeneratorConfig, LinearSystem};
}
