//! `kz` command line: `generate`, `solve`, `bench`, `trace`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::dist::SimOptions;
use crate::error::{Error, Result};
use crate::harness::{bench, trace_run, write_reports, write_trace, Protocol};
use crate::solvers::{run, AlphaPolicy, Execution, Mode, SamplingScheme, SolverConfig, Variant};
use crate::sysgen::{crop, generate, generate_mother, load_system, make_inconsistent, save_system, GeneratorConfig, LinearSystem};

/// Environment variable that supplies `q` when `--q` is absent.
pub const THREADS_ENV: &str = "KZ_THREADS";

#[derive(Parser, Debug)]
#[command(name = "kz", version, about = "Randomized Kaczmarz solvers and benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a dense overdetermined system and write it to a file
    Generate(GenerateArgs),
    /// Solve one system and print one CSV report row
    Solve(SolveArgs),
    /// Iteration counts over several seeds, then a timed replay
    Bench(BenchArgs),
    /// Error and residual every few iterations
    Trace(TraceArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    rows: usize,
    #[arg(long)]
    cols: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// crop the system from a larger mother matrix of this many rows
    #[arg(long)]
    mother_rows: Option<usize>,
    #[arg(long)]
    mother_cols: Option<usize>,
    /// add N(0,1) noise to b and store the least-squares solution
    #[arg(long)]
    inconsistent: bool,
    #[arg(long, default_value_t = 1)]
    noise_seed: u64,
}

#[derive(Args, Debug)]
struct SystemArgs {
    /// system file; when absent a system is generated from the flags below
    #[arg(long)]
    system: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    rows: usize,
    #[arg(long, default_value_t = 50)]
    cols: usize,
    #[arg(long, default_value_t = 0)]
    gen_seed: u64,
    #[arg(long)]
    inconsistent: bool,
    #[arg(long, default_value_t = 1)]
    noise_seed: u64,
}

#[derive(Args, Debug)]
struct SolverArgs {
    #[arg(long, default_value = "rk")]
    variant: Variant,
    /// worker count; defaults to $KZ_THREADS, else 1
    #[arg(long)]
    q: Option<usize>,
    /// a number, `unit`, `opt` or `opt-partial`
    #[arg(long, default_value = "unit")]
    alpha: AlphaPolicy,
    #[arg(long, default_value_t = 1)]
    block_size: usize,
    #[arg(long, default_value_t = 1e-8)]
    epsilon: f64,
    #[arg(long = "max-it")]
    max_it: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `full` or `distributed`
    #[arg(long, default_value = "full")]
    scheme: SamplingScheme,
    /// `seq`, `shared` or `dist`
    #[arg(long, default_value = "seq", value_parser = parse_exec)]
    exec: Execution,
    /// RKAB: one extra leading row per worker and iteration
    #[arg(long)]
    lead_row: bool,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value_t = 10)]
    seeds: usize,
    /// timed replays at the mean iteration count
    #[arg(long, default_value_t = 10)]
    runs: usize,
    /// exit nonzero if any seed fails to converge
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TraceArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value_t = 100)]
    step: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_exec(s: &str) -> std::result::Result<Execution, String> {
    match s {
        "seq" | "sequential" => Ok(Execution::Sequential),
        "shared" | "threads" => Ok(Execution::Shared),
        "dist" | "distributed" => Ok(Execution::Distributed(SimOptions::default())),
        other => Err(format!("expected seq, shared or dist; got {other:?}")),
    }
}

impl SystemArgs {
    fn load(&self) -> Result<LinearSystem> {
        if let Some(path) = &self.system {
            return load_system(path);
        }
        let sys = generate(&GeneratorConfig::new(self.rows, self.cols, self.gen_seed), self.rows, self.cols)?;
        if self.inconsistent {
            make_inconsistent(&sys, self.noise_seed)
        } else {
            Ok(sys)
        }
    }
}

impl SolverArgs {
    fn config(&self, default_max_it: usize) -> Result<SolverConfig> {
        let q = match self.q {
            Some(q) => q,
            None => match std::env::var(THREADS_ENV) {
                Ok(v) => v
                    .trim()
                    .parse()
                    .map_err(|_| Error::invalid("q", format!("{THREADS_ENV}={v:?} is not a count")))?,
                Err(_) => 1,
            },
        };
        let cfg = SolverConfig {
            variant: self.variant,
            q,
            alpha: self.alpha,
            block_size: self.block_size,
            epsilon: self.epsilon,
            max_iterations: self.max_it.unwrap_or(default_max_it),
            base_seed: self.seed,
            scheme: self.scheme,
            lead_row: self.lead_row,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Generate(g) => {
            let (mr, mc) = (g.mother_rows.unwrap_or(g.rows), g.mother_cols.unwrap_or(g.cols));
            let cfg = GeneratorConfig::new(mr, mc, g.seed);
            if g.rows < g.cols {
                return Err(Error::invalid("rows", "must be at least --cols"));
            }
            let sys = if (mr, mc) == (g.rows, g.cols) {
                generate(&cfg, g.rows, g.cols)?
            } else {
                crop(&generate_mother(&cfg)?, g.rows, g.cols, &cfg)?
            };
            let sys = if g.inconsistent {
                make_inconsistent(&sys, g.noise_seed)?
            } else {
                sys
            };
            save_system(&sys, &g.out)?;
            Ok(0)
        }
        Command::Solve(s) => {
            let cfg = s.solver.config(1_000_000)?;
            let sys = s.system.load()?;
            let report = run(&sys, &cfg, s.solver.exec, Mode::Converge)?.report;
            write_reports(io::stdout().lock(), &[report])?;
            Ok(0)
        }
        Command::Bench(b) => {
            let cfg = b.solver.config(1_000_000)?;
            let protocol = Protocol {
                n_seeds: b.seeds,
                epsilon: cfg.epsilon,
                ..Protocol::default()
            };
            let sys = b.system.load()?;
            let result = bench(&sys, &cfg, b.solver.exec, &protocol, b.runs)?;
            write_reports(output(&b.out)?, &result.rows())?;
            Ok(if b.strict && !result.study.all_converged() { 3 } else { 0 })
        }
        Command::Trace(t) => {
            let cfg = t.solver.config(30_000)?;
            if t.step == 0 {
                return Err(Error::invalid("step", "must be at least 1"));
            }
            let sys = t.system.load()?;
            let reference = sys.reference().ok_or(Error::MissingReference)?.to_vec();
            let records = trace_run(&sys, &cfg, cfg.max_iterations, t.step, &reference)?;
            write_trace(output(&t.out)?, &records)?;
            Ok(0)
        }
    }
}

/// Parse `argv` (program name first) and run. Returns the exit status:
/// 0 on success, 1 on runtime errors, 2 on usage errors, 3 when `bench
/// --strict` saw a seed that did not converge.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(Error::Invalid { field, reason }) => {
            eprintln!("error: invalid value for --{field}: {reason}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
