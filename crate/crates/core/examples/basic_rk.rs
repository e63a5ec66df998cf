// Cyclic vs randomized Kaczmarz on a small generated system.

use kaczmarz::prelude::*;

pub fn run_example() -> Result<Vec<RunReport>> {
    let sys = generate(&GeneratorConfig::new(500, 20, 7), 500, 20)?;
    let mut reports = Vec::new();
    for variant in [Variant::Ck, Variant::Rk, Variant::Cgls] {
        let cfg = SolverConfig::new(variant).with_seed(1);
        let out = run(&sys, &cfg, Execution::Sequential, Mode::Converge)?;
        println!(
            "{:>4}: {:>6} iterations, |x - x*|^2 = {:.2e}",
            variant,
            out.report.iterations,
            out.report.final_error_sq.unwrap_or(f64::NAN)
        );
        reports.push(out.report);
    }
    Ok(reports)
}

fn main() -> Result<()> {
    run_example().map(|_| ())
}
