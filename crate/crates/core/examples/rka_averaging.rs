// RKA with more workers needs fewer iterations; α* helps further.

use kaczmarz::prelude::*;

pub fn run_example() -> Result<Vec<(usize, usize, usize)>> {
    let sys = generate(&GeneratorConfig::new(1000, 40, 3), 1000, 40)?;
    let stats = spectral_stats(&sys.a)?;
    println!("s_min = {:.3e}, s_max = {:.3e}", stats.s_min, stats.s_max);
    let mut rows = Vec::new();
    for q in [1, 4, 16] {
        let base = SolverConfig::new(Variant::Rka).with_q(q);
        let unit = run_sequential(&sys, &base, Mode::Converge)?.report.iterations;
        let opt = run_sequential(&sys, &base.clone().with_alpha(AlphaPolicy::OptimalFull), Mode::Converge)?;
        println!(
            "q = {q:>2}: alpha = 1 -> {unit:>6} it, alpha* = {:.3} -> {:>6} it",
            opt.report.alpha, opt.report.iterations
        );
        rows.push((q, unit, opt.report.iterations));
    }
    Ok(rows)
}

fn main() -> Result<()> {
    run_example().map(|_| ())
}
