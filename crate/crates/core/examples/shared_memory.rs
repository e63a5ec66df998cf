// The thread-parallel solvers take the same rows as their sequential
// counterparts, so they need the same number of iterations.

use kaczmarz::prelude::*;

pub fn run_example() -> Result<Vec<(Variant, usize, usize)>> {
    let sys = generate(&GeneratorConfig::new(1000, 30, 11), 1000, 30)?;
    let mut rows = Vec::new();
    for (variant, bs) in [(Variant::Rk, 1), (Variant::Rka, 1), (Variant::Rkab, 10)] {
        let cfg = SolverConfig::new(variant).with_q(4).with_block_size(bs).with_seed(2);
        let seq = run(&sys, &cfg, Execution::Sequential, Mode::Converge)?;
        let par = run(&sys, &cfg, Execution::Shared, Mode::Converge)?;
        let gap = seq.x.iter().zip(&par.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!(
            "{variant:>4}: seq {:>6} it, shared {:>6} it, max |dx| = {gap:.1e}, barrier waits = {:?}",
            seq.report.iterations, par.report.iterations, par.diagnostics.barrier_waits
        );
        rows.push((variant, seq.report.iterations, par.report.iterations));
    }
    Ok(rows)
}

fn main() -> Result<()> {
    run_example().map(|_| ())
}
