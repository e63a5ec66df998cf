// RKAB: larger blocks mean fewer outer iterations for similar total work.

use kaczmarz::prelude::*;

pub fn run_example() -> Result<Vec<(usize, usize)>> {
    let sys = generate(&GeneratorConfig::new(1000, 40, 5), 1000, 40)?;
    let mut rows = Vec::new();
    for bs in [1, 5, 20, 40] {
        let cfg = SolverConfig::new(Variant::Rkab).with_q(4).with_block_size(bs);
        let r = run_sequential(&sys, &cfg, Mode::Converge)?.report;
        println!(
            "block_size = {bs:>2}: {:>6} outer iterations, {:>7} rows used",
            r.iterations,
            r.iterations * 4 * bs
        );
        rows.push((bs, r.iterations));
    }
    Ok(rows)
}

fn main() -> Result<()> {
    run_example().map(|_| ())
}
