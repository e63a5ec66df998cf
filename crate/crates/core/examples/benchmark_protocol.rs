// Iteration counts over ten seeds, then a timed replay at the mean, written
// as CSV.

use kaczmarz::harness::write_reports;
use kaczmarz::prelude::*;

pub fn run_example() -> Result<String> {
    let sys = generate(&GeneratorConfig::new(600, 20, 9), 600, 20)?;
    let cfg = SolverConfig::new(Variant::Rkab).with_q(4).with_block_size(10);
    let result = bench(&sys, &cfg, Execution::Shared, &Protocol::default(), 3)?;
    let mut csv = Vec::new();
    write_reports(&mut csv, &result.rows())?;
    let csv = String::from_utf8(csv).expect("csv is utf-8");
    print!("{csv}");
    Ok(csv)
}

fn main() -> Result<()> {
    run_example().map(|_| ())
}
