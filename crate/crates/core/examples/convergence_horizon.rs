// On an inconsistent system RK-type methods stall at some distance from
// the least-squares solution; averaging over more workers lowers it.

use kaczmarz::prelude::*;

pub fn run_example() -> Result<Vec<(usize, f64)>> {
    let sys = make_inconsistent(&generate(&GeneratorConfig::new(1000, 20, 21), 1000, 20)?, 1)?;
    let x_ls = sys.x_ls.clone().expect("inconsistent systems carry x_ls");
    let mut rows = Vec::new();
    for q in [1, 5, 20] {
        let cfg = SolverConfig::new(Variant::Rka).with_q(q);
        let trace = trace_run(&sys, &cfg, 5000, 100, &x_ls)?;
        let level = plateau(&trace).unwrap_or(f64::NAN);
        println!("q = {q:>2}: error plateau {level:.4}");
        rows.push((q, level));
    }
    Ok(rows)
}

fn main() -> Result<()> {
    run_example().map(|_| ())
}
