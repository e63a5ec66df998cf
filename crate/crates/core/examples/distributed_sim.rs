// RKA and RKAB over simulated ranks, with and without per-message latency.

use std::time::Duration;

use kaczmarz::prelude::*;

pub fn run_example() -> Result<Vec<RunReport>> {
    let sys = generate(&GeneratorConfig::new(800, 20, 13), 800, 20)?;
    let mut reports = Vec::new();
    for np in [1, 3, 4] {
        let cfg = SolverConfig::new(Variant::Rka).with_q(np);
        let out = solve_rka_dist(&sys, &cfg, Mode::Converge, SimOptions::default())?;
        println!(
            "RKA  np = {np}: {:>6} it, messages per rank {:?}",
            out.report.iterations,
            out.diagnostics.messages_per_rank.unwrap_or_default()
        );
        reports.push(out.report);
    }
    let slow = SimOptions {
        latency: Some(LatencyModel {
            ranks_per_node: 2,
            intra: Duration::ZERO,
            inter: Duration::from_micros(50),
        }),
        record_fingerprints: true,
    };
    let cfg = SolverConfig::new(Variant::Rkab).with_q(4).with_block_size(20);
    let out = solve_rkab_dist(&sys, &cfg, Mode::Converge, slow)?;
    let agree = out
        .diagnostics
        .rank_fingerprints
        .iter()
        .flatten()
        .all(|fp| fp.iter().all(|f| *f == fp[0]));
    println!(
        "RKAB np = 4, block 20, 50us between nodes: {} it in {:.3}s, ranks agree: {agree}",
        out.report.iterations, out.report.wall_time_s
    );
    reports.push(out.report);
    Ok(reports)
}

fn main() -> Result<()> {
    run_example().map(|_| ())
}
