macro_rules! example {
    ($name:ident, $file:literal) => {
        #[allow(dead_code)]
        mod $name {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }
    };
}

example!(basic_rk, "basic_rk.rs");
example!(rka_averaging, "rka_averaging.rs");
example!(rkab_blocks, "rkab_blocks.rs");
example!(shared_memory, "shared_memory.rs");
example!(distributed_sim, "distributed_sim.rs");
example!(convergence_horizon, "convergence_horizon.rs");
example!(benchmark_protocol, "benchmark_protocol.rs");
example!(system_files, "system_files.rs");

#[test]
fn basic_rk_runs() {
    let reports = basic_rk::run_example().unwrap();
    assert!(reports.iter().all(|r| r.converged));
}

#[test]
fn rka_averaging_runs() {
    let rows = rka_averaging::run_example().unwrap();
    assert!(rows.windows(2).all(|w| w[1].2 < w[0].2));
}

#[test]
fn rkab_blocks_runs() {
    let rows = rkab_blocks::run_example().unwrap();
    assert!(rows.windows(2).all(|w| w[1].1 < w[0].1));
}

#[test]
fn shared_memory_runs() {
    for (v, seq, par) in shared_memory::run_example().unwrap() {
        assert_eq!(seq, par, "{v}");
    }
}

#[test]
fn distributed_sim_runs() {
    assert!(distributed_sim::run_example().unwrap().iter().all(|r| r.converged));
}

#[test]
fn convergence_horizon_runs() {
    let rows = convergence_horizon::run_example().unwrap();
    assert!(rows.windows(2).all(|w| w[1].1 < w[0].1));
}

#[test]
fn benchmark_protocol_runs() {
    let csv = benchmark_protocol::run_example().unwrap();
    assert_eq!(csv.lines().count(), 12);
}

#[test]
fn system_files_runs() {
    assert!(system_files::run_example().unwrap());
}
