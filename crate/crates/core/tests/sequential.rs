mod common;

use common::{inconsistent, mean_iterations, system};
use kaczmarz::linalg::{dist_sq, DenseMatrix};
use kaczmarz::prelude::*;
use kaczmarz::solvers::{partial_alphas, rkab_worker_block, solve_ck, solve_rk};

#[test]
fn one_by_one_in_one_step() {
    let sys = LinearSystem::consistent_from(DenseMatrix::from_vec(1, 1, vec![2.0]).unwrap(), vec![3.0]).unwrap();
    assert_eq!(sys.b, vec![6.0]);
    for v in [Variant::Ck, Variant::Rk] {
        let out = run_sequential(&sys, &SolverConfig::new(v), Mode::Converge).unwrap();
        assert_eq!(out.report.iterations, 1);
        assert_eq!(out.x, vec![3.0]);
    }
}

#[test]
fn ck_orthogonal_rows_take_one_sweep() {
    let sys = LinearSystem::consistent_from(DenseMatrix::diagonal(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]).unwrap();
    assert_eq!(sys.b, vec![1.0, 4.0]);
    let out = solve_ck(&sys, &SolverConfig::default()).unwrap();
    assert_eq!(out.report.iterations, 2);
    assert_eq!(out.x, vec![1.0, 2.0]);
}

#[test]
fn rk_identity() {
    let sys = LinearSystem::consistent_from(DenseMatrix::identity(3).unwrap(), vec![1.0, 2.0, 3.0]).unwrap();
    let out = solve_rk(&sys, &SolverConfig::default()).unwrap();
    assert!(out.report.converged);
    for (x, t) in out.x.iter().zip([1.0, 2.0, 3.0]) {
        assert!((x - t).abs() < 1e-4);
    }
}

#[test]
fn ck_is_slow_on_coherent_rows() {
    // unit rows whose angle sweeps 1 rad in 100 steps: neighbours are
    // nearly parallel, random pairs usually are not
    let m = 100;
    let a = DenseMatrix::from_fn(m, 2, |i, j| {
        let t = i as f64 / m as f64;
        if j == 0 { t.cos() } else { t.sin() }
    })
    .unwrap();
    let sys = LinearSystem::consistent_from(a, vec![1.0, -1.0]).unwrap();
    let cfg = SolverConfig::new(Variant::Ck).with_max_iterations(10_000_000);
    let ck = solve_ck(&sys, &cfg).unwrap().report.iterations;
    let mut rk: Vec<usize> = (0..10)
        .map(|s| solve_rk(&sys, &cfg.clone().with_seed(s)).unwrap().report.iterations)
        .collect();
    rk.sort();
    let median = (rk[4] + rk[5]) as f64 / 2.0;
    assert!(ck as f64 >= 10.0 * median, "ck {ck}, rk median {median}");
}

#[test]
fn rkab_block_on_identity_recovers_b() {
    let n = 4;
    let a = DenseMatrix::identity(n).unwrap();
    let b = [1.0, -2.0, 3.0, 0.5];
    let cache = RowNormCache::new(&a).unwrap();
    let sampler = make_sampler(&cache, 0, n - 1).unwrap();
    let mut checked = 0;
    for seed in 0..200 {
        let rng = Prng::new(seed);
        let mut peek = rng.clone();
        let mut rows: Vec<usize> = (0..n).map(|_| sampler.sample(&mut peek)).collect();
        rows.sort();
        rows.dedup();
        if rows.len() < n {
            continue;
        }
        let mut v = vec![9.0; n];
        let mut rng = rng;
        rkab_worker_block(&mut v, &a, &b, &cache, &sampler, &mut rng, n, 1.0);
        assert_eq!(v, b);
        checked += 1;
    }
    assert!(checked > 0);
}

#[test]
fn rk_mean_error_is_monotone() {
    let sys = system(500, 20, 11);
    let x = sys.x_star.clone().unwrap();
    // past ~1500 iterations the error sits at the round-off floor and only jitters
    let traces: Vec<Vec<TraceRecord>> = (0..10)
        .map(|s| trace_run(&sys, &SolverConfig::new(Variant::Rk).with_seed(s), 1000, 100, &x).unwrap())
        .collect();
    let means: Vec<f64> = (0..traces[0].len())
        .map(|k| traces.iter().map(|t| t[k].error_norm.powi(2)).sum::<f64>() / 10.0)
        .collect();
    assert!(means.windows(2).all(|w| w[1] <= w[0]), "{means:?}");
}

#[test]
fn rk_converges_on_every_seed() {
    let sys = system(2000, 50, 12);
    let study = measure_iterations(&sys, &SolverConfig::new(Variant::Rk), Execution::Sequential, &Protocol::default()).unwrap();
    assert!(study.all_converged());
    assert!(study.per_seed.iter().all(|r| r.final_error_sq.unwrap() < 1e-8));
}

#[test]
fn rk_mean_is_stable_across_seed_sets() {
    let sys = system(2000, 50, 13);
    let cfg = SolverConfig::new(Variant::Rk);
    let a = mean_iterations(&sys, &cfg, Execution::Sequential);
    let b = mean_iterations(&sys, &cfg.clone().with_seed(1000), Execution::Sequential);
    assert!((a - b).abs() / a < 0.05, "{a} vs {b}");
}

#[test]
fn distributed_scheme_costs_about_the_same() {
    let sys = system(2000, 50, 14);
    let full = SolverConfig::new(Variant::Rka).with_q(2);
    let part = full.clone().with_scheme(SamplingScheme::Distributed);
    let a = mean_iterations(&sys, &full, Execution::Sequential);
    let b = mean_iterations(&sys, &part, Execution::Sequential);
    assert!((a - b).abs() / a < 0.05, "{a} vs {b}");
}

#[test]
fn partial_alphas_near_full() {
    let sys = system(200, 10, 15);
    let full = optimal_alpha(&spectral_stats(&sys.a).unwrap(), 2);
    let parts = partial_alphas(&sys.a, 2).unwrap();
    assert_eq!(parts.len(), 2);
    for p in parts {
        assert!((p - full).abs() / full < 0.25, "{p} vs {full}");
    }
}

#[test]
fn stored_least_squares_solutions_pass() {
    for seed in 0..5 {
        let sys = inconsistent(300, 20, seed, seed + 100);
        assert!(!sys.consistent && sys.x_star.is_none());
        assert!(sys.normal_residual().unwrap() < 1e-8);
        // least squares beats the noiseless solution on the noisy rhs
        let clean = system(300, 20, seed);
        let r = |x: &[f64]| kaczmarz::linalg::residual_norm(&sys.a, &sys.b, x);
        assert!(r(sys.x_ls.as_ref().unwrap()) <= r(clean.x_star.as_ref().unwrap()));
    }
}

#[test]
fn cgls_variant_reaches_reference() {
    let sys = inconsistent(400, 30, 3, 4);
    let out = run_sequential(&sys, &SolverConfig::new(Variant::Cgls), Mode::Converge).unwrap();
    assert!(out.report.converged);
    assert!(dist_sq(&out.x, sys.x_ls.as_ref().unwrap()) < 1e-16);
}

#[test]
fn larger_shared_blocks_are_faster() {
    let sys = system(2000, 50, 16);
    let time = |bs: usize| {
        let cfg = SolverConfig::new(Variant::Rkab).with_q(4).with_block_size(bs);
        let mut t: Vec<f64> = (0..5)
            .map(|_| run(&sys, &cfg, Execution::Shared, Mode::Converge).unwrap().report.wall_time_s)
            .collect();
        t.sort_by(f64::total_cmp);
        t[2]
    };
    let (t1, t50) = (time(1), time(50));
    assert!(t50 < t1, "block 50 took {t50}s, block 1 took {t1}s");
}

#[test]
fn replay_time_scales_with_budget() {
    let sys = system(500, 100, 17);
    let cfg = SolverConfig::new(Variant::Rk);
    let best = |k: usize| {
        timed_replay(&sys, &cfg, Execution::Sequential, k, 5)
            .unwrap()
            .per_run_s()
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    };
    let (t1, t2) = (best(100_000), best(200_000));
    let ratio = t2 / t1;
    assert!((1.6..=2.4).contains(&ratio), "{t1}s vs {t2}s");
}
