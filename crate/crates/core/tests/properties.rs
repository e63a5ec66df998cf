mod common;

use common::bitwise_eq;
use kaczmarz::dist::{DistPartition, SimNetwork, Transport};
use kaczmarz::linalg::{dot, DenseMatrix};
use kaczmarz::prelude::*;
use kaczmarz::solvers::kaczmarz_step;
use proptest::prelude::*;

fn nonzero_rows(m: usize, n: usize) -> impl Strategy<Value = DenseMatrix> {
    proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, n), m).prop_filter_map("zero row", |rows| {
        if rows.iter().all(|r| r.iter().any(|v| v.abs() > 1e-3)) {
            DenseMatrix::from_rows(&rows).ok()
        } else {
            None
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unit_step_satisfies_its_row(
        a in nonzero_rows(6, 4),
        b in proptest::collection::vec(-100.0f64..100.0, 6),
        x0 in proptest::collection::vec(-100.0f64..100.0, 4),
        i in 0usize..6,
    ) {
        let cache = RowNormCache::new(&a).unwrap();
        let mut x = x0;
        kaczmarz_step(&mut x, &a, &b, &cache, i, 1.0);
        let lhs = dot(a.row(i), &x).unwrap();
        prop_assert!((lhs - b[i]).abs() <= 1e-10 * (1.0 + b[i].abs()));
    }

    #[test]
    fn partitions_are_complete(np in 1usize..=16, m in 16usize..1000) {
        let sys = LinearSystem::consistent_from(
            DenseMatrix::from_fn(m, 1, |i, _| 1.0 + i as f64).unwrap(),
            vec![1.0],
        ).unwrap();
        let mut next = 0;
        for r in 0..np {
            let p = DistPartition::new(&sys, r, np).unwrap();
            prop_assert_eq!(p.lo, next);
            prop_assert_eq!(p.lo, r * m / np);
            prop_assert_eq!(p.hi + 1, (r + 1) * m / np);
            prop_assert_eq!(p.a.row(0), sys.a.row(p.lo));
            next = p.hi + 1;
        }
        prop_assert_eq!(next, m);
    }

    #[test]
    fn allreduce_matches_gather_sum(
        np in prop_oneof![Just(1usize), Just(2), Just(3), Just(4), Just(5), Just(8)],
        data in proptest::collection::vec(proptest::collection::vec(-1e3f64..1e3, 7), 8),
    ) {
        let inputs = &data[..np];
        let results = std::thread::scope(|s| {
            let hs: Vec<_> = SimNetwork::endpoints(np, None)
                .into_iter()
                .map(|mut ep| s.spawn(move || {
                    let mut buf = inputs[ep.rank()].clone();
                    ep.allreduce_sum(&mut buf).unwrap();
                    (buf, ep.messages_sent())
                }))
                .collect();
            hs.into_iter().map(|h| h.join().unwrap()).collect::<Vec<_>>()
        });
        for j in 0..7 {
            let oracle: f64 = inputs.iter().map(|v| v[j]).sum();
            let scale = inputs.iter().map(|v| v[j].abs()).sum::<f64>().max(1e-300);
            prop_assert!((results[0].0[j] - oracle).abs() <= 1e-12 * scale);
        }
        let ceil_log = (np as f64).log2().ceil() as usize;
        for (buf, msgs) in &results {
            prop_assert!(bitwise_eq(buf, &results[0].0));
            prop_assert!(*msgs <= 2 * ceil_log);
            if np.is_power_of_two() {
                prop_assert_eq!(*msgs, ceil_log);
            }
        }
    }

    #[test]
    fn sampler_follows_squared_norms(
        norms in proptest::collection::vec(0.1f64..10.0, 1..20),
        seed in any::<u64>(),
    ) {
        let a = DenseMatrix::diagonal(&norms).unwrap();
        let cache = RowNormCache::new(&a).unwrap();
        let s = make_sampler(&cache, 0, norms.len() - 1).unwrap();
        let total: f64 = norms.iter().map(|v| v * v).sum();
        for (i, v) in norms.iter().enumerate() {
            prop_assert!((s.probability(i) - v * v / total).abs() < 1e-12);
        }
        let draw = |seed| {
            let mut rng = Prng::new(seed);
            (0..50).map(|_| s.sample(&mut rng)).collect::<Vec<_>>()
        };
        prop_assert_eq!(draw(seed), draw(seed));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn block_of_one_is_rka(seed in any::<u64>(), q in 1usize..6, gen in 0u64..1000) {
        let sys = common::system(60, 5, gen);
        let rka = SolverConfig::new(Variant::Rka).with_q(q).with_seed(seed);
        let rkab = SolverConfig { variant: Variant::Rkab, ..rka.clone() };
        let a = run_sequential(&sys, &rka, Mode::Fixed(40)).unwrap();
        let b = run_sequential(&sys, &rkab, Mode::Fixed(40)).unwrap();
        prop_assert!(bitwise_eq(&a.x, &b.x));
    }

    #[test]
    fn crops_share_prefix(m1 in 10usize..40, m2 in 10usize..40, n in 1usize..10, seed in any::<u64>()) {
        let cfg = GeneratorConfig::new(40, 10, seed);
        let mother = generate_mother(&cfg).unwrap();
        let (m1, m2) = (m1.max(n), m2.max(n));
        let a = crop(&mother, m1, n, &cfg).unwrap();
        let b = crop(&mother, m2, n, &cfg).unwrap();
        for i in 0..m1.min(m2) {
            prop_assert!(bitwise_eq(a.a.row(i), b.a.row(i)));
            prop_assert!(bitwise_eq(a.a.row(i), &mother.a.row(i)[..n]));
        }
        prop_assert!(a.consistency_residual().unwrap() < 1e-10);
    }
}
