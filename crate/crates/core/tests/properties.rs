use cluster_gas::combinatorics::{phi, spanning_tree_count};
use cluster_gas::config::RunConfig;
use cluster_gas::engine::{energy_momentum, naive_run, run};
use cluster_gas::geometry::{free_flight, pair_collision_time, scatter, torus_displacement, wrap};
use cluster_gas::{Configuration, Estimator, PhasePoint, Profile, SimpleGraph};
use proptest::prelude::*;

fn vec2() -> impl Strategy<Value = [f64; 2]> {
    [-3.0..3.0f64, -3.0..3.0f64]
}

fn unit2() -> impl Strategy<Value = [f64; 2]> {
    (0.0..std::f64::consts::TAU).prop_map(|a| [a.cos(), a.sin()])
}

fn point() -> impl Strategy<Value = PhasePoint<2>> {
    ([0.0..1.0f64, 0.0..1.0f64], vec2()).prop_map(|(x, v)| PhasePoint::wrapped(x, v))
}

proptest! {
    #[test]
    fn scatter_conserves_and_is_an_involution(vi in vec2(), vj in vec2(), w in unit2()) {
        let (a, b) = scatter(&vi, &vj, &w);
        let e0 = vi[0] * vi[0] + vi[1] * vi[1] + vj[0] * vj[0] + vj[1] * vj[1];
        let e1 = a[0] * a[0] + a[1] * a[1] + b[0] * b[0] + b[1] * b[1];
        prop_assert!((e0 - e1).abs() <= 1e-12 * e0.max(1.0));
        for k in 0..2 {
            prop_assert!((vi[k] + vj[k] - a[k] - b[k]).abs() <= 1e-12);
        }
        let (c, d) = scatter(&a, &b, &w);
        for k in 0..2 {
            prop_assert!((c[k] - vi[k]).abs() <= 1e-12 && (d[k] - vj[k]).abs() <= 1e-12);
        }
    }

    #[test]
    fn displacement_is_antisymmetric_and_minimal(a in point(), b in point()) {
        let d = torus_displacement(&a.x, &b.x);
        let e = torus_displacement(&b.x, &a.x);
        for k in 0..2 {
            prop_assert!(d[k].abs() <= 0.5 + 1e-15);
            prop_assert!((d[k] + e[k]).abs() <= 1e-15 || (d[k].abs() - 0.5).abs() < 1e-12);
        }
        let back = wrap(&[a.x[0] + d[0], a.x[1] + d[1]]);
        prop_assert!(cluster_gas::geometry::torus_distance(&back, &b.x) <= 1e-12);
    }

    #[test]
    fn free_flight_composes(z in point(), s in 0.0..2.0f64, t in 0.0..2.0f64) {
        let a = free_flight(&z, s + t);
        let b = free_flight(&free_flight(&z, s), t);
        prop_assert!(cluster_gas::geometry::torus_distance(&a.x, &b.x) <= 1e-12);
        prop_assert_eq!(a.v, b.v);
    }

    #[test]
    fn collision_time_is_symmetric(a in point(), b in point(), eps in 0.01..0.1f64) {
        prop_assume!(cluster_gas::geometry::torus_distance(&a.x, &b.x) > eps);
        let ab = pair_collision_time(&a, &b, eps, 0.2).unwrap();
        let ba = pair_collision_time(&b, &a, eps, 0.2).unwrap();
        match (ab, ba) {
            (None, None) => {}
            (Some(p), Some(q)) => {
                prop_assert!((p.t - q.t).abs() <= 1e-12);
                for k in 0..2 {
                    prop_assert!((p.omega[k] + q.omega[k]).abs() <= 1e-9);
                }
            }
            other => prop_assert!(false, "asymmetric prediction {:?}", other),
        }
    }

    #[test]
    fn estimator_merge_matches_streaming(xs in prop::collection::vec(-10.0..10.0f64, 2..200), cut in 0usize..200) {
        let cut = cut.min(xs.len());
        let whole = Estimator::from_slice(&xs);
        let merged = Estimator::from_slice(&xs[..cut]).merge(&Estimator::from_slice(&xs[cut..]));
        prop_assert_eq!(whole.n, merged.n);
        prop_assert!((whole.mean - merged.mean).abs() <= 1e-12 * whole.mean.abs().max(1.0));
        prop_assert!((whole.variance() - merged.variance()).abs() <= 1e-12 * whole.variance().max(1.0));
    }

    #[test]
    fn tree_inequality_on_random_graphs(k in 2usize..8, bits in any::<u32>()) {
        let mut g = SimpleGraph::new(k);
        let mut b = 0;
        for i in 0..k {
            for j in i + 1..k {
                if bits >> (b % 32) & 1 == 1 {
                    g.add_edge(i, j);
                }
                b += 1;
            }
        }
        let p = phi(&g).unwrap();
        if g.is_connected() {
            prop_assert!(p.unsigned_abs() <= spanning_tree_count(&g).unwrap());
            if g.is_tree() {
                prop_assert_eq!(p, if k % 2 == 1 { 1 } else { -1 });
            }
        } else {
            prop_assert_eq!(p, 0);
        }
    }

    #[test]
    fn config_round_trips(
        eps in 0.001..0.2f64,
        horizon in 0.01..5.0f64,
        seed in any::<u64>(),
        runs in 1usize..10_000,
        a in -0.9..0.9f64,
        d in 2usize..4,
    ) {
        let mut c = RunConfig::new(d, eps, horizon);
        c.seed = seed;
        c.runs = runs;
        c.profile = Profile::Cosine(a);
        let toml = c.to_toml_string();
        prop_assert_eq!(&RunConfig::from_toml_str(&toml).unwrap(), &c);
        prop_assert_eq!(&RunConfig::from_json_str(&c.to_json_string()).unwrap(), &c);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn engine_conserves_and_agrees_with_oracle(seed in any::<u64>(), n in 2usize..7) {
        let mut rng = cluster_gas::rng::stream(seed, cluster_gas::rng::Domain::Validation, 0);
        let config: Configuration<2> = cluster_gas::validate::random_configuration(n, 0.08, &mut rng);
        let fast = run(&config, 0.5).unwrap();
        let slow = naive_run(&config, 0.5).unwrap();
        prop_assert!(cluster_gas::validate::compare_logs(&fast, &slow, 1e-9).is_ok());
        let (e0, p0) = energy_momentum(&fast.initial_states());
        let (e1, p1) = energy_momentum(&fast.final_states());
        prop_assert!((e1 - e0).abs() <= 1e-9 * e0.max(1.0));
        for k in 0..2 {
            prop_assert!((p1[k] - p0[k]).abs() <= 1e-9 * e0.max(1.0));
        }
    }
}
