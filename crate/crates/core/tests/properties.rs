use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use pairrec::bounds::{error_bound, BoundInputs};
use pairrec::harness::{Cell, ResultTable};
use pairrec::model::build_comparison;
use pairrec::randkit::RngStream;
use pairrec::sampling::SamplingEnsemble;
use pairrec::weights::{optimal_weights_a, optimal_weights_na, WeightScheme, WeightVector};

fn matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = RngStream::root(seed);
    DMatrix::from_fn(rows, cols, |_, _| rng.gaussian(0.0, 1.0).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn comparison_is_skew_with_rank_at_most_2r(n in 1usize..30, r in 1usize..5, seed in any::<u64>()) {
        let x = build_comparison(&matrix(n, r, seed), &matrix(n, r, seed ^ 1)).unwrap();
        let m = x.matrix();
        prop_assert_eq!(m, &(-m.transpose()));
        prop_assert!((0..n).all(|i| m[(i, i)] == 0.0));
        prop_assert!(x.numerical_rank() <= 2 * r);
    }

    #[test]
    fn gauge_invariance(n in 2usize..20, r in 1usize..4, seed in any::<u64>(), shift in 1.0f64..3.0) {
        let (s, q) = (matrix(n, r, seed), matrix(n, r, seed ^ 2));
        let g = DMatrix::<f64>::identity(r, r) * shift + matrix(r, r, seed ^ 3) * 0.3;
        let g_inv_t = g.clone().try_inverse().unwrap().transpose();
        let x = build_comparison(&s, &q).unwrap();
        let y = build_comparison(&(&s * &g), &(&q * g_inv_t)).unwrap();
        prop_assert!((y.matrix() - x.matrix()).norm() <= 1e-9 * x.matrix().norm().max(1.0));
    }

    #[test]
    fn adjoint_identity(n in 1usize..15, m in 1usize..100, seed in any::<u64>()) {
        let mut rng = RngStream::root(seed);
        let e = SamplingEnsemble::draw_uniform(n, m, &mut rng).unwrap();
        let x = matrix(n, n, seed ^ 4);
        let z = DVector::from_fn(m, |_, _| rng.gaussian(0.0, 1.0).unwrap());
        let lhs = e.apply(&x).unwrap().dot(&z);
        let rhs = x.component_mul(&e.adjoint(&z).unwrap()).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()) * m as f64);
    }

    #[test]
    fn optimal_weights_are_a_distribution(horizon in 1usize..60, s1 in 1e-3f64..2.0, s2 in 0.0f64..5.0, a in 0.0f64..3.0) {
        for w in [optimal_weights_na(horizon, s1, s2).unwrap(), optimal_weights_a(horizon, s1, s2, a).unwrap()] {
            let ws = w.as_slice();
            prop_assert!((ws.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(ws.iter().all(|&v| v > 0.0));
            prop_assert!(ws.windows(2).all(|p| p[0] <= p[1]));
        }
    }

    #[test]
    fn last_weight_grows_with_drift(horizon in 2usize..40, s1 in 1e-2f64..1.0, s2 in 1e-3f64..1.0) {
        let lo = optimal_weights_na(horizon, s1, s2).unwrap();
        let hi = optimal_weights_na(horizon, s1, 2.0 * s2).unwrap();
        prop_assert!(hi.get(horizon) >= lo.get(horizon));
    }

    #[test]
    fn bound_monotone_in_measurements_and_drift(n in 2usize..40, r in 1usize..4, m in 1usize..5000, horizon in 1usize..20, s2 in 0.0f64..1.0) {
        let w = WeightVector::for_scheme(WeightScheme::Equal, horizon, Default::default()).unwrap();
        let at = |m: usize, s2: f64| error_bound(&BoundInputs::new(n, r, 1.0, 0.1, s2, 1.0, m, w.clone())).unwrap();
        let (base, more_m, more_drift) = (at(m, s2), at(2 * m, s2), at(m, s2 + 0.1));
        prop_assert!(more_m.b1 <= base.b1 && more_m.b2 <= base.b2);
        prop_assert!(more_drift.b2 >= base.b2 && more_drift.b1 == base.b1);
        prop_assert_eq!(base.bound, base.b1.max(base.b2));
    }

    #[test]
    fn table_round_trips(values in prop::collection::vec(-1e300f64..1e300, 1..20), seed in any::<u64>()) {
        let mut t = ResultTable::new(&["k", "v", "tag"]);
        t.set_meta("seed", seed);
        for (k, &v) in values.iter().enumerate() {
            t.push(vec![Cell::from(k), Cell::from(v), Cell::from("x")]);
        }
        prop_assert_eq!(&ResultTable::from_csv(&t.to_csv()).unwrap(), &t);
        prop_assert_eq!(&ResultTable::from_json(&t.to_json()).unwrap(), &t);
    }

    #[test]
    fn derived_streams_are_reproducible(seed in any::<u64>(), path in prop::collection::vec(any::<u64>(), 0..4)) {
        let mut a = RngStream::from_path(seed, &path);
        let mut b = path.iter().fold(RngStream::root(seed), |s, &l| s.derive(l));
        let xs: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        prop_assert_eq!(xs, ys);
    }
}
