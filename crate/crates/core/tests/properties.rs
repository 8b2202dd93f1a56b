use expsum::calculus::{integrals_from_moments, MomentTable};
use expsum::io::csv::{read_records_from, write_records_to};
use expsum::recovery::{recover, records_from_model, RecoveryOptions, RecoveryProblem};
use expsum::solver::{exp_collocation_solve, lu_solve, poly_roots, DenseMatrix, MonicPolynomial};
use expsum::suite::max_relative_error;
use expsum::{ExpSumModel, Term};
use proptest::prelude::*;

/// Rates in ±[0.05, 2] with separation >= 0.1.
fn rates(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0.05f64..2.0, any::<bool>()), n).prop_filter_map("separation", |raw| {
        let mut a: Vec<f64> = raw.into_iter().map(|(m, s)| if s { m } else { -m }).collect();
        a.sort_by(f64::total_cmp);
        a.windows(2).all(|w| w[1] - w[0] >= 0.1).then_some(a)
    })
}

fn times(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..3.0, n).prop_filter_map("gaps", |mut t| {
        t.sort_by(f64::total_cmp);
        t.windows(2).all(|w| w[1] - w[0] >= 0.05).then_some(t)
    })
}

fn model_and_times(max_n: usize) -> impl Strategy<Value = (ExpSumModel, Vec<f64>)> {
    (1..=max_n).prop_flat_map(|n| {
        (rates(n), prop::collection::vec(0.1f64..5.0, n), times(2 * n)).prop_map(|(a, c, t)| {
            (ExpSumModel::from_parts(&c, &a, None).unwrap(), t)
        })
    })
}

/// `m_k = (t^k e^{αt} − k m_{k−1}) / α`, an upward recurrence; fine for
/// moderate `|α t|` and small `k`.
fn moment_by_recurrence(c: f64, a: f64, k: usize, t: f64) -> f64 {
    let mut m = ((a * t).exp() - 1.0) / a;
    for j in 1..=k {
        m = (t.powi(j as i32) * (a * t).exp() - j as f64 * m) / a;
    }
    c * m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn round_trip_small_models((truth, t) in model_and_times(3)) {
        let n = truth.n_terms();
        let recs = records_from_model(&truth, &t, n).unwrap();
        let res = recover(&RecoveryProblem::strict(n, recs).unwrap(), &RecoveryOptions::default()).unwrap();
        prop_assert!(max_relative_error(&res.model, &truth) <= 1e-6);
    }

    #[test]
    fn moments_match_recurrence(c in 0.1f64..5.0, a in prop_oneof![0.3f64..2.0, -2.0f64..-0.3], t in 0.1f64..3.0) {
        let m = ExpSumModel::new(vec![Term::new(c, a)], None).unwrap();
        for k in 0..4 {
            let want = moment_by_recurrence(c, a, k, t);
            let got = m.moment_exact(k, t).unwrap();
            prop_assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0), "k={} {} vs {}", k, got, want);
        }
    }

    #[test]
    fn moment_identity_matches_closed_form(c in 0.1f64..5.0, a in prop_oneof![0.05f64..2.0, -2.0f64..-0.05], t in 0.05f64..3.0) {
        let m = ExpSumModel::new(vec![Term::new(c, a)], None).unwrap();
        let table = MomentTable::from_model(&m, t, 5).unwrap();
        for k in 1..=6 {
            let want = m.iterated_integral_exact(k, t).unwrap();
            let got = integrals_from_moments(&table, k).unwrap();
            prop_assert!((got - want).abs() <= 1e-9 * want.abs().max(1e-3));
        }
    }

    #[test]
    fn collocation_coefficients_round_trip((truth, t) in model_and_times(6)) {
        let values: Vec<f64> = t.iter().map(|&s| truth.evaluate(s).unwrap()).collect();
        let fit = exp_collocation_solve(&truth.rates(), &t, &values, false).unwrap();
        for (got, want) in fit.coefficients.iter().zip(truth.coefficients()) {
            prop_assert!((got - want).abs() <= 1e-9 * want.abs(), "{} vs {}: rel {:.3e}", got, want, ((got - want) / want).abs());
        }
    }

    #[test]
    fn lu_residual_bound(n in 1usize..=6, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let size = 2 * n;
        let mut data: Vec<f64> = (0..size * size).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for d in 0..size {
            data[d * size + d] += size as f64;
        }
        let a = DenseMatrix::new(size, size, data).unwrap();
        let b: Vec<f64> = (0..size).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (x, cond) = lu_solve(&a, &b).unwrap();
        let r = a.mul_vec(&x).iter().zip(&b).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
        let bmax = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(r <= 1e-12 * cond * bmax);
    }

    #[test]
    fn planted_roots(roots in (1usize..=6).prop_flat_map(rates)) {
        let p = MonicPolynomial::from_roots(&roots).unwrap();
        let found = poly_roots(&p, 1e-8).unwrap();
        prop_assert_eq!(found.len(), roots.len());
        for (z, r) in found.iter().zip(&roots) {
            prop_assert!(p.relative_residual(*z) <= 1e-8);
            prop_assert!((z.re - r).abs() <= 1e-9 && z.im.abs() <= 1e-9);
        }
    }

    #[test]
    fn records_csv_round_trip((truth, t) in model_and_times(4)) {
        let recs = records_from_model(&truth, &t, truth.n_terms()).unwrap();
        let mut buf = Vec::new();
        write_records_to(&mut buf, &recs).unwrap();
        let back = read_records_from(buf.as_slice(), "mem").unwrap();
        prop_assert_eq!(back, recs);
    }
}
