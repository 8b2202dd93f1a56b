use expsum::calculus::{ingest_records, DenseSignal};
use expsum::recovery::{
    assemble_system, recover, recover_shifted, recover_with_constant, records_from_model,
    verify_overdetermined, RecoveryOptions, RecoveryProblem, SampleRecord,
};
use expsum::suite::{max_relative_error, random_points};
use expsum::{generate, Error, ExpSumModel, GeneratorSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn opts() -> RecoveryOptions {
    RecoveryOptions::default()
}

fn model(c: &[f64], a: &[f64], c0: Option<f64>) -> ExpSumModel {
    ExpSumModel::from_parts(c, a, c0).unwrap()
}

fn nonneg(n: usize, seed: u64) -> ExpSumModel {
    generate(&GeneratorSpec {
        n_terms: n,
        nonneg_required: true,
        seed,
        max_attempts: 10_000,
        ..GeneratorSpec::default()
    })
    .unwrap()
}

#[test]
fn cosh_pair_round_trip() {
    let truth = model(&[1.0, 1.0], &[1.0, -1.0], None);
    let recs = records_from_model(&truth, &[0.5, 1.0, 1.5, 2.0], 2).unwrap();
    let res = recover(&RecoveryProblem::strict(2, recs).unwrap(), &opts()).unwrap();
    assert!(max_relative_error(&res.model, &truth) < 1e-12);
    assert!(res.warnings.is_empty(), "{:?}", res.warnings);
    // rates are ascending
    assert!(res.model.terms()[0].alpha < res.model.terms()[1].alpha);
}

#[test]
fn single_term_solution_vector() {
    let (c, a) = (2.5, -0.7);
    let recs = records_from_model(&model(&[c], &[a], None), &[0.4, 1.9], 1).unwrap();
    let res = recover(&RecoveryProblem::strict(1, recs).unwrap(), &opts()).unwrap();
    assert!((res.x_vector[0] - a).abs() < 1e-12);
    assert!((res.x_vector[1] - c).abs() < 1e-12);
}

#[test]
fn record_at_origin_is_accepted() {
    let truth = model(&[0.5, 2.0], &[0.3, -1.1], None);
    let recs = records_from_model(&truth, &[0.0, 0.7, 1.4, 2.9], 2).unwrap();
    let res = recover(&RecoveryProblem::strict(2, recs).unwrap(), &opts()).unwrap();
    assert!(max_relative_error(&res.model, &truth) < 1e-10);
}

#[test]
fn frobenius_and_cancellation_structure() {
    for (n, seed) in [(2, 1), (3, 2), (3, 5), (4, 9)] {
        let truth = nonneg(n, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = random_points(&mut rng, 2 * n);
        let recs = records_from_model(&truth, &pts, n).unwrap();
        let res = recover(&RecoveryProblem::strict(n, recs).unwrap(), &opts()).unwrap();
        let x = &res.x_vector;

        for a in res.algebraic_model.rates() {
            let mut p = a.powi(n as i32);
            for k in 1..=n {
                p -= x[k - 1] * a.powi((n - k) as i32);
            }
            assert!(p.abs() <= 1e-8 * (1.0 + a.abs().powi(n as i32)), "N={n}: p({a}) = {p}");
        }

        // polynomial weights cancel the polynomial parts of the integrals
        let m = &res.algebraic_model;
        let mut fact = 1.0;
        for j in 0..n {
            if j > 0 {
                fact *= j as f64;
            }
            let mut want = 0.0;
            for k in (j + 1)..=n {
                for t in m.terms() {
                    want += x[k - 1] * t.c / (t.alpha.powi((k - j) as i32) * fact);
                }
            }
            let got = x[n + j];
            assert!((got - want).abs() <= 1e-7 * want.abs().max(1e-12), "N={n} j={j}: {got} vs {want}");
        }
    }
}

#[test]
fn reconstruction_at_records() {
    for (n, seed) in [(1, 3), (2, 4), (3, 6), (4, 8)] {
        let truth = nonneg(n, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let pts = random_points(&mut rng, 2 * n + 3);
        let recs = records_from_model(&truth, &pts, n).unwrap();
        let fmax = recs.iter().fold(0.0f64, |m, r| m.max(r.f_value().abs()));
        let res = recover(&RecoveryProblem::strict(n, recs).unwrap(), &opts()).unwrap();
        assert!(res.reconstruction_residual <= 1e-8 * fmax);
    }
}

#[test]
fn constant_with_one_exponential() {
    let truth = model(&[1.0], &[-1.0], Some(5.0));
    let recs = records_from_model(&truth, &[0.5, 1.3, 2.2], 1).unwrap();
    let res = recover_with_constant(&RecoveryProblem::with_constant(2, recs).unwrap(), &opts()).unwrap();
    assert!((res.model.constant().unwrap() - 5.0).abs() < 1e-10);
    assert_eq!(res.model.n_terms(), 1);
    assert!((res.model.terms()[0].c - 1.0).abs() < 1e-10);
    assert!((res.model.terms()[0].alpha + 1.0).abs() < 1e-10);
    // held-out points
    for t in [0.1, 2.9, 4.0] {
        assert!((res.model.evaluate(t).unwrap() - truth.evaluate(t).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn constant_with_two_exponentials() {
    let truth = model(&[0.8, 1.5], &[-0.6, 0.9], Some(-2.0));
    let recs = records_from_model(&truth, &[0.3, 0.9, 1.4, 2.0, 2.8], 2).unwrap();
    let res = recover_with_constant(&RecoveryProblem::with_constant(3, recs).unwrap(), &opts()).unwrap();
    assert!(max_relative_error(&res.model, &truth) < 1e-9);
    assert_eq!(res.x_vector.len(), 5);
}

#[test]
fn shifted_sign_indefinite() {
    let truth = model(&[1.0, -3.0], &[1.0, -1.0], None);
    let recs = records_from_model(&truth, &[0.2, 0.6, 1.1, 1.7, 2.4], 2).unwrap();
    assert!(recs.iter().any(|r| r.f_value() < 0.0));
    let res = recover_shifted(&RecoveryProblem::shifted(2, recs, 3.0).unwrap(), &opts()).unwrap();
    let terms = res.model.sorted_by_rate();
    assert!((terms.terms()[0].c + 3.0).abs() < 1e-9 && (terms.terms()[0].alpha + 1.0).abs() < 1e-9);
    assert!((terms.terms()[1].c - 1.0).abs() < 1e-9 && (terms.terms()[1].alpha - 1.0).abs() < 1e-9);
    assert!(res.model.constant().unwrap().abs() < 1e-9);
    assert!((res.constant_before_unshift.unwrap() - 3.0).abs() < 1e-9);
    for t in [0.05, 1.95, 3.5] {
        assert!((res.model.evaluate(t).unwrap() - truth.evaluate(t).unwrap()).abs() < 1e-8);
    }
}

#[test]
fn zero_shift_matches_strict() {
    let truth = model(&[1.2, 0.4], &[-0.5, 0.8], None);
    let recs = records_from_model(&truth, &[0.3, 0.8, 1.6, 2.1, 2.9], 2).unwrap();
    let strict = recover(&RecoveryProblem::strict(2, recs.clone()).unwrap(), &opts()).unwrap();
    let shifted = recover_shifted(&RecoveryProblem::shifted(2, recs, 0.0).unwrap(), &opts()).unwrap();
    let bare = ExpSumModel::new(shifted.model.terms().to_vec(), None).unwrap();
    assert!(max_relative_error(&bare, &strict.model) < 1e-9);
    assert!(shifted.model.constant().unwrap().abs() < 1e-9);
}

#[test]
fn true_constant_passes_through_shift() {
    let truth = model(&[1.0], &[-0.8], Some(2.0));
    let recs = records_from_model(&truth, &[0.4, 1.0, 1.7], 1).unwrap();
    let res = recover_shifted(&RecoveryProblem::shifted(1, recs, 1.0).unwrap(), &opts()).unwrap();
    assert!((res.constant_before_unshift.unwrap() - 3.0).abs() < 1e-9);
    assert!((res.model.constant().unwrap() - 2.0).abs() < 1e-9);
}

#[test]
fn shift_too_small() {
    let truth = model(&[1.0, -3.0], &[1.0, -1.0], None);
    let recs = records_from_model(&truth, &[0.2, 0.6, 1.1, 1.7, 2.4], 2).unwrap();
    let err = recover_shifted(&RecoveryProblem::shifted(2, recs, 0.5).unwrap(), &opts()).unwrap_err();
    assert!(matches!(err, Error::ShiftTooSmall { .. }));
    assert_eq!(err.exit_code(), 6);
}

#[test]
fn record_count_preconditions() {
    let truth = model(&[1.0, 2.0], &[0.5, -0.5], None);
    let recs = records_from_model(&truth, &[0.5, 1.0, 1.5], 2).unwrap();
    assert!(matches!(
        RecoveryProblem::strict(2, recs.clone()),
        Err(Error::InsufficientRecords { required: 4, got: 3 })
    ));
    assert!(matches!(
        RecoveryProblem::shifted(1, recs[..2].to_vec(), 1.0),
        Err(Error::InsufficientRecords { required: 3, got: 2 })
    ));
    let shallow = records_from_model(&truth, &[0.5, 1.0, 1.5, 2.0], 1).unwrap();
    assert!(RecoveryProblem::strict(2, shallow).is_err());
    let mut unsorted = records_from_model(&truth, &[0.5, 1.0, 1.5, 2.0], 2).unwrap();
    unsorted.swap(0, 1);
    assert!(RecoveryProblem::strict(2, unsorted).is_err());
}

#[test]
fn degenerate_data_is_singular() {
    // one-term data declared as two terms without surplus records: the
    // J₂ column is a combination of J₁ and t
    let truth = model(&[1.3], &[0.6], None);
    let recs = records_from_model(&truth, &[0.5, 1.0, 1.5, 2.0], 2).unwrap();
    let err = recover(&RecoveryProblem::strict(2, recs).unwrap(), &opts()).unwrap_err();
    assert!(matches!(err, Error::SingularMatrix { .. }), "{err:?}");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn assembled_layout() {
    let truth = model(&[1.0, 1.0], &[1.0, -1.0], None);
    let recs = records_from_model(&truth, &[0.5, 1.0, 1.5, 2.0, 2.5], 2).unwrap();
    let problem = RecoveryProblem::strict(2, recs.clone()).unwrap();
    let (sys, sel) = assemble_system(&problem).unwrap();
    assert_eq!(sel, vec![0, 1, 2, 3]);
    assert_eq!(sys.matrix.rows(), 4);
    let row = sys.matrix.row(2);
    assert_eq!(row[0], recs[2].integral(1));
    assert_eq!(row[1], recs[2].integral(2));
    assert_eq!(row[2], 1.0);
    assert_eq!(row[3], 1.5);
    assert_eq!(sys.rhs[2], recs[2].f_value());
}

#[test]
fn row_reselection_uses_all_records() {
    let truth = nonneg(3, 17);
    let times: Vec<f64> = (1..=20).map(|i| 0.15 * i as f64).collect();
    let recs = records_from_model(&truth, &times, 3).unwrap();
    let o = RecoveryOptions {
        reselect_rows: true,
        ..opts()
    };
    let res = recover(&RecoveryProblem::strict(3, recs).unwrap(), &o).unwrap();
    assert_eq!(res.selection.len(), 6);
    assert!(res.selection.windows(2).all(|w| w[0] < w[1]));
    assert!(max_relative_error(&res.model, &truth) < 1e-8);
}

#[test]
fn near_zero_rate_warns() {
    let truth = model(&[1.0, 2.0], &[1e-7, -0.9], None);
    let recs = records_from_model(&truth, &[0.4, 0.9, 1.6, 2.5], 2).unwrap();
    match recover(&RecoveryProblem::strict(2, recs).unwrap(), &opts()) {
        Ok(res) => assert!(res.warnings.iter().any(|w| w.contains("nearly zero")), "{:?}", res.warnings),
        Err(e) => assert!(matches!(e, Error::SingularMatrix { .. })),
    }
}

#[test]
fn surplus_single_term() {
    let truth = model(&[1.7], &[-0.4], None);
    let recs = records_from_model(&truth, &[0.3, 0.9, 1.5, 2.4], 2).unwrap();
    let report = verify_overdetermined(&RecoveryProblem::strict(2, recs).unwrap(), Some(1), &opts()).unwrap();
    assert!(report.pass, "{:?}", report.notes);
    assert_eq!(report.significant.len(), 1);
    assert!((report.significant[0].c - 1.7).abs() < 1e-6);
    assert!(report.spurious[0].c.abs() <= 1e-7 * 1.7);
    // substitution: the full declared-size fit reproduces the data
    let full = ExpSumModel::new(report.terms.clone(), None).unwrap();
    assert!((full.evaluate(1.2).unwrap() - truth.evaluate(1.2).unwrap()).abs() < 1e-9);
}

#[test]
fn surplus_equal_to_true_size() {
    let truth = model(&[0.9, 1.4], &[-1.2, 0.7], None);
    let recs = records_from_model(&truth, &[0.3, 0.9, 1.5, 2.4], 2).unwrap();
    let problem = RecoveryProblem::strict(2, recs.clone()).unwrap();
    let report = verify_overdetermined(&problem, Some(2), &opts()).unwrap();
    assert!(report.pass);
    assert!(report.spurious.is_empty());
    let direct = recover(&problem, &opts()).unwrap().model;
    let sig = ExpSumModel::new(report.significant.clone(), None).unwrap();
    assert!(max_relative_error(&sig, &direct) < 1e-6);
}

#[test]
fn surplus_two_extra_terms() {
    let truth = model(&[0.9, 1.4], &[-1.2, 0.7], None);
    let recs = records_from_model(&truth, &[0.2, 0.5, 0.9, 1.3, 1.7, 2.1, 2.5, 2.9], 4).unwrap();
    let report = verify_overdetermined(&RecoveryProblem::strict(4, recs).unwrap(), Some(2), &opts()).unwrap();
    assert!(report.pass, "{:?}", report.notes);
    let sig = ExpSumModel::new(report.significant.clone(), None).unwrap();
    assert!(max_relative_error(&sig, &truth) < 1e-6);
    assert!(report.spurious_ratio <= 1e-7);
}

#[test]
fn ingested_integrals_on_fine_grid() {
    for (n, seed) in [(1, 21), (2, 22), (3, 23)] {
        let truth = nonneg(n, seed);
        let signal = DenseSignal::from_model(&truth, 3.0, 4001).unwrap();
        let times: Vec<f64> = (1..=2 * n).map(|i| signal.grid()[i * 4000 / (2 * n)]).collect();
        let recs = ingest_records(&signal, &times, n).unwrap();
        let res = recover(&RecoveryProblem::strict(n, recs).unwrap(), &opts()).unwrap();
        assert!(max_relative_error(&res.model, &truth) <= 1e-4);
    }
}

#[test]
fn sample_record_validation() {
    assert!(SampleRecord::new(-0.1, 1.0, vec![]).is_err());
    assert!(SampleRecord::new(0.0, 1.0, vec![0.1]).is_err());
    assert!(SampleRecord::new(1.0, f64::NAN, vec![]).is_err());
    let r = SampleRecord::new(2.0, 1.0, vec![3.0, 4.0]).unwrap();
    let s = r.shifted(0.5);
    assert_eq!(s.f_value(), 1.5);
    assert_eq!(s.integral(1), 4.0);
    assert_eq!(s.integral(2), 5.0);
}
