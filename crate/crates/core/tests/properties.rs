//! Structural invariants over randomly generated games.

use lqgame::filter::covariance_gap;
use lqgame::fixtures::random_instance;
use lqgame::linalg::{is_symmetric, min_sym_eig};
use lqgame::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instance(seed: u64, max_n: usize, horizon: usize) -> ProblemSpec {
    random_instance(&mut ChaCha8Rng::seed_from_u64(seed), max_n, horizon)
}

/// Random instances that pass the fatal validation checks.
fn valid(max_n: usize, horizon: usize) -> impl Strategy<Value = ProblemSpec> {
    any::<u64>().prop_filter_map("fails validation", move |seed| {
        let spec = instance(seed, max_n, horizon);
        validate(&spec).passed().then_some(spec)
    })
}

/// Random instances that additionally pass stabilizability/detectability.
fn compliant(max_n: usize, horizon: usize) -> impl Strategy<Value = ProblemSpec> {
    any::<u64>().prop_filter_map("not steady-ready", move |seed| {
        let spec = instance(seed, max_n, horizon);
        validate(&spec).steady_ready().then_some(spec)
    })
}

fn scale(m: &Mat) -> f64 {
    1.0 + m.norm()
}

fn solve(spec: &ProblemSpec) -> (AugmentedModel, RiccatiTrajectory, CovarianceSchedule) {
    let aug = augment(spec);
    let rt = backward(&aug, &spec.weights, spec.horizon).unwrap();
    let cov = covariance_forward(&aug, &spec.system.sigma, &rt.k2).unwrap();
    (aug, rt, cov)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn json_round_trip_is_lossless(spec in valid(4, 12)) {
        let text = serialize_spec(&spec);
        let back = load_spec(&text).unwrap();
        prop_assert_eq!(back, spec);
    }

    #[test]
    fn augmentation_is_deterministic_and_blockwise(spec in valid(4, 5)) {
        let aug = augment(&spec);
        prop_assert_eq!(&aug, &augment(&spec.clone()));
        let s = &spec.system;
        let (m1, n) = (s.m1(), s.n());
        prop_assert_eq!(aug.b.columns(0, m1).into_owned(), s.b1.clone());
        prop_assert_eq!(aug.b.columns(m1, s.m2()).into_owned(), s.b2.clone());
        prop_assert_eq!(aug.c.rows(0, s.p1()).into_owned(), s.c1.clone());
        prop_assert_eq!(aug.c.rows(s.p1(), s.p2()).into_owned(), s.c2.clone());
        prop_assert_eq!(aug.gamma1.view((0, 0), (m1, m1)).into_owned(), spec.weights.s1.clone());
        prop_assert_eq!(aug.gamma1.view((0, m1), (m1, s.m2())).amax(), 0.0);
        prop_assert_eq!(aug.gamma2.view((m1, m1), (s.m2(), s.m2())).into_owned(), spec.weights.r2.clone());
        prop_assert_eq!(aug.n(), n);
    }

    #[test]
    fn riccati_matrices_stay_symmetric_psd(spec in valid(4, 25)) {
        let (_, rt, _) = solve(&spec);
        for family in [&rt.p1, &rt.phi1, &rt.p2, &rt.phi2] {
            for m in family {
                prop_assert!(is_symmetric(m, 1e-9 * scale(m)));
                prop_assert!(min_sym_eig(m) >= -1e-8 * scale(m));
            }
        }
        for h in rt.h1.iter().chain(&rt.h2) {
            prop_assert!(min_sym_eig(h) > 0.0);
        }
    }

    #[test]
    fn private_estimate_dominates_common_estimate(spec in compliant(4, 25)) {
        let (_, _, cov) = solve(&spec);
        for row in covariance_gap(&cov) {
            prop_assert!(row.min_eig >= -1e-8, "k={} min_eig={}", row.k, row.min_eig);
        }
    }

    #[test]
    fn estimator2_covariance_ignores_private_gain(spec in valid(4, 15)) {
        let (aug, rt, cov) = solve(&spec);
        let zeros: Vec<Mat> = rt.k2.iter().map(|k| Mat::zeros(k.nrows(), k.ncols())).collect();
        let other = covariance_forward(&aug, &spec.system.sigma, &zeros).unwrap();
        prop_assert_eq!(&cov.sigma2_pred, &other.sigma2_pred);
        prop_assert_eq!(&cov.g2, &other.g2);
    }

    #[test]
    fn filtered_covariances_are_psd(spec in valid(4, 20)) {
        let (_, _, cov) = solve(&spec);
        for m in cov.sigma1_filt.iter().chain(&cov.sigma2_filt).chain(&cov.sigma1_pred).chain(&cov.sigma2_pred) {
            prop_assert!(is_symmetric(m, 0.0));
            prop_assert!(min_sym_eig(m) >= -1e-10 * scale(m));
        }
    }

    #[test]
    fn blind_private_sensor_collapses_the_gap(spec in valid(3, 15)) {
        let mut spec = spec;
        spec.system.c2 = Mat::zeros(spec.system.p2(), spec.system.n());
        let (_, rt, cov) = solve(&spec);
        for (s1, s2) in cov.sigma1_pred.iter().zip(&cov.sigma2_pred) {
            prop_assert!((s1 - s2).norm() <= 1e-10 * scale(s1));
        }
        let asym = analytic_cost_asym(&spec, &rt, &cov).unwrap();
        let sym = analytic_cost_sym(&spec, &rt, &cov).unwrap();
        prop_assert!((asym.j1 - sym.j1).abs() <= 1e-10 * (1.0 + sym.j1.abs()), "{} vs {}", asym.j1, sym.j1);
        prop_assert!((asym.j2 - sym.j2).abs() <= 1e-10 * (1.0 + sym.j2.abs()), "{} vs {}", asym.j2, sym.j2);
    }

    #[test]
    fn symmetric_closed_form_matches_exact_moments(spec in valid(3, 12)) {
        let (_, rt, cov) = solve(&spec);
        let sym = analytic_cost_sym(&spec, &rt, &cov).unwrap();
        let (j1, j2) = moment_oracle(&spec, &symmetric_profile(&rt)).unwrap();
        prop_assert!((sym.j1 - j1).abs() <= 1e-6 * (1.0 + j1.abs()), "{} vs {}", sym.j1, j1);
        prop_assert!((sym.j2 - j2).abs() <= 1e-6 * (1.0 + j2.abs()), "{} vs {}", sym.j2, j2);
    }

    #[test]
    fn gap_terms_are_nonnegative(spec in compliant(4, 30)) {
        let (_, rt, cov) = solve(&spec);
        let g = gap_decomposition(&spec, &rt, &cov).unwrap();
        prop_assert!(g.min_term_margin() >= 0.0, "{:?}", g.terms());
    }

    #[test]
    fn simulation_is_reproducible_and_errors_decompose(spec in valid(3, 8), seed in any::<u64>(), run in 0u64..1000) {
        let (_, rt, _) = solve(&spec);
        let profile = nash_profile(&rt);
        let cl = ClosedLoop::new(&spec, &profile).unwrap();
        let a = cl.simulate(&profile, seed, run);
        let b = cl.simulate(&profile, seed, run);
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.x.len(), spec.horizon + 2);
        for k in 0..a.x.len() {
            let s = a.e1[k].amax().max(a.e2[k].amax()).max(a.d[k].amax()).max(1.0);
            prop_assert!((&a.e1[k] - (&a.e2[k] + &a.d[k])).amax() <= 4.0 * f64::EPSILON * s);
        }
        let costs = cl.run_costs(&profile, 3, seed);
        let again = cl.simulate(&profile, seed, 2);
        prop_assert_eq!(costs[2], [again.realized_cost1, again.realized_cost2]);
    }
}
