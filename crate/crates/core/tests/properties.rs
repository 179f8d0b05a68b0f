use growthlab::functions::{log_max_modulus, max_term_and_index, parse_function, proximity_m, CirclePolicy, MaxTermPolicy};
use growthlab::growth::{estimate_order, slope_fit, GrowthSource, Mode, RadialGrid};
use growthlab::quad::TrapezoidPolicy;
use growthlab::scales::{ScaleFunction, ScaleTriple};
use growthlab::verify::{IntervalSet, LogInterval, Runner, Suite, Verdict};
use proptest::prelude::*;

const CATALOG: [&str; 5] = ["exp(z)", "exp(z^2)", "z^3 + 2z + 1", "exp(z) + exp(2z)", "exp(exp(z))"];

fn subadditive_scales() -> Vec<ScaleFunction> {
    vec![
        ScaleFunction::identity(),
        ScaleFunction::power(0.3).unwrap(),
        ScaleFunction::power(0.75).unwrap(),
        ScaleFunction::affine(2.0, 1.0).unwrap(),
    ]
}

fn all_scales() -> Vec<ScaleFunction> {
    let mut v = subadditive_scales();
    v.push(ScaleFunction::iter_log(1).unwrap());
    v.push(ScaleFunction::iter_log(2).unwrap());
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn l3_scales_are_subadditive_in_multiples(r in 1.0f64..1e7, m in 2u32..12) {
        for s in subadditive_scales() {
            prop_assert!(s.eval(m as f64 * r) <= m as f64 * s.eval(r) * (1.0 + 1e-12), "{}", s.id());
        }
    }

    #[test]
    fn shift_sandwich(r in 1.0f64..1e7, big in prop::sample::select(vec![1.0f64, 10.0])) {
        for s in subadditive_scales() {
            let shifted = s.eval(r + big);
            prop_assert!(s.eval(r) <= shifted);
            prop_assert!(shifted <= (s.eval(r) + s.eval(big)) * (1.0 + 1e-12), "{}", s.id());
        }
    }

    #[test]
    fn inverse_undoes_scale(x in 20.0f64..1e12) {
        for s in all_scales() {
            let y = s.eval(x);
            let back = s.inverse(y).unwrap();
            prop_assert!((back - x).abs() <= 1e-9 * x, "{}: {x} -> {back}", s.id());
        }
    }

    #[test]
    fn slope_fit_recovers_power_laws(p in -3.0f64..5.0, c in -10.0f64..10.0, n in 8usize..40) {
        let pts: Vec<(f64, f64)> = (0..n).map(|i| {
            let x = (2.0 + i as f64).ln();
            (x, p * x + c)
        }).collect();
        let fit = slope_fit(&pts).unwrap();
        prop_assert!((fit.slope - p).abs() <= 1e-12 * (1.0 + p.abs()));
        prop_assert!((fit.intercept - c).abs() <= 1e-11 * (1.0 + c.abs()));
    }

    #[test]
    fn squares_family_matches_closed_form(j3 in 1u64..50, extra in 0u64..5000) {
        let n = j3 + extra;
        let m = IntervalSet::squares_family(j3, n).unwrap().log_measure();
        prop_assert!((m - ((n + 1) as f64 / j3 as f64).ln()).abs() <= 1e-12);
    }

    #[test]
    fn interval_measure_is_additive(widths in prop::collection::vec(0.0f64..3.0, 1..20)) {
        let mut set = IntervalSet::new();
        let mut start = 0.0;
        for w in &widths {
            set.push(LogInterval { log_start: start, log_ratio: *w }).unwrap();
            start += w + 0.5;
        }
        let total: f64 = widths.iter().sum();
        prop_assert!((set.log_measure() - total).abs() <= 1e-12 * (1.0 + total));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cauchy_bound_and_sandwich(which in 0usize..4, r in 0.5f64..12.0) {
        let f = parse_function(CATALOG[which]).unwrap();
        let circle = CirclePolicy::default();
        let log_m = log_max_modulus(&f, r, &circle).unwrap();
        let (log_mu, _) = max_term_and_index(&f, r, &MaxTermPolicy::default()).unwrap();
        prop_assert!(log_mu <= log_m + 1e-9 * (1.0 + log_m.abs()), "μ {log_mu} > M {log_m}");
        // T(r) ≤ log⁺ M(r) ≤ 3 T(2r)
        let t = f.characteristic(r).unwrap();
        let t2 = f.characteristic(2.0 * r).unwrap();
        let tol = 1e-6 * (1.0 + log_m.abs());
        prop_assert!(t <= log_m.max(0.0) + tol);
        prop_assert!(log_m.max(0.0) <= 3.0 * t2 + tol);
        // entire: T = m
        let m = proximity_m(&f, r, &TrapezoidPolicy::default()).unwrap();
        prop_assert!((t - m).abs() <= 1e-9 * (1.0 + m));
    }

    #[test]
    fn central_index_and_max_modulus_increase(which in 0usize..4, r in 0.5f64..10.0, dr in 0.01f64..2.0) {
        let f = parse_function(CATALOG[which]).unwrap();
        let p = MaxTermPolicy::default();
        let (_, nu1) = max_term_and_index(&f, r, &p).unwrap();
        let (_, nu2) = max_term_and_index(&f, r + dr, &p).unwrap();
        prop_assert!(nu1 <= nu2);
        let c = CirclePolicy::default();
        prop_assert!(log_max_modulus(&f, r, &c).unwrap() < log_max_modulus(&f, r + dr, &c).unwrap());
    }
}

#[test]
fn proximity_of_exp_matches_closed_form() {
    let f = parse_function("exp(z)").unwrap();
    for r in [1.0, 10.0, 100.0] {
        let m = proximity_m(&f, r, &TrapezoidPolicy::default()).unwrap();
        assert!((m - r / std::f64::consts::PI).abs() <= 1e-6 * r, "r = {r}: {m}");
    }
}

fn default_grid() -> RadialGrid {
    RadialGrid::new(4.0, 1.15, 40, 0.5).unwrap()
}

#[test]
fn scalar_invariance() {
    let grid = default_grid();
    let f = parse_function("exp(z^2)").unwrap();
    for mode in [Mode::TBased, Mode::MBased] {
        let base = estimate_order(&f, &ScaleTriple::identity(), &grid, mode, false).unwrap().value_slope;
        for a in ["2", "10"] {
            let g = parse_function(&format!("{a}*exp(z^2)")).unwrap();
            let v = estimate_order(&g, &ScaleTriple::identity(), &grid, mode, false).unwrap().value_slope;
            assert!((v - base).abs() <= 0.02, "{mode:?} a = {a}: {v} vs {base}");
        }
    }
}

/// `log M(r, e^{e^z}) = e^r` leaves the f64 range past r ≈ 709, so the
/// double exponential uses the shorter grid.
fn cases() -> [(&'static str, ScaleTriple, RadialGrid); 3] {
    let short = RadialGrid::spanning(4.0, 60.0, 40, 0.5).unwrap();
    [
        ("exp(z)", ScaleTriple::identity(), default_grid()),
        ("exp(z^2)", ScaleTriple::identity(), default_grid()),
        ("exp(exp(z))", ScaleTriple::log_id_id(), short),
    ]
}

#[test]
fn derivative_invariance() {
    for (src, triple, grid) in cases() {
        let f = parse_function(src).unwrap();
        let d = f.derivative(1).unwrap();
        let a = estimate_order(&f, &triple, &grid, Mode::MBased, false).unwrap().value_slope;
        let b = estimate_order(&d, &triple, &grid, Mode::MBased, false).unwrap().value_slope;
        assert!((a - b).abs() <= 0.05, "{src}: {a} vs {b}");
    }
}

#[test]
fn mode_consistency() {
    for (src, triple, grid) in cases().into_iter().take(2) {
        let f = parse_function(src).unwrap();
        let t = estimate_order(&f, &triple, &grid, Mode::TBased, false).unwrap().value_slope;
        let m = estimate_order(&f, &triple, &grid, Mode::MBased, false).unwrap().value_slope;
        assert!((t - m).abs() <= 0.05, "{src}: T {t} vs M {m}");
    }
}

/// For `e^{e^z}` the T-based slope approaches the M-based one only slowly;
/// on reachable grids it should at least move towards it.
#[test]
fn mode_gap_shrinks_for_double_exponential() {
    let f = parse_function("exp(exp(z))").unwrap();
    let triple = ScaleTriple::log_id_id();
    let gap = |r_max: f64| {
        let grid = RadialGrid::spanning(4.0, r_max, 40, 0.5).unwrap();
        let t = estimate_order(&f, &triple, &grid, Mode::TBased, false).unwrap().value_slope;
        let m = estimate_order(&f, &triple, &grid, Mode::MBased, false).unwrap().value_slope;
        (t - m).abs()
    };
    let (a, b) = (gap(20.0), gap(40.0));
    assert!(b < a, "{a} -> {b}");
    assert!(b <= 0.25, "{b}");
}

#[test]
fn failed_hypotheses_are_inapplicable_not_failures() {
    let suite = Suite::from_json(
        r#"{"version": 1, "scenarios": [
        {"id": "t2-high-lambda", "expect": "inapplicable", "run": {"kind": "theorem2", "ode": ["exp(z)", "0"],
         "grid": {"r0": 2.0, "r_max": 6.0, "count": 16}, "integration": {"rays": 8, "tol": 1e-8}, "lambda": 5.0}},
        {"id": "t3-tied", "expect": "inapplicable", "run": {"kind": "theorem3", "ode": ["exp(z)", "exp(z)"],
         "grid": {"r0": 2.0, "r_max": 6.0, "count": 16}, "integration": {"rays": 8, "tol": 1e-8}}},
        {"id": "t4-equal-types", "expect": "inapplicable", "run": {"kind": "theorem4", "ode": ["exp(z)", "exp(z)"],
         "grid": {"r0": 2.0, "r_max": 6.0, "count": 16}, "integration": {"rays": 8, "tol": 1e-8}}},
        {"id": "wv-poly", "expect": "inapplicable", "run": {"kind": "lemma_wiman_valiron", "f": "z^2 + 1",
         "grid": {"r0": 2.0, "r_max": 6.0, "count": 16}, "m_max": 1}},
        {"id": "mp-order-four", "expect": "inapplicable", "run": {"kind": "lemma_mp_bound", "ode": ["1", "0", "0", "0"], "handle": 0,
         "grid": {"r0": 2.0, "r_max": 6.0, "count": 16}, "integration": {"rays": 8, "tol": 1e-8}}},
        {"id": "wrong-expectation", "run": {"kind": "lemma_interval_measure", "j3": 2, "ns": [10],
         "expected": [{"n": 10, "value": 1.0, "tol": 1e-6, "provenance": "deliberately wrong"}]}}
    ]}"#,
    )
    .unwrap();
    let mut runner = Runner::new(1);
    let reports = runner.run_suite(&suite);
    for (s, r) in suite.scenarios.iter().zip(&reports) {
        if s.id == "wrong-expectation" {
            assert_eq!(r.verdict, Verdict::Fail);
        } else {
            assert_eq!(r.verdict, Verdict::Inapplicable, "{}: {:?}", s.id, r.notes);
            assert!(r.hypotheses.iter().any(|h| h.gates && !h.holds));
        }
    }
}

#[test]
fn rerun_is_byte_identical() {
    let suite = Suite::from_json(
        r#"{"version": 1, "seed": 3, "scenarios": [
        {"id": "zeros", "run": {"kind": "zero_bound_property", "count": 40}},
        {"id": "types", "run": {"kind": "prop_type_algebra", "f1": "exp(z)", "f2": "exp(2z)",
         "grid": {"r0": 4.0, "r_max": 30.0, "count": 16}}}
    ]}"#,
    )
    .unwrap();
    let a = Runner::new(0).run_suite(&suite);
    let b = Runner::new(0).run_suite(&suite);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.canonical_json(), y.canonical_json());
        assert_eq!(x.environment.seed, 3);
    }
}
