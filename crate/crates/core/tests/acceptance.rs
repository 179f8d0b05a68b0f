//! Acceptance gate. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero when any criterion fails.

use growthlab::functions::{parse_function, wiman_valiron_deviation, FunctionalPolicy};
use growthlab::growth::{estimate_order, order_from_table, EstimatorPolicy, GrowthSource, GrowthTable, Mode, RadialGrid};
use growthlab::odes::{
    abel_check, default_sample_points, reconstruct_coefficient, reduce_order, reduction_residual, solution_basis,
    wronskian_at, BasisOptions, Fan, LinearODE, QuotientDerivative, RayOptions,
};
use growthlab::scales::ScaleTriple;
use growthlab::verify::{IntervalSet, Report, Runner, Suite, Verdict};
use growthlab::ScaledComplex;
use num_complex::Complex64;
use std::f64::consts::PI;
use std::time::Instant;

type Outcome = Result<String, String>;

struct Gate {
    failures: usize,
}

impl Gate {
    /// Run `f`, time it, and print one line.
    fn run(&mut self, n: usize, title: &str, limit_s: f64, f: impl FnOnce() -> Outcome) {
        let t = Instant::now();
        let out = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f))
            .unwrap_or_else(|p| Err(format!("panicked: {:?}", p.downcast_ref::<String>().map(String::as_str).or(p.downcast_ref::<&str>().copied()))));
        self.record(n, title, t.elapsed().as_secs_f64(), limit_s, out);
    }

    fn record(&mut self, n: usize, title: &str, secs: f64, limit_s: f64, out: Outcome) {
        let (ok, detail) = match out {
            Ok(d) if secs < limit_s => (true, d),
            Ok(d) => (false, format!("{d}; runtime over limit")),
            Err(d) => (false, d),
        };
        self.failures += !ok as usize;
        println!(
            "criterion {n:>2} {}  {title}: {detail}  [{secs:.2} s, limit {limit_s} s]",
            if ok { "PASS" } else { "FAIL" }
        );
    }
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e<T: std::fmt::Display>(x: T) -> String {
    x.to_string()
}

fn report<'a>(reports: &'a [Report], id: &str) -> &'a Report {
    reports.iter().find(|r| r.id == id).unwrap_or_else(|| panic!("no report `{id}`"))
}

fn measured(r: &Report, key: &str) -> Result<f64, String> {
    r.measured.get(key).copied().ok_or_else(|| format!("{}: `{key}` not measured", r.id))
}

fn criterion1() -> Outcome {
    let f = parse_function("exp(z)").map_err(e)?;
    let grid = RadialGrid::new(4.0, 1.15, 40, 0.5).map_err(e)?;
    let est = estimate_order(&f, &ScaleTriple::identity(), &grid, Mode::TBased, false).map_err(e)?;
    let t10 = f.characteristic(10.0).map_err(e)?;
    // T(r, e^z) = (1/2π)∫ max(0, r cos θ) dθ = r/π
    let err = (t10 - 10.0 / PI).abs();
    ensure((est.value_slope - 1.0).abs() <= 0.02, format!("slope {}", est.value_slope))?;
    ensure(err <= 1e-5, format!("T(10) error {err:e}"))?;
    Ok(format!("slope {:.6}, |T(10) − 10/π| = {err:.1e}", est.value_slope))
}

fn criterion2() -> Outcome {
    let f = parse_function("exp(exp(z))").map_err(e)?;
    let grid = RadialGrid::spanning(4.0, 60.0, 40, 0.5).map_err(e)?;
    let est = estimate_order(&f, &ScaleTriple::log_id_id(), &grid, Mode::MBased, false).map_err(e)?;
    ensure((est.value_slope - 1.0).abs() <= 0.05, format!("slope {}", est.value_slope))?;
    Ok(format!("slope {:.6}", est.value_slope))
}

fn handle_orders(r: &Report, key: &str, lo: f64, hi: f64) -> Result<String, String> {
    let mut parts = Vec::new();
    for i in 0..2 {
        let v = measured(r, &format!("handle{i}.{key}"))?;
        ensure((lo..=hi).contains(&v), format!("handle{i} {key} {v} outside [{lo}, {hi}]"))?;
        parts.push(format!("{v:.4}"));
    }
    Ok(parts.join(", "))
}

fn criterion3(reports: &[Report]) -> Outcome {
    let r = report(reports, "t3-exp-z");
    ensure(r.verdict == Verdict::Pass, format!("verdict {:?}", r.verdict))?;
    let s = handle_orders(r, "shifted_order", 0.85, 1.15)?;
    Ok(format!("shifted orders {s} (predicted 1)"))
}

fn criterion4(reports: &[Report]) -> Outcome {
    let r = report(reports, "t4-dominant-type");
    let (t0, t1) = (measured(r, "tau_M[A0]")?, measured(r, "tau_M[A1]")?);
    // log M(r, e^{2z}) = 2r, log M(r, e^z) = r
    ensure((t0 - 2.0).abs() <= 0.2 && (t1 - 1.0).abs() <= 0.1, format!("τ_M[A0] = {t0}, τ_M[A1] = {t1}"))?;
    ensure(r.hypotheses.iter().all(|h| h.holds), "a hypothesis failed")?;
    ensure(r.verdict == Verdict::Pass, format!("verdict {:?}", r.verdict))?;
    let s = handle_orders(r, "shifted_order", 0.8, 1.2)?;
    Ok(format!("τ_M[A0] = {t0:.4} > τ_M[A1] = {t1:.4}; shifted orders {s}"))
}

fn criterion5(reports: &[Report]) -> Outcome {
    let r = report(reports, "t2-exp-z");
    ensure(r.verdict == Verdict::Pass, format!("verdict {:?}", r.verdict))?;
    let below = (0..2)
        .map(|i| measured(r, &format!("handle{i}.shifted_order")))
        .collect::<Result<Vec<f64>, String>>()?
        .into_iter()
        .filter(|v| *v < 0.85)
        .count();
    ensure(below == 0, format!("{below} handle(s) below 0.85"))?;
    Ok(format!("m = {}, handles below 0.85: {below}", measured(r, "m")?))
}

fn criterion6(reports: &[Report]) -> Outcome {
    let r = report(reports, "t1-exp-coefficient");
    ensure(r.verdict == Verdict::Pass, format!("verdict {:?}", r.verdict))?;
    let axis = r.checks.iter().find(|c| c.name.contains("θ = 0")).ok_or("no axis check")?;
    ensure(axis.measured <= 1e-6, format!("axis error {}", axis.measured))?;
    let (sf, sa) = (measured(r, "sup shifted order")?, measured(r, "sup coefficient order")?);
    ensure((sf - 1.0).abs() <= 0.1 && (sa - 1.0).abs() <= 0.1 && (sf - sa).abs() <= 0.1, format!("{sf} vs {sa}"))?;
    Ok(format!("axis rel error {:.1e}; sup shifted {sf:.4}, sup coefficient {sa:.4}", axis.measured))
}

/// `log f(r)` for `f = Σ a_n rⁿ`, `a_{n+3} = a_n/((n+2)(n+3))`, starting at `a_start = 1`.
fn airy_series_log(start: usize, r: f64) -> f64 {
    let lr = r.ln();
    let mut log_a = 0.0;
    let mut n = start;
    let mut terms = Vec::new();
    let mut best = f64::NEG_INFINITY;
    loop {
        let t = log_a + n as f64 * lr;
        best = best.max(t);
        terms.push(t);
        if t < best - 60.0 {
            break;
        }
        log_a -= ((n + 2) as f64).ln() + ((n + 3) as f64).ln();
        n += 3;
    }
    best + terms.iter().map(|t| (t - best).exp()).sum::<f64>().ln()
}

fn criterion7() -> Outcome {
    let ode = LinearODE::parse(&["-z", "0"]).map_err(e)?;
    let grid = RadialGrid::spanning(10.0, 100.0, 24, 0.5).map_err(e)?;
    let ray = RayOptions { tol: 1e-10, step_budget: 10_000_000, samples: grid.radii() };
    let basis = solution_basis(&ode, &BasisOptions::new(Fan::equispaced(32).map_err(e)?, 100.0, ray)).map_err(e)?;
    let policy = EstimatorPolicy::default();
    let mut parts = Vec::new();
    for (h, start) in [(0usize, 0usize), (1, 1)] {
        let src = basis.source(h);
        let table = GrowthTable::sample(&src, &grid, &[Mode::MBased], policy.exec).map_err(e)?;
        let est = order_from_table(&table, &ScaleTriple::identity(), Mode::MBased, false, &policy).map_err(e)?;
        ensure((est.value_slope - 1.5).abs() <= 0.1, format!("handle{h} slope {}", est.value_slope))?;
        // nonnegative series coefficients: M(r) = f(r)
        let mut worst = 0.0_f64;
        let mut pts = Vec::new();
        for (i, &r) in grid.radii().iter().enumerate() {
            let oracle = airy_series_log(start, r);
            let got = src.log_max_modulus(r).map_err(e)?;
            worst = worst.max((got - oracle).abs() / oracle.abs());
            if i >= grid.tail_start() {
                pts.push((r.ln(), oracle.ln()));
            }
        }
        ensure(worst <= 1e-6, format!("handle{h} log M differs from the series by {worst:e}"))?;
        let n = pts.len() as f64;
        let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
        let series_slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        ensure((series_slope - 1.5).abs() <= 0.1, format!("series slope {series_slope}"))?;
        parts.push(format!("handle{h} slope {:.4} (series {series_slope:.4}, log M rel diff {worst:.1e})", est.value_slope));
    }
    Ok(parts.join("; "))
}

fn criterion8() -> Outcome {
    let ode = LinearODE::parse(&["2", "-3"]).map_err(e)?;
    let samples: Vec<f64> = (1..=10).map(|i| 0.2 * i as f64).collect();
    let ray = RayOptions { tol: 1e-11, step_budget: 10_000_000, samples };
    let fan = Fan::equispaced(10).map_err(e)?;
    let basis = solution_basis(&ode, &BasisOptions::new(fan.clone(), 2.0, ray)).map_err(e)?;
    let w0 = wronskian_at(&basis, Complex64::new(0.0, 0.0)).map_err(e)?;
    ensure(w0 == ScaledComplex::ONE, format!("W(0) = {w0:?}"))?;
    let mut worst = 0.0_f64;
    let mut count = 0;
    for &theta in &fan.thetas {
        for i in 1..=10 {
            let z = Complex64::from_polar(0.2 * i as f64, theta);
            let a1 = reconstruct_coefficient(&basis, 1, z).map_err(e)?.to_complex();
            let a0 = reconstruct_coefficient(&basis, 2, z).map_err(e)?.to_complex();
            worst = worst.max((a1 + 3.0).norm() / 3.0).max((a0 - 2.0).norm() / 2.0);
            count += 1;
        }
    }
    ensure(count == 100 && worst <= 1e-6, format!("reconstruction error {worst:e} over {count} points"))?;
    let mut abel = 0.0_f64;
    for &theta in &fan.thetas {
        abel = abel.max(abel_check(&basis, theta, 2.0).map_err(e)?.relative_error);
    }
    ensure(abel <= 1e-6, format!("Abel error {abel:e}"))?;
    Ok(format!("W(0) = 1 exactly; A1, A0 rel error {worst:.1e} at {count} points; Abel {abel:.1e}"))
}

fn criterion9() -> Outcome {
    let ode = LinearODE::parse(&["2", "-3"]).map_err(e)?;
    let pts = default_sample_points();
    let e1 = parse_function("exp(z)").map_err(e)?;
    let e2 = parse_function("exp(2z)").map_err(e)?;
    let e3 = parse_function("exp(3z)").map_err(e)?;
    let mut worst = 0.0_f64;
    for (f1, c) in [(&e1, 1.0), (&e2, 2.0)] {
        let red = reduce_order(&ode, f1, &pts).map_err(e)?;
        // A_{1,0} = A₁ + 2f₁′/f₁ = −3 + 2c
        let want = -3.0 + 2.0 * c;
        for z in &pts {
            let got = red.coefficients_native(*z).map_err(e)?[0];
            worst = worst.max((got - want).norm());
        }
    }
    ensure(worst <= 1e-9, format!("A_(1,0) error {worst:e}"))?;
    let red = reduce_order(&ode, &e1, &pts).map_err(e)?;
    let nu = QuotientDerivative { num: &e2, den: &e1 };
    let res = reduction_residual(&red, &nu, &pts).map_err(e)?.max_residual;
    ensure(res <= 1e-9, format!("residual of ν₁ {res:e}"))?;
    let bad = QuotientDerivative { num: &e3, den: &e1 };
    let neg = reduction_residual(&red, &bad, &pts).map_err(e)?.max_residual;
    ensure(neg >= 0.1, format!("negative control residual {neg}"))?;
    Ok(format!("A_(1,0) error {worst:.1e}; residual {res:.1e}; negative control {neg:.3}"))
}

fn criterion10(reports: &[Report]) -> Outcome {
    let r = report(reports, "zero-bound");
    let c = r.checks.first().ok_or("no check")?;
    ensure(r.verdict == Verdict::Pass && c.measured == 200.0, format!("{} of 200 within the bound", c.measured))?;
    Ok(format!("{} of 200 polynomials, seed {}", c.measured, r.environment.seed))
}

fn criterion11() -> Outcome {
    let mut worst = 0.0_f64;
    for n in [10u64, 1000, 1_000_000] {
        let m = IntervalSet::squares_family(2, n).map_err(e)?.log_measure();
        worst = worst.max((m - ((n + 1) as f64 / 2.0).ln()).abs());
    }
    let ten = IntervalSet::squares_family(2, 10).map_err(e)?.log_measure();
    ensure(worst <= 1e-12, format!("error {worst:e}"))?;
    ensure((ten - 1.70475).abs() <= 1e-5, format!("N = 10 gives {ten}"))?;
    Ok(format!("max error {worst:.1e}; N = 10 → {ten:.6}"))
}

fn criterion12(reports: &[Report]) -> Outcome {
    let o = report(reports, "prop-order-sum-product");
    let t = report(reports, "prop-type-sum");
    let sum = measured(o, "sigma_T[f1+f2]")?;
    let scaled = (measured(o, "sigma_T[c*f1]")? - measured(o, "sigma_T[f1]")?).abs();
    let tm = measured(t, "tau_M[f1+f2]")?;
    let tt = measured(t, "tau_T[f1+f2]")?;
    ensure((sum - 2.0).abs() <= 0.05, format!("σ[e^z + e^(z²)] = {sum}"))?;
    ensure(scaled <= 0.02, format!("|σ[2f] − σ[f]| = {scaled}"))?;
    ensure((tm - 2.0).abs() <= 0.2, format!("τ_M = {tm}"))?;
    // T(r, e^{2z}) = 2r/π
    ensure((tt - 2.0 / PI).abs() <= 0.2 / PI, format!("τ_T = {tt}"))?;
    Ok(format!("σ[sum] = {sum:.4}; |σ[2f] − σ[f]| = {scaled:.4}; τ_M = {tm:.4}; τ_T = {tt:.4} (2/π = {:.4})", 2.0 / PI))
}

fn criterion13() -> Outcome {
    let policy = FunctionalPolicy::default();
    let ez = parse_function("exp(z)").map_err(e)?;
    let ez2 = parse_function("exp(z^2)").map_err(e)?;
    let d1 = wiman_valiron_deviation(&ez, 20.0, 1, &policy).map_err(e)?;
    let d2 = wiman_valiron_deviation(&ez, 20.0, 2, &policy).map_err(e)?;
    let d3 = wiman_valiron_deviation(&ez2, 4.0, 1, &policy).map_err(e)?;
    ensure(d1 <= 1e-9 && d2 <= 1e-9, format!("exp(z) deviations {d1:e}, {d2:e}"))?;
    ensure(d3 <= 0.1, format!("exp(z²) deviation {d3}"))?;
    Ok(format!("exp(z): {d1:.1e}, {d2:.1e}; exp(z²): {d3:.1e}"))
}

fn main() {
    let mut gate = Gate { failures: 0 };
    gate.run(1, "order oracle", 5.0, criterion1);
    gate.run(2, "iterated-scale order", 5.0, criterion2);

    let suite = Suite::default_suite();
    let t = Instant::now();
    let first = Runner::new(suite.seed).run_suite(&suite);
    let first_wall = t.elapsed().as_secs_f64();
    let rt = |ids: &[&str]| ids.iter().map(|id| report(&first, id).metadata.runtime_seconds).sum::<f64>();

    gate.record(3, "theorem t3 desk scale", rt(&["t3-exp-z"]), 60.0, criterion3(&first));
    gate.record(4, "theorem t4 desk scale", rt(&["t4-dominant-type"]), 120.0, criterion4(&first));
    gate.record(5, "theorem t2 desk scale (shared with 3)", rt(&["t3-exp-z", "t2-exp-z"]), 60.0, criterion5(&first));
    gate.record(6, "theorem t1, k = 1", rt(&["t1-exp-coefficient"]), 10.0, criterion6(&first));
    gate.run(7, "Airy classical order", 30.0, criterion7);
    gate.run(8, "Wronskian machinery", 5.0, criterion8);
    gate.run(9, "order reduction", 5.0, criterion9);
    gate.record(10, "polynomial zero bound", rt(&["zero-bound"]), 5.0, criterion10(&first));
    gate.run(11, "interval measure", 1.0, criterion11);
    gate.record(12, "proposition suites", rt(&["prop-order-sum-product", "prop-type-sum"]), 20.0, criterion12(&first));
    gate.run(13, "Wiman–Valiron deviation", 5.0, criterion13);

    let t = Instant::now();
    let second = Runner::new(suite.seed).run_suite(&suite);
    let wall = first_wall + t.elapsed().as_secs_f64();
    let determinism = (|| {
        let differing: Vec<&str> =
            first.iter().zip(&second).filter(|(a, b)| a.canonical_json() != b.canonical_json()).map(|(a, _)| a.id.as_str()).collect();
        ensure(differing.is_empty(), format!("reports differ: {differing:?}"))?;
        let unmet: Vec<&str> =
            suite.scenarios.iter().zip(&first).filter(|(s, r)| !s.satisfied_by(r)).map(|(s, _)| s.id.as_str()).collect();
        ensure(unmet.is_empty(), format!("scenarios not as expected: {unmet:?}"))?;
        Ok(format!("{} reports byte-identical across two runs; every scenario as expected", first.len()))
    })();
    gate.record(14, "determinism and full-suite wall time (two runs)", wall, 300.0, determinism);

    if gate.failures > 0 {
        println!("{} criterion(s) failed", gate.failures);
        std::process::exit(1);
    }
    println!("all 14 criteria passed");
}
