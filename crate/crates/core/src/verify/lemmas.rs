use super::{
    EvidenceTable, LogDerivConfig, LogDerivVariant, MpBoundConfig, Relation, Report, Runner, WimanValironConfig,
    ZeroBoundConfig,
};
use crate::error::{Error, Result};
use crate::functions::{
    parse_function, proximity_m, sampled_circle_max, wiman_valiron_deviation, FunctionalPolicy, LogAbsFn,
};
use crate::growth::{order_from_table, EstimatorPolicy, GrowthSource, GrowthTable, Mode};
use crate::odes::{verify_roots_within, LinearODE};
use crate::quad::{gauss_legendre, periodic_mean, TrapezoidPolicy};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// `m(r, ·)` values below this are read as 0.
const PROXIMITY_FLOOR: f64 = 1e-12;

fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else if v[n / 2 - 1] == v[n / 2] {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub(super) fn logderiv(runner: &Runner, id: &str, c: &LogDerivConfig) -> Result<Report> {
    let grid = c.grid.radial()?;
    let mut rep = Report::new(id, "lemma_logderiv", runner.environment(Some(grid), None));
    let triple = c.triple.build()?;
    let f = parse_function(&c.f)?;
    let policy = FunctionalPolicy::with_exec(runner.exec);
    let sigma = match &c.sigma {
        Some(e) => {
            rep.expect("sigma", e.value, &e.provenance);
            e.value
        }
        None => {
            let est = EstimatorPolicy { exec: runner.exec, ..Default::default() };
            let table = GrowthTable::sample(&f, &grid, &[Mode::TBased], runner.exec)?;
            let e = order_from_table(&table, &triple, Mode::TBased, false, &est)?;
            rep.evidence.push(EvidenceTable::from_estimate("order_T", &e));
            e.value_slope
        }
    };
    rep.measure("sigma", sigma);
    let d = f.derivative(c.k)?;
    let quotient = LogAbsFn(|z: Complex64| Ok((d.eval(z)? / f.eval(z)?).log_abs()));
    let radii = grid.radii();
    let tail = grid.tail_start();
    let (columns, label): (&[&str], &str) = match c.variant {
        LogDerivVariant::Proximity => (&["r", "m_quotient", "log_bound", "log_ratio"], "proximity"),
        LogDerivVariant::Pointwise => (&["r", "log_max_quotient", "log_bound", "log_ratio"], "pointwise"),
    };
    rep.note(format!("variant: {label}, k = {}, ε = {}, ξ = {}", c.k, c.epsilon, c.xi));
    let mut table = EvidenceTable::new("log_derivative", columns);
    let mut log_ratios = Vec::with_capacity(radii.len());
    for &r in &radii {
        let row = match c.variant {
            LogDerivVariant::Proximity => proximity_m(&quotient, r, &policy.trapezoid).and_then(|m| {
                let m = if m < PROXIMITY_FLOOR { 0.0 } else { m };
                let log_bound = triple.alpha.inverse((sigma + c.epsilon) * triple.denominator(r))?;
                Ok((m, log_bound, m.ln() - log_bound))
            }),
            LogDerivVariant::Pointwise => sampled_circle_max(&quotient, r, &policy.circle).and_then(|(lhs, _)| {
                let t = proximity_m(&f, c.xi * r, &policy.trapezoid)?;
                let base = t / r * r.ln().powf(c.xi) * t.ln();
                if !(base > 0.0) {
                    return Err(Error::InvalidArgument(format!("T({}) = {t} too small for the bound", c.xi * r)));
                }
                let log_bound = c.k as f64 * base.ln();
                Ok((lhs, log_bound, lhs - log_bound))
            }),
        };
        match row {
            Ok((v, b, lr)) => {
                table.push_values(&[r, v, b, lr]);
                log_ratios.push(Some(lr));
            }
            Err(e) => {
                rep.note(format!("r = {r}: excluded ({e})"));
                table.push(vec![Some(r), None, None, None]);
                log_ratios.push(None);
            }
        }
    }
    let tail_vals: Vec<f64> = log_ratios[tail..].iter().flatten().copied().collect();
    let head_max = log_ratios[..tail].iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_c = head_max.max(median(&tail_vals)) + c.bound_factor.ln();
    rep.measure("log fitted constant", log_c);
    let excluded = log_ratios[tail..].iter().filter(|v| v.map_or(true, |x| x > log_c)).count();
    let share = excluded as f64 / (radii.len() - 1) as f64;
    rep.measure("excluded radii", excluded as f64);
    rep.check("excluded share of log measure", share, c.exclusion_budget, 0.0, Relation::AtMost);
    rep.evidence.push(table);
    Ok(rep)
}

pub(super) fn wiman_valiron(runner: &Runner, id: &str, c: &WimanValironConfig) -> Result<Report> {
    let grid = c.grid.radial()?;
    let mut rep = Report::new(id, "lemma_wiman_valiron", runner.environment(Some(grid), None));
    let f = parse_function(&c.f)?;
    if !rep.hypothesis("f transcendental", !f.is_polynomial(), c.f.clone()) {
        return Ok(rep);
    }
    let policy = FunctionalPolicy::with_exec(runner.exec);
    let mut table = EvidenceTable::new("deviation", &["r", "m", "deviation", "tolerance", "excluded"]);
    for m in 1..=c.m_max {
        let mut ok = 0usize;
        for &r in &grid.radii() {
            let tol = 5.0 / r.sqrt();
            let dev = wiman_valiron_deviation(&f, r, m, &policy).unwrap_or(f64::NAN);
            let good = dev <= tol;
            ok += good as usize;
            table.push_values(&[r, m as f64, dev, tol, if good { 0.0 } else { 1.0 }]);
        }
        let share = ok as f64 / grid.count as f64;
        rep.check(format!("m={m}: share of radii with deviation ≤ 5/√r"), share, c.fraction, 0.0, Relation::AtLeast);
    }
    for p in &c.points {
        let dev = wiman_valiron_deviation(&f, p.r, p.m, &policy)?;
        rep.check(format!("deviation at r={}, m={}", p.r, p.m), dev, 0.0, p.tol, Relation::AtMost);
    }
    rep.evidence.push(table);
    Ok(rep)
}

/// `Σ_j ∫₀^{2π}∫₀^r |A_j(se^{iθ})|^{1/(k−j)} ds dθ`.
fn coefficient_double_integral(ode: &LinearODE, r: f64, exec: crate::Exec) -> Result<f64> {
    let k = ode.order();
    let policy = TrapezoidPolicy { start_log2: 5, max_log2: 14, rel_tol: 1e-7, abs_floor: 1e-14, exec };
    let mut total = 0.0;
    for (j, a) in ode.coefficients().iter().enumerate() {
        if a.as_constant().is_some_and(|v| v.norm() == 0.0) {
            continue;
        }
        let p = 1.0 / (k - j) as f64;
        let (mean, _) = periodic_mean(
            |theta| {
                let dir = Complex64::from_polar(1.0, theta);
                let v = gauss_legendre(|s| a.log_abs(dir * s).map(|l| (p * l).exp()).unwrap_or(f64::NAN), 0.0, r, 1e-9, 1 << 12)?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::InvalidArgument(format!("coefficient A{j} not finite on the ray θ = {theta}")))
                }
            },
            &policy,
        )?;
        total += 2.0 * PI * mean;
    }
    Ok(total)
}

pub(super) fn mp_bound(runner: &Runner, id: &str, c: &MpBoundConfig) -> Result<Report> {
    let grid = c.grid.radial()?;
    let mut rep = Report::new(id, "lemma_mp_bound", runner.environment(Some(grid), Some(&c.integration)));
    let ode = LinearODE::parse(&c.ode)?;
    if !rep.hypothesis("order k ≤ 3", ode.order() <= 3, format!("k = {}", ode.order())) {
        return Ok(rep);
    }
    if !c.integration.fan()?.is_full() {
        return Err(Error::Config("lemma_mp_bound needs a full fan (no excluded sector)".into()));
    }
    if c.handle >= ode.order() {
        return Err(Error::Config(format!("handle {} out of range", c.handle)));
    }
    let radii = grid.radii();
    let basis = runner.basis(&c.ode, &c.integration, c.grid.r_max, &radii)?;
    let src = basis.source(c.handle);
    let mut table = EvidenceTable::new("mp_bound", &["r", "m", "double_integral", "ratio"]);
    let mut ratios = Vec::with_capacity(radii.len());
    for &r in &radii {
        let m = src.characteristic(r)?;
        let m = if m < PROXIMITY_FLOOR { 0.0 } else { m };
        let rhs = coefficient_double_integral(&ode, r, runner.exec)? + 1.0;
        let ratio = m / rhs;
        table.push_values(&[r, m, rhs - 1.0, ratio]);
        ratios.push(ratio);
    }
    let tail = &ratios[grid.tail_start()..];
    let bound = median(tail) * c.bound_factor;
    let worst = tail.iter().copied().fold(0.0, f64::max);
    rep.measure("median tail ratio", median(tail));
    rep.check("max tail ratio ≤ factor × median", worst, bound, 0.0, Relation::AtMost);
    rep.evidence.push(table);
    Ok(rep)
}

pub(super) fn zero_bound(runner: &Runner, id: &str, c: &ZeroBoundConfig) -> Result<Report> {
    let seed = c.seed.unwrap_or(runner.seed);
    let mut env = runner.environment(None, None);
    env.seed = seed;
    let mut rep = Report::new(id, "zero_bound_property", env);
    if c.max_degree == 0 {
        return Err(Error::Config("max_degree must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = c.coefficient_bound;
    let mut table = EvidenceTable::new("polynomials", &["index", "degree", "bound", "max_root_modulus", "within"]);
    let mut within = 0usize;
    for i in 0..c.count {
        let degree = rng.gen_range(1..=c.max_degree);
        let mut coeffs: Vec<Complex64> = (0..=degree).map(|_| Complex64::new(rng.gen_range(-b..=b), 0.0)).collect();
        while coeffs[degree].norm() < 1e-3 * b {
            coeffs[degree] = Complex64::new(rng.gen_range(-b..=b), 0.0);
        }
        let chk = verify_roots_within(&coeffs)?;
        within += chk.within as usize;
        table.push_values(&[i as f64, degree as f64, chk.bound, chk.max_root_modulus, if chk.within { 1.0 } else { 0.0 }]);
    }
    rep.check("polynomials with every root inside the bound", within as f64, c.count as f64, 0.0, Relation::Within);
    rep.evidence.push(table);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_examples() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn double_integral_of_unit_coefficient() {
        // f″ + f = 0: |A₀|^{1/2} = 1, A₁ = 0, so the integral is 2πr
        let ode = LinearODE::parse(&["1", "0"]).unwrap();
        let v = coefficient_double_integral(&ode, 3.0, crate::Exec::Sequential).unwrap();
        assert!((v - 6.0 * PI).abs() < 1e-9);
        // f′ − e^z f = 0: ∫₀^{2π}∫₀^r e^{s cos θ} ds dθ = 2π Σ_{n≥0} r^{2n+1}/((2n+1)(n!)²·4ⁿ)
        let ode = LinearODE::parse(&["-exp(z)"]).unwrap();
        let r: f64 = 2.0;
        let mut series = 0.0;
        let mut fact = 1.0_f64;
        for n in 0..30 {
            if n > 0 {
                fact *= n as f64;
            }
            series += r.powi(2 * n + 1) / ((2 * n + 1) as f64 * fact * fact * 4f64.powi(n));
        }
        let v = coefficient_double_integral(&ode, r, crate::Exec::Sequential).unwrap();
        assert!((v - 2.0 * PI * series).abs() < 1e-8 * v);
    }
}
