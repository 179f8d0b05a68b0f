use super::{EvidenceTable, ExpectedIndicator, PropOrderConfig, PropTypeConfig, Relation, Report, Runner, Target};
use crate::error::Result;
use crate::functions::{parse_function, EntireFunction, MeromorphicFunction};
use crate::growth::{order_from_table, type_from_table, EstimatorPolicy, GrowthSource, GrowthTable, Mode, RadialGrid};
use crate::scales::ScaleTriple;
use num_complex::Complex64;

fn target_name(t: Target) -> &'static str {
    match t {
        Target::F1 => "f1",
        Target::F2 => "f2",
        Target::Sum => "f1+f2",
        Target::Product => "f1*f2",
        Target::Scaled => "c*f1",
        Target::Reciprocal => "1/f1",
    }
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::TBased => "T",
        Mode::MBased => "M",
    }
}

struct Estimator<'a> {
    triple: &'a ScaleTriple,
    grid: RadialGrid,
    policy: EstimatorPolicy,
}

impl Estimator<'_> {
    fn table(&self, src: &(impl GrowthSource + ?Sized), mode: Mode) -> Result<GrowthTable> {
        GrowthTable::sample(src, &self.grid, &[mode], self.policy.exec)
    }

    fn order(&self, rep: &mut Report, name: &str, table: &GrowthTable, mode: Mode, shifted: bool) -> Result<f64> {
        let e = order_from_table(table, self.triple, mode, shifted, &self.policy)?;
        rep.measure(format!("sigma_{}[{name}]", mode_name(mode)), e.value_slope);
        rep.evidence.push(EvidenceTable::from_estimate(format!("order_{}_{}", mode_name(mode), slug(name)), &e));
        Ok(e.value_slope)
    }

    fn type_(&self, rep: &mut Report, name: &str, table: &GrowthTable, sigma: f64, mode: Mode) -> Result<f64> {
        let e = type_from_table(table, self.triple, sigma, mode, false, &self.policy)?;
        rep.measure(format!("tau_{}[{name}]", mode_name(mode)), e.value_slope);
        rep.evidence.push(EvidenceTable::from_estimate(format!("type_{}_{}", mode_name(mode), slug(name)), &e));
        Ok(e.value_slope)
    }
}

fn slug(name: &str) -> String {
    name.replace('+', "_plus_").replace('*', "_times_").replace('/', "_over_")
}

fn expected_for(rep: &mut Report, expected: &[ExpectedIndicator], mode: Mode, target: Target) -> Option<f64> {
    let e = expected.iter().find(|e| e.mode == mode && e.target == target)?;
    rep.expect(format!("{}[{}]", mode_name(mode), target_name(target)), e.value, &e.provenance);
    Some(e.value)
}

pub(super) fn order_algebra(runner: &Runner, id: &str, c: &PropOrderConfig) -> Result<Report> {
    let grid = c.grid.radial()?;
    let mut rep = Report::new(id, "prop_order_algebra", runner.environment(Some(grid), None));
    let triple = c.triple.build()?;
    let est = Estimator { triple: &triple, grid, policy: EstimatorPolicy { exec: runner.exec, ..Default::default() } };
    let f1 = parse_function(&c.f1)?;
    let f2 = parse_function(&c.f2)?;
    let funcs: [(Target, EntireFunction); 5] = [
        (Target::F1, f1.clone()),
        (Target::F2, f2.clone()),
        (Target::Sum, f1.add(&f2)),
        (Target::Product, f1.mul(&f2)),
        (Target::Scaled, f1.scale(Complex64::new(c.scalar, 0.0))),
    ];
    let mut sigma = std::collections::BTreeMap::new();
    for (t, f) in &funcs {
        let table = est.table(f, c.mode)?;
        sigma.insert(target_name(*t), est.order(&mut rep, target_name(*t), &table, c.mode, c.shifted)?);
    }
    let (s1, s2) = (sigma["f1"], sigma["f2"]);
    let top = s1.max(s2);
    for (t, _) in &funcs {
        if let Some(v) = expected_for(&mut rep, &c.expected, c.mode, *t) {
            rep.check(format!("σ[{}] vs expected", target_name(*t)), sigma[target_name(*t)], v, c.tol, Relation::Within);
        }
    }
    rep.check("(i) σ[f1+f2] ≤ max", sigma["f1+f2"], top, c.tol, Relation::AtMost);
    rep.check("(ii) σ[f1·f2] ≤ max", sigma["f1*f2"], top, c.tol, Relation::AtMost);
    let differ = (s1 - s2).abs() > 2.0 * c.tol;
    if rep.clause_hypothesis("σ[f1] ≠ σ[f2]", differ, format!("σ[f1] = {s1}, σ[f2] = {s2}")) {
        rep.check("(iii) σ[f1+f2] = max", sigma["f1+f2"], top, c.tol, Relation::Within);
        rep.check("(iv) σ[f1·f2] = max", sigma["f1*f2"], top, c.tol, Relation::Within);
    }
    rep.check(format!("scalar: σ[{}·f1] = σ[f1]", c.scalar), sigma["c*f1"], s1, c.scalar_tol, Relation::Within);
    if c.reciprocal_zero_free {
        if c.mode == Mode::TBased {
            let rec = MeromorphicFunction::new(EntireFunction::real(1.0), f1.clone(), Vec::new(), f64::INFINITY)?;
            let table = est.table(&rec, Mode::TBased)?;
            let sr = est.order(&mut rep, "1/f1", &table, Mode::TBased, c.shifted)?;
            if let Some(v) = expected_for(&mut rep, &c.expected, c.mode, Target::Reciprocal) {
                rep.check("σ[1/f1] vs expected", sr, v, c.tol, Relation::Within);
            }
            rep.check("reciprocal: σ[1/f1] = σ[f1]", sr, s1, c.tol, Relation::Within);
        } else {
            rep.note("reciprocal clause needs the T-based mode; skipped");
        }
    }
    Ok(rep)
}

pub(super) fn type_algebra(runner: &Runner, id: &str, c: &PropTypeConfig) -> Result<Report> {
    let grid = c.grid.radial()?;
    let mut rep = Report::new(id, "prop_type_algebra", runner.environment(Some(grid), None));
    let triple = c.triple.build()?;
    let est = Estimator { triple: &triple, grid, policy: EstimatorPolicy { exec: runner.exec, ..Default::default() } };
    let f1 = parse_function(&c.f1)?;
    let f2 = parse_function(&c.f2)?;
    let sum = f1.add(&f2);
    let prod = f1.mul(&f2);
    if let Some(s) = &c.sigma1 {
        rep.expect("sigma[f1]", s.value, &s.provenance);
    }
    if let Some(s) = &c.sigma2 {
        rep.expect("sigma[f2]", s.value, &s.provenance);
    }
    let rel = c.type_rel;
    for &mode in &c.modes {
        let mn = mode_name(mode);
        let tables = [est.table(&f1, mode)?, est.table(&f2, mode)?, est.table(&sum, mode)?, est.table(&prod, mode)?];
        let names = ["f1", "f2", "f1+f2", "f1*f2"];
        let mut sig = [0.0; 4];
        for i in 0..4 {
            sig[i] = est.order(&mut rep, names[i], &tables[i], mode, false)?;
        }
        // oracle orders replace estimates that agree with them
        let oracle = [c.sigma1.as_ref().map(|e| e.value), c.sigma2.as_ref().map(|e| e.value)];
        for (i, o) in oracle.iter().enumerate() {
            if let Some(v) = o {
                rep.check(format!("σ_{mn}[{}] vs oracle", names[i]), sig[i], *v, c.order_tol, Relation::Within);
            }
        }
        let mut used = sig;
        for i in 0..4 {
            let snap = match i {
                0 | 1 => oracle[i],
                _ => oracle.iter().flatten().copied().find(|v| (sig[i] - v).abs() <= c.order_tol),
            };
            if let Some(v) = snap {
                if (sig[i] - v).abs() <= c.order_tol {
                    used[i] = v;
                }
            }
        }
        let mut tau = [0.0; 4];
        for i in 0..4 {
            tau[i] = est.type_(&mut rep, names[i], &tables[i], used[i], mode)?;
        }
        for (i, t) in [Target::F1, Target::F2, Target::Sum, Target::Product].into_iter().enumerate() {
            if let Some(v) = expected_for(&mut rep, &c.expected, mode, t) {
                rep.check(format!("τ_{mn}[{}] vs expected", names[i]), tau[i], v, rel, Relation::WithinRel);
            }
        }
        let eq = |a: f64, b: f64| (a - b).abs() <= c.order_tol;
        let top = tau[0].max(tau[1]);
        let types_differ = (tau[0] - tau[1]).abs() > rel * top;

        let h = eq(sig[0], sig[1]) && eq(sig[0], sig[2]) && sig[0] > c.order_tol;
        let detail = format!("σ_{mn} = {:?}", &sig[..3]);
        if rep.clause_hypothesis(format!("{mn}: σ[f1] = σ[f2] = σ[f1+f2] > 0"), h, detail) {
            rep.check(format!("{mn} (ii) τ[f1+f2] ≤ max"), tau[2], top, rel * top, Relation::AtMost);
            if types_differ {
                rep.check(format!("{mn} (ii) τ[f1+f2] = max"), tau[2], top, rel, Relation::WithinRel);
            }
            let b1 = tau[2].max(tau[1]);
            rep.check(format!("{mn} cor (i) τ[f1] ≤ max(τ[f1+f2], τ[f2])"), tau[0], b1, rel * b1, Relation::AtMost);
        }

        let h = eq(sig[0], sig[1]) && eq(sig[0], sig[3]) && sig[0] > c.order_tol;
        let detail = format!("σ_{mn}[f1], σ_{mn}[f2], σ_{mn}[f1·f2] = {}, {}, {}", sig[0], sig[1], sig[3]);
        if rep.clause_hypothesis(format!("{mn}: σ[f1] = σ[f2] = σ[f1·f2] > 0"), h, detail) {
            let sum_bound = tau[0] + tau[1];
            rep.check(format!("{mn} τ[f1·f2] ≤ τ[f1] + τ[f2]"), tau[3], sum_bound, rel * sum_bound, Relation::AtMost);
            let within = tau[3] <= top * (1.0 + rel);
            let detail = if within {
                format!("τ[f1·f2] = {} ≤ max = {top}", tau[3])
            } else {
                format!(
                    "hypothesis not satisfied: τ equality case (τ[f1·f2] = {} > max{{τ[f1], τ[f2]}} = {top})",
                    tau[3]
                )
            };
            if rep.clause_hypothesis(format!("{mn} (iii) product clause applicable"), within, detail) {
                rep.check(format!("{mn} (iii) τ[f1·f2] ≤ max"), tau[3], top, rel * top, Relation::AtMost);
            }
        }

        let (lo, hi) = if sig[0] <= sig[1] { (0, 1) } else { (1, 0) };
        let h = sig[hi] - sig[lo] > 2.0 * c.order_tol && sig[lo] > c.order_tol && tau[lo] < tau[hi];
        let detail = format!("σ_{mn} = ({}, {}), τ_{mn} = ({}, {})", sig[0], sig[1], tau[0], tau[1]);
        if rep.clause_hypothesis(format!("{mn}: 0 < σ[f_lo] < σ[f_hi], τ[f_lo] < τ[f_hi]"), h, detail) {
            rep.check(format!("{mn} (i) τ[f1+f2] = τ[f_hi]"), tau[2], tau[hi], rel, Relation::WithinRel);
            rep.check(format!("{mn} (i) τ[f1·f2] = τ[f_hi]"), tau[3], tau[hi], rel, Relation::WithinRel);
        }
    }
    Ok(rep)
}
