use super::{EvidenceTable, Relation, Report, Runner, TheoremConfig};
use crate::error::{Error, Result};
use crate::growth::{
    coefficient_order, estimate_type, order_from_table, EstimatorPolicy, GrowthSource, GrowthTable, Mode, RadialGrid,
};
use crate::functions::parse_function;
use crate::odes::{LinearODE, RaySet, SolutionBasis, SolutionHandle, Termination};
use crate::scales::{check_triple, default_triple_grid, ScaleTriple};
use num_complex::Complex64;
use std::sync::Arc;

/// One basis handle read over a chosen ray set.
struct HandleOver<'a> {
    handle: &'a SolutionHandle,
    set: RaySet,
}

impl GrowthSource for HandleOver<'_> {
    fn log_max_modulus(&self, r: f64) -> Result<f64> {
        Ok(self.handle.log_max_modulus_over(r, self.set)?.0)
    }

    fn characteristic(&self, r: f64) -> Result<f64> {
        Err(Error::NoRayAtRadius(r))
    }
}

struct Setup {
    ode: LinearODE,
    triple: ScaleTriple,
    grid: RadialGrid,
    basis: Arc<SolutionBasis>,
    policy: EstimatorPolicy,
}

fn setup(runner: &Runner, rep: &mut Report, c: &TheoremConfig) -> Result<Setup> {
    let triple = c.triple.build()?;
    let grid = c.grid.radial()?;
    let tr = check_triple(&triple, &default_triple_grid())?;
    rep.hypothesis(
        "scale triple conditions",
        tr.pass,
        format!("{}: condition (i) {}, {} clauses", tr.triple, tr.condition_i, tr.clauses.len()),
    );
    let ode = LinearODE::parse(&c.ode)?;
    let mut samples = grid.radii();
    if let Some(o) = &c.axis_oracle {
        samples.extend(o.radii.iter().copied().filter(|&r| r > 0.0 && r <= c.grid.r_max));
    }
    samples.sort_by(f64::total_cmp);
    samples.dedup();
    let basis = runner.basis(&c.ode, &c.integration, c.grid.r_max, &samples)?;
    ray_evidence(rep, &basis);
    Ok(Setup { ode, triple, grid, basis, policy: EstimatorPolicy { exec: runner.exec, ..Default::default() } })
}

fn termination_code(t: Termination) -> f64 {
    match t {
        Termination::Completed => 0.0,
        Termination::StepBudget => 1.0,
        Termination::ToleranceFailure => 2.0,
    }
}

fn ray_evidence(rep: &mut Report, basis: &SolutionBasis) {
    let mut t = EvidenceTable::new("rays", &["theta", "reach", "steps", "rejected", "renormalizations", "termination"]);
    if let Some(h) = basis.handles.first() {
        for tr in &h.traces {
            t.push_values(&[
                tr.theta,
                tr.reach(),
                tr.steps as f64,
                tr.rejected as f64,
                tr.renorm_count as f64,
                termination_code(tr.terminated),
            ]);
        }
        let done = h.traces.iter().filter(|t| t.terminated == Termination::Completed).count();
        rep.measure("rays_completed", done as f64);
        rep.measure("rays_total", h.traces.len() as f64);
    }
    rep.evidence.push(t);
}

/// `σ[A_j]` for every coefficient; constants have order 0 without sampling.
fn coefficient_orders(rep: &mut Report, s: &Setup, mode: Mode) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(s.ode.order());
    for (j, a) in s.ode.coefficients().iter().enumerate() {
        match coefficient_order(a, &s.triple, &s.grid, mode)? {
            None => {
                rep.measure(format!("sigma[A{j}]"), 0.0);
                out.push(0.0);
            }
            Some(e) => {
                rep.measure(format!("sigma[A{j}]"), e.value_slope);
                rep.measure(format!("sigma[A{j}].tail_sup"), e.value_tail_sup);
                rep.evidence.push(EvidenceTable::from_estimate(format!("coefficient_A{j}_order"), &e));
                out.push(e.value_slope);
            }
        }
    }
    Ok(out)
}

/// Order of every basis handle (M-based), shifted or plain.
fn handle_orders(rep: &mut Report, s: &Setup, shifted: bool) -> Result<Vec<f64>> {
    let label = if shifted { "shifted_order" } else { "plain_order" };
    let set = s.basis.options.ray_set;
    let mut out = Vec::new();
    for (i, h) in s.basis.handles.iter().enumerate() {
        let table = GrowthTable::sample(&HandleOver { handle: h, set }, &s.grid, &[Mode::MBased], s.policy.exec)?;
        let e = order_from_table(&table, &s.triple, Mode::MBased, shifted, &s.policy)?;
        rep.measure(format!("handle{i}.{label}"), e.value_slope);
        rep.measure(format!("handle{i}.{label}.tail_sup"), e.value_tail_sup);
        rep.measure(format!("handle{i}.{label}.residual"), e.slope_residual);
        if set == RaySet::Completed {
            let active = GrowthTable::sample(
                &HandleOver { handle: h, set: RaySet::Active },
                &s.grid,
                &[Mode::MBased],
                s.policy.exec,
            )
            .and_then(|t| order_from_table(&t, &s.triple, Mode::MBased, shifted, &s.policy));
            if let Ok(a) = active {
                rep.measure(format!("handle{i}.{label}.active_rays"), a.value_slope);
            }
        }
        rep.evidence.push(EvidenceTable::from_estimate(format!("handle{i}_{label}"), &e));
        out.push(e.value_slope);
    }
    Ok(out)
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn axis_oracle(rep: &mut Report, s: &Setup, c: &TheoremConfig) -> Result<()> {
    let Some(o) = &c.axis_oracle else { return Ok(()) };
    let expr = parse_function(&o.log_abs)?;
    let handle = s
        .basis
        .handles
        .get(o.handle)
        .ok_or_else(|| Error::InvalidArgument(format!("no handle {}", o.handle)))?;
    let trace = handle
        .traces
        .iter()
        .find(|t| t.theta.abs() < 1e-12)
        .ok_or_else(|| Error::InvalidArgument("axis oracle needs the ray θ = 0 in the fan".into()))?;
    let mut t = EvidenceTable::new("axis_oracle", &["r", "log_abs_integrated", "log_abs_closed_form", "rel_error"]);
    let mut worst = 0.0_f64;
    for &r in &o.radii {
        let got = trace.sample_at(r).ok_or(Error::NoRayAtRadius(r))?.log_abs_f();
        let want = expr.eval_native(Complex64::new(r, 0.0)).re;
        let err = ((got - want) / want).abs();
        worst = worst.max(err);
        t.push_values(&[r, got, want, err]);
    }
    rep.note(format!("axis oracle `{}`: {}", o.log_abs, o.provenance));
    rep.check(format!("handle{} log|f(r)| on θ = 0 (max rel error)", o.handle), worst, 0.0, o.rel_tol, Relation::AtMost);
    rep.evidence.push(t);
    Ok(())
}

pub(super) fn theorem1(runner: &Runner, id: &str, c: &TheoremConfig) -> Result<Report> {
    let mut rep = Report::new(id, "theorem1", env(runner, c)?);
    let s = setup(runner, &mut rep, c)?;
    let tol = c.tolerances;
    axis_oracle(&mut rep, &s, c)?;
    if s.ode.coefficients().iter().all(|a| a.as_constant().is_some()) {
        rep.note("all coefficients constant: both sides are 0; a finite plain order of every handle forces shifted order 0");
        rep.check("sup coefficient order", 0.0, 0.0, tol.plain, Relation::Within);
        let plain = handle_orders(&mut rep, &s, false)?;
        for (i, p) in plain.iter().enumerate() {
            rep.check(format!("handle{i} plain order finite (≤ 1)"), *p, 1.0, tol.plain, Relation::AtMost);
        }
        return Ok(rep);
    }
    let coef = coefficient_orders(&mut rep, &s, c.coefficient_mode)?;
    let shifted = handle_orders(&mut rep, &s, true)?;
    let (sup_a, sup_f) = (max_of(&coef), max_of(&shifted));
    rep.measure("sup coefficient order", sup_a);
    rep.measure("sup shifted order", sup_f);
    rep.check("sup shifted order = sup coefficient order", sup_f, sup_a, tol.shifted, Relation::Within);
    if let Some(e) = &c.expected_order {
        rep.expect("sup coefficient order", e.value, &e.provenance);
        rep.check("sup coefficient order vs expected", sup_a, e.value, tol.plain, Relation::Within);
        rep.check("sup shifted order vs expected", sup_f, e.value, tol.shifted, Relation::Within);
    }
    Ok(rep)
}

pub(super) fn theorem2(runner: &Runner, id: &str, c: &TheoremConfig) -> Result<Report> {
    let mut rep = Report::new(id, "theorem2", env(runner, c)?);
    let s = setup(runner, &mut rep, c)?;
    let tol = c.tolerances;
    let lambda = c.lambda.ok_or_else(|| Error::Config("theorem2 needs lambda".into()))?;
    let coef = coefficient_orders(&mut rep, &s, c.coefficient_mode)?;
    let m = coef.iter().rposition(|&sig| sig >= lambda - tol.dead_band);
    let detail = format!("σ[A_j] = {coef:?}, λ = {lambda}, dead band ±{}", tol.dead_band);
    if !rep.hypothesis("some coefficient has order ≥ λ", m.is_some(), detail) {
        return Ok(rep);
    }
    let m = m.expect("checked") as f64;
    rep.measure("m", m);
    let shifted = handle_orders(&mut rep, &s, true)?;
    let below = shifted.iter().filter(|&&v| v < lambda - tol.shifted).count() as f64;
    rep.measure("handles below λ", below);
    rep.check("handles with shifted order < λ at most m", below, m, 0.0, Relation::AtMost);
    Ok(rep)
}

fn dominance_conclusion(rep: &mut Report, s: &Setup, c: &TheoremConfig, sigma0: f64) -> Result<()> {
    let shifted = handle_orders(rep, s, true)?;
    for (i, v) in shifted.iter().enumerate() {
        rep.check(format!("handle{i} shifted order = σ[A0]"), *v, sigma0, c.tolerances.shifted, Relation::Within);
    }
    if let Some(e) = &c.expected_order {
        rep.expect("sigma[A0]", e.value, &e.provenance);
        rep.check("σ[A0] vs expected", sigma0, e.value, c.tolerances.plain, Relation::Within);
    }
    Ok(())
}

pub(super) fn theorem3(runner: &Runner, id: &str, c: &TheoremConfig) -> Result<Report> {
    let mut rep = Report::new(id, "theorem3", env(runner, c)?);
    let s = setup(runner, &mut rep, c)?;
    let coef = coefficient_orders(&mut rep, &s, c.coefficient_mode)?;
    let rest = max_of(&coef[1..]);
    let holds = coef.len() == 1 || coef[0] > rest + c.tolerances.dead_band;
    if !rep.hypothesis("σ[A0] > max σ[A_j], j ≥ 1", holds, format!("σ[A_j] = {coef:?}")) {
        return Ok(rep);
    }
    dominance_conclusion(&mut rep, &s, c, coef[0])?;
    Ok(rep)
}

pub(super) fn theorem4(runner: &Runner, id: &str, c: &TheoremConfig) -> Result<Report> {
    let mut rep = Report::new(id, "theorem4", env(runner, c)?);
    let s = setup(runner, &mut rep, c)?;
    let tol = c.tolerances;
    let coef = coefficient_orders(&mut rep, &s, c.coefficient_mode)?;
    let sigma0 = coef[0];
    let rest = if coef.len() > 1 { max_of(&coef[1..]) } else { f64::NEG_INFINITY };
    let orders_ok = rest <= sigma0 + tol.dead_band && sigma0 > tol.dead_band && sigma0.is_finite();
    if !rep.hypothesis("max σ[A_j] ≤ σ[A0] = σ0 ∈ (0, ∞)", orders_ok, format!("σ[A_j] = {coef:?}")) {
        return Ok(rep);
    }
    let a = s.ode.coefficients();
    let mut types = Vec::new();
    for j in 0..coef.len() {
        if j > 0 && (coef[j] - sigma0).abs() > tol.dead_band {
            continue;
        }
        let e = estimate_type(&a[j], &s.triple, coef[j], &s.grid, Mode::MBased, false)?;
        rep.measure(format!("tau_M[A{j}]"), e.value_slope);
        rep.evidence.push(EvidenceTable::from_estimate(format!("coefficient_A{j}_type_M"), &e));
        types.push((j, e.value_slope));
    }
    let tau0 = types[0].1;
    let rival = types[1..].iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    let holds = rival < tau0 * (1.0 - tol.type_rel);
    let detail = format!("τ_M[A0] = {tau0}, largest rival τ_M = {rival}");
    if !rep.hypothesis("max τ_M[A_j] < τ_M[A0] over equal orders", holds, detail) {
        return Ok(rep);
    }
    dominance_conclusion(&mut rep, &s, c, sigma0)?;
    Ok(rep)
}

fn env(runner: &Runner, c: &TheoremConfig) -> Result<super::Environment> {
    Ok(runner.environment(Some(c.grid.radial()?), Some(&c.integration)))
}
