//! Order reduction with a known solution.
//!
//! Substituting `f = f₁·∫ν` into an order-`k` equation gives an order-`k−1`
//! equation for `ν = (f/f₁)′` with coefficients
//! `A_{1,j} = A_{j+1} + Σ_{m=1}^{k−j−1} C(j+1+m, m)·A_{j+1+m}·f₁^{(m)}/f₁`
//! (`A_k = 1`). The reduced equation is again linear, so the step composes.

use super::LinearODE;
use crate::error::{Error, Result};
use crate::functions::EntireFunction;
use crate::scaled::ScaledComplex;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Access to `f, f′, …, f^{(n)}` at a point.
pub trait Jet: Sync {
    fn jet(&self, z: Complex64, n: usize) -> Result<Vec<ScaledComplex>>;
    /// Highest derivative available.
    fn max_order(&self) -> usize;
}

impl Jet for EntireFunction {
    fn jet(&self, z: Complex64, n: usize) -> Result<Vec<ScaledComplex>> {
        self.derivatives(n)?.iter().map(|d| d.eval(z)).collect()
    }

    fn max_order(&self) -> usize {
        self.derivative_depth()
    }
}

/// A linear ODE whose coefficients can be evaluated pointwise.
pub trait PointwiseOde: Sync {
    fn order(&self) -> usize;
    /// `A₀(z), …, A_{k−1}(z)`.
    fn coefficients_at(&self, z: Complex64) -> Result<Vec<ScaledComplex>>;

    /// `|L(f)(z)|` relative to its largest term.
    fn residual(&self, z: Complex64, f: &dyn Jet) -> Result<f64> {
        let k = self.order();
        let jet = f.jet(z, k)?;
        let a = self.coefficients_at(z)?;
        let mut terms = vec![jet[k]];
        terms.extend(a.iter().zip(&jet).map(|(a, d)| *a * *d));
        super::relative_sum(&terms)
    }
}

impl PointwiseOde for LinearODE {
    fn order(&self) -> usize {
        LinearODE::order(self)
    }

    fn coefficients_at(&self, z: Complex64) -> Result<Vec<ScaledComplex>> {
        self.coefficients().iter().map(|a| a.eval(z)).collect()
    }
}

/// `|f| ≤ VANISH_TOL·max_j |f^{(j)}|` counts as a zero of the reducer.
pub const VANISH_TOL: f64 = 1e-8;

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn check_nonvanishing(jet: &[ScaledComplex], z: Complex64) -> Result<()> {
    let scale = jet.iter().map(|v| v.log_abs()).fold(f64::NEG_INFINITY, f64::max);
    if jet[0].is_zero() || jet[0].log_abs() < scale + VANISH_TOL.ln() {
        return Err(Error::VanishingReducer(z.to_string()));
    }
    Ok(())
}

/// The order-`k−1` equation obtained from `base` with the solution `f₁`.
pub struct ReducedOde<'a> {
    base: &'a dyn PointwiseOde,
    f1: &'a dyn Jet,
}

impl PointwiseOde for ReducedOde<'_> {
    fn order(&self) -> usize {
        self.base.order() - 1
    }

    fn coefficients_at(&self, z: Complex64) -> Result<Vec<ScaledComplex>> {
        let k = self.base.order();
        let mut a = self.base.coefficients_at(z)?;
        a.push(ScaledComplex::ONE);
        let jet = self.f1.jet(z, k - 1)?;
        check_nonvanishing(&jet, z)?;
        let ratios: Vec<ScaledComplex> = jet.iter().map(|d| *d / jet[0]).collect();
        Ok((0..k - 1)
            .map(|j| {
                let mut acc = a[j + 1];
                for m in 1..k - j {
                    acc = acc + (a[j + 1 + m] * ratios[m]).scale_real(binomial(j + 1 + m, m));
                }
                acc
            })
            .collect())
    }
}

impl ReducedOde<'_> {
    /// Coefficients as native values (overflow to infinity outside range).
    pub fn coefficients_native(&self, z: Complex64) -> Result<Vec<Complex64>> {
        Ok(self.coefficients_at(z)?.iter().map(|v| v.to_complex()).collect())
    }
}

/// Reduce `ode` by its solution `f1`. The solution property is checked first
/// at `check_points` (relative residual ≤ `1e-6`); points where `f1` vanishes
/// are skipped.
pub fn reduce_order<'a>(
    ode: &'a dyn PointwiseOde,
    f1: &'a dyn Jet,
    check_points: &[Complex64],
) -> Result<ReducedOde<'a>> {
    let k = ode.order();
    if k < 1 {
        return Err(Error::InvalidArgument("cannot reduce an order-0 equation".into()));
    }
    if f1.max_order() < k {
        return Err(Error::DerivativeDepth { requested: k, max: f1.max_order() });
    }
    let mut worst = 0.0_f64;
    for &z in check_points {
        let jet = f1.jet(z, k)?;
        if check_nonvanishing(&jet, z).is_err() {
            continue;
        }
        worst = worst.max(ode.residual(z, f1)?);
    }
    if worst > 1e-6 {
        return Err(Error::NotASolution(worst));
    }
    Ok(ReducedOde { base: ode, f1 })
}

/// `ν = (g/h)′`, the substitution turning another solution `g` into a
/// solution of the equation reduced by `h`.
pub struct QuotientDerivative<'a> {
    pub num: &'a dyn Jet,
    pub den: &'a dyn Jet,
}

impl Jet for QuotientDerivative<'_> {
    fn jet(&self, z: Complex64, n: usize) -> Result<Vec<ScaledComplex>> {
        let g = self.num.jet(z, n + 1)?;
        let h = self.den.jet(z, n + 1)?;
        check_nonvanishing(&h, z)?;
        // q^{(p)} = (g^{(p)} − Σ_{m=1}^{p} C(p, m) h^{(m)} q^{(p−m)}) / h
        let mut q: Vec<ScaledComplex> = Vec::with_capacity(n + 2);
        for p in 0..=n + 1 {
            let mut acc = g[p];
            for m in 1..=p {
                acc = acc - (h[m] * q[p - m]).scale_real(binomial(p, m));
            }
            q.push(acc / h[0]);
        }
        Ok(q[1..].to_vec())
    }

    fn max_order(&self) -> usize {
        self.num.max_order().min(self.den.max_order()).saturating_sub(1)
    }
}

/// 40 points: radii 0.5, 1, …, 2.5 on eight rays offset from the axes.
pub fn default_sample_points() -> Vec<Complex64> {
    let mut pts = Vec::with_capacity(40);
    for j in 0..8 {
        let theta = 2.0 * PI * j as f64 / 8.0 + 0.1;
        for i in 1..=5 {
            pts.push(Complex64::from_polar(0.5 * i as f64, theta));
        }
    }
    pts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// Largest relative residual over the evaluated points.
    pub max_residual: f64,
    /// `(Re z, Im z, residual)`.
    pub points: Vec<(f64, f64, f64)>,
    /// Points skipped because the reducer vanishes there.
    pub excluded: Vec<(f64, f64)>,
}

/// `max |L_reduced(ν)|` relative to the largest term, over `points`.
pub fn reduction_residual(reduced: &dyn PointwiseOde, nu: &dyn Jet, points: &[Complex64]) -> Result<ResidualReport> {
    let mut rep = ResidualReport { max_residual: 0.0, points: Vec::new(), excluded: Vec::new() };
    for &z in points {
        match reduced.residual(z, nu) {
            Ok(r) => {
                rep.max_residual = rep.max_residual.max(r);
                rep.points.push((z.re, z.im, r));
            }
            Err(Error::VanishingReducer(_)) => rep.excluded.push((z.re, z.im)),
            Err(e) => return Err(e),
        }
    }
    if rep.points.is_empty() {
        return Err(Error::TooFewSamples { valid: 0, needed: 1 });
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::parse_function;

    fn f(s: &str) -> EntireFunction {
        parse_function(s).unwrap()
    }

    #[test]
    fn second_order_examples() {
        let ode = LinearODE::parse(&["2", "-3"]).unwrap();
        let pts = default_sample_points();
        for (f1, f2, expect) in [("exp(z)", "exp(2z)", -1.0), ("exp(2z)", "exp(z)", 1.0)] {
            let (f1, f2) = (f(f1), f(f2));
            let red = reduce_order(&ode, &f1, &pts).unwrap();
            assert_eq!(red.order(), 1);
            for &z in &pts {
                let a = red.coefficients_native(z).unwrap()[0];
                assert!((a - expect).norm() <= 1e-9, "{a}");
            }
            let nu = QuotientDerivative { num: &f2, den: &f1 };
            assert!(reduction_residual(&red, &nu, &pts).unwrap().max_residual <= 1e-12);
        }
    }

    #[test]
    fn negative_control() {
        let ode = LinearODE::parse(&["2", "-3"]).unwrap();
        let f1 = f("exp(z)");
        let red = reduce_order(&ode, &f1, &default_sample_points()).unwrap();
        let wrong = f("z");
        assert!(reduction_residual(&red, &wrong, &default_sample_points()).unwrap().max_residual >= 0.1);
        let not_solution = f("exp(3z)");
        assert!(matches!(reduce_order(&ode, &not_solution, &default_sample_points()), Err(Error::NotASolution(_))));
    }

    #[test]
    fn third_derivative_zero() {
        let ode = LinearODE::parse(&["0", "0", "0"]).unwrap();
        let one = f("1");
        let red = reduce_order(&ode, &one, &default_sample_points()).unwrap();
        assert_eq!(red.order(), 2);
        for z in default_sample_points() {
            assert!(red.coefficients_native(z).unwrap().iter().all(|a| a.norm() == 0.0));
        }
    }

    #[test]
    fn cosine_reducer() {
        // f″ + f = 0 with f₁ = cos: ν = (sin/cos)′ = sec² solves ν′ − 2 tan·ν = 0
        let ode = LinearODE::parse(&["1", "0"]).unwrap();
        let (c, s) = (f("0.5*(exp(i z) + exp(-i z))"), f("(exp(i z) - exp(-i z))*(-0.5 i)"));
        let pts = default_sample_points();
        let red = reduce_order(&ode, &c, &pts).unwrap();
        let nu = QuotientDerivative { num: &s, den: &c };
        assert!(reduction_residual(&red, &nu, &pts).unwrap().max_residual <= 1e-9);
    }

    #[test]
    fn two_step_reduction_composes() {
        // f‴ − 6f″ + 11f′ − 6f = 0, basis e^z, e^{2z}, e^{3z}
        let ode = LinearODE::parse(&["-6", "11", "-6"]).unwrap();
        let (e1, e2, e3) = (f("exp(z)"), f("exp(2z)"), f("exp(3z)"));
        let pts = default_sample_points();
        let red1 = reduce_order(&ode, &e1, &pts).unwrap();
        let nu2 = QuotientDerivative { num: &e2, den: &e1 };
        let nu3 = QuotientDerivative { num: &e3, den: &e1 };
        assert!(reduction_residual(&red1, &nu3, &pts).unwrap().max_residual < 1e-12);
        let red2 = reduce_order(&red1, &nu2, &pts).unwrap();
        assert_eq!(red2.order(), 1);
        let w = QuotientDerivative { num: &nu3, den: &nu2 };
        assert!(reduction_residual(&red2, &w, &pts).unwrap().max_residual < 1e-11);
        // ν₂ = e^z, ν₃ = 2e^{2z}, w = (2e^z)′ = 2e^z solves w′ − w = 0
        for z in pts {
            assert!((red2.coefficients_native(z).unwrap()[0] + 1.0).norm() < 1e-10);
        }
    }
}
