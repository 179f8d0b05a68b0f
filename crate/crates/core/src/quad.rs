//! Quadrature rules shared by the Nevanlinna functionals and the lemma checks.

use crate::error::{Error, Result};
use crate::exec::{compensated_sum, Exec};
use std::f64::consts::PI;

/// Panel doubling policy for the periodic trapezoid rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapezoidPolicy {
    pub start_log2: u32,
    pub max_log2: u32,
    pub rel_tol: f64,
    pub abs_floor: f64,
    pub exec: Exec,
}

impl Default for TrapezoidPolicy {
    fn default() -> Self {
        TrapezoidPolicy { start_log2: 8, max_log2: 20, rel_tol: 1e-8, abs_floor: 1e-12, exec: Exec::default() }
    }
}

/// Mean of a 2π-periodic integrand, `(1/2π)∫₀^{2π} g(θ) dθ`, by the trapezoid
/// rule with panel doubling. Each refinement only evaluates the new midpoints.
/// Returns the estimate and the final panel count.
pub fn periodic_mean<G>(g: G, policy: &TrapezoidPolicy) -> Result<(f64, usize)>
where
    G: Fn(f64) -> Result<f64> + Sync + Send,
{
    let mut n = 1usize << policy.start_log2;
    let first = policy.exec.map_range(n, |j| g(2.0 * PI * j as f64 / n as f64));
    let first: Vec<f64> = first.into_iter().collect::<Result<_>>()?;
    let mut mean = compensated_sum(first) / n as f64;
    while n < (1usize << policy.max_log2) {
        let n2 = 2 * n;
        let mids = policy.exec.map_range(n, |j| g(2.0 * PI * (2 * j + 1) as f64 / n2 as f64));
        let mids: Vec<f64> = mids.into_iter().collect::<Result<_>>()?;
        let next = 0.5 * (mean + compensated_sum(mids) / n as f64);
        let diff = (next - mean).abs();
        mean = next;
        n = n2;
        if diff <= (policy.rel_tol * mean.abs()).max(policy.abs_floor) {
            return Ok((mean, n));
        }
    }
    Err(Error::QuadratureBudget { panels: n })
}

// 8-point Gauss–Legendre on [-1, 1].
const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_0,
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

fn gauss_panels<G: Fn(f64) -> f64>(g: &G, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    compensated_sum((0..panels).flat_map(|p| {
        let mid = a + (p as f64 + 0.5) * h;
        GL_NODES
            .iter()
            .zip(GL_WEIGHTS.iter())
            .map(move |(x, w)| 0.5 * h * w * g(mid + 0.5 * h * x))
    }))
}

/// ∫ₐᵇ g by composite 8-point Gauss–Legendre, doubling panels until two
/// successive estimates agree to `rel_tol` (absolute floor `1e-14`).
pub fn gauss_legendre<G: Fn(f64) -> f64>(g: G, a: f64, b: f64, rel_tol: f64, max_panels: usize) -> Result<f64> {
    let mut panels = 1;
    let mut prev = gauss_panels(&g, a, b, panels);
    while panels < max_panels {
        panels *= 2;
        let next = gauss_panels(&g, a, b, panels);
        if (next - prev).abs() <= (rel_tol * next.abs()).max(1e-14) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::QuadratureBudget { panels })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_mean_of_cos_plus() {
        // (1/2π)∫ max(cos θ, 0) dθ = 1/π
        let (m, _) = periodic_mean(|t| Ok(t.cos().max(0.0)), &TrapezoidPolicy::default()).unwrap();
        assert!((m - 1.0 / PI).abs() < 5e-8);
    }

    #[test]
    fn periodic_mean_budget_error() {
        let policy = TrapezoidPolicy { max_log2: 9, rel_tol: 1e-15, abs_floor: 0.0, ..Default::default() };
        // a kink off the grid converges slowly
        let r = periodic_mean(|t| Ok((t - 1.0).abs().sqrt()), &policy);
        assert!(matches!(r, Err(Error::QuadratureBudget { .. })));
    }

    #[test]
    fn gauss_legendre_polynomial_and_exp() {
        let v = gauss_legendre(|x| x.powi(7) - 3.0 * x, 0.0, 2.0, 1e-14, 64).unwrap();
        assert!((v - (2f64.powi(8) / 8.0 - 6.0)).abs() < 1e-12);
        let e = gauss_legendre(f64::exp, 0.0, 5.0, 1e-13, 1024).unwrap();
        assert!((e - (5f64.exp() - 1.0)).abs() < 1e-10);
    }
}
