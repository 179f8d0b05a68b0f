//! The Cauchy bound on polynomial zeros, with an independent root finder.

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub const MAX_ROOT_DEGREE: usize = 32;

fn trimmed(coeffs: &[Complex64]) -> Result<&[Complex64]> {
    let n = coeffs.iter().rposition(|c| c.norm() != 0.0).ok_or(Error::InvalidArgument("zero polynomial".into()))?;
    if n + 1 != coeffs.len() {
        return Err(Error::InvalidArgument("leading coefficient a_n must be nonzero".into()));
    }
    Ok(coeffs)
}

/// `1 + max_{k<n} |a_k/a_n|` for `a₀ + a₁z + ⋯ + a_n zⁿ`.
pub fn polynomial_zero_bound(coeffs: &[Complex64]) -> Result<f64> {
    let c = trimmed(coeffs)?;
    let n = c.len() - 1;
    let lead = c[n];
    Ok(1.0 + c[..n].iter().map(|a| (a / lead).norm()).fold(0.0, f64::max))
}

fn horner_with_derivative(c: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for a in c.iter().rev() {
        dp = dp * z + p;
        p = p * z + a;
    }
    (p, dp)
}

/// All roots by Aberth–Ehrlich simultaneous iteration, started on a circle
/// inside the Fujiwara radius (not the Cauchy bound, to stay independent).
pub fn polynomial_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let c = trimmed(coeffs)?;
    let n = c.len() - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    if n > MAX_ROOT_DEGREE {
        return Err(Error::RootFinder(n));
    }
    let lead = c[n];
    let monic: Vec<Complex64> = c.iter().map(|a| a / lead).collect();
    let fujiwara = (0..n)
        .map(|k| {
            let m = monic[k].norm();
            let e = (n - k) as f64;
            if k == 0 {
                (m / 2.0).powf(1.0 / e)
            } else {
                m.powf(1.0 / e)
            }
        })
        .fold(0.0, f64::max)
        * 2.0;
    let radius = fujiwara.max(1e-3);
    let mut z: Vec<Complex64> = (0..n)
        .map(|j| Complex64::from_polar(0.5 * radius, 2.0 * std::f64::consts::PI * j as f64 / n as f64 + 0.4))
        .collect();
    for _ in 0..500 {
        let mut moved = 0.0_f64;
        for i in 0..n {
            let (p, dp) = horner_with_derivative(&monic, z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let sum: Complex64 = (0..n).filter(|&j| j != i).map(|j| (z[i] - z[j]).inv()).sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * sum);
            if step.re.is_finite() && step.im.is_finite() {
                z[i] -= step;
                moved = moved.max(step.norm() / z[i].norm().max(1.0));
            }
        }
        if moved < 1e-15 {
            return Ok(z);
        }
    }
    // accept if every residual is tiny relative to the coefficient scale
    let ok = z.iter().all(|&r| {
        let (p, _) = horner_with_derivative(&monic, r);
        let scale: f64 = monic.iter().enumerate().map(|(k, a)| a.norm() * r.norm().powi(k as i32)).sum();
        p.norm() <= 1e-10 * scale
    });
    if ok {
        Ok(z)
    } else {
        Err(Error::RootFinder(n))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootCheck {
    pub bound: f64,
    pub max_root_modulus: f64,
    pub roots: Vec<(f64, f64)>,
    pub within: bool,
}

/// Compute the bound and check every oracle root against it (`+1e-9`).
pub fn verify_roots_within(coeffs: &[Complex64]) -> Result<RootCheck> {
    let bound = polynomial_zero_bound(coeffs)?;
    let roots = polynomial_roots(coeffs)?;
    let max_root_modulus = roots.iter().map(|r| r.norm()).fold(0.0, f64::max);
    Ok(RootCheck {
        bound,
        max_root_modulus,
        roots: roots.iter().map(|r| (r.re, r.im)).collect(),
        within: max_root_modulus <= bound + 1e-9,
    })
}
