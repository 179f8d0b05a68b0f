//! Quotients of entire functions with a declared pole divisor.

use super::expr::EntireFunction;
use crate::error::{Error, Result};
use num_complex::Complex64;

/// `numerator / denominator` with the poles inside `valid_radius` listed
/// explicitly, so that `N(r, f)` is exact.
#[derive(Debug, Clone)]
pub struct MeromorphicFunction {
    numerator: EntireFunction,
    denominator: EntireFunction,
    poles: Vec<(Complex64, u32)>,
    valid_radius: f64,
}

/// Declared poles must be zeros of the denominator to this relative accuracy.
pub const POLE_CHECK_TOL: f64 = 1e-8;

impl MeromorphicFunction {
    /// Validates each declared pole against the denominator. The tolerance is
    /// relative to the size of the denominator's terms near the pole
    /// (`max(1, |den′(pole)|·|pole|)`).
    pub fn new(
        numerator: EntireFunction,
        denominator: EntireFunction,
        poles: Vec<(Complex64, u32)>,
        valid_radius: f64,
    ) -> Result<Self> {
        if !(valid_radius > 0.0) {
            return Err(Error::InvalidArgument(format!("divisor radius {valid_radius} must be positive")));
        }
        for &(p, mult) in &poles {
            if mult == 0 {
                return Err(Error::InvalidArgument(format!("pole at {p} has multiplicity 0")));
            }
            let residual = denominator.eval(p)?.to_complex().norm();
            let scale = denominator
                .derivative(1)
                .ok()
                .map(|d| d.eval_native(p).norm() * p.norm().max(1.0))
                .filter(|s| s.is_finite())
                .unwrap_or(1.0)
                .max(1.0);
            if residual > POLE_CHECK_TOL * scale {
                return Err(Error::PoleMismatch { location: p.to_string(), residual });
            }
        }
        Ok(MeromorphicFunction { numerator, denominator, poles, valid_radius })
    }

    /// An entire function viewed as meromorphic with no poles.
    pub fn entire(f: EntireFunction) -> Self {
        MeromorphicFunction {
            numerator: f,
            denominator: EntireFunction::real(1.0),
            poles: Vec::new(),
            valid_radius: f64::INFINITY,
        }
    }

    pub fn numerator(&self) -> &EntireFunction {
        &self.numerator
    }

    pub fn denominator(&self) -> &EntireFunction {
        &self.denominator
    }

    pub fn poles(&self) -> &[(Complex64, u32)] {
        &self.poles
    }

    pub fn valid_radius(&self) -> f64 {
        self.valid_radius
    }

    /// `n(0, f)`: multiplicity of a pole at the origin.
    pub fn n0(&self) -> u32 {
        self.poles.iter().filter(|(p, _)| p.norm() == 0.0).map(|(_, m)| m).sum()
    }

    /// Entire when no poles are declared anywhere.
    pub fn is_entire(&self) -> bool {
        self.poles.is_empty() && self.denominator.as_constant().is_some()
    }

    pub fn log_abs(&self, z: Complex64) -> Result<f64> {
        Ok(self.numerator.log_abs(z)? - self.denominator.log_abs(z)?)
    }

    /// `N(r, f) = Σ_{0<|z_j|≤r} mult_j·log(r/|z_j|) + n(0, f)·log r`.
    pub fn counting_n(&self, r: f64) -> Result<f64> {
        if r > self.valid_radius {
            return Err(Error::DivisorRange { r, valid: self.valid_radius });
        }
        if !(r > 0.0) {
            return Err(Error::InvalidArgument(format!("radius {r} must be positive")));
        }
        let mut total = self.n0() as f64 * r.ln();
        for &(p, mult) in &self.poles {
            let a = p.norm();
            if a > 0.0 && a <= r {
                total += mult as f64 * (r / a).ln();
            }
        }
        Ok(total)
    }
}
