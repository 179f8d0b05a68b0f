//! Linear ODEs `f^{(k)} + A_{k−1} f^{(k−1)} + ⋯ + A₀ f = 0` with entire
//! coefficients: ray-fan integration, solution bases, Wronskians, order
//! reduction and the polynomial zero bound.

mod basis;
mod integrate;
mod reduce;
mod wronskian;
mod zeros;

pub use basis::{solution_basis, BasisOptions, Fan, RaySet, SolutionBasis, SolutionHandle};
pub use integrate::{
    integrate_ray, integrate_ray_bundle, RayOptions, RaySample, RayTrace, Termination, MAX_TOL, MIN_TOL,
};
pub use reduce::{
    default_sample_points, reduce_order, reduction_residual, Jet, PointwiseOde, QuotientDerivative, ReducedOde,
    ResidualReport,
};
pub use wronskian::{abel_check, reconstruct_coefficient, scaled_determinant, wronskian_at, AbelReport};
pub use zeros::{polynomial_roots, polynomial_zero_bound, verify_roots_within, RootCheck, MAX_ROOT_DEGREE};

use crate::error::{Error, Result};
use crate::functions::{parse_function, EntireFunction};
use crate::scaled::ScaledComplex;
use num_complex::Complex64;
use std::fmt;

/// `f^{(k)} + A_{k−1} f^{(k−1)} + ⋯ + A₀ f = 0`.
#[derive(Debug, Clone)]
pub struct LinearODE {
    coefficients: Vec<EntireFunction>,
}

impl LinearODE {
    /// Coefficients listed as `A₀, A₁, …, A_{k−1}`.
    pub fn new(coefficients: Vec<EntireFunction>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::InvalidArgument("an ODE needs order k ≥ 1".into()));
        }
        Ok(LinearODE { coefficients })
    }

    /// Parse `A₀, …, A_{k−1}` from expression strings.
    pub fn parse(coefficients: &[impl AsRef<str>]) -> Result<Self> {
        Self::new(coefficients.iter().map(|s| parse_function(s.as_ref())).collect::<Result<_>>()?)
    }

    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    /// `A_j`.
    pub fn coefficient(&self, j: usize) -> &EntireFunction {
        &self.coefficients[j]
    }

    pub fn coefficients(&self) -> &[EntireFunction] {
        &self.coefficients
    }

    /// `f^{(k)} = −Σ A_j f^{(j)}` from the state `f, …, f^{(k−1)}`.
    pub fn top_derivative(&self, z: Complex64, state: &[ScaledComplex]) -> Result<ScaledComplex> {
        let mut acc = ScaledComplex::ZERO;
        for (a, s) in self.coefficients.iter().zip(state) {
            acc = acc + a.eval(z)? * *s;
        }
        Ok(-acc)
    }

    /// `L(f)(z)` relative to the largest of its terms, for a function with
    /// known derivatives `f, …, f^{(k)}`.
    pub fn relative_residual(&self, z: Complex64, jet: &[ScaledComplex]) -> Result<f64> {
        let k = self.order();
        let mut terms = vec![jet[k]];
        for j in 0..k {
            terms.push(self.coefficients[j].eval(z)? * jet[j]);
        }
        relative_sum(&terms)
    }
}

/// `|Σ terms| / max |term|`, 0 when every term vanishes.
pub(crate) fn relative_sum(terms: &[ScaledComplex]) -> Result<f64> {
    let total: ScaledComplex = terms.iter().copied().sum();
    let biggest = terms.iter().map(|t| t.log_abs()).fold(f64::NEG_INFINITY, f64::max);
    if biggest == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    Ok((total.log_abs() - biggest).exp())
}

impl fmt::Display for LinearODE {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = self.order();
        write!(f, "f^({k})")?;
        for j in (0..k).rev() {
            if self.coefficients[j].as_constant() == Some(Complex64::new(0.0, 0.0)) {
                continue;
            }
            write!(f, " + [{}]·f^({j})", self.coefficients[j])?;
        }
        write!(f, " = 0")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let o = LinearODE::parse(&["2", "-3"]).unwrap();
        assert_eq!(o.order(), 2);
        assert_eq!(o.to_string(), "f^(2) + [-3]·f^(1) + [2]·f^(0) = 0");
        assert!(LinearODE::new(vec![]).is_err());
    }

    #[test]
    fn residual_of_exact_solution() {
        let o = LinearODE::parse(&["2", "-3"]).unwrap();
        let z = Complex64::new(0.4, 1.1);
        let jet: Vec<ScaledComplex> = (0..3).map(|n| ScaledComplex::from_complex(2f64.powi(n) * (2.0 * z).exp())).collect();
        assert!(o.relative_residual(z, &jet).unwrap() < 1e-15);
    }
}
