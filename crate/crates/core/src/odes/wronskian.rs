//! Wronskians, coefficient reconstruction and the Abel identity.

use super::basis::SolutionBasis;
use crate::error::{Error, Result};
use crate::quad::gauss_legendre;
use crate::scaled::ScaledComplex;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Below this, `|det|` relative to the product of row scales counts as
/// degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;

/// Determinant of a square matrix of split values. Each row is divided by its
/// largest entry's scale, the normalized matrix is factored by Gaussian
/// elimination with partial pivoting, and the scales are multiplied back.
pub fn scaled_determinant(rows: &[Vec<ScaledComplex>]) -> Result<ScaledComplex> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidArgument("determinant of a non-square matrix".into()));
    }
    let mut log_scale = 0.0;
    let mut a: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for row in rows {
        let s = row.iter().map(|v| v.log_abs()).fold(f64::NEG_INFINITY, f64::max);
        if s == f64::NEG_INFINITY {
            return Err(Error::DegenerateWronskian("zero row".into()));
        }
        let s = s.floor();
        log_scale += s;
        a.push(row.iter().map(|v| ScaledComplex::new(v.mantissa(), v.log_scale() - s).to_complex()).collect());
    }
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))
            .expect("nonempty range");
        if a[pivot][col].norm() == 0.0 {
            return Err(Error::DegenerateWronskian("singular matrix".into()));
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        let p = a[col][col];
        det *= p;
        for i in col + 1..n {
            let factor = a[i][col] / p;
            if factor.norm() == 0.0 {
                continue;
            }
            for j in col..n {
                let v = a[col][j];
                a[i][j] -= factor * v;
            }
        }
    }
    Ok(ScaledComplex::new(det, log_scale))
}

fn check_degenerate(det: ScaledComplex, rows: &[Vec<ScaledComplex>], z: Complex64) -> Result<ScaledComplex> {
    let row_scale: f64 = rows
        .iter()
        .map(|r| r.iter().map(|v| v.log_abs()).fold(f64::NEG_INFINITY, f64::max))
        .sum();
    if det.is_zero() || det.log_abs() - row_scale < DEGENERACY_TOL.ln() {
        return Err(Error::DegenerateWronskian(format!("z = {z}")));
    }
    Ok(det)
}

/// Rows `j = 0..k` hold `f_1^{(j)}, …, f_k^{(j)}`; row `k` is the top derivative.
fn derivative_rows(basis: &SolutionBasis, z: Complex64) -> Result<Vec<Vec<ScaledComplex>>> {
    let k = basis.order();
    let states = basis.states_at(z)?;
    let mut rows = vec![Vec::with_capacity(k); k + 1];
    for st in &states {
        let top = basis.ode.top_derivative(z, st)?;
        for j in 0..k {
            rows[j].push(st[j]);
        }
        rows[k].push(top);
    }
    Ok(rows)
}

/// `W(f_1, …, f_k)(z)`.
pub fn wronskian_at(basis: &SolutionBasis, z: Complex64) -> Result<ScaledComplex> {
    let mut rows = derivative_rows(basis, z)?;
    rows.pop();
    let det = scaled_determinant(&rows)?;
    check_degenerate(det, &rows, z)
}

/// `A_{k−s}(z) = −W_{k−s}/W`, where `W_{k−s}` is the Wronskian with row
/// `k − s` replaced by the `k`-th derivatives.
pub fn reconstruct_coefficient(basis: &SolutionBasis, s: usize, z: Complex64) -> Result<ScaledComplex> {
    let k = basis.order();
    if s == 0 || s > k {
        return Err(Error::InvalidArgument(format!("s = {s} outside 1..={k}")));
    }
    let mut rows = derivative_rows(basis, z)?;
    let top = rows.pop().expect("k + 1 rows");
    let w = check_degenerate(scaled_determinant(&rows)?, &rows, z)?;
    rows[k - s] = top;
    let ws = match scaled_determinant(&rows) {
        Ok(v) => v,
        Err(Error::DegenerateWronskian(_)) => ScaledComplex::ZERO,
        Err(e) => return Err(e),
    };
    Ok(-(ws / w))
}

/// Comparison of `log|W(z)| − log|W(0)|` with `−Re ∫₀^z A_{k−1}(ζ) dζ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbelReport {
    pub r: f64,
    pub theta: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs − rhs| / max(1, |rhs|)`.
    pub relative_error: f64,
}

/// Abel's identity on the ray at `theta`, with the coefficient integral
/// computed independently by Gauss–Legendre quadrature.
pub fn abel_check(basis: &SolutionBasis, theta: f64, r: f64) -> Result<AbelReport> {
    let k = basis.order();
    let dir = Complex64::from_polar(1.0, theta);
    let w0 = wronskian_at(basis, Complex64::new(0.0, 0.0))?;
    let w = wronskian_at(basis, dir * r)?;
    let a = basis.ode.coefficient(k - 1);
    let rhs = -gauss_legendre(|t| (a.eval_native(dir * t) * dir).re, 0.0, r, 1e-13, 1 << 14)?;
    let lhs = w.log_abs() - w0.log_abs();
    Ok(AbelReport { r, theta, lhs, rhs, relative_error: (lhs - rhs).abs() / rhs.abs().max(1.0) })
}
