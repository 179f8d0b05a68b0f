//! Overflow-safe complex amplitudes.
//!
//! A [`ScaledComplex`] stores `mantissa · exp(log_scale)` with
//! `|mantissa| ∈ [1, e)`. Solutions of linear ODEs with exponential
//! coefficients reach magnitudes like `exp(exp(r))`, far outside `f64`, while
//! their logarithms stay comfortably representable.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Two summands whose scales differ by more than this many natural-log units
/// are not combined: the smaller one is absorbed.
pub const ABSORPTION_LOGS: f64 = 40.0;

#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledComplex {
    mantissa: Complex64,
    log_scale: f64,
}

impl ScaledComplex {
    pub const ZERO: ScaledComplex = ScaledComplex {
        mantissa: Complex64 { re: 0.0, im: 0.0 },
        log_scale: f64::NEG_INFINITY,
    };
    pub const ONE: ScaledComplex = ScaledComplex {
        mantissa: Complex64 { re: 1.0, im: 0.0 },
        log_scale: 0.0,
    };

    /// Build from an unnormalized `mantissa · exp(log_scale)`.
    pub fn new(mantissa: Complex64, log_scale: f64) -> Self {
        let mut s = ScaledComplex { mantissa, log_scale };
        s.normalize();
        s
    }

    pub fn from_complex(z: Complex64) -> Self {
        Self::new(z, 0.0)
    }

    pub fn from_real(x: f64) -> Self {
        Self::new(Complex64::new(x, 0.0), 0.0)
    }

    /// `exp(log_abs + i·arg)`.
    pub fn from_polar_log(log_abs: f64, arg: f64) -> Self {
        if log_abs == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        Self::new(Complex64::from_polar(1.0, arg), log_abs)
    }

    /// `exp(w)` for a complex exponent. The real part goes straight into the
    /// scale; nothing is exponentiated natively except the phase.
    pub fn exp_of(w: Complex64) -> Self {
        Self::from_polar_log(w.re, w.im)
    }

    /// `exp(self)`. Fails (returns `None`) when the exponent itself is not
    /// representable as an `f64` complex number.
    pub fn exp(self) -> Option<Self> {
        let w = self.to_complex();
        if w.re.is_finite() && w.im.is_finite() {
            Some(Self::exp_of(w))
        } else if w.re == f64::NEG_INFINITY {
            Some(Self::ZERO)
        } else {
            None
        }
    }

    fn normalize(&mut self) {
        let m = self.mantissa.norm();
        if m == 0.0 || !self.log_scale.is_finite() && self.log_scale < 0.0 {
            *self = Self::ZERO;
            return;
        }
        if !m.is_finite() {
            // Fold an overflowing mantissa into the scale through its parts.
            let big = self.mantissa.re.abs().max(self.mantissa.im.abs());
            if big.is_finite() {
                let unit = self.mantissa / big;
                self.mantissa = unit;
                self.log_scale += big.ln();
                self.normalize();
            } else {
                self.mantissa = Complex64::new(f64::NAN, f64::NAN);
            }
            return;
        }
        if (1.0..std::f64::consts::E).contains(&m) {
            return;
        }
        let k = m.ln().floor();
        self.mantissa /= k.exp();
        self.log_scale += k;
        // One correction step absorbs rounding at the window edges.
        let m = self.mantissa.norm();
        if m < 1.0 {
            self.mantissa *= std::f64::consts::E;
            self.log_scale -= 1.0;
        } else if m >= std::f64::consts::E {
            self.mantissa /= std::f64::consts::E;
            self.log_scale += 1.0;
        }
    }

    pub fn mantissa(&self) -> Complex64 {
        self.mantissa
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.re == 0.0 && self.mantissa.im == 0.0
    }

    pub fn is_finite(&self) -> bool {
        self.is_zero() || (self.mantissa.is_finite() && self.log_scale.is_finite())
    }

    /// Natural logarithm of the modulus; `-inf` for zero.
    pub fn log_abs(&self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.mantissa.norm().ln() + self.log_scale
        }
    }

    pub fn arg(&self) -> f64 {
        self.mantissa.arg()
    }

    /// Native value; overflows to infinity or underflows to zero outside the
    /// `f64` range.
    pub fn to_complex(&self) -> Complex64 {
        if self.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        self.mantissa * self.log_scale.exp()
    }

    pub fn scale_real(self, x: f64) -> Self {
        Self::new(self.mantissa * x, self.log_scale)
    }

    pub fn scale(self, c: Complex64) -> Self {
        self * Self::from_complex(c)
    }

    pub fn recip(self) -> Self {
        if self.is_zero() {
            return Self::new(Complex64::new(f64::INFINITY, 0.0), 0.0);
        }
        Self::new(self.mantissa.inv(), -self.log_scale)
    }

    pub fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Self::ONE;
        }
        if self.is_zero() {
            return if n > 0 { Self::ZERO } else { Self::ZERO.recip() };
        }
        // Mantissa power stays bounded by e^|n|; do it in log-polar form.
        let la = self.mantissa.norm().ln();
        let arg = self.mantissa.arg();
        Self::from_polar_log(n as f64 * (la + self.log_scale), n as f64 * arg)
    }
}

impl Default for ScaledComplex {
    fn default() -> Self {
        Self::ZERO
    }
}

impl fmt::Debug for ScaledComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?})·e^{}", self.mantissa, self.log_scale)
    }
}

impl fmt::Display for ScaledComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        write!(f, "exp({:.12} + {:.12}i)", self.log_abs(), self.arg())
    }
}

impl From<Complex64> for ScaledComplex {
    fn from(z: Complex64) -> Self {
        Self::from_complex(z)
    }
}

impl From<f64> for ScaledComplex {
    fn from(x: f64) -> Self {
        Self::from_real(x)
    }
}

impl Mul for ScaledComplex {
    type Output = ScaledComplex;
    fn mul(self, rhs: Self) -> Self {
        if self.is_zero() || rhs.is_zero() {
            return Self::ZERO;
        }
        Self::new(self.mantissa * rhs.mantissa, self.log_scale + rhs.log_scale)
    }
}

impl Div for ScaledComplex {
    type Output = ScaledComplex;
    fn div(self, rhs: Self) -> Self {
        self * rhs.recip()
    }
}

impl Add for ScaledComplex {
    type Output = ScaledComplex;
    fn add(self, rhs: Self) -> Self {
        if self.is_zero() {
            return rhs;
        }
        if rhs.is_zero() {
            return self;
        }
        let d = self.log_scale - rhs.log_scale;
        if d > ABSORPTION_LOGS {
            return self;
        }
        if d < -ABSORPTION_LOGS {
            return rhs;
        }
        if d >= 0.0 {
            Self::new(self.mantissa + rhs.mantissa * (-d).exp(), self.log_scale)
        } else {
            Self::new(self.mantissa * d.exp() + rhs.mantissa, rhs.log_scale)
        }
    }
}

impl Neg for ScaledComplex {
    type Output = ScaledComplex;
    fn neg(self) -> Self {
        ScaledComplex { mantissa: -self.mantissa, log_scale: self.log_scale }
    }
}

impl Sub for ScaledComplex {
    type Output = ScaledComplex;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl std::iter::Sum for ScaledComplex {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, |a, b| a + b)
    }
}
