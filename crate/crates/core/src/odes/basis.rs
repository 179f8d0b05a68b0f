//! Canonical solution bases integrated over ray fans.

use super::integrate::{integrate_ray_bundle, RayOptions, RayTrace, Termination};
use super::reduce::Jet;
use super::LinearODE;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::growth::GrowthSource;
use crate::scaled::ScaledComplex;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Ray directions, optionally with a sector around `θ = 0` left out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fan {
    /// Rays in the full equispaced fan before exclusion.
    pub size: usize,
    /// Rays with `|θ| < excluded_half_width` are dropped.
    pub excluded_half_width: f64,
    pub thetas: Vec<f64>,
}

impl Fan {
    /// `n` equispaced directions in `(−π, π]`.
    pub fn equispaced(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("fan needs at least one ray".into()));
        }
        let thetas = (0..n)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / n as f64;
                if t > PI {
                    t - 2.0 * PI
                } else {
                    t
                }
            })
            .collect();
        Ok(Fan { size: n, excluded_half_width: 0.0, thetas })
    }

    /// Drop the rays with `|θ| < half_width`.
    pub fn excluding(mut self, half_width: f64) -> Result<Self> {
        self.thetas.retain(|t| t.abs() >= half_width - 1e-12);
        self.excluded_half_width = half_width;
        if self.thetas.is_empty() {
            return Err(Error::InvalidArgument(format!("excluding |θ| < {half_width} leaves no rays")));
        }
        Ok(self)
    }

    /// A single direction.
    pub fn single(theta: f64) -> Self {
        Fan { size: 1, excluded_half_width: 0.0, thetas: vec![theta] }
    }

    /// Every direction of an equispaced fan is present.
    pub fn is_full(&self) -> bool {
        self.thetas.len() == self.size && self.size > 1
    }
}

/// Which rays enter `log M(r)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RaySet {
    /// Every ray that reached `r`.
    Active,
    /// Only rays that reached `r_max`. The set is then the same at every
    /// radius, so rays dropping out on their step budget cannot bend the tail.
    #[default]
    Completed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisOptions {
    pub fan: Fan,
    pub r_max: f64,
    pub ray: RayOptions,
    #[serde(default)]
    pub ray_set: RaySet,
    #[serde(skip)]
    pub exec: Exec,
}

impl BasisOptions {
    pub fn new(fan: Fan, r_max: f64, ray: RayOptions) -> Self {
        BasisOptions { fan, r_max, ray, ray_set: RaySet::default(), exec: Exec::default() }
    }
}

/// One solution: initial data at `z₀ = 0` and its traces over the fan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionHandle {
    pub index: usize,
    pub ics: Vec<ScaledComplex>,
    pub traces: Vec<RayTrace>,
}

impl SolutionHandle {
    /// `log M(r, f)` over the rays that reached `r`, and how many did.
    pub fn log_max_modulus(&self, r: f64) -> Result<(f64, usize)> {
        self.log_max_modulus_over(r, RaySet::Active)
    }

    /// `log M(r, f)` over the rays selected by `set`, and how many there were.
    pub fn log_max_modulus_over(&self, r: f64, set: RaySet) -> Result<(f64, usize)> {
        let mut best = f64::NEG_INFINITY;
        let mut count = 0;
        for tr in &self.traces {
            if set == RaySet::Completed && tr.terminated != Termination::Completed {
                continue;
            }
            if let Some(s) = tr.sample_at(r) {
                best = best.max(s.log_abs_f());
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::NoRayAtRadius(r));
        }
        Ok((best, count))
    }
}

/// The canonical basis `f_i^{(j)}(0) = δ_{ij}` of an ODE.
#[derive(Debug, Clone)]
pub struct SolutionBasis {
    pub ode: LinearODE,
    pub options: BasisOptions,
    pub handles: Vec<SolutionHandle>,
}

/// Integrate the canonical basis over the fan. All handles share each ray's
/// step sequence; rays run as independent work items.
pub fn solution_basis(ode: &LinearODE, options: &BasisOptions) -> Result<SolutionBasis> {
    let k = ode.order();
    let ics: Vec<Vec<ScaledComplex>> = (0..k)
        .map(|i| (0..k).map(|j| if i == j { ScaledComplex::ONE } else { ScaledComplex::ZERO }).collect())
        .collect();
    let per_ray = options
        .exec
        .map(&options.fan.thetas, |&theta| integrate_ray_bundle(ode, &ics, theta, options.r_max, &options.ray));
    let mut handles: Vec<SolutionHandle> =
        ics.iter().enumerate().map(|(index, ic)| SolutionHandle { index, ics: ic.clone(), traces: Vec::new() }).collect();
    for bundle in per_ray {
        for (h, tr) in handles.iter_mut().zip(bundle?) {
            h.traces.push(tr);
        }
    }
    Ok(SolutionBasis { ode: ode.clone(), options: options.clone(), handles })
}

impl SolutionBasis {
    pub fn order(&self) -> usize {
        self.ode.order()
    }

    /// `f_i, …, f_i^{(k−1)}` at `z` for every handle `i`. Uses a stored sample
    /// when `z` lies on a traced ray at a sampled radius, and integrates a
    /// fresh ray to `z` otherwise.
    pub fn states_at(&self, z: Complex64) -> Result<Vec<Vec<ScaledComplex>>> {
        let r = z.norm();
        if r == 0.0 {
            return Ok(self.handles.iter().map(|h| h.ics.clone()).collect());
        }
        let theta = z.arg();
        for (ray, t) in self.options.fan.thetas.iter().enumerate() {
            let d = (t - theta).rem_euclid(2.0 * PI);
            if d.min(2.0 * PI - d) <= 1e-12 {
                let found: Option<Vec<Vec<ScaledComplex>>> =
                    self.handles.iter().map(|h| h.traces[ray].sample_at(r).map(|s| s.state())).collect();
                if let Some(states) = found {
                    return Ok(states);
                }
            }
        }
        let ics: Vec<Vec<ScaledComplex>> = self.handles.iter().map(|h| h.ics.clone()).collect();
        let ray = RayOptions { samples: Vec::new(), ..self.options.ray.clone() };
        let traces = integrate_ray_bundle(&self.ode, &ics, theta, r, &ray)?;
        traces
            .into_iter()
            .map(|tr| match tr.sample_at(r) {
                Some(s) => Ok(s.state()),
                None => Err(Error::Integration(format!("ray to {z} stopped early ({:?})", tr.terminated))),
            })
            .collect()
    }

    /// `f_i, …, f_i^{(k)}` at `z`, the top derivative taken from the ODE.
    pub fn jet_of(&self, index: usize, z: Complex64) -> Result<Vec<ScaledComplex>> {
        let mut state = self.states_at(z)?.swap_remove(index);
        let top = self.ode.top_derivative(z, &state)?;
        state.push(top);
        Ok(state)
    }

    /// Handle `index` as a [`GrowthSource`].
    pub fn source(&self, index: usize) -> HandleSource<'_> {
        HandleSource { basis: self, index }
    }

    /// Handle `index` as a [`Jet`].
    pub fn jet(&self, index: usize) -> HandleJet<'_> {
        HandleJet { basis: self, index }
    }
}

/// Growth data of one basis handle read off its ray traces.
pub struct HandleSource<'a> {
    basis: &'a SolutionBasis,
    index: usize,
}

impl GrowthSource for HandleSource<'_> {
    fn log_max_modulus(&self, r: f64) -> Result<f64> {
        Ok(self.basis.handles[self.index].log_max_modulus_over(r, self.basis.options.ray_set)?.0)
    }

    /// Trapezoid mean of `log⁺|f|` over the fan; needs a full fan with every
    /// ray reaching `r`.
    fn characteristic(&self, r: f64) -> Result<f64> {
        if !self.basis.options.fan.is_full() {
            return Err(Error::NoRayAtRadius(r));
        }
        let h = &self.basis.handles[self.index];
        let mut vals = Vec::with_capacity(h.traces.len());
        for tr in &h.traces {
            vals.push(tr.sample_at(r).ok_or(Error::NoRayAtRadius(r))?.log_abs_f().max(0.0));
        }
        Ok(crate::exec::compensated_sum(vals.iter().copied()) / vals.len() as f64)
    }
}

/// Derivatives `f, …, f^{(n)}` (`n ≤ k`) of one basis handle.
pub struct HandleJet<'a> {
    basis: &'a SolutionBasis,
    index: usize,
}

impl Jet for HandleJet<'_> {
    fn jet(&self, z: Complex64, n: usize) -> Result<Vec<ScaledComplex>> {
        let k = self.basis.order();
        if n > k {
            return Err(Error::DerivativeDepth { requested: n, max: k });
        }
        let mut j = self.basis.jet_of(self.index, z)?;
        j.truncate(n + 1);
        Ok(j)
    }

    fn max_order(&self) -> usize {
        self.basis.order()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(coeffs: &[&str], fan: Fan, r_max: f64, samples: Vec<f64>) -> SolutionBasis {
        let ode = LinearODE::parse(coeffs).unwrap();
        let ray = RayOptions { tol: 1e-11, samples, ..Default::default() };
        solution_basis(&ode, &BasisOptions::new(fan, r_max, ray)).unwrap()
    }

    #[test]
    fn fan_construction() {
        let f = Fan::equispaced(64).unwrap();
        assert_eq!(f.thetas.len(), 64);
        assert!(f.thetas.iter().all(|t| *t > -PI && *t <= PI));
        let g = f.excluding(PI / 6.0).unwrap();
        assert!(g.thetas.iter().all(|t| t.abs() >= PI / 6.0 - 1e-12));
        assert_eq!(g.thetas.len(), 64 - 11);
        assert!(!g.is_full());
    }

    #[test]
    fn cos_and_sin_handles() {
        let b = basis(&["1", "0"], Fan::equispaced(64).unwrap(), 3.0, vec![1.0, 2.0]);
        let (cos_m, n) = b.handles[0].log_max_modulus(3.0).unwrap();
        assert_eq!(n, 64);
        assert!((cos_m - 3f64.cosh().ln()).abs() < 1e-8);
        let (sin_m, _) = b.handles[1].log_max_modulus(3.0).unwrap();
        assert!((sin_m - 3f64.sinh().ln()).abs() < 1e-8);
    }

    #[test]
    fn exponential_handles() {
        // f″ − 3f′ + 2f = 0: handles 2e^z − e^{2z} and e^{2z} − e^z
        let b = basis(&["2", "-3"], Fan::equispaced(8).unwrap(), 1.5, vec![]);
        let z = Complex64::new(1.5, 0.0);
        let s = b.states_at(z).unwrap();
        let h1 = 2.0 * z.exp() - (2.0 * z).exp();
        let h2 = (2.0 * z).exp() - z.exp();
        assert!((s[0][0].to_complex() - h1).norm() < 1e-9 * h1.norm());
        assert!((s[1][0].to_complex() - h2).norm() < 1e-9 * h2.norm());
        let off = Complex64::from_polar(1.2, 0.4);
        let s = b.states_at(off).unwrap();
        let h2 = (2.0 * off).exp() - off.exp();
        assert!((s[1][0].to_complex() - h2).norm() < 1e-9 * h2.norm());
    }

    #[test]
    fn gaussian_handle() {
        let b = basis(&["2z"], Fan::equispaced(4).unwrap(), 2.0, vec![]);
        let (m, _) = b.handles[0].log_max_modulus(2.0).unwrap();
        assert!((m - 4.0).abs() < 1e-8);
        let e = b.handles[0].log_max_modulus(3.0);
        assert!(matches!(e, Err(Error::NoRayAtRadius(_))));
    }

    #[test]
    fn completed_ray_set() {
        // fast oscillation near θ = 0 exhausts a small budget there
        let ode = LinearODE::parse(&["exp(3z)", "0"]).unwrap();
        let ray = RayOptions { tol: 1e-8, step_budget: 400, samples: vec![1.0, 2.0] };
        let b = solution_basis(&ode, &BasisOptions::new(Fan::equispaced(8).unwrap(), 3.0, ray)).unwrap();
        let h = &b.handles[0];
        let done = h.traces.iter().filter(|t| t.terminated == Termination::Completed).count();
        assert!(done > 0 && done < 8, "{done}");
        let (_, active) = h.log_max_modulus_over(1.0, RaySet::Active).unwrap();
        let (_, completed) = h.log_max_modulus_over(1.0, RaySet::Completed).unwrap();
        assert_eq!(completed, done);
        assert!(active >= completed);
    }
}
