//! Dormand–Prince 5(4) integration of the companion system along a ray.
//!
//! Along `z = t·e^{iθ}` the state `u = (f, f′, …, f^{(k−1)})` satisfies
//! `du_j/dt = e^{iθ} u_{j+1}` and `du_{k−1}/dt = −e^{iθ} Σ A_j(z) u_j`. Several
//! initial-value problems can share one ray; they share the step sequence and
//! every coefficient evaluation, and each keeps its own scale: the stored state
//! is `U·e^{s}` with `max_j |U_j| ∈ [1, e)` restored after every accepted step.

use super::LinearODE;
use crate::functions::LocalEvaluator;
use crate::error::{Error, Result};
use crate::scaled::ScaledComplex;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    StepBudget,
    ToleranceFailure,
}

/// State of one solution at one radius on a ray.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaySample {
    pub r: f64,
    /// `log|f^{(j)}|` for `j = 0..k`.
    pub log_abs: Vec<f64>,
    /// `arg f^{(j)}`.
    pub phase: Vec<f64>,
}

impl RaySample {
    pub fn log_abs_f(&self) -> f64 {
        self.log_abs[0]
    }

    /// `f^{(j)}` as split values.
    pub fn state(&self) -> Vec<ScaledComplex> {
        self.log_abs.iter().zip(&self.phase).map(|(&l, &p)| ScaledComplex::from_polar_log(l, p)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayTrace {
    pub theta: f64,
    pub samples: Vec<RaySample>,
    pub renorm_count: u64,
    pub steps: u64,
    pub rejected: u64,
    pub terminated: Termination,
    /// Ray parameter reached.
    pub t_end: f64,
}

impl RayTrace {
    /// The sample at radius `r` (relative match `1e-12`), if the ray got there.
    pub fn sample_at(&self, r: f64) -> Option<&RaySample> {
        let tol = 1e-12 * r.abs().max(1.0);
        let i = self.samples.partition_point(|s| s.r < r - tol);
        self.samples.get(i).filter(|s| (s.r - r).abs() <= tol)
    }

    /// Largest sampled radius.
    pub fn reach(&self) -> f64 {
        self.samples.last().map(|s| s.r).unwrap_or(0.0)
    }
}

/// Integration controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RayOptions {
    /// Local error per step relative to the state norm.
    pub tol: f64,
    /// Accepted steps per ray.
    pub step_budget: u64,
    /// Radii at which the state is recorded; `r_max` is always recorded.
    pub samples: Vec<f64>,
}

impl Default for RayOptions {
    fn default() -> Self {
        RayOptions { tol: 1e-10, step_budget: 10_000_000, samples: Vec::new() }
    }
}

pub const MIN_TOL: f64 = 1e-12;
pub const MAX_TOL: f64 = 1e-6;

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct System {
    k: usize,
    dir: Complex64,
    evals: Vec<LocalEvaluator>,
    /// Coefficients that are not identically zero.
    active: Vec<usize>,
    coeffs: Vec<Complex64>,
    anchor: f64,
}

impl System {
    fn set_anchor(&mut self, t: f64) {
        if t != self.anchor {
            self.anchor = t;
            for e in &mut self.evals {
                e.set_anchor(self.dir * t);
            }
        }
    }

    /// Right-hand side at `anchor + dt`.
    fn rhs(&mut self, dt: f64, u: &[Complex64], out: &mut [Complex64]) -> bool {
        let dz = self.dir * dt;
        let mut ok = true;
        for &j in &self.active {
            let c = self.evals[j].eval(dz);
            ok &= c.re.is_finite() && c.im.is_finite();
            self.coeffs[j] = c;
        }
        if !ok {
            return false;
        }
        let k = self.k;
        let n = u.len();
        let out = &mut out[..n];
        let a = &self.coeffs[..k];
        let dir = self.dir;
        if k == 2 {
            let (a0, a1) = (a[0], a[1]);
            for (col, o) in u.chunks_exact(2).zip(out.chunks_exact_mut(2)) {
                let acc = a0 * col[0] + a1 * col[1];
                o[0] = dir * col[1];
                o[1] = -(dir * acc);
            }
            return true;
        }
        let mut base = 0;
        while base + k <= n {
            let col = &u[base..base + k];
            let o = &mut out[base..base + k];
            let mut acc = a[0] * col[0];
            for j in 1..k {
                acc += a[j] * col[j];
                o[j - 1] = dir * col[j];
            }
            o[k - 1] = -(dir * acc);
            base += k;
        }
        true
    }
}

/// `out = y + h·Σ aᵢ·kᵢ` over the first `n` entries.
macro_rules! stage {
    ($n:expr, $out:ident = $y:ident + $h:expr; $a0:ident * $k0:ident $(, $a:ident * $k:ident)*) => {{
        let out = &mut $out.as_mut()[..$n];
        let y = &$y.as_ref()[..$n];
        let $k0 = &$k0.as_ref()[..$n];
        $(let $k = &$k.as_ref()[..$n];)*
        for i in 0..$n {
            out[i] = y[i] + ($k0[i] * $a0 $(+ $k[i] * $a)*) * $h;
        }
    }};
}

fn max_norm(v: &[Complex64]) -> f64 {
    v.iter().fold(0.0_f64, |a, z| a.max(z.norm_sqr())).sqrt()
}

/// Integrate several initial-value problems along the ray at angle `theta`
/// from `t = 0` to `r_max`. Returns one trace per initial condition.
pub fn integrate_ray_bundle(
    ode: &LinearODE,
    ics: &[Vec<ScaledComplex>],
    theta: f64,
    r_max: f64,
    opts: &RayOptions,
) -> Result<Vec<RayTrace>> {
    let k = ode.order();
    if !(MIN_TOL..=MAX_TOL).contains(&opts.tol) {
        return Err(Error::InvalidArgument(format!("tol {} outside [{MIN_TOL}, {MAX_TOL}]", opts.tol)));
    }
    if !(r_max > 0.0) || !r_max.is_finite() {
        return Err(Error::InvalidArgument(format!("r_max {r_max} must be positive and finite")));
    }
    if ics.is_empty() {
        return Err(Error::InvalidArgument("no initial conditions".into()));
    }
    let cols = ics.len();
    let n = cols * k;
    let mut u = vec![Complex64::new(0.0, 0.0); n];
    let mut scale = vec![0.0_f64; cols];
    for (c, ic) in ics.iter().enumerate() {
        if ic.len() != k || ic.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("initial condition {c} must hold {k} finite values")));
        }
        let s = ic.iter().filter(|v| !v.is_zero()).map(|v| v.log_abs().floor()).fold(f64::NEG_INFINITY, f64::max);
        let s = if s.is_finite() { s } else { 0.0 };
        scale[c] = s;
        for j in 0..k {
            u[c * k + j] = ScaledComplex::new(ic[j].mantissa(), ic[j].log_scale() - s).to_complex();
        }
    }

    let mut targets: Vec<f64> = opts.samples.iter().copied().filter(|&r| r > 0.0 && r < r_max).collect();
    targets.push(r_max);
    targets.sort_by(f64::total_cmp);
    targets.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs().max(1.0));

    let evals: Vec<LocalEvaluator> = ode.coefficients().iter().map(LocalEvaluator::new).collect();
    let mut sys = System {
        k,
        dir: Complex64::from_polar(1.0, theta),
        active: (0..k).filter(|&j| !evals[j].is_zero()).collect(),
        evals,
        coeffs: vec![Complex64::new(0.0, 0.0); k],
        anchor: 0.0,
    };
    let mut traces: Vec<RayTrace> = (0..cols)
        .map(|_| RayTrace {
            theta,
            samples: Vec::new(),
            renorm_count: 0,
            steps: 0,
            rejected: 0,
            terminated: Termination::Completed,
            t_end: 0.0,
        })
        .collect();

    let run = Run { sys: &mut sys, targets: &targets, opts, theta, k, cols, r_max };
    let (t, steps, rejected, termination) = match n {
        1 => run.march(fixed::<1>(&u), &mut scale, &mut traces)?,
        2 => run.march(fixed::<2>(&u), &mut scale, &mut traces)?,
        3 => run.march(fixed::<3>(&u), &mut scale, &mut traces)?,
        4 => run.march(fixed::<4>(&u), &mut scale, &mut traces)?,
        6 => run.march(fixed::<6>(&u), &mut scale, &mut traces)?,
        8 => run.march(fixed::<8>(&u), &mut scale, &mut traces)?,
        9 => run.march(fixed::<9>(&u), &mut scale, &mut traces)?,
        _ => run.march(u, &mut scale, &mut traces)?,
    };
    for tr in traces.iter_mut() {
        tr.steps = steps;
        tr.rejected = rejected;
        tr.terminated = termination;
        tr.t_end = t;
    }
    Ok(traces)
}

fn fixed<const N: usize>(v: &[Complex64]) -> [Complex64; N] {
    let mut a = [Complex64::new(0.0, 0.0); N];
    a.copy_from_slice(v);
    a
}

/// State storage; fixed-size arrays let the stage loops unroll.
trait Buf: AsRef<[Complex64]> + AsMut<[Complex64]> {
    fn zeroed(n: usize) -> Self;
}

impl<const N: usize> Buf for [Complex64; N] {
    fn zeroed(_: usize) -> Self {
        [Complex64::new(0.0, 0.0); N]
    }
}

impl Buf for Vec<Complex64> {
    fn zeroed(n: usize) -> Self {
        vec![Complex64::new(0.0, 0.0); n]
    }
}

struct Run<'a> {
    sys: &'a mut System,
    targets: &'a [f64],
    opts: &'a RayOptions,
    theta: f64,
    k: usize,
    cols: usize,
    r_max: f64,
}

impl Run<'_> {
    fn march<S: Buf>(
        self,
        mut u: S,
        scale: &mut [f64],
        traces: &mut [RayTrace],
    ) -> Result<(f64, u64, u64, Termination)> {
        let Run { sys, targets, opts, theta, k, cols, r_max } = self;
        let n = u.as_ref().len();
        let mut k1 = S::zeroed(n);
        let mut k2 = S::zeroed(n);
        let mut k3 = S::zeroed(n);
        let mut k4 = S::zeroed(n);
        let mut k5 = S::zeroed(n);
        let mut k6 = S::zeroed(n);
        let mut k7 = S::zeroed(n);
        let mut tmp = S::zeroed(n);
        let mut y_new = S::zeroed(n);

        let mut t = 0.0_f64;
        if !sys.rhs(0.0, u.as_ref(), k1.as_mut()) {
            return Err(Error::Integration("coefficient overflow at the origin".into()));
        }
        let mut h = initial_step(u.as_ref(), k1.as_ref(), opts.tol, r_max);
        let mut steps = 0u64;
        let mut rejected = 0u64;
        let mut termination = Termination::Completed;
        let mut next = 0usize;
        let mut ln_last_err = 1e-4_f64.ln();
        while next < targets.len() {
            if steps >= opts.step_budget {
                termination = Termination::StepBudget;
                break;
            }
            let target = targets[next];
            let mut hit = false;
            let mut hh = h;
            if t + hh >= target * (1.0 - 1e-15) || t + hh > target {
                hh = target - t;
                hit = true;
            }
            let h_min = 1e-14 * t.max(1.0);
            if hh < h_min && !hit {
                termination = Termination::ToleranceFailure;
                break;
            }

            sys.set_anchor(t);
            stage!(n, tmp = u + hh; A21 * k1);
            let ok2 = sys.rhs(C2 * hh, tmp.as_ref(), k2.as_mut());
            stage!(n, tmp = u + hh; A31 * k1, A32 * k2);
            let ok3 = sys.rhs(C3 * hh, tmp.as_ref(), k3.as_mut());
            stage!(n, tmp = u + hh; A41 * k1, A42 * k2, A43 * k3);
            let ok4 = sys.rhs(C4 * hh, tmp.as_ref(), k4.as_mut());
            stage!(n, tmp = u + hh; A51 * k1, A52 * k2, A53 * k3, A54 * k4);
            let ok5 = sys.rhs(C5 * hh, tmp.as_ref(), k5.as_mut());
            stage!(n, tmp = u + hh; A61 * k1, A62 * k2, A63 * k3, A64 * k4, A65 * k5);
            let ok6 = sys.rhs(hh, tmp.as_ref(), k6.as_mut());
            stage!(n, y_new = u + hh; B1 * k1, B3 * k3, B4 * k4, B5 * k5, B6 * k6);
            let t_new = if hit { target } else { t + hh };
            let ok7 = sys.rhs(t_new - t, y_new.as_ref(), k7.as_mut());
            if !(ok2 && ok3 && ok4 && ok5 && ok6 && ok7) {
                return Err(Error::Integration(format!("coefficient overflow near t = {t} on θ = {theta}")));
            }

            // error per column, relative to the column's norm
            let mut err = 0.0_f64;
            for c in 0..cols {
                let r = c * k..(c + 1) * k;
                let sc = max_norm(&u.as_ref()[r.clone()]).max(max_norm(&y_new.as_ref()[r.clone()]));
                if sc == 0.0 {
                    continue;
                }
                let (a1, a3, a4) = (&k1.as_ref()[r.clone()], &k3.as_ref()[r.clone()], &k4.as_ref()[r.clone()]);
                let (a5, a6, a7) = (&k5.as_ref()[r.clone()], &k6.as_ref()[r.clone()], &k7.as_ref()[r]);
                let mut e = 0.0_f64;
                for i in 0..k {
                    let d = (a1[i] * E1 + a3[i] * E3 + a4[i] * E4 + a5[i] * E5 + a6[i] * E6 + a7[i] * E7) * hh;
                    e = e.max(d.norm_sqr());
                }
                err = err.max(e.sqrt() / (opts.tol * sc));
            }
            if !err.is_finite() {
                h = hh * 0.1;
                rejected += 1;
                if h < h_min {
                    termination = Termination::ToleranceFailure;
                    break;
                }
                continue;
            }
            if err <= 1.0 {
                steps += 1;
                t = t_new;
                std::mem::swap(&mut u, &mut y_new);
                std::mem::swap(&mut k1, &mut k7);
                // renormalize each column back into [1, e)
                for c in 0..cols {
                    let r = c * k..(c + 1) * k;
                    let m = max_norm(&u.as_ref()[r.clone()]);
                    if m > 0.0 && !(1.0..std::f64::consts::E).contains(&m) {
                        let shift = m.ln().floor();
                        let f = (-shift).exp();
                        for i in r {
                            u.as_mut()[i] *= f;
                            k1.as_mut()[i] *= f;
                        }
                        scale[c] += shift;
                        traces[c].renorm_count += 1;
                    }
                }
                if hit {
                    for c in 0..cols {
                        let col = &u.as_ref()[c * k..(c + 1) * k];
                        traces[c].samples.push(RaySample {
                            r: target,
                            log_abs: col.iter().map(|v| v.norm().ln() + scale[c]).collect(),
                            phase: col.iter().map(|v| v.arg()).collect(),
                        });
                    }
                    next += 1;
                }
                // PI step-size control
                let ln_e = err.max(1e-10).ln();
                let fac = 0.9 * (-0.7 / 5.0 * ln_e + 0.4 / 5.0 * ln_last_err).exp();
                ln_last_err = ln_e;
                let grown = hh * fac.clamp(0.2, 5.0);
                h = if hit { grown.max(h) } else { grown };
            } else {
                rejected += 1;
                h = hh * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                if h < h_min {
                    termination = Termination::ToleranceFailure;
                    break;
                }
            }
        }

        Ok((t, steps, rejected, termination))
    }
}

fn initial_step(u: &[Complex64], f0: &[Complex64], tol: f64, r_max: f64) -> f64 {
    let d0 = max_norm(u);
    let d1 = max_norm(f0);
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    (h * tol.powf(0.2) * 10.0).min(0.1 * r_max).max(1e-8)
}

/// Integrate a single initial-value problem along one ray.
pub fn integrate_ray(
    ode: &LinearODE,
    ics: &[ScaledComplex],
    theta: f64,
    r_max: f64,
    opts: &RayOptions,
) -> Result<RayTrace> {
    Ok(integrate_ray_bundle(ode, &[ics.to_vec()], theta, r_max, opts)?.pop().expect("one trace"))
}
