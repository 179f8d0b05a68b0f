//! Expression-tree model of entire functions.

use crate::error::{Error, Result};
use crate::scaled::ScaledComplex;
use num_complex::Complex64;
use std::fmt;
use std::sync::Arc;

/// Generator of the first `n` Taylor coefficients of a declared power series.
pub type CoefficientGenerator = Arc<dyn Fn(usize) -> Vec<ScaledComplex> + Send + Sync>;

/// A power series given by a coefficient generator.
#[derive(Clone)]
pub struct PowerSeries {
    pub label: String,
    pub generator: CoefficientGenerator,
    /// All coefficients are nonnegative reals.
    pub nonnegative: bool,
    /// Truncation budget for evaluation and coefficient scans.
    pub max_terms: usize,
}

impl PowerSeries {
    pub fn new<G>(label: impl Into<String>, nonnegative: bool, generator: G) -> Self
    where
        G: Fn(usize) -> Vec<ScaledComplex> + Send + Sync + 'static,
    {
        PowerSeries { label: label.into(), generator: Arc::new(generator), nonnegative, max_terms: 1 << 16 }
    }

    fn derivative(&self) -> PowerSeries {
        let inner = self.generator.clone();
        PowerSeries {
            label: format!("d/dz[{}]", self.label),
            generator: Arc::new(move |n| {
                let c = inner(n + 1);
                (0..n).map(|i| c[i + 1].scale_real((i + 1) as f64)).collect()
            }),
            nonnegative: self.nonnegative,
            max_terms: self.max_terms,
        }
    }
}

#[derive(Clone)]
pub enum Node {
    /// Coefficients a₀, a₁, …, aₙ.
    Poly(Vec<Complex64>),
    Exp(Arc<Node>),
    Sum(Vec<Arc<Node>>),
    Product(Vec<Arc<Node>>),
    Scaled(Complex64, Arc<Node>),
    Series(PowerSeries),
}

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const C1: Complex64 = Complex64 { re: 1.0, im: 0.0 };

fn trim(mut c: Vec<Complex64>) -> Vec<Complex64> {
    while c.len() > 1 && *c.last().unwrap() == C0 {
        c.pop();
    }
    if c.is_empty() {
        c.push(C0);
    }
    c
}

impl Node {
    fn constant(&self) -> Option<Complex64> {
        match self {
            Node::Poly(c) if c.len() == 1 => Some(c[0]),
            _ => None,
        }
    }

    fn is_zero(&self) -> bool {
        self.constant() == Some(C0)
    }
}

/// An entire function with symbolic derivatives and a power-series view.
#[derive(Clone)]
pub struct EntireFunction {
    root: Arc<Node>,
    max_derivative: usize,
}

pub const DEFAULT_DERIVATIVE_DEPTH: usize = 8;

impl EntireFunction {
    pub fn from_node(node: Node) -> Self {
        EntireFunction { root: Arc::new(node), max_derivative: DEFAULT_DERIVATIVE_DEPTH }
    }

    fn from_arc(root: Arc<Node>, max_derivative: usize) -> Self {
        EntireFunction { root, max_derivative }
    }

    pub fn node(&self) -> &Node {
        &self.root
    }

    pub fn with_derivative_depth(mut self, depth: usize) -> Self {
        self.max_derivative = depth;
        self
    }

    pub fn derivative_depth(&self) -> usize {
        self.max_derivative
    }

    pub fn constant(c: Complex64) -> Self {
        Self::from_node(Node::Poly(vec![c]))
    }

    pub fn real(c: f64) -> Self {
        Self::constant(Complex64::new(c, 0.0))
    }

    pub fn zero() -> Self {
        Self::real(0.0)
    }

    /// The identity function `z`.
    pub fn z() -> Self {
        Self::polynomial(vec![C0, C1])
    }

    pub fn polynomial(coeffs: Vec<Complex64>) -> Self {
        Self::from_node(Node::Poly(trim(coeffs)))
    }

    pub fn real_polynomial(coeffs: &[f64]) -> Self {
        Self::polynomial(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn series(series: PowerSeries) -> Self {
        Self::from_node(Node::Series(series))
    }

    pub fn exp(&self) -> Self {
        if let Some(c) = self.root.constant() {
            return Self::constant(c.exp());
        }
        Self::from_node(Node::Exp(self.root.clone()))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_arc(sum_nodes(vec![self.root.clone(), other.root.clone()]), self.depth_with(other))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self::from_arc(product_nodes(vec![self.root.clone(), other.root.clone()]), self.depth_with(other))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::from_arc(scale_node(c, self.root.clone()), self.max_derivative)
    }

    pub fn powi(&self, n: u32) -> Self {
        let mut acc = Self::real(1.0);
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    fn depth_with(&self, other: &Self) -> usize {
        self.max_derivative.min(other.max_derivative)
    }

    /// The value if the function is structurally constant.
    pub fn as_constant(&self) -> Option<Complex64> {
        self.root.constant()
    }

    /// Upper bound on the degree when the function is structurally a
    /// polynomial; `None` for transcendental trees.
    pub fn polynomial_degree_bound(&self) -> Option<usize> {
        degree_bound(&self.root)
    }

    pub fn is_polynomial(&self) -> bool {
        self.polynomial_degree_bound().is_some()
    }

    /// Sufficient structural condition for all Taylor coefficients being
    /// nonnegative reals, in which case `M(r, f) = f(r)`.
    pub fn has_nonnegative_coefficients(&self) -> bool {
        nonneg(&self.root)
    }

    pub fn eval(&self, z: Complex64) -> Result<ScaledComplex> {
        eval_node(&self.root, z)
    }

    pub fn log_abs(&self, z: Complex64) -> Result<f64> {
        Ok(self.eval(z)?.log_abs())
    }

    /// Plain `f64` evaluation; overflows to infinity or NaN outside range.
    pub fn eval_native(&self, z: Complex64) -> Complex64 {
        native_node(&self.root, z)
    }

    /// n-th derivative, symbolically.
    pub fn derivative(&self, n: usize) -> Result<EntireFunction> {
        if n > self.max_derivative {
            return Err(Error::DerivativeDepth { requested: n, max: self.max_derivative });
        }
        let mut node = self.root.clone();
        for _ in 0..n {
            node = diff_node(&node);
        }
        Ok(Self::from_arc(node, self.max_derivative))
    }

    /// `f, f′, …, f^{(n)}` as separate functions.
    pub fn derivatives(&self, n: usize) -> Result<Vec<EntireFunction>> {
        if n > self.max_derivative {
            return Err(Error::DerivativeDepth { requested: n, max: self.max_derivative });
        }
        let mut out = vec![self.clone()];
        for _ in 0..n {
            let next = Self::from_arc(diff_node(&out.last().unwrap().root), self.max_derivative);
            out.push(next);
        }
        Ok(out)
    }

    /// First `n` Taylor coefficients at the origin.
    pub fn taylor(&self, n: usize) -> Result<Vec<ScaledComplex>> {
        taylor_node(&self.root, n)
    }
}

impl fmt::Debug for EntireFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EntireFunction({self})")
    }
}

impl fmt::Display for EntireFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(&self.root, f)
    }
}

fn sum_nodes(parts: Vec<Arc<Node>>) -> Arc<Node> {
    let mut poly: Vec<Complex64> = vec![C0];
    let mut rest = Vec::new();
    let mut stack = parts;
    while let Some(p) = stack.pop() {
        match &*p {
            Node::Poly(c) => {
                if poly.len() < c.len() {
                    poly.resize(c.len(), C0);
                }
                for (a, b) in poly.iter_mut().zip(c) {
                    *a += b;
                }
            }
            Node::Sum(children) => stack.extend(children.iter().cloned()),
            _ => rest.push(p),
        }
    }
    rest.reverse();
    let poly = trim(poly);
    let has_poly = !(poly.len() == 1 && poly[0] == C0);
    if rest.is_empty() {
        return Arc::new(Node::Poly(poly));
    }
    if has_poly {
        rest.insert(0, Arc::new(Node::Poly(poly)));
    }
    if rest.len() == 1 {
        return rest.pop().unwrap();
    }
    Arc::new(Node::Sum(rest))
}

fn poly_mul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![C0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    trim(out)
}

fn product_nodes(parts: Vec<Arc<Node>>) -> Arc<Node> {
    let mut poly: Vec<Complex64> = vec![C1];
    let mut rest = Vec::new();
    let mut stack = parts;
    while let Some(p) = stack.pop() {
        match &*p {
            Node::Poly(c) => poly = poly_mul(&poly, c),
            Node::Product(children) => stack.extend(children.iter().cloned()),
            Node::Scaled(c, inner) => {
                poly = poly.iter().map(|a| a * c).collect();
                stack.push(inner.clone());
            }
            _ => rest.push(p),
        }
    }
    rest.reverse();
    let poly = trim(poly);
    if rest.is_empty() || (poly.len() == 1 && poly[0] == C0) {
        return Arc::new(Node::Poly(poly));
    }
    let node = if rest.len() == 1 { rest.pop().unwrap() } else { Arc::new(Node::Product(rest)) };
    if poly.len() == 1 {
        if poly[0] == C1 {
            node
        } else {
            Arc::new(Node::Scaled(poly[0], node))
        }
    } else {
        match &*node {
            Node::Product(children) => {
                let mut v = vec![Arc::new(Node::Poly(poly))];
                v.extend(children.iter().cloned());
                Arc::new(Node::Product(v))
            }
            _ => Arc::new(Node::Product(vec![Arc::new(Node::Poly(poly)), node])),
        }
    }
}

fn scale_node(c: Complex64, node: Arc<Node>) -> Arc<Node> {
    if c == C1 {
        return node;
    }
    match &*node {
        Node::Poly(p) => Arc::new(Node::Poly(trim(p.iter().map(|a| a * c).collect()))),
        Node::Scaled(d, inner) => scale_node(c * d, inner.clone()),
        _ if c == C0 => Arc::new(Node::Poly(vec![C0])),
        _ => Arc::new(Node::Scaled(c, node)),
    }
}

fn diff_node(node: &Arc<Node>) -> Arc<Node> {
    match &**node {
        Node::Poly(c) => {
            let d: Vec<Complex64> = c.iter().enumerate().skip(1).map(|(i, a)| a * i as f64).collect();
            Arc::new(Node::Poly(trim(d)))
        }
        Node::Exp(g) => {
            let dg = diff_node(g);
            product_nodes(vec![dg, node.clone()])
        }
        Node::Sum(children) => sum_nodes(children.iter().map(diff_node).collect()),
        Node::Product(children) => {
            let mut terms = Vec::with_capacity(children.len());
            for i in 0..children.len() {
                let d = diff_node(&children[i]);
                if d.is_zero() {
                    continue;
                }
                let mut factors: Vec<Arc<Node>> = children.clone();
                factors[i] = d;
                terms.push(product_nodes(factors));
            }
            sum_nodes(terms)
        }
        Node::Scaled(c, inner) => scale_node(*c, diff_node(inner)),
        Node::Series(s) => Arc::new(Node::Series(s.derivative())),
    }
}

fn degree_bound(node: &Node) -> Option<usize> {
    match node {
        Node::Poly(c) => Some(c.len() - 1),
        Node::Exp(g) => g.constant().map(|_| 0),
        Node::Sum(ch) => ch.iter().map(|c| degree_bound(c)).try_fold(0, |a, d| d.map(|d| a.max(d))),
        Node::Product(ch) => ch.iter().map(|c| degree_bound(c)).try_fold(0, |a, d| d.map(|d| a + d)),
        Node::Scaled(_, inner) => degree_bound(inner),
        Node::Series(_) => None,
    }
}

fn is_nonneg_real(c: &Complex64) -> bool {
    c.im == 0.0 && c.re >= 0.0
}

fn nonneg(node: &Node) -> bool {
    match node {
        Node::Poly(c) => c.iter().all(is_nonneg_real),
        Node::Exp(g) => nonneg(g),
        Node::Sum(ch) | Node::Product(ch) => ch.iter().all(|c| nonneg(c)),
        Node::Scaled(c, inner) => is_nonneg_real(c) && nonneg(inner),
        Node::Series(s) => s.nonnegative,
    }
}

fn eval_poly_scaled(c: &[Complex64], z: Complex64) -> ScaledComplex {
    // Horner in native arithmetic is fine while |z|^deg fits; fall back to
    // scaled Horner otherwise.
    let native = c.iter().rev().fold(C0, |acc, a| acc * z + a);
    if native.re.is_finite() && native.im.is_finite() {
        return ScaledComplex::from_complex(native);
    }
    let zs = ScaledComplex::from_complex(z);
    c.iter()
        .rev()
        .fold(ScaledComplex::ZERO, |acc, a| acc * zs + ScaledComplex::from_complex(*a))
}

/// Converged partial sum of a power series at `z`.
fn eval_series(s: &PowerSeries, z: Complex64) -> Result<ScaledComplex> {
    let zs = ScaledComplex::from_complex(z);
    let mut n = 64usize;
    loop {
        let coeffs = (s.generator)(n);
        let mut sum = ScaledComplex::ZERO;
        let mut zpow = ScaledComplex::ONE;
        let mut max_log = f64::NEG_INFINITY;
        let mut last_logs: Vec<f64> = Vec::new();
        for a in &coeffs {
            let term = *a * zpow;
            sum = sum + term;
            let lt = term.log_abs();
            if lt.is_finite() {
                max_log = max_log.max(lt);
                last_logs.push(lt);
            }
            zpow = zpow * zs;
        }
        if tail_converged(&last_logs, max_log) {
            return Ok(sum);
        }
        if n >= s.max_terms {
            return Err(Error::TruncationExhausted { terms: n });
        }
        n = (n * 2).min(s.max_terms);
    }
}

/// The last ten nonzero log-terms decrease and the final one is negligible
/// (below `e^-37 ≈ 1e-16`) against the largest term.
pub(crate) fn tail_converged(logs: &[f64], max_log: f64) -> bool {
    if logs.is_empty() {
        return true;
    }
    if logs.len() < 11 {
        return false;
    }
    let tail = &logs[logs.len() - 11..];
    tail.windows(2).all(|w| w[1] < w[0]) && *logs.last().unwrap() < max_log - 37.0
}

fn eval_node(node: &Node, z: Complex64) -> Result<ScaledComplex> {
    match node {
        Node::Poly(c) => Ok(eval_poly_scaled(c, z)),
        Node::Exp(g) => {
            let w = eval_node(g, z)?;
            w.exp().ok_or_else(|| Error::InvalidArgument(format!("exponent overflow at z = {z}")))
        }
        Node::Sum(ch) => {
            let mut acc = ScaledComplex::ZERO;
            for c in ch {
                acc = acc + eval_node(c, z)?;
            }
            Ok(acc)
        }
        Node::Product(ch) => {
            let mut acc = ScaledComplex::ONE;
            for c in ch {
                acc = acc * eval_node(c, z)?;
            }
            Ok(acc)
        }
        Node::Scaled(c, inner) => Ok(eval_node(inner, z)?.scale(*c)),
        Node::Series(s) => eval_series(s, z),
    }
}

fn native_node(node: &Node, z: Complex64) -> Complex64 {
    match node {
        Node::Poly(c) => c.iter().rev().fold(C0, |acc, a| acc * z + a),
        Node::Exp(g) => native_node(g, z).exp(),
        Node::Sum(ch) => ch.iter().map(|c| native_node(c, z)).sum(),
        Node::Product(ch) => ch.iter().map(|c| native_node(c, z)).product(),
        Node::Scaled(c, inner) => c * native_node(inner, z),
        Node::Series(s) => eval_series(s, z)
            .map(|v| v.to_complex())
            .unwrap_or(Complex64::new(f64::NAN, f64::NAN)),
    }
}

fn taylor_node(node: &Node, n: usize) -> Result<Vec<ScaledComplex>> {
    let mut out = vec![ScaledComplex::ZERO; n];
    match node {
        Node::Poly(c) => {
            for (o, a) in out.iter_mut().zip(c) {
                *o = ScaledComplex::from_complex(*a);
            }
        }
        Node::Scaled(c, inner) => {
            for (o, a) in out.iter_mut().zip(taylor_node(inner, n)?) {
                *o = a.scale(*c);
            }
        }
        Node::Sum(ch) => {
            for c in ch {
                for (o, a) in out.iter_mut().zip(taylor_node(c, n)?) {
                    *o = *o + a;
                }
            }
        }
        Node::Product(ch) => {
            let mut acc = vec![ScaledComplex::ZERO; n];
            if n > 0 {
                acc[0] = ScaledComplex::ONE;
            }
            for c in ch {
                let b = taylor_node(c, n)?;
                let nz: Vec<usize> = (0..n).filter(|&j| !b[j].is_zero()).collect();
                let mut next = vec![ScaledComplex::ZERO; n];
                for i in 0..n {
                    if acc[i].is_zero() {
                        continue;
                    }
                    for &j in &nz {
                        if i + j >= n {
                            break;
                        }
                        next[i + j] = next[i + j] + acc[i] * b[j];
                    }
                }
                acc = next;
            }
            out = acc;
        }
        Node::Exp(g) => {
            // h = exp(g): n·hₙ = Σ_{k=1}^{n} k·g_k·h_{n−k}
            let gc = taylor_node(g, n)?;
            if n > 0 {
                out[0] = gc[0]
                    .exp()
                    .ok_or_else(|| Error::InvalidArgument("exponent overflow in series".into()))?;
            }
            let nz: Vec<usize> = (1..n).filter(|&k| !gc[k].is_zero()).collect();
            for m in 1..n {
                let mut acc = ScaledComplex::ZERO;
                for &k in &nz {
                    if k > m {
                        break;
                    }
                    acc = acc + gc[k].scale_real(k as f64) * out[m - k];
                }
                out[m] = acc.scale_real(1.0 / m as f64);
            }
        }
        Node::Series(s) => {
            let c = (s.generator)(n);
            for (o, a) in out.iter_mut().zip(c) {
                *o = a;
            }
        }
    }
    Ok(out)
}

fn fmt_complex(c: &Complex64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if c.im == 0.0 {
        write!(f, "{}", c.re)
    } else if c.re == 0.0 {
        write!(f, "{}*i", c.im)
    } else {
        write!(f, "({}+{}*i)", c.re, c.im)
    }
}

fn write_node(node: &Node, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match node {
        Node::Poly(c) => {
            let terms: Vec<(usize, &Complex64)> = c.iter().enumerate().filter(|(_, a)| **a != C0).collect();
            if terms.is_empty() {
                return write!(f, "0");
            }
            if terms.len() > 1 {
                write!(f, "(")?;
            }
            for (idx, (i, a)) in terms.iter().enumerate() {
                if idx > 0 {
                    write!(f, " + ")?;
                }
                match i {
                    0 => fmt_complex(a, f)?,
                    _ => {
                        if **a != C1 {
                            fmt_complex(a, f)?;
                            write!(f, "*")?;
                        }
                        if *i == 1 {
                            write!(f, "z")?;
                        } else {
                            write!(f, "z^{i}")?;
                        }
                    }
                }
            }
            if terms.len() > 1 {
                write!(f, ")")?;
            }
            Ok(())
        }
        Node::Exp(g) => {
            write!(f, "exp(")?;
            write_node(g, f)?;
            write!(f, ")")
        }
        Node::Sum(ch) => {
            write!(f, "(")?;
            for (i, c) in ch.iter().enumerate() {
                if i > 0 {
                    write!(f, " + ")?;
                }
                write_node(c, f)?;
            }
            write!(f, ")")
        }
        Node::Product(ch) => {
            for (i, c) in ch.iter().enumerate() {
                if i > 0 {
                    write!(f, "*")?;
                }
                write_node(c, f)?;
            }
            Ok(())
        }
        Node::Scaled(c, inner) => {
            fmt_complex(c, f)?;
            write!(f, "*")?;
            write_node(inner, f)
        }
        Node::Series(s) => write!(f, "{}", s.label),
    }
}

enum Local {
    Poly(Vec<Complex64>),
    ExpPoly(usize),
    Sum(Vec<Local>),
    Product(Vec<Local>),
    Scaled(Complex64, Box<Local>),
    Native(Arc<Node>),
}

struct ExpSlot {
    g: Vec<Complex64>,
    /// Taylor coefficients of `g` at the anchor.
    shifted: Vec<Complex64>,
    base: Complex64,
}

/// Evaluation near a movable anchor `z₀`. Exponentials of polynomials are
/// computed as `e^{g(z₀)}·e^{g(z₀+δ)−g(z₀)}`, so a sequence of nearby points
/// costs one full exponential per anchor.
pub(crate) struct LocalEvaluator {
    prog: Local,
    slots: Vec<ExpSlot>,
    anchor: Complex64,
}

fn compile_local(node: &Arc<Node>, slots: &mut Vec<ExpSlot>) -> Local {
    match node.as_ref() {
        Node::Poly(c) => Local::Poly(c.clone()),
        Node::Exp(g) => match g.as_ref() {
            Node::Poly(c) => {
                slots.push(ExpSlot { g: c.clone(), shifted: c.clone(), base: C1 });
                Local::ExpPoly(slots.len() - 1)
            }
            _ => Local::Native(node.clone()),
        },
        Node::Sum(ch) => Local::Sum(ch.iter().map(|c| compile_local(c, slots)).collect()),
        Node::Product(ch) => Local::Product(ch.iter().map(|c| compile_local(c, slots)).collect()),
        Node::Scaled(c, inner) => Local::Scaled(*c, Box::new(compile_local(inner, slots))),
        Node::Series(_) => Local::Native(node.clone()),
    }
}

fn horner_real(w: Complex64, c: &[f64]) -> Complex64 {
    let mut acc = Complex64::new(c[c.len() - 1], 0.0);
    for &a in c[..c.len() - 1].iter().rev() {
        acc = acc * w;
        acc.re += a;
    }
    acc
}

#[inline]
fn exp_small(w: Complex64) -> Complex64 {
    const INV_FACTORIAL: [f64; 9] =
        [1.0, 1.0, 1.0 / 2.0, 1.0 / 6.0, 1.0 / 24.0, 1.0 / 120.0, 1.0 / 720.0, 1.0 / 5040.0, 1.0 / 40320.0];
    let m = w.norm_sqr();
    if m > 1e-4 {
        w.exp()
    } else if m <= 1e-8 {
        // remainders: |w| ≤ 1e-4 at degree 4 and |w| ≤ 1e-2 at degree 8 stay below 1e-22
        horner_real(w, &INV_FACTORIAL[..5])
    } else {
        horner_real(w, &INV_FACTORIAL)
    }
}

impl LocalEvaluator {
    pub(crate) fn new(f: &EntireFunction) -> Self {
        let mut slots = Vec::new();
        let prog = compile_local(&f.root, &mut slots);
        let mut ev = LocalEvaluator { prog, slots, anchor: C0 };
        ev.set_anchor(C0);
        ev
    }

    pub(crate) fn set_anchor(&mut self, z0: Complex64) {
        self.anchor = z0;
        for slot in &mut self.slots {
            // repeated synthetic division gives g(z₀ + δ) = Σ shifted[m]·δ^m
            slot.shifted.clone_from(&slot.g);
            let d = slot.shifted.len();
            for i in 0..d {
                for j in (i..d - 1).rev() {
                    let next = slot.shifted[j + 1];
                    slot.shifted[j] += z0 * next;
                }
            }
            slot.base = slot.shifted.first().copied().unwrap_or(C0).exp();
        }
    }

    /// The function is identically zero.
    pub(crate) fn is_zero(&self) -> bool {
        matches!(&self.prog, Local::Poly(c) if c.iter().all(|a| *a == C0))
    }

    /// Value at `anchor + dz`.
    #[inline]
    pub(crate) fn eval(&self, dz: Complex64) -> Complex64 {
        match &self.prog {
            Local::ExpPoly(i) => self.eval_exp(*i, dz),
            node => self.eval_local(node, dz),
        }
    }

    #[inline]
    fn eval_exp(&self, i: usize, dz: Complex64) -> Complex64 {
        let slot = &self.slots[i];
        if dz == C0 {
            return slot.base;
        }
        let inc = match slot.shifted.as_slice() {
            [_, b] => b * dz,
            sh => sh.iter().skip(1).rev().fold(C0, |acc, a| (acc + a) * dz),
        };
        slot.base * exp_small(inc)
    }

    fn eval_local(&self, node: &Local, dz: Complex64) -> Complex64 {
        match node {
            Local::Poly(c) => {
                let z = self.anchor + dz;
                c.iter().rev().fold(C0, |acc, a| acc * z + a)
            }
            Local::ExpPoly(i) => self.eval_exp(*i, dz),
            Local::Sum(ch) => ch.iter().map(|c| self.eval_local(c, dz)).sum(),
            Local::Product(ch) => ch.iter().map(|c| self.eval_local(c, dz)).product(),
            Local::Scaled(c, inner) => c * self.eval_local(inner, dz),
            Local::Native(n) => native_node(n, self.anchor + dz),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn local_evaluator_matches_direct() {
        let z = EntireFunction::z();
        let fs = [
            z.exp(),
            z.mul(&z).scale(Complex64::new(0.0, 1.0)).exp().add(&z),
            z.exp().exp(),
            z.scale(c(2.0)).exp().mul(&z.powi(3)),
        ];
        for f in &fs {
            let mut ev = LocalEvaluator::new(f);
            for z0 in [Complex64::new(0.0, 0.0), Complex64::new(3.0, -2.0), Complex64::new(-1.5, 4.0)] {
                ev.set_anchor(z0);
                for dz in [Complex64::new(0.0, 0.0), Complex64::new(1e-4, 2e-5), Complex64::new(-0.3, 0.2)] {
                    let (a, b) = (ev.eval(dz), f.eval_native(z0 + dz));
                    assert!((a - b).norm() <= 1e-13 * b.norm().max(1.0), "{f} at {z0}+{dz}: {a} vs {b}");
                }
            }
        }
    }

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn exp_of_large_argument() {
        let f = EntireFunction::z().exp();
        assert_relative_eq!(f.log_abs(c(1000.0)).unwrap(), 1000.0, epsilon = 1e-12);
    }

    #[test]
    fn cubic_minus_one() {
        let f = EntireFunction::real_polynomial(&[-1.0, 0.0, 0.0, 1.0]);
        assert_relative_eq!(f.eval(c(2.0)).unwrap().to_complex().re, 7.0, epsilon = 1e-14);
    }

    #[test]
    fn double_exponential() {
        let f = EntireFunction::z().exp().exp();
        assert_relative_eq!(f.log_abs(c(3.0)).unwrap(), 3f64.exp(), epsilon = 1e-12);
    }

    #[test]
    fn symbolic_derivatives() {
        let two_z = EntireFunction::real_polynomial(&[0.0, 2.0]);
        let f = two_z.exp();
        let d = f.derivative(1).unwrap();
        let z = Complex64::new(0.3, -0.7);
        let expect = 2.0 * (2.0 * z).exp();
        assert!((d.eval_native(z) - expect).norm() < 1e-13);

        let cube = EntireFunction::real_polynomial(&[0.0, 0.0, 0.0, 1.0]);
        let d2 = cube.derivative(2).unwrap();
        assert_eq!(d2.as_constant(), None);
        assert!((d2.eval_native(z) - 6.0 * z).norm() < 1e-14);

        let ee = EntireFunction::z().exp().exp();
        let d = ee.derivative(1).unwrap();
        let expect = z.exp() * z.exp().exp();
        assert!((d.eval_native(z) - expect).norm() < 1e-12);
    }

    #[test]
    fn derivative_depth_enforced() {
        let f = EntireFunction::z().exp();
        assert!(f.derivative(8).is_ok());
        assert!(matches!(f.derivative(9), Err(Error::DerivativeDepth { requested: 9, max: 8 })));
    }

    #[test]
    fn exp_taylor_coefficients() {
        let f = EntireFunction::z().exp();
        let t = f.taylor(30).unwrap();
        let mut fact = 1.0;
        for (n, a) in t.iter().enumerate() {
            if n > 0 {
                fact *= n as f64;
            }
            assert_relative_eq!(a.to_complex().re, 1.0 / fact, max_relative = 1e-13);
        }
        let g = EntireFunction::real_polynomial(&[0.0, 0.0, 1.0]).exp();
        let t = g.taylor(10).unwrap();
        assert!(t[1].is_zero() && t[3].is_zero());
        assert_relative_eq!(t[4].to_complex().re, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn product_taylor_matches_exp_sum() {
        let a = EntireFunction::z().exp();
        let b = EntireFunction::real_polynomial(&[0.0, 0.0, 1.0]).exp();
        let prod = a.mul(&b);
        let direct = EntireFunction::real_polynomial(&[0.0, 1.0, 1.0]).exp();
        let tp = prod.taylor(25).unwrap();
        let td = direct.taylor(25).unwrap();
        for (x, y) in tp.iter().zip(&td) {
            assert!((x.to_complex() - y.to_complex()).norm() <= 1e-13 * y.to_complex().norm().max(1e-300));
        }
    }

    #[test]
    fn structural_predicates() {
        let cosh2 = EntireFunction::z().exp().add(&EntireFunction::real_polynomial(&[0.0, -1.0]).exp());
        assert!(!cosh2.has_nonnegative_coefficients());
        assert!(EntireFunction::z().exp().exp().has_nonnegative_coefficients());
        assert!(EntireFunction::real_polynomial(&[1.0, 2.0]).is_polynomial());
        assert!(!EntireFunction::z().exp().is_polynomial());
        assert_eq!(EntireFunction::real(2.0).exp().polynomial_degree_bound(), Some(0));
    }

    #[test]
    fn series_node_evaluates() {
        // exp(z) as a declared series
        let s = PowerSeries::new("expser", true, |n| {
            let mut v = Vec::with_capacity(n);
            let mut a = ScaledComplex::ONE;
            for k in 0..n {
                if k > 0 {
                    a = a.scale_real(1.0 / k as f64);
                }
                v.push(a);
            }
            v
        });
        let f = EntireFunction::series(s);
        assert_relative_eq!(f.log_abs(c(50.0)).unwrap(), 50.0, epsilon = 1e-12);
        let d = f.derivative(1).unwrap();
        assert_relative_eq!(d.log_abs(c(3.0)).unwrap(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn truncation_budget() {
        let mut s = PowerSeries::new("expser", true, |n| {
            let mut v = Vec::with_capacity(n);
            let mut a = ScaledComplex::ONE;
            for k in 0..n {
                if k > 0 {
                    a = a.scale_real(1.0 / k as f64);
                }
                v.push(a);
            }
            v
        });
        s.max_terms = 128;
        let f = EntireFunction::series(s);
        assert!(matches!(f.eval(c(1000.0)), Err(Error::TruncationExhausted { .. })));
    }
}
