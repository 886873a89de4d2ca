//! Compactly supported smooth test functions.
//!
//! A [`TestFunction`] is a finite sum of terms `coef * P(z) * s^{-d} A((z - shift)/s)`
//! where `A` is an [`Atom`] (a radial bump, a separable bump, a tabulated
//! convolution, or an opaque oracle) and `P` an optional polynomial weight.
//! Keeping the terms separate lets quadrature resolve every rescaled piece on
//! its own grid.

use crate::error::{Error, Result};
use crate::geom::{check_dim, tensor, MultiIndex, Point, Poly};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

/// Highest derivative order with a closed form for the radial bumps.
pub const BUMP_ORDER: usize = 8;

/// Grid density used by [`cr_norm`] (points per axis).
pub const CR_GRID_1D: usize = 513;
pub const CR_GRID_2D: usize = 129;

pub trait Atom: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    /// Quadrature nodes cover [-w, w]^d.
    fn half_width(&self) -> f64;
    /// The atom vanishes outside B(0, R).
    fn support_radius(&self) -> f64;
    fn eval(&self, u: &Point) -> f64;
    /// Closed-form derivative, if available.
    fn deriv(&self, k: &MultiIndex, u: &Point) -> Option<f64>;
    fn smoothness(&self) -> usize;
    fn label(&self) -> String;
}

/// `C * exp(-p / (1 - |z|^2))` on the unit ball, normalised to unit mass.
#[derive(Debug)]
pub struct RadialBump {
    dim: usize,
    power: f64,
    norm: f64,
    /// P_n(v) with h^{(n)}(q) = P_n(v) e^{-p v}, v = 1/(1-q).
    p_polys: Vec<Vec<f64>>,
}

/// H_{a,i}(z): d^a/dz^a h(z^2 + c) = sum_i H_{a,i}(z) h^{(i)}(z^2 + c).
fn h_table() -> &'static Vec<Vec<Vec<f64>>> {
    static T: OnceLock<Vec<Vec<Vec<f64>>>> = OnceLock::new();
    T.get_or_init(|| {
        let mut t: Vec<Vec<Vec<f64>>> = vec![vec![vec![1.0]]];
        for a in 0..BUMP_ORDER {
            let prev = &t[a];
            let mut next = vec![Vec::new(); a + 2];
            for (i, poly) in prev.iter().enumerate() {
                // H'_{a,i} contributes to H_{a+1,i}
                let d: Vec<f64> = poly.iter().enumerate().skip(1).map(|(n, c)| c * n as f64).collect();
                add_into(&mut next[i], &d);
                // 2z H_{a,i} contributes to H_{a+1,i+1}
                let mut s = vec![0.0];
                s.extend(poly.iter().map(|c| 2.0 * c));
                add_into(&mut next[i + 1], &s);
            }
            t.push(next);
        }
        t
    })
}

fn add_into(a: &mut Vec<f64>, b: &[f64]) {
    if a.len() < b.len() {
        a.resize(b.len(), 0.0);
    }
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

#[inline]
fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

impl RadialBump {
    fn new(dim: usize, power: f64) -> Self {
        let mut p_polys: Vec<Vec<f64>> = vec![vec![1.0]];
        for n in 0..BUMP_ORDER {
            let pn = &p_polys[n];
            // P_{n+1} = v^2 (P_n' - p P_n)
            let mut inner: Vec<f64> = pn.iter().map(|c| -power * c).collect();
            for (m, c) in pn.iter().enumerate().skip(1) {
                inner[m - 1] += c * m as f64;
            }
            let mut next = vec![0.0, 0.0];
            next.extend(inner);
            p_polys.push(next);
        }
        let norm = 1.0 / radial_mass(dim, power);
        RadialBump { dim, power, norm, p_polys }
    }

    #[inline]
    fn h_deriv(&self, n: usize, q: f64) -> f64 {
        if q >= 1.0 {
            return 0.0;
        }
        let v = 1.0 / (1.0 - q);
        let e = (-self.power * v).exp();
        if e == 0.0 {
            return 0.0;
        }
        horner(&self.p_polys[n], v) * e
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    /// Normalisation constant C_d.
    pub fn constant(&self) -> f64 {
        self.norm
    }
}

/// Mass of exp(-p/(1-|z|^2)) over the unit ball by a 2^17-node midpoint rule.
fn radial_mass(dim: usize, p: f64) -> f64 {
    let n = 1usize << 17;
    let h = 1.0 / n as f64;
    let mut s = 0.0;
    for j in 0..n {
        let t = (j as f64 + 0.5) * h;
        s += if dim == 1 {
            // 2 * int_0^1 exp(-p/(1-z^2)) dz
            2.0 * (-p / (1.0 - t * t)).exp()
        } else {
            // pi * int_0^1 exp(-p/(1-t)) dt, t = |z|^2
            std::f64::consts::PI * (-p / (1.0 - t)).exp()
        };
    }
    s * h
}

impl Atom for RadialBump {
    fn dim(&self) -> usize {
        self.dim
    }
    fn half_width(&self) -> f64 {
        1.0
    }
    fn support_radius(&self) -> f64 {
        1.0
    }
    #[inline]
    fn eval(&self, u: &Point) -> f64 {
        self.norm * self.h_deriv(0, u.norm_sq())
    }
    fn deriv(&self, k: &MultiIndex, u: &Point) -> Option<f64> {
        if k.order() > BUMP_ORDER {
            return None;
        }
        let q = u.norm_sq();
        if q >= 1.0 {
            return Some(0.0);
        }
        let t = h_table();
        let ha = &t[k.get(0)];
        let s = if self.dim == 1 {
            ha.iter().enumerate().map(|(i, p)| horner(p, u.get(0)) * self.h_deriv(i, q)).sum()
        } else {
            let hb = &t[k.get(1)];
            let mut s = 0.0;
            for (i, pa) in ha.iter().enumerate() {
                if pa.is_empty() {
                    continue;
                }
                let va = horner(pa, u.get(0));
                for (j, pb) in hb.iter().enumerate() {
                    if pb.is_empty() {
                        continue;
                    }
                    s += va * horner(pb, u.get(1)) * self.h_deriv(i + j, q);
                }
            }
            s
        };
        Some(self.norm * s)
    }
    fn smoothness(&self) -> usize {
        BUMP_ORDER
    }
    fn label(&self) -> String {
        if self.power == 1.0 {
            format!("bump{}d", self.dim)
        } else {
            format!("bump{}d^{}", self.dim, self.power)
        }
    }
}

fn radial(dim: usize, power: u8) -> Arc<RadialBump> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u8), Arc<RadialBump>>>> = OnceLock::new();
    let m = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut g = m.lock().unwrap();
    g.entry((dim, power)).or_insert_with(|| Arc::new(RadialBump::new(dim, power as f64))).clone()
}

/// Product b(z1) b(z2) of two normalised 1D bumps, supported in the square [-1,1]^2.
#[derive(Debug)]
pub struct SeparableBump {
    b: Arc<RadialBump>,
}

impl Atom for SeparableBump {
    fn dim(&self) -> usize {
        2
    }
    fn half_width(&self) -> f64 {
        1.0
    }
    fn support_radius(&self) -> f64 {
        std::f64::consts::SQRT_2
    }
    fn eval(&self, u: &Point) -> f64 {
        self.b.eval(&Point::d1(u.get(0))) * self.b.eval(&Point::d1(u.get(1)))
    }
    fn deriv(&self, k: &MultiIndex, u: &Point) -> Option<f64> {
        let a = self.b.deriv(&MultiIndex::new(&[k.get(0)]), &Point::d1(u.get(0)))?;
        let b = self.b.deriv(&MultiIndex::new(&[k.get(1)]), &Point::d1(u.get(1)))?;
        Some(a * b)
    }
    fn smoothness(&self) -> usize {
        BUMP_ORDER
    }
    fn label(&self) -> String {
        "sepbump2d".into()
    }
}

/// An opaque pointwise oracle; derivatives by finite differences.
pub struct OracleAtom {
    dim: usize,
    radius: f64,
    smoothness: usize,
    f: Arc<dyn Fn(&Point) -> f64 + Send + Sync>,
    label: String,
}

impl fmt::Debug for OracleAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "OracleAtom({})", self.label)
    }
}

impl Atom for OracleAtom {
    fn dim(&self) -> usize {
        self.dim
    }
    fn half_width(&self) -> f64 {
        self.radius
    }
    fn support_radius(&self) -> f64 {
        self.radius
    }
    fn eval(&self, u: &Point) -> f64 {
        if u.norm() > self.radius {
            0.0
        } else {
            (self.f)(u)
        }
    }
    fn deriv(&self, _k: &MultiIndex, _u: &Point) -> Option<f64> {
        None
    }
    fn smoothness(&self) -> usize {
        self.smoothness
    }
    fn label(&self) -> String {
        self.label.clone()
    }
}

/// Convolution f * g of two test functions, evaluated by quadrature over the
/// nodes of `g`; in 1D pointwise values come from a cubic Hermite table.
pub struct ConvAtom {
    f: TestFunction,
    g: TestFunction,
    inner_ppa: usize,
    radius: f64,
    table: OnceLock<Vec<(f64, f64)>>,
}

const CONV_TABLE: usize = 4096;

impl fmt::Debug for ConvAtom {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(fm, "ConvAtom({} * {})", self.f.label(), self.g.label())
    }
}

impl ConvAtom {
    pub fn new(f: TestFunction, g: TestFunction, inner_ppa: usize) -> Self {
        let radius = f.support_radius() + g.support_radius();
        ConvAtom { f, g, inner_ppa, radius, table: OnceLock::new() }
    }

    fn direct(&self, k: &MultiIndex, u: &Point) -> f64 {
        if u.norm() >= self.radius {
            return 0.0;
        }
        let rule = self.g.rule(self.inner_ppa, &MultiIndex::zero(self.g.dim()));
        let mut s = 0.0;
        for (v, w) in rule.nodes.iter().zip(&rule.weights) {
            let z = *u - *v;
            if z.norm_sq() < self.f.support_radius() * self.f.support_radius() {
                s += w * if k.order() == 0 { self.f.eval(&z) } else { self.f.derivative(k, &z).unwrap_or(0.0) };
            }
        }
        s
    }

    fn table(&self) -> &Vec<(f64, f64)> {
        self.table.get_or_init(|| {
            let h = 2.0 * self.radius / CONV_TABLE as f64;
            let k0 = MultiIndex::zero(1);
            let k1 = MultiIndex::new(&[1]);
            crate::par::map_range(CONV_TABLE + 1, |j| {
                let u = Point::d1(-self.radius + j as f64 * h);
                (self.direct(&k0, &u), self.direct(&k1, &u))
            })
        })
    }
}

impl Atom for ConvAtom {
    fn dim(&self) -> usize {
        self.f.dim()
    }
    fn half_width(&self) -> f64 {
        self.radius
    }
    fn support_radius(&self) -> f64 {
        self.radius
    }
    fn eval(&self, u: &Point) -> f64 {
        if u.norm() >= self.radius {
            return 0.0;
        }
        if self.dim() == 2 {
            return self.direct(&MultiIndex::zero(2), u);
        }
        let t = self.table();
        let h = 2.0 * self.radius / CONV_TABLE as f64;
        let s = (u.get(0) + self.radius) / h;
        let j = (s.floor() as usize).min(CONV_TABLE - 1);
        let x = s - j as f64;
        let (y0, d0) = t[j];
        let (y1, d1) = t[j + 1];
        let (x2, x3) = (x * x, x * x * x);
        (2.0 * x3 - 3.0 * x2 + 1.0) * y0
            + (x3 - 2.0 * x2 + x) * h * d0
            + (-2.0 * x3 + 3.0 * x2) * y1
            + (x3 - x2) * h * d1
    }
    fn deriv(&self, k: &MultiIndex, u: &Point) -> Option<f64> {
        if k.order() > self.f.smoothness() {
            return None;
        }
        Some(self.direct(k, u))
    }
    fn smoothness(&self) -> usize {
        self.f.smoothness()
    }
    fn label(&self) -> String {
        format!("({})*({})", self.f.label(), self.g.label())
    }
}

#[derive(Clone, Debug)]
pub struct Term {
    pub coef: f64,
    pub scale: f64,
    pub shift: Point,
    pub weight: Option<Poly>,
    pub atom: Arc<dyn Atom>,
}

impl Term {
    #[inline]
    pub fn eval(&self, z: &Point) -> f64 {
        let d = z.dim() as i32;
        let u = (*z - self.shift) * (1.0 / self.scale);
        if u.norm() >= self.atom.support_radius() {
            return 0.0;
        }
        let mut v = self.coef * self.scale.powi(-d) * self.atom.eval(&u);
        if let Some(p) = &self.weight {
            v *= p.eval(z);
        }
        v
    }

    fn deriv(&self, k: &MultiIndex, z: &Point) -> Option<f64> {
        let d = z.dim() as i32;
        let u = (*z - self.shift) * (1.0 / self.scale);
        if u.norm() >= self.atom.support_radius() {
            return Some(0.0);
        }
        match &self.weight {
            None => Some(self.coef * self.scale.powi(-d - k.order() as i32) * self.atom.deriv(k, &u)?),
            Some(p) => {
                let mut s = 0.0;
                for j in k.below() {
                    let pj = p.deriv(&j);
                    if pj.is_zero() {
                        continue;
                    }
                    let m = k.sub(&j);
                    s += k.binomial(&j)
                        * pj.eval(z)
                        * self.scale.powi(-d - m.order() as i32)
                        * self.atom.deriv(&m, &u)?;
                }
                Some(self.coef * s)
            }
        }
    }

    pub fn reach(&self) -> f64 {
        self.shift.norm() + self.scale * self.atom.support_radius()
    }
}

/// Quadrature rule for a unit-placed test function: for the k-th derivative,
/// `int u(z) d^k phi(z) dz ~ sum_m u(nodes[m]) * weights[m]`.
#[derive(Clone, Debug, Default)]
pub struct Rule {
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

struct Inner {
    dim: usize,
    terms: Vec<Term>,
    radius: f64,
    smoothness: usize,
    label: String,
    rules: Mutex<HashMap<(usize, MultiIndex), Arc<Rule>>>,
    moments: Mutex<HashMap<(usize, MultiIndex), f64>>,
}

/// Smooth compactly supported function on R^d, immutable and cheap to clone.
#[derive(Clone)]
pub struct TestFunction(Arc<Inner>);

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TestFunction({}, {} terms, R={})", self.0.label, self.0.terms.len(), self.0.radius)
    }
}

impl TestFunction {
    pub fn from_terms(dim: usize, terms: Vec<Term>, label: impl Into<String>) -> Result<Self> {
        check_dim(dim)?;
        if terms.is_empty() {
            return Err(Error::InvalidInput("test function without terms".into()));
        }
        let radius = terms.iter().map(|t| t.reach()).fold(0.0, f64::max);
        let smoothness = terms.iter().map(|t| t.atom.smoothness()).min().unwrap_or(0);
        Ok(TestFunction(Arc::new(Inner {
            dim,
            terms,
            radius,
            smoothness,
            label: label.into(),
            rules: Mutex::new(HashMap::new()),
            moments: Mutex::new(HashMap::new()),
        })))
    }

    fn single(atom: Arc<dyn Atom>, label: impl Into<String>) -> Self {
        let dim = atom.dim();
        let t = Term { coef: 1.0, scale: 1.0, shift: Point::zero(dim), weight: None, atom };
        Self::from_terms(dim, vec![t], label).expect("valid atom")
    }

    /// Wrap an arbitrary pointwise oracle vanishing outside B(0, radius).
    pub fn from_oracle(
        dim: usize,
        radius: f64,
        smoothness: usize,
        f: impl Fn(&Point) -> f64 + Send + Sync + 'static,
        label: impl Into<String>,
    ) -> Result<Self> {
        check_dim(dim)?;
        if !(radius > 0.0) {
            return Err(Error::InvalidScale(radius));
        }
        let label = label.into();
        let atom = OracleAtom { dim, radius, smoothness, f: Arc::new(f), label: label.clone() };
        Ok(Self::single(Arc::new(atom), label))
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }
    pub fn support_radius(&self) -> f64 {
        self.0.radius
    }
    pub fn smoothness(&self) -> usize {
        self.0.smoothness
    }
    pub fn label(&self) -> &str {
        &self.0.label
    }
    pub fn terms(&self) -> &[Term] {
        &self.0.terms
    }

    #[inline]
    pub fn eval(&self, z: &Point) -> f64 {
        self.0.terms.iter().map(|t| t.eval(z)).sum()
    }

    /// d^k phi(z): closed form when every atom has one, else finite differences.
    pub fn derivative(&self, k: &MultiIndex, z: &Point) -> Result<f64> {
        if k.order() > self.smoothness() {
            return Err(Error::OrderExceeded { requested: k.order(), available: self.smoothness() });
        }
        if k.order() == 0 {
            return Ok(self.eval(z));
        }
        let mut s = 0.0;
        for t in &self.0.terms {
            match t.deriv(k, z) {
                Some(v) => s += v,
                None => return Ok(self.derivative_fd(k, z)),
            }
        }
        Ok(s)
    }

    /// Iterated central differences with one Richardson level, h0 = 1e-3 R.
    pub fn derivative_fd(&self, k: &MultiIndex, z: &Point) -> f64 {
        let h0 = 1e-3 * self.support_radius();
        let d1 = central_diff(self, k, z, h0);
        let d2 = central_diff(self, k, z, 0.5 * h0);
        (4.0 * d2 - d1) / 3.0
    }

    /// Sum of |coef| * ||atom||_{L1}-weighted terms is not tracked; this is the
    /// midpoint L1 norm at the given resolution.
    pub fn l1_norm(&self, ppa: usize) -> f64 {
        let (nodes, cell) = self.box_grid(ppa);
        nodes.iter().map(|z| self.eval(z).abs()).sum::<f64>() * cell
    }

    /// Integral of phi by the term-wise rule.
    pub fn integral(&self, ppa: usize) -> f64 {
        self.rule(ppa, &MultiIndex::zero(self.dim())).weights.iter().sum()
    }

    /// int z^k phi(z) dz by the term-wise rule, cached.
    pub fn moment(&self, ppa: usize, k: &MultiIndex) -> f64 {
        if let Some(m) = self.0.moments.lock().unwrap().get(&(ppa, *k)) {
            return *m;
        }
        let rule = self.rule(ppa, &MultiIndex::zero(self.dim()));
        let m: f64 = rule.nodes.iter().zip(&rule.weights).map(|(z, w)| z.pow(k) * w).sum();
        self.0.moments.lock().unwrap().insert((ppa, *k), m);
        m
    }

    /// Midpoint grid over [-R, R]^d with `ppa` points per axis.
    pub fn box_grid(&self, ppa: usize) -> (Vec<Point>, f64) {
        let r = self.support_radius();
        let h = 2.0 * r / ppa as f64;
        let axis: Vec<f64> = (0..ppa).map(|j| -r + (j as f64 + 0.5) * h).collect();
        (tensor(self.dim(), &axis, &axis), h.powi(self.dim() as i32))
    }

    /// Term-wise midpoint rule for `int u d^k phi`, cached per (ppa, k).
    pub fn rule(&self, ppa: usize, k: &MultiIndex) -> Arc<Rule> {
        let key = (ppa, *k);
        if let Some(r) = self.0.rules.lock().unwrap().get(&key) {
            return r.clone();
        }
        let rule = Arc::new(self.build_rule(ppa, k));
        self.0.rules.lock().unwrap().insert(key, rule.clone());
        rule
    }

    fn build_rule(&self, ppa: usize, k: &MultiIndex) -> Rule {
        let d = self.dim();
        let mut rule = Rule::default();
        for t in &self.0.terms {
            let w = t.atom.half_width();
            let h = 2.0 * w / ppa as f64;
            let axis: Vec<f64> = (0..ppa).map(|j| -w + (j as f64 + 0.5) * h).collect();
            let cell = (h * t.scale).powi(d as i32);
            let rad = t.atom.support_radius();
            let us: Vec<Point> = tensor(d, &axis, &axis).into_iter().filter(|u| u.norm() < rad).collect();
            let vals = crate::par::map(&us, |u| {
                let z = t.shift.axpy(t.scale, u);
                let single = Term { coef: t.coef, scale: t.scale, shift: t.shift, weight: t.weight.clone(), atom: t.atom.clone() };
                let v = if k.order() == 0 {
                    single.eval(&z)
                } else {
                    match single.deriv(k, &z) {
                        Some(v) => v,
                        None => {
                            let tf = TestFunction::from_terms(d, vec![single.clone()], "term").unwrap();
                            tf.derivative_fd(k, &z)
                        }
                    }
                };
                (z, v * cell)
            });
            // node sets depend only on geometry, so rules for different k align
            for (z, v) in vals {
                rule.nodes.push(z);
                rule.weights.push(v);
            }
        }
        rule
    }

    /// c * phi.
    pub fn scaled_by(&self, c: f64) -> TestFunction {
        let terms = self.0.terms.iter().map(|t| Term { coef: t.coef * c, ..t.clone() }).collect();
        TestFunction::from_terms(self.dim(), terms, self.0.label.clone()).unwrap()
    }

    /// phi_x^lambda as a plain test function (terms rescaled, weights pulled back).
    pub fn rescaled(&self, x: &Point, lambda: f64) -> Result<TestFunction> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidScale(lambda));
        }
        let terms = self
            .0
            .terms
            .iter()
            .map(|t| Term {
                coef: t.coef,
                scale: t.scale * lambda,
                shift: x.axpy(lambda, &t.shift),
                weight: t.weight.as_ref().map(|p| p.affine_pullback(&(-*x * (1.0 / lambda)), 1.0 / lambda)),
                atom: t.atom.clone(),
            })
            .collect();
        TestFunction::from_terms(self.dim(), terms, format!("{}[{:?},{}]", self.0.label, x.coords(), lambda))
    }

    /// P * phi for a polynomial P.
    pub fn times_poly(&self, p: &Poly) -> TestFunction {
        let terms = self
            .0
            .terms
            .iter()
            .map(|t| Term {
                weight: Some(match &t.weight {
                    Some(w) => w.mul(p),
                    None => p.clone(),
                }),
                ..t.clone()
            })
            .collect();
        TestFunction::from_terms(self.dim(), terms, format!("poly*{}", self.0.label)).unwrap()
    }

    /// Linear combination sum a_i phi_i.
    pub fn combine(parts: &[(f64, &TestFunction)], label: impl Into<String>) -> Result<TestFunction> {
        let dim = parts.first().ok_or_else(|| Error::InvalidInput("empty combination".into()))?.1.dim();
        let mut terms = Vec::new();
        for (a, f) in parts {
            if f.dim() != dim {
                return Err(Error::InvalidInput("dimension mismatch in combination".into()));
            }
            terms.extend(f.0.terms.iter().map(|t| Term { coef: t.coef * a, ..t.clone() }));
        }
        TestFunction::from_terms(dim, terms, label)
    }

    /// The convolution self * g as a single tabulated atom.
    pub fn convolve(&self, g: &TestFunction, inner_ppa: usize) -> TestFunction {
        let label = format!("({})*({})", self.label(), g.label());
        TestFunction::single(Arc::new(ConvAtom::new(self.clone(), g.clone(), inner_ppa)), label)
    }
}

fn central_diff(phi: &TestFunction, k: &MultiIndex, z: &Point, h: f64) -> f64 {
    // iterated central difference: sum over stencil of both axes
    let d = phi.dim();
    let stencil = |n: usize| -> Vec<(f64, f64)> {
        (0..=n)
            .map(|j| {
                let c = crate::geom::binomial(n, j) * if j % 2 == 0 { 1.0 } else { -1.0 };
                (c, (n as f64 / 2.0 - j as f64) * h)
            })
            .collect()
    };
    let s0 = stencil(k.get(0));
    let s1 = if d == 2 { stencil(k.get(1)) } else { vec![(1.0, 0.0)] };
    let mut s = 0.0;
    for (c0, o0) in &s0 {
        for (c1, o1) in &s1 {
            let p = if d == 1 { Point::d1(z.get(0) + o0) } else { Point::d2(z.get(0) + o0, z.get(1) + o1) };
            s += c0 * c1 * phi.eval(&p);
        }
    }
    s / h.powi(k.order() as i32)
}

/// phi_x^lambda(z) = lambda^{-d} phi((z - x)/lambda).
#[derive(Clone, Debug)]
pub struct ScaledTestFunction {
    pub base: TestFunction,
    pub center: Point,
    pub scale: f64,
}

impl ScaledTestFunction {
    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn support_radius(&self) -> f64 {
        self.scale * self.base.support_radius()
    }

    #[inline]
    pub fn to_local(&self, z: &Point) -> Point {
        (*z - self.center) * (1.0 / self.scale)
    }

    #[inline]
    pub fn eval(&self, z: &Point) -> f64 {
        self.scale.powi(-(self.dim() as i32)) * self.base.eval(&self.to_local(z))
    }

    pub fn derivative(&self, k: &MultiIndex, z: &Point) -> Result<f64> {
        let p = -(self.dim() as i32) - k.order() as i32;
        Ok(self.scale.powi(p) * self.base.derivative(k, &self.to_local(z))?)
    }

    /// (phi_x^lambda)_{x'}^{lambda'} = phi_{x' + lambda' x}^{lambda lambda'}.
    pub fn rescale(&self, x: &Point, lambda: f64) -> Result<ScaledTestFunction> {
        scale(&self.base, &x.axpy(lambda, &self.center), lambda * self.scale)
    }

    /// Materialise as a plain test function.
    pub fn to_test_function(&self) -> TestFunction {
        self.base.rescaled(&self.center, self.scale).expect("positive scale")
    }
}

/// The canonical bump C_d exp(-1/(1-|z|^2)) with unit integral.
pub fn make_standard_bump(dim: usize) -> Result<TestFunction> {
    check_dim(dim)?;
    Ok(TestFunction::single(radial(dim, 1), format!("bump{dim}d")))
}

/// C exp(-2/(1-|z|^2)) = normalised square of the canonical bump profile.
pub fn make_squared_bump(dim: usize) -> Result<TestFunction> {
    check_dim(dim)?;
    Ok(TestFunction::single(radial(dim, 2), format!("bump{dim}d^2")))
}

/// b(z1) b(z2) with the normalised 1D bump.
pub fn make_separable_bump() -> TestFunction {
    TestFunction::single(Arc::new(SeparableBump { b: radial(1, 1) }), "sepbump2d")
}

pub fn scale(phi: &TestFunction, x: &Point, lambda: f64) -> Result<ScaledTestFunction> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidScale(lambda));
    }
    if x.dim() != phi.dim() {
        return Err(Error::InvalidInput("center dimension differs from test function".into()));
    }
    Ok(ScaledTestFunction { base: phi.clone(), center: *x, scale: lambda })
}

pub fn derivative(phi: &TestFunction, k: &MultiIndex, z: &Point) -> Result<f64> {
    phi.derivative(k, z)
}

/// max_{|k| <= r} sup |d^k phi| sampled on a grid over the support box
/// (513 points per axis in 1D, 129 in 2D); a lower bound of the true norm.
pub fn cr_norm(phi: &ScaledTestFunction, r: usize) -> Result<f64> {
    if r > phi.base.smoothness() {
        return Err(Error::OrderExceeded { requested: r, available: phi.base.smoothness() });
    }
    let d = phi.dim();
    let n = if d == 1 { CR_GRID_1D } else { CR_GRID_2D };
    let rad = phi.base.support_radius();
    let axis: Vec<f64> = (0..n).map(|j| -rad + 2.0 * rad * j as f64 / (n - 1) as f64).collect();
    let us = tensor(d, &axis, &axis);
    let mut best = 0.0f64;
    for k in MultiIndex::up_to(d, r) {
        let vals = crate::par::map(&us, |u| phi.base.derivative(&k, u).map(f64::abs));
        let pre = phi.scale.powi(-(d as i32) - k.order() as i32);
        for v in vals {
            best = best.max(pre * v?);
        }
    }
    Ok(best)
}

pub fn cr_norm_unscaled(phi: &TestFunction, r: usize) -> Result<f64> {
    cr_norm(&scale(phi, &Point::zero(phi.dim()), 1.0)?, r)
}

/// Seeded members of B_r: (random polynomial of degree <= 4) x bump, normalised
/// by the computed C^r norm and multiplied by a factor in [0.5, 1].
pub fn sample_br(r: usize, dim: usize, count: usize, seed: u64) -> Result<Vec<TestFunction>> {
    check_dim(dim)?;
    if count == 0 {
        return Err(Error::InvalidInput("count must be positive".into()));
    }
    let bump = make_standard_bump(dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let terms: Vec<(MultiIndex, f64)> =
            MultiIndex::up_to(dim, 4).into_iter().map(|k| (k, rng.gen_range(-1.0..=1.0))).collect();
        let factor: f64 = rng.gen_range(0.5..=1.0);
        let psi = bump.times_poly(&Poly::new(dim, terms));
        let n = cr_norm_unscaled(&psi, r)?;
        if n < 1e-12 {
            continue;
        }
        let id = out.len();
        let scaled = psi.scaled_by(factor / n);
        let terms = scaled.terms().to_vec();
        out.push(TestFunction::from_terms(dim, terms, format!("psi{id}"))?);
    }
    Ok(out)
}
