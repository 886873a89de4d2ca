//! Concrete distributions and their pairings with scaled test functions.

use crate::bump::{scale, ScaledTestFunction, Term, TestFunction};
use crate::error::{Error, Result};
use crate::geom::{check_dim, tensor, MultiIndex, Point, Poly};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

pub type Field = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

/// Refinement cap for integrals against a test function (points per axis).
pub const MAX_PPA_1D: usize = 1 << 17;
pub const MAX_PPA_2D: usize = 512;

/// Relative roundoff floor added to refinement-based budgets.
pub const ROUNDOFF: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub points_per_axis: usize,
}

impl QuadratureSpec {
    pub fn new(points_per_axis: usize) -> Result<Self> {
        if points_per_axis < 16 {
            return Err(Error::InvalidInput(format!("points_per_axis must be at least 16, got {points_per_axis}")));
        }
        Ok(QuadratureSpec { points_per_axis })
    }

    pub fn default_for(dim: usize) -> Self {
        QuadratureSpec { points_per_axis: if dim == 1 { 128 } else { 64 } }
    }

    pub fn refined(&self) -> Self {
        QuadratureSpec { points_per_axis: 2 * self.points_per_axis }
    }

    pub fn ppa(&self) -> usize {
        self.points_per_axis
    }
}

/// A value together with its quadrature budget.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub budget: f64,
}

impl Estimate {
    /// Evaluate at `q` and at `q.refined()`; the value is the refined one and
    /// the budget is the change plus a roundoff floor.
    pub fn by_refinement(q: &QuadratureSpec, mut f: impl FnMut(&QuadratureSpec) -> Result<f64>) -> Result<Estimate> {
        let a = f(q)?;
        let b = f(&q.refined())?;
        Ok(Estimate { value: b, budget: (a - b).abs() + ROUNDOFF * (1.0 + b.abs()) })
    }
}

/// Samples on a regular grid, interpolated multilinearly, zero outside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    pub dim: usize,
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl GridDensity {
    pub fn validate(&self) -> Result<()> {
        check_dim(self.dim)?;
        let d = self.dim;
        if self.origin.len() != d || self.spacing.len() != d || self.shape.len() != d {
            return Err(Error::InvalidInput("grid origin/spacing/shape must have length dim".into()));
        }
        if self.spacing.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::InvalidInput("grid spacing must be positive".into()));
        }
        if self.shape.iter().any(|n| *n < 2) {
            return Err(Error::InvalidInput("grid needs at least two samples per axis".into()));
        }
        let n: usize = self.shape.iter().product();
        if n != self.values.len() {
            return Err(Error::InvalidInput(format!(
                "grid shape {:?} needs {} values, found {}",
                self.shape,
                n,
                self.values.len()
            )));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let g: GridDensity = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        g.validate()?;
        Ok(g)
    }

    pub fn eval(&self, p: &Point) -> f64 {
        let mut idx = [0usize; 2];
        let mut frac = [0.0f64; 2];
        for i in 0..self.dim {
            let s = (p.get(i) - self.origin[i]) / self.spacing[i];
            if s < 0.0 || s > (self.shape[i] - 1) as f64 {
                return 0.0;
            }
            let j = (s.floor() as usize).min(self.shape[i] - 2);
            idx[i] = j;
            frac[i] = s - j as f64;
        }
        if self.dim == 1 {
            let v = &self.values;
            v[idx[0]] * (1.0 - frac[0]) + v[idx[0] + 1] * frac[0]
        } else {
            let n1 = self.shape[1];
            let at = |a: usize, b: usize| self.values[a * n1 + b];
            let (i, j, s, t) = (idx[0], idx[1], frac[0], frac[1]);
            at(i, j) * (1.0 - s) * (1.0 - t) + at(i + 1, j) * s * (1.0 - t) + at(i, j + 1) * (1.0 - s) * t + at(i + 1, j + 1) * s * t
        }
    }
}

#[derive(Clone)]
pub enum Repr {
    /// Locally integrable density; an integrable singularity may be declared.
    Density { u: Field, singular: Option<Point> },
    /// The distributional derivative d^k u.
    WeakDerivative { u: Field, k: MultiIndex },
    Grid(Arc<GridDensity>),
    PointMass { x0: Point, w: f64 },
    Combination(Vec<(f64, Distribution)>),
}

#[derive(Clone)]
pub struct Distribution {
    pub dim: usize,
    pub repr: Repr,
    pub order_hint: usize,
    pub label: String,
    /// shortest length scale of the density, see `with_feature`
    pub feature: Option<f64>,
}

impl fmt::Debug for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Distribution({})", self.label)
    }
}

impl Distribution {
    pub fn density(dim: usize, u: impl Fn(&Point) -> f64 + Send + Sync + 'static, label: impl Into<String>) -> Self {
        Distribution { dim, repr: Repr::Density { u: Arc::new(u), singular: None }, order_hint: 0, label: label.into(), feature: None }
    }

    pub fn singular_density(
        dim: usize,
        u: impl Fn(&Point) -> f64 + Send + Sync + 'static,
        at: Point,
        label: impl Into<String>,
    ) -> Self {
        Distribution { dim, repr: Repr::Density { u: Arc::new(u), singular: Some(at) }, order_hint: 0, label: label.into(), feature: None }
    }

    pub fn weak_derivative(
        dim: usize,
        u: impl Fn(&Point) -> f64 + Send + Sync + 'static,
        k: MultiIndex,
        label: impl Into<String>,
    ) -> Self {
        Distribution { dim, repr: Repr::WeakDerivative { u: Arc::new(u), k }, order_hint: k.order(), label: label.into(), feature: None }
    }

    pub fn point_mass(x0: Point, w: f64) -> Self {
        Distribution { dim: x0.dim(), repr: Repr::PointMass { x0, w }, order_hint: 0, label: format!("delta{:?}", x0.coords()), feature: None }
    }

    pub fn grid(g: GridDensity) -> Result<Self> {
        g.validate()?;
        Ok(Distribution { dim: g.dim, repr: Repr::Grid(Arc::new(g)), order_hint: 0, label: "grid".into(), feature: None })
    }

    /// sum a_i T_i
    pub fn combination(parts: Vec<(f64, Distribution)>) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::InvalidInput("empty combination".into()))?;
        let dim = first.1.dim;
        if parts.iter().any(|(_, t)| t.dim != dim) {
            return Err(Error::InvalidInput("dimension mismatch in combination".into()));
        }
        let order_hint = parts.iter().map(|(_, t)| t.order_hint).max().unwrap_or(0);
        let label = parts.iter().map(|(a, t)| format!("{a}*{}", t.label)).collect::<Vec<_>>().join("+");
        Ok(Distribution { dim, repr: Repr::Combination(parts), order_hint, label, feature: None })
    }

    /// Declare the shortest length scale of the underlying density; pairings
    /// then refine their nodes to follow it.
    pub fn with_feature(mut self, len: f64) -> Self {
        self.feature = Some(len);
        self
    }

    pub fn zero(dim: usize) -> Self {
        Distribution::density(dim, |_| 0.0, "zero")
    }

    pub fn pair(&self, phi: &ScaledTestFunction, q: &QuadratureSpec) -> Result<f64> {
        pair(self, phi, q)
    }
}

pub fn pair(t: &Distribution, phi: &ScaledTestFunction, q: &QuadratureSpec) -> Result<f64> {
    pair_weighted(t, phi, None, q)
}

/// T(P((. - x)/lambda) phi_x^lambda) for a polynomial P in the local
/// coordinate of phi_x^lambda (P = 1 when `weight` is None).
pub fn pair_weighted(t: &Distribution, phi: &ScaledTestFunction, weight: Option<&Poly>, q: &QuadratureSpec) -> Result<f64> {
    if t.dim != phi.dim() {
        return Err(Error::InvalidInput(format!("distribution is {}-dimensional, test function {}", t.dim, phi.dim())));
    }
    let d = phi.dim();
    let (x, lam) = (phi.center, phi.scale);
    let q = &feature_spec(t, phi, q);
    match &t.repr {
        Repr::PointMass { x0, w } => {
            let z = phi.to_local(x0);
            let p = weight.map_or(1.0, |p| p.eval(&z));
            Ok(w * p * phi.eval(x0))
        }
        Repr::Combination(parts) => {
            let mut s = 0.0;
            for (a, ti) in parts {
                s += a * pair_weighted(ti, phi, weight, q)?;
            }
            Ok(s)
        }
        Repr::Density { u, singular } => {
            if let Some(s) = singular {
                if s.dist(&x) < phi.support_radius() {
                    return Ok(graded_pair(&**u, &phi.base, &x, lam, &phi.to_local(s), weight, q));
                }
            }
            Ok(rule_pair(&**u, phi, weight, &MultiIndex::zero(d), q))
        }
        Repr::Grid(g) => {
            let g = g.clone();
            Ok(rule_pair(&move |p: &Point| g.eval(p), phi, weight, &MultiIndex::zero(d), q))
        }
        Repr::WeakDerivative { u, k } => {
            if k.order() > phi.base.smoothness() {
                return Err(Error::OrderExceeded { requested: k.order(), available: phi.base.smoothness() });
            }
            let sign = if k.order() % 2 == 0 { 1.0 } else { -1.0 };
            let pre = sign * lam.powi(-(k.order() as i32));
            match weight {
                None => Ok(pre * rule_pair(&**u, phi, None, k, q)),
                Some(p) => {
                    // Leibniz: d^k (P phi) = sum_j C(k,j) d^{k-j}P d^j phi
                    let mut s = 0.0;
                    for j in k.below() {
                        let dp = p.deriv(&k.sub(&j));
                        if dp.is_zero() {
                            continue;
                        }
                        s += k.binomial(&j) * rule_pair(&**u, phi, Some(&dp), &j, q);
                    }
                    Ok(pre * s)
                }
            }
        }
    }
}

/// sum_m u(x + lambda z_m) P(z_m) w_m with the k-derivative rule of the base.
/// Node spacing per feature length at 32 points per axis; finer `q` scales it down.
const NODES_PER_FEATURE: f64 = 8.0;

/// `q`, refined so the nodes resolve the declared feature length of `t`. The
/// result stays proportional to `q`, so refinement budgets keep their meaning.
fn feature_spec(t: &Distribution, phi: &ScaledTestFunction, q: &QuadratureSpec) -> QuadratureSpec {
    match t.feature {
        Some(len) if !matches!(t.repr, Repr::PointMass { .. } | Repr::Combination(_)) => {
            let h = len / NODES_PER_FEATURE * 32.0 / q.ppa() as f64;
            QuadratureSpec { points_per_axis: resolved_ppa(phi, h, q) }
        }
        _ => *q,
    }
}

fn rule_pair(u: &(dyn Fn(&Point) -> f64 + Send + Sync), phi: &ScaledTestFunction, weight: Option<&Poly>, k: &MultiIndex, q: &QuadratureSpec) -> f64 {
    let rule = phi.base.rule(q.ppa(), k);
    let (x, lam) = (phi.center, phi.scale);
    let mut s = 0.0;
    match weight {
        None => {
            for (z, w) in rule.nodes.iter().zip(&rule.weights) {
                s += u(&x.axpy(lam, z)) * w;
            }
        }
        Some(p) => {
            for (z, w) in rule.nodes.iter().zip(&rule.weights) {
                s += u(&x.axpy(lam, z)) * p.eval(z) * w;
            }
        }
    }
    s
}

/// Pairing with a density singular at `s` (local coordinates). Each term of
/// the base is integrated separately; a term whose support contains `s` gets
/// a grid graded towards it (t^2 substitution in 1D, polar in 2D).
fn graded_pair(
    u: &(dyn Fn(&Point) -> f64 + Send + Sync),
    base: &TestFunction,
    x: &Point,
    lam: f64,
    s: &Point,
    weight: Option<&Poly>,
    q: &QuadratureSpec,
) -> f64 {
    let d = base.dim();
    let n = q.ppa();
    let v = |z: &Point| -> f64 {
        let p = weight.map_or(1.0, |p| p.eval(z));
        u(&x.axpy(lam, z)) * p
    };
    let mut total = 0.0;
    for t in base.terms() {
        let c = t.shift;
        let rho = t.scale * t.atom.support_radius();
        let g = |z: &Point| v(z) * t.eval(z);
        if s.dist(&c) >= rho {
            total += term_midpoint(t, n, &g);
            continue;
        }
        if d == 1 {
            let (a, b, s0) = (c.get(0) - rho, c.get(0) + rho, s.get(0));
            for (len, dir) in [(b - s0, 1.0), (s0 - a, -1.0)] {
                if len <= 0.0 {
                    continue;
                }
                let mut acc = 0.0;
                for j in 0..n {
                    let tt = (j as f64 + 0.5) / n as f64;
                    let y = Point::d1(s0 + dir * len * tt * tt);
                    acc += g(&y) * 2.0 * len * tt;
                }
                total += acc / n as f64;
            }
        } else {
            let rmax = s.dist(&c) + rho;
            let (nr, nt) = (n, 2 * n);
            let mut acc = 0.0;
            for i in 0..nr {
                let tt = (i as f64 + 0.5) / nr as f64;
                let r = rmax * tt * tt;
                let jac = r * 2.0 * rmax * tt / nr as f64 * (2.0 * std::f64::consts::PI / nt as f64);
                for j in 0..nt {
                    let th = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / nt as f64;
                    let y = Point::d2(s.get(0) + r * th.cos(), s.get(1) + r * th.sin());
                    acc += g(&y) * jac;
                }
            }
            total += acc;
        }
    }
    lam.powi(0) * total
}

fn term_midpoint(t: &Term, n: usize, g: &dyn Fn(&Point) -> f64) -> f64 {
    let d = t.shift.dim();
    let w = t.atom.half_width();
    let h = 2.0 * w / n as f64;
    let axis: Vec<f64> = (0..n).map(|j| -w + (j as f64 + 0.5) * h).collect();
    let cell = (h * t.scale).powi(d as i32);
    let rad = t.atom.support_radius();
    tensor(d, &axis, &axis)
        .into_iter()
        .filter(|u| u.norm() < rad)
        .map(|u| g(&t.shift.axpy(t.scale, &u)))
        .sum::<f64>()
        * cell
}

/// {T(phi_x^lambda)} for x in `centers`.
pub fn pair_field(t: &Distribution, base: &TestFunction, centers: &[Point], lambda: f64, q: &QuadratureSpec) -> Result<Vec<f64>> {
    let phis = centers.iter().map(|c| scale(base, c, lambda)).collect::<Result<Vec<_>>>()?;
    crate::par::map(&phis, |p| pair(t, p, q)).into_iter().collect()
}

/// Points per axis needed for node spacing at most `h_max` when integrating
/// against `psi` (a power-of-two multiple of `q`).
pub fn resolved_ppa(psi: &ScaledTestFunction, h_max: f64, q: &QuadratureSpec) -> usize {
    let widest = psi.base.terms().iter().map(|t| 2.0 * t.atom.half_width() * t.scale).fold(0.0, f64::max) * psi.scale;
    let cap = if psi.dim() == 1 { MAX_PPA_1D } else { MAX_PPA_2D };
    let mut ppa = q.ppa();
    while widest / ppa as f64 > h_max && ppa < cap {
        ppa *= 2;
    }
    ppa
}

/// int f(z) psi(z) dz on the term-wise nodes of psi, refined until the node
/// spacing is at most `h_max` (subject to the refinement cap).
pub fn integrate_against<F>(psi: &ScaledTestFunction, h_max: f64, q: &QuadratureSpec, f: F) -> f64
where
    F: Fn(&Point) -> f64 + Sync + Send,
{
    let ppa = resolved_ppa(psi, h_max, q);
    let rule = psi.base.rule(ppa, &MultiIndex::zero(psi.dim()));
    let (x, lam) = (psi.center, psi.scale);
    let idx: Vec<usize> = (0..rule.len()).collect();
    crate::par::sum(&idx, |&m| {
        let w = rule.weights[m];
        if w == 0.0 {
            0.0
        } else {
            f(&x.axpy(lam, &rule.nodes[m])) * w
        }
    })
}

/// |T(psi * rho^eps) - T(psi)| for each eps, where T(psi * rho^eps) is
/// computed as int T(rho_z^eps) psi(z) dz.
pub fn mollify_check(
    t: &Distribution,
    rho: &TestFunction,
    psi: &TestFunction,
    eps_list: &[f64],
    q: &QuadratureSpec,
) -> Result<Vec<(f64, f64)>> {
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("eps_list must be strictly decreasing".into()));
    }
    let d = psi.dim();
    let unit = scale(psi, &Point::zero(d), 1.0)?;
    if let Some(&last) = eps_list.last() {
        // spacing of the z-grid actually reachable at the finest scale
        let h = 2.0 * last * rho.support_radius() / q.ppa() as f64;
        let ppa = resolved_ppa(&unit, h, q);
        let spacing = 2.0 * psi.support_radius() / ppa as f64;
        if last < 4.0 * spacing {
            return Err(Error::Resolution(format!("eps = {last} is below 4x the quadrature spacing {spacing}")));
        }
    }
    let direct = pair(t, &unit, q)?;
    let mut out = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let h = 2.0 * eps * rho.support_radius() / q.ppa() as f64;
        let v = integrate_against(&unit, h, q, |z| scale(rho, z, eps).and_then(|r| pair(t, &r, q)).unwrap_or(f64::NAN));
        if v.is_nan() {
            return Err(Error::InvalidInput("pairing failed inside mollification".into()));
        }
        out.push((eps, (v - direct).abs()));
    }
    Ok(out)
}
