//! Germs F = (F_x)_x, evaluated as pairing oracles (x, phi) -> F_x(phi).

use crate::bump::ScaledTestFunction;
use crate::error::{Error, Result};
use crate::functions::SmoothFn;
use crate::geom::{BoxDomain, MultiIndex, Point, Poly};
use crate::pairing::{pair, pair_weighted, Distribution, QuadratureSpec};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// Half-width of the default domain box of the builders below (they are
/// defined on all of R^d).
pub const DEFAULT_DOMAIN: f64 = 8.0;

/// Declared exponents. `gamma = +inf` marks a germ coherent for every (alpha, gamma).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GermMeta {
    pub alpha: Option<f64>,
    pub gamma: f64,
    pub beta: Option<f64>,
}

impl GermMeta {
    pub fn new(alpha: Option<f64>, gamma: f64, beta: Option<f64>) -> Result<Self> {
        if let Some(a) = alpha {
            if a > 0.0f64.min(gamma) {
                return Err(Error::Exponent(format!("alpha = {a} must not exceed min(0, gamma = {gamma})")));
            }
        }
        Ok(GermMeta { alpha, gamma, beta })
    }

    pub fn unconstrained() -> Self {
        GermMeta { alpha: None, gamma: f64::INFINITY, beta: None }
    }
}

pub type CustomEval = Arc<dyn Fn(&Point, &ScaledTestFunction, &QuadratureSpec) -> Result<f64> + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Constant(Distribution),
    Taylor { f: SmoothFn, order: usize },
    Log,
    Product { g: Distribution, f: SmoothFn, order: usize },
    Shifted { f: Distribution, base: Box<Germ> },
    Combination(Vec<(f64, Germ)>),
    Custom(CustomEval),
}

#[derive(Clone)]
pub struct Germ {
    dim: usize,
    kind: Kind,
    pub meta: GermMeta,
    pub domain: BoxDomain,
    pub label: String,
}

impl fmt::Debug for Germ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Germ({}, {:?})", self.label, self.meta)
    }
}

/// Largest integer strictly below gamma.
pub fn order_below(gamma: f64) -> usize {
    (gamma.ceil() - 1.0).max(0.0) as usize
}

/// Taylor polynomial of f at x, as a polynomial in v = y - x.
fn taylor_poly(f: &SmoothFn, order: usize, x: &Point) -> Result<Poly> {
    let d = f.dim();
    let mut terms = Vec::new();
    for k in MultiIndex::up_to(d, order) {
        terms.push((k, f.deriv(&k, x)? / k.factorial()));
    }
    Ok(Poly::new(d, terms))
}

impl Germ {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// F_x(phi).
    pub fn eval(&self, x: &Point, phi: &ScaledTestFunction, q: &QuadratureSpec) -> Result<f64> {
        match &self.kind {
            Kind::Constant(t) => pair(t, phi, q),
            Kind::Taylor { f, order } => {
                let p = taylor_poly(f, *order, x)?.affine_pullback(&(phi.center - *x), phi.scale);
                Ok(p.terms().iter().map(|(k, c)| c * phi.base.moment(q.ppa(), k)).sum())
            }
            Kind::Log => pair(&log_density(x), phi, q),
            Kind::Product { g, f, order } => {
                let p = taylor_poly(f, *order, x)?.affine_pullback(&(phi.center - *x), phi.scale);
                pair_weighted(g, phi, Some(&p), q)
            }
            Kind::Shifted { f, base } => Ok(pair(f, phi, q)? - base.eval(x, phi, q)?),
            Kind::Combination(parts) => {
                let mut s = 0.0;
                for (a, g) in parts {
                    s += a * g.eval(x, phi, q)?;
                }
                Ok(s)
            }
            Kind::Custom(f) => f(x, phi, q),
        }
    }

    /// (F_z - F_y)(phi)
    pub fn diff(&self, z: &Point, y: &Point, phi: &ScaledTestFunction, q: &QuadratureSpec) -> Result<f64> {
        Ok(self.eval(z, phi, q)? - self.eval(y, phi, q)?)
    }

    pub fn with_domain(mut self, domain: BoxDomain) -> Self {
        self.domain = domain;
        self
    }

    pub fn with_meta(mut self, meta: GermMeta) -> Self {
        self.meta = meta;
        self
    }

    /// sum a_i F_i for germs with identical declared exponents.
    pub fn combine(parts: &[(f64, &Germ)]) -> Result<Germ> {
        let first = parts.first().ok_or_else(|| Error::InvalidInput("empty germ combination".into()))?.1;
        for (_, g) in parts {
            if g.meta != first.meta || g.dim != first.dim {
                return Err(Error::InvalidInput("combined germs must share dimension and declared exponents".into()));
            }
        }
        let label = parts.iter().map(|(a, g)| format!("{a}*{}", g.label)).collect::<Vec<_>>().join("+");
        Ok(Germ {
            dim: first.dim,
            kind: Kind::Combination(parts.iter().map(|(a, g)| (*a, (*g).clone())).collect()),
            meta: first.meta,
            domain: first.domain,
            label,
        })
    }
}

fn default_box(dim: usize) -> BoxDomain {
    BoxDomain::cube(dim, DEFAULT_DOMAIN)
}

/// F_x = T for every x.
pub fn constant_germ(t: Distribution) -> Germ {
    let dim = t.dim;
    let label = format!("constant:{}", t.label);
    Germ { dim, kind: Kind::Constant(t), meta: GermMeta::unconstrained(), domain: default_box(dim), label }
}

/// F_x = Taylor polynomial of f at x with terms |k| < gamma; declared (0, gamma).
pub fn taylor_germ(f: SmoothFn, gamma: f64) -> Result<Germ> {
    if !(gamma > 0.0) {
        return Err(Error::Exponent(format!("Taylor germs need gamma > 0, got {gamma}")));
    }
    let order = order_below(gamma);
    if order > f.max_order() {
        return Err(Error::OrderExceeded { requested: order, available: f.max_order() });
    }
    let dim = f.dim();
    let label = format!("taylor:{}:{gamma}", f.label());
    Ok(Germ { dim, kind: Kind::Taylor { f, order }, meta: GermMeta::new(Some(0.0), gamma, Some(0.0))?, domain: default_box(dim), label })
}

/// The density log(1 + 1/|y - x|) as a distribution.
pub fn log_density(x: &Point) -> Distribution {
    let c = *x;
    Distribution::singular_density(c.dim(), move |y| (1.0 + 1.0 / y.dist(&c)).ln(), c, "log")
}

/// F_x = log(1 + 1/|. - x|); declared (alpha, gamma) = (-0.5, 0).
pub fn log_germ(dim: usize) -> Result<Germ> {
    crate::geom::check_dim(dim)?;
    Ok(Germ { dim, kind: Kind::Log, meta: GermMeta::new(Some(-0.5), 0.0, None)?, domain: default_box(dim), label: "log".into() })
}

/// P_x(phi) = g(phi F_x), F_x the Taylor polynomial of f at x of order below alpha.
/// With g in C^beta the germ is declared (beta, alpha + beta)-coherent.
pub fn product_germ(g: Distribution, f: SmoothFn, alpha: f64, beta: f64) -> Result<Germ> {
    if !(alpha > 0.0) {
        return Err(Error::Exponent(format!("product germs need alpha > 0, got {alpha}")));
    }
    if g.dim != f.dim() {
        return Err(Error::InvalidInput("g and f differ in dimension".into()));
    }
    let order = order_below(alpha);
    if order > f.max_order() {
        return Err(Error::OrderExceeded { requested: order, available: f.max_order() });
    }
    let dim = f.dim();
    let label = format!("product:{}:{}:{alpha}", g.label, f.label());
    let meta = GermMeta::new(Some(beta.min(0.0).min(alpha + beta)), alpha + beta, Some(beta))?;
    Ok(Germ { dim, kind: Kind::Product { g, f, order }, meta, domain: default_box(dim), label })
}

/// G_x = f - F_x, exponents copied from F.
pub fn shifted_germ(base: &Germ, f: Distribution) -> Result<Germ> {
    if f.dim != base.dim {
        return Err(Error::InvalidInput("distribution and germ differ in dimension".into()));
    }
    let label = format!("{}-({})", f.label, base.label);
    Ok(Germ { dim: base.dim, kind: Kind::Shifted { f, base: Box::new(base.clone()) }, meta: base.meta, domain: base.domain, label })
}

/// A germ from an arbitrary pairing oracle.
pub fn custom_germ(dim: usize, meta: GermMeta, eval: CustomEval, label: impl Into<String>) -> Result<Germ> {
    crate::geom::check_dim(dim)?;
    Ok(Germ { dim, kind: Kind::Custom(eval), meta, domain: default_box(dim), label: label.into() })
}
