//! Young products of a positive Holder function and a distribution.

use crate::analysis::{fit_exponent, level_maxima, FitModel};
use crate::bump::{scale, TestFunction};
use crate::error::{Error, Result};
use crate::functions::{taylor_remainder, SmoothFn};
use crate::germs::{product_germ, Germ};
use crate::geom::{BoxDomain, MultiIndex, Point};
use crate::pairing::{pair, Distribution, QuadratureSpec};
use crate::reconstruction::{rate_certificate, reconstruct, RateTable, Reconstruction, ReconstructionConfig};
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct PositiveHolderNorm {
    pub value: f64,
    pub alpha: f64,
    /// max over |k| <= floor(alpha) of sup |d^k f|
    pub sup_part: f64,
    /// sup |f(y) - F_x(y)| / |y - x|^alpha
    pub remainder_part: f64,
    /// (separation, max remainder ratio), separation decreasing
    pub per_separation: Vec<(f64, f64)>,
    /// power-law exponent of the per-separation maxima; clearly negative
    /// means the ratio blows up as the separation shrinks
    pub growth_exponent: Option<f64>,
    pub diverging: bool,
}

/// Exponent below which the remainder ratio counts as diverging.
pub const HOLDER_GROWTH_TOL: f64 = -0.05;

/// Sampled C^alpha norm on K: x on a grid with `points_per_axis` points, y at
/// dyadic distances 2^{-k}, k in `levels`, along the axes and diagonals.
pub fn positive_holder_norm(
    f: &SmoothFn,
    alpha: f64,
    k: &BoxDomain,
    points_per_axis: usize,
    levels: (usize, usize),
) -> Result<PositiveHolderNorm> {
    if !(alpha > 0.0) {
        return Err(Error::Exponent(format!("alpha = {alpha} must be positive")));
    }
    if alpha.fract() == 0.0 {
        return Err(Error::Unsupported(format!("integer alpha = {alpha}")));
    }
    let order = alpha.floor() as usize;
    if order > f.max_order() {
        return Err(Error::OrderExceeded { requested: order, available: f.max_order() });
    }
    let d = k.dim();
    let xs = k.grid(points_per_axis);
    let mut sup_part = 0.0f64;
    for j in MultiIndex::up_to(d, order) {
        for x in &xs {
            sup_part = sup_part.max(f.deriv(&j, x)?.abs());
        }
    }
    let dirs: Vec<Point> = if d == 1 {
        vec![Point::d1(1.0), Point::d1(-1.0)]
    } else {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        vec![Point::d2(1.0, 0.0), Point::d2(0.0, 1.0), Point::d2(-1.0, 0.0), Point::d2(0.0, -1.0), Point::d2(s, s), Point::d2(s, -s)]
    };
    let mut jobs = Vec::new();
    for x in &xs {
        for l in levels.0..=levels.1 {
            let s = 2f64.powi(-(l as i32));
            for e in &dirs {
                let y = x.axpy(s, e);
                if k.contains(&y) {
                    jobs.push((*x, y, s));
                }
            }
        }
    }
    let zero = MultiIndex::zero(d);
    let ratios = crate::par::map(&jobs, |(x, y, s)| -> Result<(f64, f64)> {
        Ok((*s, taylor_remainder(f, order, &zero, y, x)?.abs() / s.powf(alpha)))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let per_separation = level_maxima(ratios.iter().copied());
    let remainder_part = ratios.iter().fold(0.0f64, |m, r| m.max(r.1));
    let growth_exponent = if per_separation.len() >= 4 && remainder_part > 0.0 {
        Some(fit_exponent(&per_separation, FitModel::Power)?.coefficient)
    } else {
        None
    };
    Ok(PositiveHolderNorm {
        value: sup_part.max(remainder_part),
        alpha,
        sup_part,
        remainder_part,
        diverging: growth_exponent.is_some_and(|g| g < HOLDER_GROWTH_TOL),
        per_separation,
        growth_exponent,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// alpha + beta > 0
    Unique,
    NonCanonical,
}

#[derive(Clone, Debug)]
pub struct YoungProduct {
    pub result: Reconstruction,
    pub germ: Germ,
    pub alpha: f64,
    pub beta: f64,
    pub regime: Regime,
}

/// M(f, g): the reconstruction of x -> g . (Taylor polynomial of f at x).
pub fn young_product(f: &SmoothFn, alpha: f64, g: &Distribution, beta: f64, cfg: &ReconstructionConfig) -> Result<YoungProduct> {
    if !(alpha > 0.0) {
        return Err(Error::Exponent(format!("alpha = {alpha} must be positive")));
    }
    if beta > 0.0 {
        return Err(Error::Exponent(format!("beta = {beta} must be nonpositive")));
    }
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    if !close(cfg.gamma, alpha + beta) || !close(cfg.alpha, beta) || !close(cfg.beta, beta) {
        return Err(Error::Config(format!(
            "the product needs gamma = alpha + beta = {}, alpha = beta = {beta} and beta = {beta} in the configuration",
            alpha + beta
        )));
    }
    let germ = product_germ(g.clone(), f.clone(), alpha, beta)?;
    let result = reconstruct(&germ, cfg)?;
    let regime = if alpha + beta > 0.0 { Regime::Unique } else { Regime::NonCanonical };
    Ok(YoungProduct { result, germ, alpha, beta, regime })
}

/// Errors |(M(f,g) - g F_x)(psi_x^lambda)|, F_x the Taylor polynomial of f.
pub fn young_rate_check(y: &YoungProduct, centers: &[Point], lambdas: &[f64], psis: &[TestFunction]) -> Result<RateTable> {
    rate_certificate(&y.germ, &y.result, &y.result.cfg, centers, lambdas, psis)
}

#[derive(Clone, Debug, Serialize)]
pub struct ContinuityRow {
    pub label: String,
    /// sampled sup |M(f,g)(phi_x^eps)| / eps^beta on K
    pub product_seminorm: f64,
    pub f_norm: f64,
    /// sampled sup |g(phi_x^eps)| / eps^beta on K inflated by 4
    pub g_seminorm: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ContinuityTable {
    pub rows: Vec<ContinuityRow>,
    pub max_ratio: f64,
    pub min_ratio: f64,
    /// max_ratio / min_ratio
    pub spread: f64,
}

/// Points per axis and dyadic levels of the continuity seminorms.
const CONT_POINTS: usize = 5;
const CONT_LEVELS: (usize, usize) = (1, 6);

fn beta_seminorm(t: &dyn Fn(&crate::bump::ScaledTestFunction) -> Result<f64>, beta: f64, k: &BoxDomain, phi: &TestFunction) -> Result<f64> {
    let mut best = 0.0f64;
    for x in k.grid(CONT_POINTS) {
        for l in CONT_LEVELS.0..=CONT_LEVELS.1 {
            let eps = 2f64.powi(-(l as i32));
            best = best.max(t(&scale(phi, &x, eps)?)?.abs() / eps.powf(beta));
        }
    }
    Ok(best)
}

/// ||M(f,g)||_{C^beta(K)} against ||f||_{C^alpha(K_4)} ||g||_{C^beta(K_4)},
/// all sampled with the configuration's base test function.
pub fn young_continuity_check(
    pairs: &[(SmoothFn, Distribution)],
    alpha: f64,
    beta: f64,
    k: &BoxDomain,
    cfg: &ReconstructionConfig,
) -> Result<ContinuityTable> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("no pairs supplied".into()));
    }
    let k4 = k.inflate(4.0);
    let q: QuadratureSpec = cfg.quadrature.refined();
    let mut rows = Vec::with_capacity(pairs.len());
    for (f, g) in pairs {
        let m = young_product(f, alpha, g, beta, cfg)?;
        let product_seminorm = beta_seminorm(&|p| m.result.pair(p), beta, k, &cfg.phi)?;
        let f_norm = positive_holder_norm(f, alpha, &k4, 9, (1, 10))?.value;
        let g_seminorm = beta_seminorm(&|p| pair(g, p, &q), beta, &k4, &cfg.phi)?;
        let denom = f_norm * g_seminorm;
        let ratio = if denom > 0.0 { product_seminorm / denom } else { f64::INFINITY };
        rows.push(ContinuityRow { label: format!("{} x {}", f.label(), g.label), product_seminorm, f_norm, g_seminorm, ratio });
    }
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let min_ratio = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    Ok(ContinuityTable { spread: max_ratio / min_ratio, max_ratio, min_ratio, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bump::{make_standard_bump, sample_br};
    use crate::functions::{affine, cos, one, sin, weierstrass};

    fn smooth_cfg() -> ReconstructionConfig {
        let mut cfg = ReconstructionConfig::new(1, 1.5, 0.0, 0.0, 2).unwrap();
        cfg.n_max = 6;
        cfg.quadrature = QuadratureSpec::new(32).unwrap();
        cfg
    }

    #[test]
    fn holder_norm_components() {
        let k = BoxDomain::unit(1);
        let c = positive_holder_norm(&cos(1), 1.5, &k, 9, (1, 10)).unwrap();
        assert!((c.sup_part - 1.0).abs() < 1e-12);
        // |cos y - cos x + sin x (y - x)| <= |y-x|^2 / 2
        assert!(c.remainder_part <= 0.5 * 0.5f64.powf(0.5) + 1e-12 && !c.diverging);
        let a = positive_holder_norm(&affine(0.3, Point::d1(2.0)), 1.4, &k, 9, (1, 10)).unwrap();
        assert!(a.remainder_part < 1e-12);
        assert!(positive_holder_norm(&cos(1), 1.0, &k, 9, (1, 10)).is_err());
        let w = weierstrass(1, 0.7).unwrap();
        assert!(!positive_holder_norm(&w, 0.6, &k, 9, (1, 12)).unwrap().diverging);
        assert!(positive_holder_norm(&w, 0.8, &k, 9, (1, 12)).unwrap().diverging);
    }

    #[test]
    fn smooth_product_is_classical() {
        let g = Distribution::density(1, |p| p.get(0).sin(), "sin");
        let y = young_product(&cos(1), 1.5, &g, 0.0, &smooth_cfg()).unwrap();
        assert_eq!(y.regime, Regime::Unique);
        let prod = Distribution::density(1, |p| p.get(0).sin() * p.get(0).cos(), "sincos");
        let q = QuadratureSpec::new(1024).unwrap();
        for (i, b) in sample_br(2, 1, 4, 21).unwrap().iter().enumerate() {
            let psi = scale(b, &Point::d1(-0.6 + 0.4 * i as f64), 0.5).unwrap();
            let e = y.result.estimate(&psi).unwrap();
            let want = pair(&prod, &psi, &q).unwrap();
            assert!((e.value - want).abs() <= 2.0 * e.budget, "{} vs {want} budget {}", e.value, e.budget);
        }
    }

    #[test]
    fn bilinear_in_g() {
        let g1 = Distribution::density(1, |p| p.get(0).sin(), "sin");
        let g2 = Distribution::density(1, |p| (2.0 * p.get(0)).cos(), "cos2");
        let g12 = Distribution::combination(vec![(1.0, g1.clone()), (1.0, g2.clone())]).unwrap();
        let cfg = smooth_cfg();
        let f = sin(1);
        let psi = scale(&make_standard_bump(1).unwrap(), &Point::d1(0.2), 0.5).unwrap();
        let a = young_product(&f, 1.5, &g1, 0.0, &cfg).unwrap().result.pair(&psi).unwrap();
        let b = young_product(&f, 1.5, &g2, 0.0, &cfg).unwrap().result.pair(&psi).unwrap();
        let c = young_product(&f, 1.5, &g12, 0.0, &cfg).unwrap().result.pair(&psi).unwrap();
        assert!((c - a - b).abs() <= 1e-8 * c.abs().max(1e-3));
    }

    #[test]
    fn unit_multiplier_and_preconditions() {
        let g = Distribution::density(1, |p| p.get(0).cos(), "cos");
        let cfg = smooth_cfg();
        let y = young_product(&one(1), 1.5, &g, 0.0, &cfg).unwrap();
        let psi = scale(&make_standard_bump(1).unwrap(), &Point::d1(0.1), 0.7).unwrap();
        let e = y.result.estimate(&psi).unwrap();
        assert!((e.value - pair(&g, &psi, &QuadratureSpec::new(1024).unwrap()).unwrap()).abs() <= e.budget);
        assert!(matches!(young_product(&one(1), -0.5, &g, 0.0, &cfg), Err(Error::Exponent(_))));
        assert!(matches!(young_product(&one(1), 1.2, &g, 0.0, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn continuity_scales_bilinearly() {
        let g = Distribution::density(1, |p| p.get(0).sin(), "sin");
        let mut cfg = smooth_cfg();
        cfg.n_max = 4;
        let k = BoxDomain::cube(1, 0.5);
        let t = young_continuity_check(&[(cos(1), g.clone()), (cos(1).amplified(2.0), g.clone())], 1.5, 0.0, &k, &cfg).unwrap();
        let (a, b) = (&t.rows[0], &t.rows[1]);
        assert!((b.product_seminorm - 2.0 * a.product_seminorm).abs() <= 1e-6 * b.product_seminorm);
        assert!(t.spread < 1.0 + 1e-6);
    }
}
