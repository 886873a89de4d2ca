//! The reconstruction of a coherent germ as a pairing oracle: approximants
//! f_n, the g'/g'' decomposition of f_{k+1} - f_k, and rate certificates.

use crate::analysis::{coherence_seminorm, fit_exponent, homogeneity_seminorm, level_maxima, FitModel, Sampling};
use crate::bump::{cr_norm, make_standard_bump, scale, ScaledTestFunction, TestFunction};
use crate::error::{Error, Result};
use crate::germs::Germ;
use crate::geom::{factorial, tensor, BoxDomain, MultiIndex, Point};
use crate::multiscale::{build_cascade, default_nmax, theorem_constants, CascadeKit, MAX_LEVEL_1D, MAX_LEVEL_2D};
use crate::pairing::{integrate_against, Estimate, QuadratureSpec, MAX_PPA_1D, MAX_PPA_2D};
use serde::Serialize;
use std::sync::{Arc, Mutex};

#[derive(Clone, Debug)]
pub struct ReconstructionConfig {
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub r: usize,
    pub n_max: usize,
    pub domain: BoxDomain,
    pub quadrature: QuadratureSpec,
    pub phi: TestFunction,
}

impl ReconstructionConfig {
    /// Unit box, default depth and quadrature, canonical bump.
    pub fn new(dim: usize, gamma: f64, alpha: f64, beta: f64, r: usize) -> Result<Self> {
        let cfg = ReconstructionConfig {
            gamma,
            alpha,
            beta,
            r,
            n_max: default_nmax(dim),
            domain: BoxDomain::unit(dim),
            quadrature: QuadratureSpec::default_for(dim),
            phi: make_standard_bump(dim)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn validate(&self) -> Result<()> {
        crate::geom::check_dim(self.dim())?;
        if self.phi.dim() != self.dim() {
            return Err(Error::Config("phi and box differ in dimension".into()));
        }
        if ![self.gamma, self.alpha, self.beta].iter().all(|v| v.is_finite()) {
            return Err(Error::Config("exponents must be finite".into()));
        }
        if self.alpha > 0.0f64.min(self.gamma) {
            return Err(Error::Config(format!("alpha = {} exceeds min(0, gamma = {})", self.alpha, self.gamma)));
        }
        let rf = self.r as f64;
        if !(rf > (-self.alpha).max(-self.beta)) {
            return Err(Error::Config(format!(
                "r = {} must exceed max(-alpha, -beta) = {}",
                self.r,
                (-self.alpha).max(-self.beta)
            )));
        }
        let cap = if self.dim() == 1 { MAX_LEVEL_1D } else { MAX_LEVEL_2D };
        if self.n_max < 2 || self.n_max > cap {
            return Err(Error::Config(format!("N_max = {} must lie in 2..={cap}", self.n_max)));
        }
        Ok(())
    }

    pub fn with_phi(&self, phi: TestFunction) -> Self {
        ReconstructionConfig { phi, ..self.clone() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Branch {
    PositiveGamma,
    NonpositiveGamma,
}

/// min{k >= 0 : 2^{-k} <= lambda}, for lambda in (0, 1].
pub fn n_lambda(lambda: f64) -> Result<usize> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidScale(lambda));
    }
    let mut k = 0usize;
    while 2f64.powi(-(k as i32)) > lambda {
        k += 1;
    }
    Ok(k)
}

/// Runs `f` on many nodes and keeps the first error; failed nodes contribute 0.
struct ErrorSlot(Mutex<Option<Error>>);

impl ErrorSlot {
    fn new() -> Self {
        ErrorSlot(Mutex::new(None))
    }

    fn take(&self, r: Result<f64>) -> f64 {
        match r {
            Ok(v) => v,
            Err(e) => {
                let mut slot = self.0.lock().unwrap();
                if slot.is_none() {
                    *slot = Some(e);
                }
                0.0
            }
        }
    }

    fn finish(self, v: f64) -> Result<f64> {
        match self.0.into_inner().unwrap() {
            Some(e) => Err(e),
            None if v.is_finite() => Ok(v),
            None => Err(Error::InvalidInput("non-finite value in reconstruction quadrature".into())),
        }
    }
}

fn check_support(f: &Germ, psi: &ScaledTestFunction, reach: f64) -> Result<()> {
    if psi.dim() != f.dim() {
        return Err(Error::InvalidInput("test function and germ differ in dimension".into()));
    }
    if !f.domain.contains_ball(&psi.center, psi.support_radius() + reach) {
        return Err(Error::Domain(format!(
            "support of psi (center {:?}, radius {}) plus {reach} leaves the germ domain",
            psi.center.coords(),
            psi.support_radius()
        )));
    }
    Ok(())
}

fn check_level(kit: &CascadeKit, k: usize, strict: bool) -> Result<()> {
    let ok = k >= 1 && if strict { k < kit.n_max } else { k <= kit.n_max };
    if !ok {
        return Err(Error::InvalidInput(format!("level {k} outside the cascade (N_max = {})", kit.n_max)));
    }
    Ok(())
}

/// f_n(psi) = int F_z(rho_z^{eps_n}) psi(z) dz.
pub fn approximant(f: &Germ, n: usize, kit: &CascadeKit, psi: &ScaledTestFunction, q: &QuadratureSpec) -> Result<f64> {
    check_level(kit, n, false)?;
    let eps = kit.eps(n);
    let rr = kit.rho.support_radius();
    check_support(f, psi, eps * rr)?;
    let h = 2.0 * eps * rr / q.ppa() as f64;
    let slot = ErrorSlot::new();
    let v = integrate_against(psi, h, q, |z| slot.take(scale(&kit.rho, z, eps).and_then(|p| f.eval(z, &p, q))));
    slot.finish(v)
}

/// g'_k(psi) = int F_y(phi_hat_y^eps) (chi_check^eps * psi)(y) dy on a
/// lattice covering supp psi + eps R_chi; the convolution is summed over the
/// nodes of chi_check.
pub fn g_prime(f: &Germ, k: usize, kit: &CascadeKit, psi: &ScaledTestFunction, q: &QuadratureSpec) -> Result<f64> {
    check_level(kit, k, true)?;
    let eps = kit.eps(k);
    let (rc, rh) = (kit.chi_check.support_radius(), kit.phi_hat.support_radius());
    check_support(f, psi, eps * (rc + rh))?;
    let d = psi.dim();
    let half = psi.support_radius() + eps * rc;
    let h = 2.0 * (eps * rc).min(psi.support_radius()) / q.ppa() as f64;
    let cap = if d == 1 { MAX_PPA_1D } else { MAX_PPA_2D };
    let n = ((2.0 * half / h).ceil() as usize).clamp(1, cap);
    let cell = 2.0 * half / n as f64;
    let axis = |i: usize| -> Vec<f64> { (0..n).map(|j| psi.center.get(i) - half + (j as f64 + 0.5) * cell).collect() };
    let ys = tensor(d, &axis(0), &axis(1.min(d - 1)));
    let rule = kit.chi_check.rule(q.ppa(), &MultiIndex::zero(d));
    let vol = cell.powi(d as i32);
    let slot = ErrorSlot::new();
    let v = crate::par::sum(&ys, |y| {
        let conv: f64 = rule.nodes.iter().zip(&rule.weights).map(|(u, w)| w * psi.eval(&y.axpy(-eps, u))).sum();
        if conv == 0.0 {
            return 0.0;
        }
        slot.take(scale(&kit.phi_hat, y, eps).and_then(|p| f.eval(y, &p, q))) * conv * vol
    });
    slot.finish(v)
}

/// g''_k(psi) = int int (F_z - F_y)(phi_hat_y^eps) chi_check^eps(y - z) psi(z) dy dz,
/// with y = z + eps u over the nodes of chi_check.
pub fn g_doubleprime(f: &Germ, k: usize, kit: &CascadeKit, psi: &ScaledTestFunction, q: &QuadratureSpec) -> Result<f64> {
    check_level(kit, k, true)?;
    let eps = kit.eps(k);
    let (rc, rh) = (kit.chi_check.support_radius(), kit.phi_hat.support_radius());
    check_support(f, psi, eps * (rc + rh))?;
    let rule = kit.chi_check.rule(q.ppa(), &MultiIndex::zero(psi.dim()));
    let h = 2.0 * eps * rc / q.ppa() as f64;
    let slot = ErrorSlot::new();
    let v = integrate_against(psi, h, q, |z| {
        let mut s = 0.0;
        for (u, w) in rule.nodes.iter().zip(&rule.weights) {
            let y = z.axpy(eps, u);
            s += w * slot.take(scale(&kit.phi_hat, &y, eps).and_then(|p| f.diff(z, &y, &p, q)));
        }
        s
    });
    slot.finish(v)
}

/// The reconstruction as an immutable pairing oracle.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub germ: Germ,
    pub kit: Arc<CascadeKit>,
    pub cfg: ReconstructionConfig,
    pub branch: Branch,
    /// sampled coherence seminorm of F against phi_hat (gamma > 0 only)
    pub c_hat1: f64,
    /// sampled homogeneity seminorm of F against phi_hat
    pub c_hat2: f64,
    /// last level included in the series
    pub truncation: usize,
}

impl Reconstruction {
    /// Number of quadratures nested in one evaluation.
    fn nesting(&self) -> f64 {
        match self.branch {
            Branch::PositiveGamma => 2.0,
            Branch::NonpositiveGamma => 3.0,
        }
    }

    /// gamma > 0: f_{N_max}(psi), which equals f_1 + sum_{k < N_max} (g'_k + g''_k).
    /// gamma <= 0: f_1 + sum_{k < N_max} g'_k.
    pub fn pair_at(&self, psi: &ScaledTestFunction, q: &QuadratureSpec) -> Result<f64> {
        match self.branch {
            Branch::PositiveGamma => approximant(&self.germ, self.cfg.n_max, &self.kit, psi, q),
            Branch::NonpositiveGamma => {
                let mut s = approximant(&self.germ, 1, &self.kit, psi, q)?;
                for k in 1..self.cfg.n_max {
                    s += g_prime(&self.germ, k, &self.kit, psi, q)?;
                }
                Ok(s)
            }
        }
    }

    pub fn pair(&self, psi: &ScaledTestFunction) -> Result<f64> {
        self.pair_at(psi, &self.cfg.quadrature.refined())
    }

    /// Value with budget = nested quadrature budget + tail estimate.
    pub fn estimate(&self, psi: &ScaledTestFunction) -> Result<Estimate> {
        let (e, tail) = self.estimate_parts(psi)?;
        Ok(Estimate { value: e.value, budget: e.budget + tail })
    }

    /// The quadrature estimate (budget scaled by the nesting depth) and the
    /// tail estimate, separately.
    pub fn estimate_parts(&self, psi: &ScaledTestFunction) -> Result<(Estimate, f64)> {
        let e = Estimate::by_refinement(&self.cfg.quadrature, |q| self.pair_at(psi, q))?;
        Ok((Estimate { value: e.value, budget: e.budget * self.nesting() }, self.tail_estimate(psi)?))
    }

    /// Bound on the discarded terms k >= N_max of the series.
    pub fn tail_estimate(&self, psi: &ScaledTestFunction) -> Result<f64> {
        let cfg = &self.cfg;
        let d = cfg.dim() as f64;
        let e = self.kit.eps(cfg.n_max);
        let rc = self.kit.chi_check.support_radius();
        let br = cfg.beta + cfg.r as f64;
        let vol = (2.0 * (psi.support_radius() + e * rc)).powf(d);
        let taylor = (rc * d.sqrt()).powi(cfg.r as i32) / factorial(cfg.r);
        let mut tail = self.c_hat2 * vol * self.kit.chi_check_l1 * taylor * cr_norm(psi, cfg.r)? * e.powf(br)
            / (1.0 - 2f64.powf(-br));
        if self.branch == Branch::PositiveGamma {
            let l1 = psi.base.l1_norm(crate::multiscale::kit_ppa(psi.dim()));
            tail += 2f64.powf(cfg.gamma - cfg.alpha) * self.c_hat1 * self.kit.chi_check_l1 * l1 * e.powf(cfg.gamma)
                / (1.0 - 2f64.powf(-cfg.gamma));
        }
        Ok(tail)
    }
}

/// Sampling for the seminorm proxies: every level of the cascade, separations
/// up to eps (the reach of chi_check).
fn proxy_sampling(cfg: &ReconstructionConfig) -> Sampling {
    let mut s = Sampling::default_for(cfg.dim());
    s.levels = (1, cfg.n_max);
    s.separations = Vec::new();
    s.relative = vec![0.125, 0.25, 0.5, 0.75, 1.0];
    s.max_sep = 1.0;
    s
}

pub fn reconstruct(f: &Germ, cfg: &ReconstructionConfig) -> Result<Reconstruction> {
    cfg.validate()?;
    if f.dim() != cfg.dim() {
        return Err(Error::Config("germ and box differ in dimension".into()));
    }
    let k32 = cfg.domain.inflate(1.5);
    if !(0..cfg.dim()).all(|i| f.domain.lo.get(i) <= k32.lo.get(i) && f.domain.hi.get(i) >= k32.hi.get(i)) {
        return Err(Error::Config("germ domain must contain the box inflated by 3/2".into()));
    }
    if cfg.gamma > f.meta.gamma + 1e-12 {
        return Err(Error::Config(format!("gamma = {} exceeds the germ's declared gamma {}", cfg.gamma, f.meta.gamma)));
    }
    let kit = Arc::new(build_cascade(&cfg.phi, cfg.r, cfg.n_max)?);
    let branch = if cfg.gamma > 0.0 { Branch::PositiveGamma } else { Branch::NonpositiveGamma };
    let s = proxy_sampling(cfg);
    let q = cfg.quadrature;
    let c_hat2 = homogeneity_seminorm(f, &k32, &kit.phi_hat, cfg.beta, &s, &q)?.seminorm;
    let c_hat1 = match branch {
        Branch::PositiveGamma => coherence_seminorm(f, &k32, &kit.phi_hat, cfg.alpha, cfg.gamma, &s, &q)?.seminorm,
        Branch::NonpositiveGamma => 0.0,
    };
    Ok(Reconstruction { germ: f.clone(), kit, cfg: cfg.clone(), branch, c_hat1, c_hat2, truncation: cfg.n_max - 1 })
}

#[derive(Clone, Debug, Serialize)]
pub struct RateRow {
    pub x: Point,
    pub lambda: f64,
    pub psi_id: String,
    pub error: f64,
    /// quadrature budgets of both sides plus the tail estimate
    pub budget: f64,
    pub quadrature_budget: f64,
    /// error / (frak_c * S * lambda^gamma), when the constant applies
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
    pub model: FitModel,
    /// (lambda, max error), lambda decreasing
    pub envelope: Vec<(f64, f64)>,
    /// None when every error is within 2x its quadrature budget
    pub fitted_slope: Option<f64>,
    pub fitted_intercept: Option<f64>,
    pub r_squared: Option<f64>,
    /// exponent of a pure power fit, whatever the model
    pub power_slope: Option<f64>,
    pub degenerate: bool,
    pub frak_c: Option<f64>,
    pub coherence_seminorm: Option<f64>,
    pub worst_ratio: Option<f64>,
    /// rows with error > frak_c * S * lambda^gamma + budget
    pub bound_violations: usize,
    pub max_budget: f64,
}

/// Errors |(f - F_x)(psi_x^lambda)| over centers x lambdas x psis, with an
/// exponent fit of the per-lambda maxima.
pub fn rate_certificate(
    f: &Germ,
    rec: &Reconstruction,
    cfg: &ReconstructionConfig,
    centers: &[Point],
    lambdas: &[f64],
    psis: &[TestFunction],
) -> Result<RateTable> {
    if lambdas.is_empty() || centers.is_empty() || psis.is_empty() {
        return Err(Error::InvalidInput("centers, lambdas and psis must be nonempty".into()));
    }
    let floor = rec.kit.eps(cfg.n_max - 1);
    for &l in lambdas {
        let e = l.log2();
        if !(l > 0.0 && l <= 1.0) || (e - e.round()).abs() > 1e-9 || l < floor {
            return Err(Error::InvalidInput(format!("lambda = {l} must be dyadic in [{floor}, 1]")));
        }
    }
    if let Some(c) = centers.iter().find(|c| !cfg.domain.contains(c)) {
        return Err(Error::InvalidInput(format!("center {:?} outside the box", c.coords())));
    }
    let (frak_c, seminorm) = if cfg.gamma > 0.0 {
        let k32 = cfg.domain.inflate(1.5);
        let s = coherence_seminorm(f, &k32, &cfg.phi, cfg.alpha, cfg.gamma, &Sampling::default_for(cfg.dim()), &cfg.quadrature)?;
        let tc = theorem_constants(cfg.alpha, cfg.beta, cfg.gamma, cfg.r, cfg.dim(), &cfg.phi)?;
        (Some(tc.frak_c), Some(s.seminorm))
    } else {
        (None, None)
    };
    let mut jobs = Vec::new();
    for x in centers {
        for &l in lambdas {
            for (i, p) in psis.iter().enumerate() {
                jobs.push((*x, l, i, scale(p, x, l)?));
            }
        }
    }
    let q = cfg.quadrature;
    // the outer loop runs in order; each oracle call parallelises internally
    let mut rows = Vec::with_capacity(jobs.len());
    for (x, l, i, p) in &jobs {
        let (fe, tail) = rec.estimate_parts(p)?;
        let ge = Estimate::by_refinement(&q, |qq| f.eval(x, p, qq))?;
        let error = (fe.value - ge.value).abs();
        let quadrature_budget = fe.budget + ge.budget;
        let budget = quadrature_budget + tail;
        let ratio = match (frak_c, seminorm) {
            (Some(c), Some(s)) if c * s > 0.0 => Some(error / (c * s * l.powf(cfg.gamma))),
            _ => None,
        };
        rows.push(RateRow { x: *x, lambda: *l, psi_id: format!("psi{i}"), error, budget, quadrature_budget, ratio });
    }
    let bound_violations = match (frak_c, seminorm) {
        (Some(c), Some(s)) => rows.iter().filter(|r| r.error > c * s * r.lambda.powf(cfg.gamma) + r.budget).count(),
        _ => 0,
    };
    let envelope = level_maxima(rows.iter().map(|r| (r.lambda, r.error)));
    let degenerate = rows.iter().all(|r| r.error <= 2.0 * r.quadrature_budget);
    let model = if cfg.gamma == 0.0 { FitModel::Log } else { FitModel::Power };
    let enough = envelope.len() >= 4;
    let fit = if !degenerate && enough { Some(fit_exponent(&envelope, model)?) } else { None };
    let power_slope = if !degenerate && enough { Some(fit_exponent(&envelope, FitModel::Power)?.coefficient) } else { None };
    Ok(RateTable {
        model,
        fitted_slope: fit.as_ref().map(|f| f.coefficient),
        fitted_intercept: fit.as_ref().map(|f| f.intercept),
        r_squared: fit.as_ref().map(|f| f.r_squared),
        power_slope,
        degenerate,
        frak_c,
        coherence_seminorm: seminorm,
        worst_ratio: rows.iter().filter_map(|r| r.ratio).reduce(f64::max),
        bound_violations,
        max_budget: rows.iter().map(|r| r.budget).fold(0.0, f64::max),
        envelope,
        rows,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct UniquenessReport {
    pub discrepancy: f64,
    /// max over psi of the sum of both estimates' budgets
    pub combined_budget: f64,
    pub per_psi: Vec<(f64, f64)>,
}

/// Reconstructs F from two base test functions and compares the results.
pub fn uniqueness_check(
    f: &Germ,
    cfg: &ReconstructionConfig,
    phi_a: &TestFunction,
    phi_b: &TestFunction,
    psis: &[ScaledTestFunction],
) -> Result<UniquenessReport> {
    if cfg.gamma <= 0.0 {
        return Err(Error::Branch(format!("gamma = {} <= 0: the reconstruction is not unique", cfg.gamma)));
    }
    if psis.is_empty() {
        return Err(Error::InvalidInput("no test functions supplied".into()));
    }
    let ra = reconstruct(f, &cfg.with_phi(phi_a.clone()))?;
    let rb = reconstruct(f, &cfg.with_phi(phi_b.clone()))?;
    let mut per_psi = Vec::with_capacity(psis.len());
    for p in psis {
        let (a, b) = (ra.estimate(p)?, rb.estimate(p)?);
        per_psi.push(((a.value - b.value).abs(), a.budget + b.budget));
    }
    Ok(UniquenessReport {
        discrepancy: per_psi.iter().map(|v| v.0).fold(0.0, f64::max),
        combined_budget: per_psi.iter().map(|v| v.1).fold(0.0, f64::max),
        per_psi,
    })
}
