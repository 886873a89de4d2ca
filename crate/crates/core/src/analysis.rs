//! Sampled seminorms, regularity estimates and exponent fits.
//!
//! Every supremum here is a maximum over a documented sample set, hence a
//! lower bound of the true supremum; the sample set is reported alongside.

use crate::bump::{cr_norm, scale, ScaledTestFunction, TestFunction};
use crate::error::{Error, Result};
use crate::germs::Germ;
use crate::geom::{BoxDomain, Point};
use crate::multiscale::theorem_constants;
use crate::pairing::{pair, Distribution, QuadratureSpec};
use serde::Serialize;

/// Growth factor across `DIVERGENCE_SPAN` dyadic levels that counts as divergence.
pub const DIVERGENCE_FACTOR: f64 = 4.0;
pub const DIVERGENCE_SPAN: usize = 4;
/// Relative tolerance on the divergence threshold.
pub const DIVERGENCE_TOL: f64 = 0.025;
/// Values below this are floored in power fits.
pub const FIT_FLOOR: f64 = 1e-15;

/// Which (y, z, eps) triples a seminorm is sampled on.
#[derive(Clone, Debug, Serialize)]
pub struct Sampling {
    /// base points per axis on the box (corners included)
    pub points_per_axis: usize,
    /// eps = 2^{-k} for k in levels.0..=levels.1
    pub levels: (usize, usize),
    /// absolute separations |z - y|
    pub separations: Vec<f64>,
    /// separations as multiples of eps
    pub relative: Vec<f64>,
    pub max_sep: f64,
}

impl Sampling {
    pub fn default_for(dim: usize) -> Self {
        Sampling {
            points_per_axis: if dim == 1 { 9 } else { 5 },
            levels: (1, 8),
            separations: vec![2.0, 1.0, 0.5, 0.25, 0.125, 0.0625],
            relative: vec![0.5, 1.0, 2.0],
            max_sep: 2.0,
        }
    }

    /// Twice as many base points and separations, one more level.
    pub fn refined(&self) -> Self {
        let mut s = self.clone();
        s.points_per_axis = 2 * self.points_per_axis - 1;
        let mut seps = self.separations.clone();
        for w in self.separations.windows(2) {
            seps.push((w[0] * w[1]).sqrt());
        }
        s.separations = seps;
        s.relative = self.relative.iter().flat_map(|&r| [r, r * 1.5]).collect();
        s.levels = (self.levels.0, self.levels.1 + 1);
        s
    }

    pub fn epsilons(&self) -> Vec<f64> {
        (self.levels.0..=self.levels.1).map(|k| 2f64.powi(-(k as i32))).collect()
    }

    pub fn describe(&self) -> String {
        format!(
            "points_per_axis={} levels={}..={} separations={:?} relative={:?} max_sep={}",
            self.points_per_axis, self.levels.0, self.levels.1, self.separations, self.relative, self.max_sep
        )
    }

    fn directions(dim: usize) -> Vec<Point> {
        if dim == 1 {
            vec![Point::d1(1.0), Point::d1(-1.0)]
        } else {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            vec![Point::d2(1.0, 0.0), Point::d2(0.0, 1.0), Point::d2(-1.0, 0.0), Point::d2(0.0, -1.0), Point::d2(s, s), Point::d2(s, -s)]
        }
    }

    /// (y, z, eps) triples with y, z in K and |z - y| <= max_sep.
    pub fn triples(&self, k: &BoxDomain) -> Vec<(Point, Point, f64)> {
        let dirs = Self::directions(k.dim());
        let mut out = Vec::new();
        for y in k.grid(self.points_per_axis) {
            for eps in self.epsilons() {
                let seps = self.separations.iter().copied().chain(self.relative.iter().map(|r| r * eps));
                for s in seps {
                    if s > self.max_sep {
                        continue;
                    }
                    for e in &dirs {
                        let z = y.axpy(s, e);
                        if k.contains(&z) {
                            out.push((y, z, eps));
                        }
                    }
                }
            }
        }
        out
    }

    /// (x, eps) pairs.
    pub fn pairs(&self, k: &BoxDomain) -> Vec<(Point, f64)> {
        let eps = self.epsilons();
        k.grid(self.points_per_axis).into_iter().flat_map(|x| eps.iter().map(move |&e| (x, e))).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CoherenceRecord {
    pub y: Point,
    pub z: Point,
    pub eps: f64,
    pub value: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoherenceReport {
    pub seminorm: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub phi_id: String,
    pub grid: String,
    pub records: Vec<CoherenceRecord>,
    /// (eps, max ratio at that eps), eps decreasing
    pub per_level: Vec<(f64, f64)>,
    pub diverging: bool,
}

/// Whether the per-level maxima grow by at least the divergence factor over
/// the last `DIVERGENCE_SPAN` levels.
pub fn diverges(per_level: &[(f64, f64)]) -> bool {
    if per_level.len() <= DIVERGENCE_SPAN {
        return false;
    }
    let n = per_level.len();
    let (a, b) = (per_level[n - 1 - DIVERGENCE_SPAN].1, per_level[n - 1].1);
    a > 0.0 && b >= DIVERGENCE_FACTOR * (1.0 - DIVERGENCE_TOL) * a
}

pub(crate) fn level_maxima<'a>(items: impl Iterator<Item = (f64, f64)> + 'a) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (eps, r) in items {
        match out.iter_mut().find(|(e, _)| *e == eps) {
            Some(slot) => slot.1 = slot.1.max(r),
            None => out.push((eps, r)),
        }
    }
    out.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    out
}

fn check_alpha(alpha: f64, gamma: f64) -> Result<()> {
    if alpha > 0.0f64.min(gamma) {
        return Err(Error::Exponent(format!("alpha = {alpha} exceeds min(0, gamma = {gamma})")));
    }
    Ok(())
}

/// max |(F_z - F_y)(phi_y^eps)| / (eps^alpha (|z-y| + eps)^{gamma-alpha}) over the samples.
pub fn coherence_seminorm(
    f: &Germ,
    k: &BoxDomain,
    phi: &TestFunction,
    alpha: f64,
    gamma: f64,
    sampling: &Sampling,
    q: &QuadratureSpec,
) -> Result<CoherenceReport> {
    check_alpha(alpha, gamma)?;
    let triples = sampling.triples(k);
    let vals = crate::par::map(&triples, |(y, z, eps)| -> Result<CoherenceRecord> {
        let p = scale(phi, y, *eps)?;
        let v = f.diff(z, y, &p, q)?;
        let s = y.dist(z);
        let ratio = v.abs() / (eps.powf(alpha) * (s + eps).powf(gamma - alpha));
        Ok(CoherenceRecord { y: *y, z: *z, eps: *eps, value: v, ratio })
    });
    let records = vals.into_iter().collect::<Result<Vec<_>>>()?;
    if records.iter().any(|r| !r.ratio.is_finite()) {
        return Err(Error::InvalidInput("non-finite coherence ratio".into()));
    }
    let per_level = level_maxima(records.iter().map(|r| (r.eps, r.ratio)));
    Ok(CoherenceReport {
        seminorm: records.iter().fold(0.0, |m, r| m.max(r.ratio)),
        alpha,
        gamma,
        phi_id: phi.label().to_string(),
        grid: sampling.describe(),
        diverging: diverges(&per_level),
        per_level,
        records,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct HomogeneityReport {
    pub seminorm: f64,
    pub beta: f64,
    pub per_level: Vec<(f64, f64)>,
    pub diverging: bool,
    pub grid: String,
}

/// max |F_x(phi_x^eps)| / eps^beta over the samples.
pub fn homogeneity_seminorm(
    f: &Germ,
    k: &BoxDomain,
    phi: &TestFunction,
    beta: f64,
    sampling: &Sampling,
    q: &QuadratureSpec,
) -> Result<HomogeneityReport> {
    let pairs = sampling.pairs(k);
    let vals = crate::par::map(&pairs, |(x, eps)| -> Result<(f64, f64)> {
        Ok((*eps, f.eval(x, &scale(phi, x, *eps)?, q)?.abs() / eps.powf(beta)))
    });
    let vals = vals.into_iter().collect::<Result<Vec<_>>>()?;
    let per_level = level_maxima(vals.iter().copied());
    Ok(HomogeneityReport {
        seminorm: vals.iter().fold(0.0, |m, v| m.max(v.1)),
        beta,
        diverging: diverges(&per_level),
        per_level,
        grid: sampling.describe(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RsReport {
    pub constant: f64,
    pub per_level: Vec<(f64, f64)>,
    pub diverging: bool,
    /// number of exponents a < gamma in the sum
    pub terms: usize,
}

/// Smallest C with |(F_z - F_y)(phi_y^eps)| <= C sum_{a in A, a < gamma} eps^a |z-y|^{gamma-a}
/// on the samples (z != y).
pub fn rs_coherence_check(
    f: &Germ,
    a_set: &[f64],
    gamma: f64,
    phi: &TestFunction,
    k: &BoxDomain,
    sampling: &Sampling,
    q: &QuadratureSpec,
) -> Result<RsReport> {
    if a_set.is_empty() {
        return Err(Error::InvalidInput("the exponent set A is empty".into()));
    }
    let below: Vec<f64> = a_set.iter().copied().filter(|&a| a < gamma).collect();
    if below.is_empty() {
        return Err(Error::Exponent(format!("gamma = {gamma} must exceed min A")));
    }
    let triples: Vec<_> = sampling.triples(k).into_iter().filter(|(y, z, _)| y.dist(z) > 0.0).collect();
    let vals = crate::par::map(&triples, |(y, z, eps)| -> Result<(f64, f64)> {
        let v = f.diff(z, y, &scale(phi, y, *eps)?, q)?;
        let s = y.dist(z);
        let den: f64 = below.iter().map(|&a| eps.powf(a) * s.powf(gamma - a)).sum();
        Ok((*eps, v.abs() / den))
    });
    let vals = vals.into_iter().collect::<Result<Vec<_>>>()?;
    let per_level = level_maxima(vals.iter().copied());
    Ok(RsReport {
        constant: vals.iter().fold(0.0, |m, v| m.max(v.1)),
        diverging: diverges(&per_level),
        per_level,
        terms: below.len(),
    })
}

/// A distribution, given concretely or as a pairing oracle.
pub enum Target<'a> {
    Distribution(&'a Distribution),
    Oracle(&'a (dyn Fn(&ScaledTestFunction, &QuadratureSpec) -> Result<f64> + Sync)),
}

impl Target<'_> {
    fn pair(&self, psi: &ScaledTestFunction, q: &QuadratureSpec) -> Result<f64> {
        match self {
            Target::Distribution(t) => pair(t, psi, q),
            Target::Oracle(f) => f(psi, q),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NecessityReport {
    pub alpha: f64,
    /// measured constant of the hypothesis |(f - F_x)(psi_x^lambda)| <= C lambda^gamma
    pub hypothesis_constant: f64,
    /// false if a supplied C is below the measured one
    pub hypothesis_holds: bool,
    pub worst_ratio: f64,
    pub bound: f64,
    pub tuples: usize,
    pub hypothesis_samples: usize,
}

/// psi_y^lambda = xi_z^{lambda_1} with xi = psi_w^{lambda_2},
/// lambda_1 = |z-y| + lambda, lambda_2 = lambda/lambda_1, w = (y-z)/lambda_1.
pub fn recentered(psi: &TestFunction, y: &Point, z: &Point, lambda: f64) -> Result<(ScaledTestFunction, f64)> {
    let l1 = y.dist(z) + lambda;
    let w = (*y - *z) * (1.0 / l1);
    Ok((scale(psi, &w, lambda / l1)?, l1))
}

/// Two-stage check of the necessity of coherence: measure C in the
/// hypothesis, then the worst conclusion ratio with alpha = min(-r-d, gamma).
/// The recentered tuples the proof applies the hypothesis to are included in
/// the hypothesis samples.
#[allow(clippy::too_many_arguments)]
pub fn necessity_check(
    f: &Germ,
    target: Target<'_>,
    gamma: f64,
    r: usize,
    k: &BoxDomain,
    supplied_c: Option<f64>,
    sampling: &Sampling,
    psis: &[TestFunction],
    q: &QuadratureSpec,
) -> Result<NecessityReport> {
    if psis.is_empty() {
        return Err(Error::InvalidInput("no test functions supplied".into()));
    }
    let d = k.dim();
    let alpha = (-(r as f64) - d as f64).min(gamma);
    // conclusion tuples: |z-y| <= 1/2, lambda <= 1/2
    let mut sub = sampling.clone();
    sub.max_sep = sub.max_sep.min(0.5);
    sub.levels.0 = sub.levels.0.max(1);
    let mut tuples = Vec::new();
    for (y, z, lam) in sub.triples(k) {
        for (i, _) in psis.iter().enumerate() {
            tuples.push((y, z, lam, i));
        }
    }
    // hypothesis samples: (x, lambda, psi) on the grid plus recentered ones
    let mut hyp: Vec<(Point, ScaledTestFunction)> = Vec::new();
    for (x, lam) in sampling.pairs(k) {
        for p in psis {
            hyp.push((x, scale(p, &x, lam)?));
        }
    }
    hyp.push((k.center(), scale(&psis[0], &k.center(), 1.0)?));
    for (y, z, lam, i) in &tuples {
        if y.dist(z) == 0.0 {
            continue;
        }
        let (xi, l1) = recentered(&psis[*i], y, z, *lam)?;
        let n = cr_norm(&xi, r)?;
        let xi_tf = xi.to_test_function().scaled_by(1.0 / n);
        hyp.push((*z, scale(&xi_tf, z, l1)?));
    }
    let hyp_vals = crate::par::map(&hyp, |(x, p)| -> Result<f64> {
        let v = target.pair(p, q)? - f.eval(x, p, q)?;
        Ok(v.abs() / p.scale.powf(gamma))
    });
    let measured = hyp_vals.into_iter().collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
    let c = supplied_c.unwrap_or(measured);
    let conc = crate::par::map(&tuples, |(y, z, lam, i)| -> Result<f64> {
        let p = scale(&psis[*i], y, *lam)?;
        let v = f.diff(z, y, &p, q)?.abs();
        Ok(v / (lam.powf(alpha) * (y.dist(z) + lam).powf(gamma - alpha)))
    });
    let worst = conc.into_iter().collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
    Ok(NecessityReport {
        alpha,
        hypothesis_constant: measured,
        hypothesis_holds: c >= measured,
        worst_ratio: worst,
        bound: 2.0 * c,
        tuples: tuples.len(),
        hypothesis_samples: hyp.len(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct HolderEstimate {
    pub alpha: f64,
    pub r: usize,
    /// slope of log max_x |T(phi_x^eps)| against log eps
    pub exponent_fit: f64,
    pub r_squared: f64,
    /// sup |T(phi_x^eps)| / eps^alpha
    pub single_phi_sup: f64,
    pub single_phi_budget: f64,
    pub frak_b: f64,
    pub upgraded_bound: f64,
    /// sup over the sampled psi in B_r of |T(psi_x^eps)| / eps^alpha
    pub br_sampled_sup: f64,
    pub per_level: Vec<(f64, f64)>,
    pub diverging: bool,
    pub grid: String,
    /// finite dyadic ranges give heuristic, not certified, exponents
    pub heuristic: bool,
}

/// Negative Holder regularity of T on K from the single test function phi,
/// upgraded to the class B_r by the explicit constant, and compared with a
/// sampled sup over B_r. x ranges over K inflated by 2.
#[allow(clippy::too_many_arguments)]
pub fn holder_estimate(
    t: Target<'_>,
    alpha: f64,
    k: &BoxDomain,
    phi: &TestFunction,
    r_alpha: Option<usize>,
    sampling: &Sampling,
    psis: &[TestFunction],
    q: &QuadratureSpec,
) -> Result<HolderEstimate> {
    if alpha > 0.0 {
        return Err(Error::Exponent(format!("alpha = {alpha} > 0: use the positive Holder norm")));
    }
    let r = r_alpha.unwrap_or((-alpha).floor() as usize + 1);
    if (r as f64) <= -alpha {
        return Err(Error::Config(format!("r = {r} must exceed -alpha = {}", -alpha)));
    }
    let kk = k.inflate(2.0);
    let pairs = sampling.pairs(&kk);
    let eval = |q: &QuadratureSpec| -> Result<Vec<(f64, f64)>> {
        crate::par::map(&pairs, |(x, eps)| -> Result<(f64, f64)> { Ok((*eps, t.pair(&scale(phi, x, *eps)?, q)?.abs())) })
            .into_iter()
            .collect()
    };
    let coarse = eval(q)?;
    let fine = eval(&q.refined())?;
    let envelope = level_maxima(fine.iter().copied());
    let fit = fit_exponent(&envelope, FitModel::Power)?;
    let mut sup = 0.0f64;
    let mut budget = 0.0f64;
    for ((e, a), (_, b)) in coarse.iter().zip(&fine) {
        sup = sup.max(b / e.powf(alpha));
        budget = budget.max((a - b).abs() / e.powf(alpha));
    }
    let per_level = level_maxima(fine.iter().map(|(e, v)| (*e, v / e.powf(alpha))));
    let consts = theorem_constants(alpha, alpha, alpha.min(0.0) - 1.0, r, k.dim(), phi)?;
    let mut br = 0.0f64;
    for p in psis {
        let vals = crate::par::map(&pairs, |(x, eps)| -> Result<f64> { Ok(t.pair(&scale(p, x, *eps)?, q)?.abs() / eps.powf(alpha)) });
        for v in vals {
            br = br.max(v?);
        }
    }
    Ok(HolderEstimate {
        alpha,
        r,
        exponent_fit: fit.coefficient,
        r_squared: fit.r_squared,
        single_phi_sup: sup,
        single_phi_budget: budget,
        frak_b: consts.frak_b,
        upgraded_bound: consts.frak_b * sup,
        br_sampled_sup: br,
        diverging: diverges(&per_level),
        per_level,
        grid: sampling.describe(),
        heuristic: true,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct EnhancedReport {
    pub single_phi_constant: f64,
    pub worst_constant: f64,
    pub ratio: f64,
    pub frak_b: f64,
}

/// Coherence uniformly over sampled psi in B_r on the samples of `coh`.
pub fn enhanced_coherence_check(
    f: &Germ,
    coh: &CoherenceReport,
    r: usize,
    psis: &[TestFunction],
    phi: &TestFunction,
    q: &QuadratureSpec,
) -> Result<EnhancedReport> {
    let (alpha, gamma) = (coh.alpha, coh.gamma);
    let mut worst = 0.0f64;
    for p in psis {
        let vals = crate::par::map(&coh.records, |rec| -> Result<f64> {
            let v = f.diff(&rec.z, &rec.y, &scale(p, &rec.y, rec.eps)?, q)?;
            Ok(v.abs() / (rec.eps.powf(alpha) * (rec.y.dist(&rec.z) + rec.eps).powf(gamma - alpha)))
        });
        for v in vals {
            worst = worst.max(v?);
        }
    }
    let b = theorem_constants(alpha, alpha, gamma, r, phi.dim(), phi)?.frak_b;
    let ratio = if coh.seminorm > 0.0 { worst / coh.seminorm } else if worst == 0.0 { 0.0 } else { f64::INFINITY };
    Ok(EnhancedReport { single_phi_constant: coh.seminorm, worst_constant: worst, ratio, frak_b: b })
}

/// max |F_x(psi_x^eps)| / eps^beta over sampled psi.
pub fn enhanced_homogeneity(
    f: &Germ,
    k: &BoxDomain,
    beta: f64,
    psis: &[TestFunction],
    sampling: &Sampling,
    q: &QuadratureSpec,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for p in psis {
        worst = worst.max(homogeneity_seminorm(f, k, p, beta, sampling, q)?.seminorm);
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FitModel {
    /// log|v| = c log(scale) + a
    Power,
    /// |v| = b log(1/scale) + a
    Log,
}

#[derive(Clone, Debug, Serialize)]
pub struct Fit {
    pub coefficient: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub floored: bool,
}

/// Least squares fit of (scale, value) records; scales must be dyadic.
pub fn fit_exponent(records: &[(f64, f64)], model: FitModel) -> Result<Fit> {
    if records.len() < 4 {
        return Err(Error::InvalidInput(format!("need at least 4 records, got {}", records.len())));
    }
    for (s, _) in records {
        let l = s.log2();
        if !(*s > 0.0) || (l - l.round()).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("scale {s} is not dyadic")));
        }
    }
    let mut floored = false;
    let pts: Vec<(f64, f64)> = records
        .iter()
        .map(|&(s, v)| match model {
            FitModel::Power => {
                let a = v.abs();
                if a < FIT_FLOOR {
                    floored = true;
                }
                (s.ln(), a.max(FIT_FLOOR).ln())
            }
            FitModel::Log => ((1.0 / s).ln(), v.abs()),
        })
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(Fit { coefficient: slope, intercept, r_squared, floored })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bump::{make_standard_bump, sample_br};
    use crate::functions::cos;
    use crate::germs::{constant_germ, log_germ, taylor_germ};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn q() -> QuadratureSpec {
        QuadratureSpec::default_for(1)
    }

    #[test]
    fn fits() {
        let p: Vec<(f64, f64)> = (1..10).map(|k| (2f64.powi(-k), 2f64.powf(-0.7 * k as f64))).collect();
        let f = fit_exponent(&p, FitModel::Power).unwrap();
        assert!((f.coefficient - 0.7).abs() < 1e-6 && (f.r_squared - 1.0).abs() < 1e-12);
        let l: Vec<(f64, f64)> = (1..10).map(|k| (2f64.powi(-k), k as f64 * 2f64.ln())).collect();
        assert!((fit_exponent(&l, FitModel::Log).unwrap().coefficient - 1.0).abs() < 1e-6);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n: Vec<(f64, f64)> =
            (1..12).map(|k| (2f64.powi(-k), 2f64.powf(-0.7 * k as f64) * (1.0 + rng.gen_range(-0.05..0.05)))).collect();
        assert!((fit_exponent(&n, FitModel::Power).unwrap().coefficient - 0.7).abs() < 0.1);
        assert!(fit_exponent(&p[..3], FitModel::Power).is_err());
        assert!(fit_exponent(&[(0.3, 1.0), (0.2, 1.0), (0.1, 1.0), (0.05, 1.0)], FitModel::Power).is_err());
        let z: Vec<(f64, f64)> = (1..6).map(|k| (2f64.powi(-k), 0.0)).collect();
        assert!(fit_exponent(&z, FitModel::Power).unwrap().floored);
    }

    #[test]
    fn constant_germ_has_zero_coherence() {
        let g = constant_germ(Distribution::density(1, |p| p.get(0).cos(), "cos"));
        let b = make_standard_bump(1).unwrap();
        let rep = coherence_seminorm(&g, &BoxDomain::unit(1), &b, -0.5, 1.0, &Sampling::default_for(1), &q()).unwrap();
        assert_eq!(rep.seminorm, 0.0);
        let rs = rs_coherence_check(&g, &[0.0, 1.0], 1.5, &b, &BoxDomain::unit(1), &Sampling::default_for(1), &q()).unwrap();
        assert_eq!(rs.constant, 0.0);
    }

    #[test]
    fn taylor_coherence_is_stable_and_misdeclared_diverges() {
        let g = taylor_germ(cos(1), 2.5).unwrap();
        let b = make_standard_bump(1).unwrap();
        let k = BoxDomain::unit(1);
        let s = Sampling::default_for(1);
        let a = coherence_seminorm(&g, &k, &b, 0.0, 2.5, &s, &q()).unwrap();
        let c = coherence_seminorm(&g, &k, &b, 0.0, 2.5, &s.refined(), &q()).unwrap();
        assert!(a.seminorm > 0.0 && a.seminorm.is_finite());
        assert!((c.seminorm - a.seminorm).abs() < 0.2 * a.seminorm);
        assert!(!a.diverging);
        // the order-2 Taylor germ of cos is in fact (0,3)-coherent; gamma' = 4 is not
        let three = coherence_seminorm(&g, &k, &b, 0.0, 3.0, &s, &q()).unwrap();
        assert!(!three.diverging);
        let four = coherence_seminorm(&g, &k, &b, 0.0, 4.0, &s, &q()).unwrap();
        assert!(four.diverging);
        let lv = &four.per_level;
        let at = |e: f64| lv.iter().find(|(x, _)| *x == e).unwrap().1;
        assert!(at(2f64.powi(-8)) >= 4.0 * at(2f64.powi(-4)));
    }

    #[test]
    fn rs_constant_dominates_seminorm() {
        let g = taylor_germ(cos(1), 2.5).unwrap();
        let b = make_standard_bump(1).unwrap();
        let k = BoxDomain::unit(1);
        let s = Sampling::default_for(1);
        let rs = rs_coherence_check(&g, &[0.0, 1.0, 2.0], 2.5, &b, &k, &s, &q()).unwrap();
        assert!(rs.constant.is_finite() && rs.constant > 0.0);
        let coh = coherence_seminorm(&g, &k, &b, 0.0, 2.5, &s, &q()).unwrap();
        assert!(coh.seminorm <= rs.constant * rs.terms as f64 * (1.0 + 1e-9));
        assert!(rs_coherence_check(&g, &[], 2.5, &b, &k, &s, &q()).is_err());
    }

    #[test]
    fn homogeneity_of_singular_constant_germ() {
        let t = Distribution::singular_density(1, |p| p.get(0).abs().powf(-0.5), Point::d1(0.0), "|y|^-1/2");
        let g = constant_germ(t);
        let b = make_standard_bump(1).unwrap();
        let k = BoxDomain::unit(1);
        let mut s = Sampling::default_for(1);
        s.levels = (1, 10);
        let at = homogeneity_seminorm(&g, &k, &b, -0.5, &s, &q()).unwrap();
        assert!(at.seminorm.is_finite() && !at.diverging);
        let over = homogeneity_seminorm(&g, &k, &b, -0.4, &s, &q()).unwrap();
        let under = homogeneity_seminorm(&g, &k, &b, -0.6, &s, &q()).unwrap();
        let last = |r: &HomogeneityReport| r.per_level.last().unwrap().1 / r.per_level[r.per_level.len() - 5].1;
        assert!(last(&over) > 1.0 && last(&under) < 1.0);
        let lg = homogeneity_seminorm(&log_germ(1).unwrap(), &k, &b, -0.1, &Sampling::default_for(1), &q()).unwrap();
        assert!(lg.seminorm.is_finite() && !lg.diverging);
    }

    #[test]
    fn recentering_identity() {
        let psi = &sample_br(2, 1, 1, 9).unwrap()[0];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let y = Point::d1(rng.gen_range(-0.5..0.5));
            let z = Point::d1(y.get(0) + rng.gen_range(-0.5..0.5));
            let lam = rng.gen_range(0.01..0.5);
            let (xi, l1) = recentered(psi, &y, &z, lam).unwrap();
            let lhs = scale(psi, &y, lam).unwrap();
            let rhs = xi.rescale(&z, l1).unwrap();
            for j in 0..50 {
                let p = Point::d1(y.get(0) - lam + 2.0 * lam * j as f64 / 49.0);
                assert!((lhs.eval(&p) - rhs.eval(&p)).abs() < 1e-9 * (1.0 + lhs.eval(&p).abs()));
            }
        }
    }

    #[test]
    fn necessity_on_constant_and_taylor() {
        let psis = sample_br(1, 1, 2, 4).unwrap();
        let k = BoxDomain::unit(1);
        let mut s = Sampling::default_for(1);
        s.points_per_axis = 3;
        s.levels = (1, 4);
        let t = Distribution::density(1, |p| p.get(0).cos(), "cos");
        let g = constant_germ(t.clone());
        let rep = necessity_check(&g, Target::Distribution(&t), 1.0, 1, &k, None, &s, &psis, &q()).unwrap();
        assert!(rep.hypothesis_constant < 1e-9 && rep.worst_ratio < 1e-9);
        let tg = taylor_germ(cos(1), 2.5).unwrap();
        let rep = necessity_check(&tg, Target::Distribution(&t), 2.5, 1, &k, None, &s, &psis, &q()).unwrap();
        assert!(rep.worst_ratio <= rep.bound * 1.1, "{rep:?}");
        assert_eq!(rep.alpha, -2.0);
    }

    #[test]
    fn holder_of_delta_and_unit_density() {
        let b = make_standard_bump(1).unwrap();
        let k = BoxDomain::cube(1, 0.5);
        let mut s = Sampling::default_for(1);
        s.points_per_axis = 9;
        s.levels = (2, 9);
        let psis = sample_br(1, 1, 2, 1).unwrap();
        let d = Distribution::point_mass(Point::d1(0.0), 1.0);
        let h = holder_estimate(Target::Distribution(&d), -1.0, &k, &b, None, &s, &psis, &q()).unwrap();
        assert!((h.exponent_fit + 1.0).abs() < 0.05, "{h:?}");
        assert!(h.br_sampled_sup <= h.upgraded_bound);
        assert!(!h.diverging);
        let h = holder_estimate(Target::Distribution(&d), -0.5, &k, &b, None, &s, &psis, &q()).unwrap();
        assert!(h.diverging);
        let one = Distribution::density(1, |_| 1.0, "one");
        let h = holder_estimate(Target::Distribution(&one), 0.0, &k, &b, None, &s, &psis, &q()).unwrap();
        assert!(h.exponent_fit.abs() < 0.05 && (h.single_phi_sup - 1.0).abs() < 1e-6);
        assert!(holder_estimate(Target::Distribution(&one), 0.5, &k, &b, None, &s, &psis, &q()).is_err());
    }
}
