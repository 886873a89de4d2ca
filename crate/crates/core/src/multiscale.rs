//! Tweaked test functions, the mollifier cascade and the constants of the
//! reconstruction bounds.

use crate::bump::{ConvAtom, Term, TestFunction};
use crate::error::{Error, Result};
use crate::geom::{tensor, MultiIndex, Point};
use crate::pairing::{QuadratureSpec, ROUNDOFF};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::f64::consts::E;
use std::sync::Arc;

/// Resolution of the one-off quadratures (integrals, moments, L1 norms) of
/// the cascade functions.
pub const KIT_PPA_1D: usize = 256;
pub const KIT_PPA_2D: usize = 128;
/// Inner quadrature of the materialised convolution rho.
pub const RHO_INNER_1D: usize = 256;
pub const RHO_INNER_2D: usize = 64;
/// Deepest ladder level the z-grids can resolve (see `integrate_against`).
pub const MAX_LEVEL_1D: usize = 16;
pub const MAX_LEVEL_2D: usize = 9;

pub fn default_nmax(dim: usize) -> usize {
    if dim == 1 {
        10
    } else {
        7
    }
}

pub fn kit_ppa(dim: usize) -> usize {
    if dim == 1 {
        KIT_PPA_1D
    } else {
        KIT_PPA_2D
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TweakCoefficients {
    pub r: usize,
    pub lambdas: Vec<f64>,
    pub coeffs: Vec<f64>,
    /// |sum c_i lambda_i^n - delta_{n0}| for n = 0..r-1
    pub residuals: Vec<f64>,
    /// max |c_closed - c_solve| against a generic linear solve
    pub solve_gap: f64,
}

impl TweakCoefficients {
    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

/// lambda_i = 2^{-i-1}/(1+R), c_i = prod_{k != i} lambda_k/(lambda_k - lambda_i).
pub fn tweak_coefficients(r: usize, r_phi: f64) -> Result<TweakCoefficients> {
    if r == 0 {
        return Err(Error::InvalidOrder("r must be at least 1".into()));
    }
    if !(r_phi > 0.0) {
        return Err(Error::InvalidScale(r_phi));
    }
    let lambdas: Vec<f64> = (0..r).map(|i| 2f64.powi(-(i as i32) - 1) / (1.0 + r_phi)).collect();
    let coeffs: Vec<f64> = (0..r)
        .map(|i| {
            (0..r).filter(|&k| k != i).map(|k| lambdas[k] / (lambdas[k] - lambdas[i])).product::<f64>()
        })
        .collect();
    let residuals = (0..r)
        .map(|n| {
            let s: f64 = coeffs.iter().zip(&lambdas).map(|(c, l)| c * l.powi(n as i32)).sum();
            (s - if n == 0 { 1.0 } else { 0.0 }).abs()
        })
        .collect();
    let solved = vandermonde_solve(&lambdas)?;
    let solve_gap = coeffs.iter().zip(&solved).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(TweakCoefficients { r, lambdas, coeffs, residuals, solve_gap })
}

/// Solve sum_i c_i lambda_i^n = delta_{n0}, n < r, by LU.
pub fn vandermonde_solve(lambdas: &[f64]) -> Result<Vec<f64>> {
    let r = lambdas.len();
    let m = DMatrix::from_fn(r, r, |n, i| lambdas[i].powi(n as i32));
    let mut rhs = DVector::zeros(r);
    rhs[0] = 1.0;
    m.lu()
        .solve(&rhs)
        .map(|v| v.iter().copied().collect())
        .ok_or_else(|| Error::InvalidInput("singular Vandermonde system".into()))
}

/// phi_hat, chi_check, rho and the dyadic ladder for a base test function phi.
#[derive(Clone, Debug)]
pub struct CascadeKit {
    pub phi: TestFunction,
    pub r: usize,
    pub n_max: usize,
    pub tweak: TweakCoefficients,
    pub phi_integral: f64,
    pub phi_l1: f64,
    pub phi_hat: TestFunction,
    pub chi_check: TestFunction,
    pub rho: TestFunction,
    pub eps_ladder: Vec<f64>,
    pub phi_hat_l1: f64,
    pub chi_check_l1: f64,
    pub rho_integral: f64,
}

impl CascadeKit {
    pub fn dim(&self) -> usize {
        self.phi.dim()
    }

    /// eps_k = 2^{-k}
    pub fn eps(&self, k: usize) -> f64 {
        2f64.powi(-(k as i32))
    }

    /// The bound e^2 r |int phi|^{-1} ||phi||_{L1} on ||phi_hat||_{L1}.
    pub fn phi_hat_l1_bound(&self) -> f64 {
        E * E * self.r as f64 / self.phi_integral.abs() * self.phi_l1
    }

    /// int z^k phi_hat - delta_{k0} for 0 <= |k| <= r-1.
    pub fn phi_hat_moment_residuals(&self) -> Vec<(MultiIndex, f64)> {
        let ppa = kit_ppa(self.dim());
        MultiIndex::up_to(self.dim(), self.r - 1)
            .into_iter()
            .map(|k| {
                let m = self.phi_hat.moment(ppa, &k);
                (k, if k.order() == 0 { m - 1.0 } else { m })
            })
            .collect()
    }

    /// int z^k chi_check for 0 <= |k| <= r-1.
    pub fn chi_check_moments(&self) -> Vec<(MultiIndex, f64)> {
        let ppa = kit_ppa(self.dim());
        MultiIndex::up_to(self.dim(), self.r - 1).into_iter().map(|k| (k, self.chi_check.moment(ppa, &k))).collect()
    }
}

/// phi^s * phi^t as one term: the wider factor is evaluated pointwise, the
/// narrower one supplies the quadrature nodes.
fn conv_term(phi: &TestFunction, coef: f64, s: f64, t: f64, inner: usize) -> Result<Term> {
    let (wide, narrow) = if s >= t { (s, t) } else { (t, s) };
    let g = phi.rescaled(&Point::zero(phi.dim()), narrow / wide)?;
    Ok(Term { coef, scale: wide, shift: Point::zero(phi.dim()), weight: None, atom: Arc::new(ConvAtom::new(phi.clone(), g, inner)) })
}

pub fn build_cascade(phi: &TestFunction, r: usize, n_max: usize) -> Result<CascadeKit> {
    let d = phi.dim();
    let ppa = kit_ppa(d);
    if n_max == 0 {
        return Err(Error::InvalidInput("N_max must be positive".into()));
    }
    let cap = if d == 1 { MAX_LEVEL_1D } else { MAX_LEVEL_2D };
    if n_max > cap {
        return Err(Error::Resolution(format!("N_max = {n_max} exceeds the resolvable depth {cap} in dimension {d}")));
    }
    let integral = phi.integral(ppa);
    if integral.abs() <= 1e-6 {
        return Err(Error::DegenerateTestFunction(integral));
    }
    let tweak = tweak_coefficients(r, phi.support_radius())?;
    let zero = Point::zero(d);
    let a: Vec<f64> = tweak.coeffs.iter().map(|c| c / integral).collect();
    let scaled = tweak.lambdas.iter().map(|&l| phi.rescaled(&zero, l)).collect::<Result<Vec<_>>>()?;
    let parts: Vec<(f64, &TestFunction)> = a.iter().copied().zip(scaled.iter()).collect();
    let phi_hat = TestFunction::combine(&parts, format!("hat({})", phi.label()))?;
    let chi_check = TestFunction::combine(
        &[(1.0, &phi_hat.rescaled(&zero, 0.5)?), (-1.0, &phi_hat.rescaled(&zero, 2.0)?)],
        format!("check({})", phi.label()),
    )?;
    let inner = if d == 1 { RHO_INNER_1D } else { RHO_INNER_2D };
    let mut terms = Vec::with_capacity(r * r);
    for (i, &li) in tweak.lambdas.iter().enumerate() {
        for (j, &lj) in tweak.lambdas.iter().enumerate() {
            terms.push(conv_term(phi, a[i] * a[j], 2.0 * li, lj, inner)?);
        }
    }
    let rho = TestFunction::from_terms(d, terms, format!("rho({})", phi.label()))?;
    let rho_ppa = if d == 1 { KIT_PPA_1D } else { 32 };
    Ok(CascadeKit {
        phi: phi.clone(),
        r,
        n_max,
        phi_integral: integral,
        phi_l1: phi.l1_norm(ppa * 4),
        phi_hat_l1: phi_hat.l1_norm(ppa * 4),
        chi_check_l1: chi_check.l1_norm(ppa * 4),
        rho_integral: rho.integral(rho_ppa),
        eps_ladder: (1..=n_max).map(|k| 2f64.powi(-(k as i32))).collect(),
        tweak,
        phi_hat,
        chi_check,
        rho,
    })
}

/// (f^a * g^b)(z) with the node set of g at resolution ppa.
fn conv_at(f: &TestFunction, a: f64, g: &TestFunction, b: f64, z: &Point, ppa: usize) -> f64 {
    let d = z.dim() as i32;
    let rule = g.rule(ppa, &MultiIndex::zero(g.dim()));
    let pre = a.powi(-d);
    rule.nodes.iter().zip(&rule.weights).map(|(u, w)| w * pre * f.eval(&((*z - *u * b) * (1.0 / a)))).sum()
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityCheck {
    pub k: usize,
    /// the sides are evaluated at twice this resolution, the budget compares both
    pub points_per_axis: usize,
    /// max_z |(rho^{eps_{k+1}} - rho^{eps_k})(z) - (phi_hat^{eps_k} * chi_check^{eps_k})(z)|
    pub discrepancy: f64,
    /// refinement estimate of the error of both sides
    pub budget: f64,
    /// max_z |rho^{eps_{k+1}}(z)|
    pub scale: f64,
    /// the same left side read from the materialised rho
    pub materialized_gap: f64,
}

/// Check rho^{eps_{k+1}} - rho^{eps_k} = phi_hat^{eps_k} * chi_check^{eps_k} on a grid,
/// each side by its own quadrature.
pub fn dyadic_identity_check(kit: &CascadeKit, k: usize, q: &QuadratureSpec) -> Result<IdentityCheck> {
    if k == 0 || k >= kit.n_max {
        return Err(Error::InvalidInput(format!("k = {k} must lie in 1..N_max = {}", kit.n_max)));
    }
    let d = kit.dim();
    let eps = kit.eps(k);
    let reach = kit.rho.support_radius() * eps * 1.05;
    let n = if d == 1 { 257 } else { 25 };
    let axis: Vec<f64> = (0..n).map(|j| -reach + 2.0 * reach * j as f64 / (n - 1) as f64).collect();
    let zs = tensor(d, &axis, &axis);
    let (ph, ch) = (&kit.phi_hat, &kit.chi_check);
    let sides = |ppa: usize| -> Vec<(f64, f64)> {
        crate::par::map(&zs, |z| {
            let fine = conv_at(ph, eps, ph, eps / 2.0, z, ppa);
            let coarse = conv_at(ph, 2.0 * eps, ph, eps, z, ppa);
            (fine - coarse, conv_at(ph, eps, ch, eps, z, ppa))
        })
    };
    let a = sides(q.ppa());
    let b = sides(q.refined().ppa());
    let mut disc = 0.0f64;
    let (mut bl, mut br) = (0.0f64, 0.0f64);
    let mut sc = 0.0f64;
    let mut mat = 0.0f64;
    let dd = d as i32;
    for (i, z) in zs.iter().enumerate() {
        disc = disc.max((b[i].0 - b[i].1).abs());
        bl = bl.max((a[i].0 - b[i].0).abs());
        br = br.max((a[i].1 - b[i].1).abs());
        let r_fine = (eps / 2.0).powi(-dd) * kit.rho.eval(&(*z * (2.0 / eps)));
        let r_coarse = eps.powi(-dd) * kit.rho.eval(&(*z * (1.0 / eps)));
        sc = sc.max(r_fine.abs());
        mat = mat.max((r_fine - r_coarse - b[i].0).abs());
    }
    Ok(IdentityCheck {
        k,
        points_per_axis: q.ppa(),
        discrepancy: disc,
        budget: bl + br + ROUNDOFF * (1.0 + sc),
        scale: sc,
        materialized_gap: mat,
    })
}

/// The explicit constants of the reconstruction bound and of the single test
/// function Holder criterion.
#[derive(Clone, Debug, Serialize)]
pub struct TheoremConstants {
    pub frak_c: f64,
    pub frak_b: f64,
    /// gamma <= 0: the localisation factor of the global construction is not
    /// included, since the artifact works on one box with global exponents.
    pub localisation_factor_omitted: bool,
}

pub fn theorem_constants(alpha: f64, beta: f64, gamma: f64, r: usize, dim: usize, phi: &TestFunction) -> Result<TheoremConstants> {
    if alpha > 0.0 {
        return Err(Error::Exponent(format!("alpha = {alpha} must be nonpositive")));
    }
    let rf = r as f64;
    if !(rf > (-alpha).max(-beta)) {
        return Err(Error::Config(format!("r = {r} must exceed max(-alpha, -beta) = {}", (-alpha).max(-beta))));
    }
    crate::geom::check_dim(dim)?;
    let ppa = kit_ppa(dim);
    let integral = phi.integral(ppa);
    if integral.abs() <= 1e-6 {
        return Err(Error::DegenerateTestFunction(integral));
    }
    let l1 = phi.l1_norm(ppa * 4);
    let rp = phi.support_radius();
    let d = dim as f64;
    let common = rf * rf * 2f64.powf(-(rf + 1.0) * alpha) * l1 * (1.0 + rp).powf(-alpha) / (integral * integral);
    let frak_c = if gamma > 0.0 {
        common * 4f64.powf(d + gamma - alpha + 6.0) / (1.0 - 2f64.powf(-gamma.min(alpha + rf)))
    } else if gamma < 0.0 {
        common * 4f64.powf(d + gamma - alpha + 6.0) / (1.0 - 2f64.powf(-(alpha + rf).min(-gamma)))
    } else {
        common * 4f64.powf(d - alpha + 6.0) / (1.0 - 2f64.powf(-alpha - rf))
    };
    let frak_b = 4f64.powf(d - alpha + 1.0) * E.powi(4) * 2f64.powf(-alpha * (rf + 1.0)) * rf * rf
        / (1.0 - 2f64.powf(-alpha - rf))
        * (1.0 + rp).powf(-alpha)
        * l1
        / (integral * integral);
    Ok(TheoremConstants { frak_c, frak_b, localisation_factor_omitted: gamma <= 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bump::make_standard_bump;

    #[test]
    fn closed_form_coefficients() {
        let t = tweak_coefficients(1, 1.0).unwrap();
        assert_eq!(t.coeffs, vec![1.0]);
        let t = tweak_coefficients(2, 1.0).unwrap();
        assert_eq!(t.lambdas, vec![0.25, 0.125]);
        assert!((t.coeffs[0] + 1.0).abs() < 1e-14 && (t.coeffs[1] - 2.0).abs() < 1e-14);
        let t = tweak_coefficients(3, 1.0).unwrap();
        for (c, w) in t.coeffs.iter().zip([1.0 / 3.0, -2.0, 8.0 / 3.0]) {
            assert!((c - w).abs() < 1e-13);
        }
        assert!(tweak_coefficients(0, 1.0).is_err());
    }

    #[test]
    fn vandermonde_agreement_and_bound() {
        for r in 1..=8 {
            let t = tweak_coefficients(r, 0.7).unwrap();
            assert!(t.max_abs_coeff() <= E * E, "r={r}");
            if r <= 5 {
                assert!(t.residuals.iter().all(|&x| x < 1e-10), "r={r}: {:?}", t.residuals);
                assert!(t.solve_gap < 1e-10, "r={r}: {}", t.solve_gap);
            }
        }
    }

    #[test]
    fn cascade_moments_and_supports() {
        for r in 1..=3 {
            let kit = build_cascade(&make_standard_bump(1).unwrap(), r, 6).unwrap();
            assert!(kit.phi_hat.support_radius() <= 0.5);
            assert!(kit.chi_check.support_radius() <= 1.0);
            for (_, m) in kit.phi_hat_moment_residuals() {
                assert!(m.abs() < 1e-6);
            }
            for (_, m) in kit.chi_check_moments() {
                assert!(m.abs() < 1e-6);
            }
            assert!((kit.rho_integral - 1.0).abs() < 1e-4);
            assert!(kit.phi_hat_l1 <= kit.phi_hat_l1_bound());
        }
    }

    #[test]
    fn rho_is_the_convolution() {
        let kit = build_cascade(&make_standard_bump(1).unwrap(), 2, 4).unwrap();
        let two = kit.phi_hat.rescaled(&Point::d1(0.0), 2.0).unwrap();
        for &z in &[0.0, 0.1, -0.33, 0.6] {
            let p = Point::d1(z);
            let direct = conv_at(&two, 1.0, &kit.phi_hat, 1.0, &p, 256);
            assert!((kit.rho.eval(&p) - direct).abs() < 1e-8 * (1.0 + direct.abs()), "z={z}");
        }
    }

    #[test]
    fn dyadic_identity_holds_and_refines() {
        let kit = build_cascade(&make_standard_bump(1).unwrap(), 2, 6).unwrap();
        let q = QuadratureSpec::new(32).unwrap();
        let c = dyadic_identity_check(&kit, 1, &q).unwrap();
        assert!(c.discrepancy <= c.budget, "{c:?}");
        assert!(c.discrepancy < 1e-3 * c.scale);
        let c2 = dyadic_identity_check(&kit, 1, &q.refined()).unwrap();
        assert!(c.discrepancy >= 3.0 * c2.discrepancy, "{c:?} {c2:?}");
        assert!(c.materialized_gap < 1e-6 * c.scale);
    }

    #[test]
    fn two_dimensional_cascade() {
        let kit = build_cascade(&make_standard_bump(2).unwrap(), 2, 4).unwrap();
        for (_, m) in kit.phi_hat_moment_residuals() {
            assert!(m.abs() < 1e-6);
        }
        assert!((kit.rho_integral - 1.0).abs() < 1e-4, "{}", kit.rho_integral);
    }

    #[test]
    fn degenerate_and_too_deep() {
        let b = make_standard_bump(1).unwrap();
        let odd = b.times_poly(&crate::geom::Poly::new(1, vec![(MultiIndex::new(&[1]), 1.0)]));
        assert!(matches!(build_cascade(&odd, 2, 4), Err(Error::DegenerateTestFunction(_))));
        assert!(matches!(build_cascade(&b, 2, 40), Err(Error::Resolution(_))));
    }

    #[test]
    fn constants() {
        let b = make_standard_bump(1).unwrap();
        let t = theorem_constants(0.0, 0.0, 1.0, 1, 1, &b).unwrap();
        let l1 = b.l1_norm(1024);
        assert!((t.frak_b - 32.0 * E.powi(4) * l1).abs() < 1e-9 * t.frak_b);
        let c: Vec<f64> = [-0.2, -0.5, -1.0].iter().map(|&a| theorem_constants(a, 0.0, 1.5, 2, 1, &b).unwrap().frak_c).collect();
        assert!(c[0] < c[1] && c[1] < c[2]);
        assert!(theorem_constants(-1.5, 0.0, 1.0, 1, 1, &b).is_err());
        assert!(theorem_constants(-0.5, -0.1, 0.0, 1, 1, &b).unwrap().localisation_factor_omitted);
    }
}
