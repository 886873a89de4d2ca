//! Acceptance run: one PASS/FAIL line per criterion, tolerances pinned below.
//! Runs without the libtest harness so the lines always reach stdout.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use recon_core::analysis::{holder_estimate, necessity_check, Sampling, Target};
use recon_core::bump::{make_squared_bump, make_standard_bump, sample_br, scale, ScaledTestFunction, TestFunction};
use recon_core::functions::{cos, weierstrass, weierstrass_wavelength};
use recon_core::germs::{constant_germ, log_germ, taylor_germ};
use recon_core::multiscale::{build_cascade, dyadic_identity_check, tweak_coefficients};
use recon_core::pairing::{pair, Distribution, QuadratureSpec};
use recon_core::reconstruction::{rate_certificate, reconstruct, uniqueness_check, ReconstructionConfig};
use recon_core::young::{young_product, young_rate_check};
use recon_core::{BoxDomain, MultiIndex, Point, Result};
use std::time::{Duration, Instant};

const MOMENT_TOL: f64 = 1e-6;
const TWEAK_SECONDS: f64 = 10.0;
const TAYLOR_TOL: f64 = 1e-3;
const TAYLOR_SLOPE: f64 = 2.3;
const TAYLOR_SECONDS: f64 = 120.0;
const CONSTANT_BUDGET_FACTOR: f64 = 2.0;
const LOG_R2: f64 = 0.95;
const LOG_POWER_FLOOR: f64 = -0.05;
const UNIQUENESS_FACTOR: f64 = 5.0;
const NECESSITY_TUPLES: usize = 500;
const NECESSITY_SLACK: f64 = 1.1;
const DELTA_EXPONENT: (f64, f64) = (-1.0, 0.05);
const DW_EXPONENT: (f64, f64) = (-0.3, 0.1);
const BR_SLACK: f64 = 1.5;
const YOUNG_SMOOTH_FACTOR: f64 = 3.0;
const YOUNG_ROUGH_SLOPE: f64 = 0.15;
const BILINEAR_TOL: f64 = 1e-8;
const REGULARITY_FLOOR: f64 = -0.25;

/// Criteria that cannot hold as stated; each is analysed in the decisions
/// ledger. The run still fails if one of them starts passing, so the list
/// stays accurate.
const KNOWN_UNATTAINABLE: &[usize] = &[5];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { pass, detail })
}

fn lambdas(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| 2f64.powi(-k)).collect()
}

fn centers(n: usize, h: f64) -> Vec<Point> {
    (0..n).map(|i| Point::d1(-h + 2.0 * h * i as f64 / (n - 1) as f64)).collect()
}

/// Seeded psi_x^lambda with psi in B_r, x in [-0.4, 0.4], lambda in [0.2, 0.6].
fn scaled_psis(r: usize, n: usize, seed: u64) -> Result<Vec<ScaledTestFunction>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_br(r, 1, n, seed)?
        .iter()
        .map(|p| scale(p, &Point::d1(rng.gen_range(-0.4..0.4)), rng.gen_range(0.2..0.6)))
        .collect()
}

fn taylor_cfg(n_max: usize) -> Result<ReconstructionConfig> {
    let mut cfg = ReconstructionConfig::new(1, 2.5, 0.0, 0.0, 3)?;
    cfg.n_max = n_max;
    Ok(cfg)
}

fn tweaking() -> Result<Verdict> {
    let t0 = Instant::now();
    let mut worst_moment = 0.0f64;
    let mut worst_c = 0.0f64;
    for d in 1..=2 {
        let phi = make_standard_bump(d)?;
        for r in 1..=4 {
            let kit = build_cascade(&phi, r, 1)?;
            for (_, m) in kit.phi_hat_moment_residuals() {
                worst_moment = worst_moment.max(m.abs());
            }
            worst_c = worst_c.max(tweak_coefficients(r, phi.support_radius())?.max_abs_coeff());
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    let e2 = std::f64::consts::E.powi(2);
    verdict(
        worst_moment < MOMENT_TOL && worst_c <= e2 && secs < TWEAK_SECONDS,
        format!("max moment residual {worst_moment:.2e}, max |c_i| {worst_c:.4} <= e^2, {secs:.1}s"),
    )
}

fn cascade_identity() -> Result<Verdict> {
    let kit = build_cascade(&make_standard_bump(1)?, 2, 6)?;
    let q = QuadratureSpec::new(32)?;
    let mut ok = true;
    let mut worst_ratio = 0.0f64;
    let mut least_shrink = f64::INFINITY;
    for k in 1..=5 {
        let c = dyadic_identity_check(&kit, k, &q)?;
        let c2 = dyadic_identity_check(&kit, k, &q.refined())?;
        ok &= c.discrepancy <= c.budget;
        worst_ratio = worst_ratio.max(c.discrepancy / c.budget);
        least_shrink = least_shrink.min(c.discrepancy / c2.discrepancy);
    }
    ok &= least_shrink >= 3.0;
    verdict(ok, format!("k=1..5: max discrepancy/budget {worst_ratio:.3}, min shrink under refinement {least_shrink:.1}x"))
}

fn taylor_reconstruction() -> Result<Verdict> {
    let t0 = Instant::now();
    let cfg = taylor_cfg(8)?;
    let f = taylor_germ(cos(1), 2.5)?;
    let rec = reconstruct(&f, &cfg)?;
    let density = Distribution::density(1, |p| p.get(0).cos(), "cos");
    let fine = cfg.quadrature.refined().refined();
    let mut worst = 0.0f64;
    for psi in scaled_psis(3, 10, 11)? {
        worst = worst.max((rec.pair(&psi)? - pair(&density, &psi, &fine)?).abs());
    }
    let t = rate_certificate(&f, &rec, &cfg, &centers(5, 0.5), &lambdas(2, 7), &sample_br(3, 1, 1, 11)?)?;
    let slope = t.fitted_slope.unwrap_or(f64::NAN);
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        worst < TAYLOR_TOL && slope >= TAYLOR_SLOPE && secs < TAYLOR_SECONDS,
        format!("max |R F(psi) - int cos psi| {worst:.2e} on 10 psi, slope {slope:.3}, {secs:.1}s"),
    )
}

fn constant_germs() -> Result<Verdict> {
    let targets = [
        (Distribution::density(1, |_| 1.0, "1"), 0.0),
        (Distribution::density(1, |p| p.get(0).cos(), "cos"), 0.0),
        (Distribution::singular_density(1, |p| p.get(0).abs().powf(-0.5), Point::d1(0.0), "|y|^-1/2"), -0.5),
    ];
    let mut worst = 0.0f64;
    let mut ok = true;
    for (t, a) in targets {
        let cfg = ReconstructionConfig::new(1, 1.0, a, a, 1)?;
        let rec = reconstruct(&constant_germ(t.clone()), &cfg)?;
        let mut psis = scaled_psis(1, 6, 5)?;
        psis.push(scale(&make_standard_bump(1)?, &Point::d1(0.0), 0.3)?);
        for psi in psis {
            let e = rec.estimate(&psi)?;
            let q = cfg.quadrature.refined();
            let exact = pair(&t, &psi, &q.refined())?;
            let budget = e.budget + (pair(&t, &psi, &q)? - exact).abs();
            let gap = (e.value - exact).abs();
            ok &= gap <= CONSTANT_BUDGET_FACTOR * budget;
            worst = worst.max(gap / budget);
        }
    }
    verdict(ok, format!("1, cos, |y|^-1/2: max gap/budget {worst:.2e}"))
}

fn log_optimality() -> Result<Verdict> {
    let mut cfg = ReconstructionConfig::new(1, 0.0, -0.5, -0.1, 1)?;
    cfg.quadrature = QuadratureSpec::new(32)?;
    let f = log_germ(1)?;
    let rec = reconstruct(&f, &cfg)?;
    let t = rate_certificate(&f, &rec, &cfg, &[Point::d1(-0.5), Point::d1(0.5)], &lambdas(2, 8), &sample_br(1, 1, 2, 7)?)?;
    let b = t.fitted_slope.unwrap_or(f64::NAN);
    let r2 = t.r_squared.unwrap_or(f64::NAN);
    let c = t.power_slope.unwrap_or(f64::NAN);
    verdict(
        b > 0.0 && r2 > LOG_R2 && c >= LOG_POWER_FLOOR,
        format!("log fit b {b:.4}, R^2 {r2:.5}; power fit c {c:.3} (needs >= {LOG_POWER_FLOOR})"),
    )
}

fn uniqueness() -> Result<Verdict> {
    let cfg = taylor_cfg(8)?;
    let f = taylor_germ(cos(1), 2.5)?;
    let rep = uniqueness_check(&f, &cfg, &make_standard_bump(1)?, &make_squared_bump(1)?, &scaled_psis(3, 10, 21)?)?;
    let worst = rep.per_psi.iter().fold(0.0f64, |m, (d, b)| m.max(d / b));
    verdict(worst <= UNIQUENESS_FACTOR, format!("bump vs squared bump: max discrepancy/budget {worst:.2e} on 10 psi"))
}

fn necessity() -> Result<Verdict> {
    let f = taylor_germ(cos(1), 2.5)?;
    let t = Distribution::density(1, |p| p.get(0).cos(), "cos");
    let psis = sample_br(1, 1, 2, 4)?;
    let mut s = Sampling::default_for(1);
    s.points_per_axis = 5;
    s.levels = (1, 5);
    let q = QuadratureSpec::default_for(1);
    let rep = necessity_check(&f, Target::Distribution(&t), 2.5, 1, &BoxDomain::unit(1), None, &s, &psis, &q)?;
    verdict(
        rep.tuples >= NECESSITY_TUPLES && rep.worst_ratio <= rep.bound * NECESSITY_SLACK,
        format!("C {:.3e}, worst ratio {:.3e} vs 2C {:.3e}, {} tuples, alpha {}", rep.hypothesis_constant, rep.worst_ratio, rep.bound, rep.tuples, rep.alpha),
    )
}

fn holder_characterisation() -> Result<Verdict> {
    let phi = make_standard_bump(1)?;
    let k = BoxDomain::cube(1, 0.5);
    let mut s = Sampling::default_for(1);
    s.levels = (2, 9);
    let q = QuadratureSpec::default_for(1);
    let delta = Distribution::point_mass(Point::d1(0.0), 1.0);
    let hd = holder_estimate(Target::Distribution(&delta), -1.0, &k, &phi, None, &s, &sample_br(1, 1, 2, 1)?, &q)?;
    let w = weierstrass(1, 0.7)?;
    let dw = Distribution::weak_derivative(1, move |p| w.eval(p), MultiIndex::axis(1, 0, 1), "dW").with_feature(weierstrass_wavelength());
    // the worst x of a Weierstrass derivative needs a denser grid than delta's
    s.points_per_axis = 33;
    let hw = holder_estimate(Target::Distribution(&dw), -0.3, &k, &phi, None, &s, &sample_br(1, 1, 2, 1)?, &q)?;
    let ok = (hd.exponent_fit - DELTA_EXPONENT.0).abs() <= DELTA_EXPONENT.1
        && (hw.exponent_fit - DW_EXPONENT.0).abs() <= DW_EXPONENT.1
        && hd.br_sampled_sup <= hd.upgraded_bound * BR_SLACK
        && hw.br_sampled_sup <= hw.upgraded_bound * BR_SLACK;
    verdict(
        ok,
        format!(
            "delta fit {:.4}, W'_0.7 fit {:.4}; B_r sup / (b sup): {:.3e}, {:.3e}",
            hd.exponent_fit,
            hw.exponent_fit,
            hd.br_sampled_sup / hd.upgraded_bound,
            hw.br_sampled_sup / hw.upgraded_bound
        ),
    )
}

fn young() -> Result<Verdict> {
    // smooth case against the classical product
    let cfg = ReconstructionConfig::new(1, 1.5, 0.0, 0.0, 1)?;
    let sin_d = Distribution::density(1, |p| p.get(0).sin(), "sin");
    let y = young_product(&cos(1), 1.5, &sin_d, 0.0, &cfg)?;
    let prod = Distribution::density(1, |p| p.get(0).sin() * p.get(0).cos(), "sin cos");
    let psis = scaled_psis(1, 10, 31)?;
    let mut smooth = 0.0f64;
    for psi in &psis {
        let e = y.result.estimate(psi)?;
        smooth = smooth.max((e.value - pair(&prod, psi, &cfg.quadrature.refined().refined())?).abs() / e.budget);
    }
    // bilinearity in g
    let cos_d = Distribution::density(1, |p| p.get(0).cos(), "cos");
    let sum = Distribution::combination(vec![(1.0, sin_d.clone()), (1.0, cos_d.clone())])?;
    let y2 = young_product(&cos(1), 1.5, &cos_d, 0.0, &cfg)?;
    let ys = young_product(&cos(1), 1.5, &sum, 0.0, &cfg)?;
    let mut bilinear = 0.0f64;
    for psi in psis.iter().take(4) {
        let (a, b, s) = (y.result.pair(psi)?, y2.result.pair(psi)?, ys.result.pair(psi)?);
        bilinear = bilinear.max((s - a - b).abs() / s.abs().max(a.abs() + b.abs()));
    }
    // rough case: W_0.8 against W'_0.6
    let (alpha, beta) = (0.75, -0.45);
    let mut rcfg = ReconstructionConfig::new(1, alpha + beta, beta, beta, 1)?;
    rcfg.n_max = ROUGH_NMAX;
    rcfg.quadrature = QuadratureSpec::new(ROUGH_PPA)?;
    let w6 = weierstrass(1, 0.6)?;
    let g = Distribution::weak_derivative(1, move |p| w6.eval(p), MultiIndex::axis(1, 0, 1), "dW").with_feature(weierstrass_wavelength());
    let yr = young_product(&weierstrass(1, 0.8)?, alpha, &g, beta, &rcfg)?;
    let t = young_rate_check(&yr, &centers(ROUGH_CENTERS, 0.5), &lambdas(2, ROUGH_LMAX), &sample_br(1, 1, 2, 7)?)?;
    let slope = t.fitted_slope.unwrap_or(f64::NAN);
    verdict(
        smooth <= YOUNG_SMOOTH_FACTOR && slope >= YOUNG_ROUGH_SLOPE && bilinear <= BILINEAR_TOL,
        format!("smooth max gap/budget {smooth:.2e}; rough slope {slope:.3}; bilinearity {bilinear:.1e}"),
    )
}

const ROUGH_NMAX: usize = 10;
const ROUGH_PPA: usize = 32;
const ROUGH_CENTERS: usize = 5;
const ROUGH_LMAX: i32 = 7;

fn reconstruction_regularity() -> Result<Verdict> {
    let mut cfg = ReconstructionConfig::new(1, 0.0, -0.5, -0.1, 1)?;
    cfg.quadrature = QuadratureSpec::new(32)?;
    let rec = reconstruct(&log_germ(1)?, &cfg)?;
    let oracle = |p: &ScaledTestFunction, q: &QuadratureSpec| rec.pair_at(p, q);
    let phi: TestFunction = make_standard_bump(1)?;
    let h = holder_estimate(
        Target::Oracle(&oracle),
        -0.1,
        &BoxDomain::unit(1),
        &phi,
        None,
        &Sampling::default_for(1),
        &sample_br(1, 1, 2, 7)?,
        &cfg.quadrature,
    )?;
    verdict(h.exponent_fit >= REGULARITY_FLOOR, format!("measured exponent of R F: {:.4}", h.exponent_fit))
}

fn constant_sanity() -> Result<Verdict> {
    let cfg = taylor_cfg(8)?;
    let f = taylor_germ(cos(1), 2.5)?;
    let rec = reconstruct(&f, &cfg)?;
    let t = rate_certificate(&f, &rec, &cfg, &centers(5, 0.5), &lambdas(2, 7), &sample_br(3, 1, 3, 7)?)?;
    verdict(
        t.bound_violations == 0 && t.rows.iter().all(|r| r.ratio.is_some()),
        format!(
            "{} rows, {} violations, worst error/(c S lambda^gamma) {:.2e}",
            t.rows.len(),
            t.bound_violations,
            t.worst_ratio.unwrap_or(f64::NAN)
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Result<Verdict>); 11] = [
        ("tweaking", tweaking),
        ("cascade identity", cascade_identity),
        ("taylor reconstruction", taylor_reconstruction),
        ("constant germs", constant_germs),
        ("gamma = 0 logarithmic rate", log_optimality),
        ("uniqueness", uniqueness),
        ("necessity of coherence", necessity),
        ("holder characterisation", holder_characterisation),
        ("young product", young),
        ("reconstruction regularity", reconstruction_regularity),
        ("constant sanity", constant_sanity),
    ];
    let mut unexpected = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        let t0 = Instant::now();
        let v = run().unwrap_or_else(|e| Verdict { pass: false, detail: format!("error: {e}") });
        let took: Duration = t0.elapsed();
        let known = KNOWN_UNATTAINABLE.contains(&n);
        let note = if known && !v.pass { " (known unattainable, see ledger)" } else { "" };
        println!("{} {n:>2} {name}: {} [{:.1}s]{note}", if v.pass { "PASS" } else { "FAIL" }, v.detail, took.as_secs_f64());
        if v.pass == known {
            unexpected.push(n);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected outcome for criteria {unexpected:?}");
        std::process::exit(1);
    }
}
