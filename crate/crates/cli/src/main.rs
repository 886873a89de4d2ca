//! `recon`: command-line driver for the reconstruction toolkit.

use clap::{Args, Parser, Subcommand, ValueEnum};
use recon_core::analysis::{coherence_seminorm, holder_estimate, necessity_check, Sampling, Target};
use recon_core::bump::{make_separable_bump, make_squared_bump, make_standard_bump, sample_br, TestFunction};
use recon_core::multiscale::{build_cascade, default_nmax, tweak_coefficients};
use recon_core::pairing::QuadratureSpec;
use recon_core::presets::{list_presets, parse_distribution, parse_function, parse_germ};
use recon_core::reconstruction::{rate_certificate, reconstruct, RateTable, ReconstructionConfig};
use recon_core::young::{young_continuity_check, young_product, young_rate_check};
use recon_core::{BoxDomain, Point};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "recon", version, about = "Reconstruction of distributions from coherent germs", args_override_self = true)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long, global = true, default_value_t = 1)]
    dim: usize,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// quadrature points per axis
    #[arg(long, global = true)]
    grid: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// plain-text key=value file; its entries override command-line flags
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Tweak coefficients and moment residuals of the tweaked test function
    Tweak {
        #[arg(long, default_value_t = 3)]
        r: usize,
        #[arg(long, default_value = "bump")]
        phi: String,
    },
    /// Sampled coherence seminorm of a germ
    Coherence {
        #[arg(long)]
        germ: String,
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        gamma: Option<f64>,
        /// half-width of the box K
        #[arg(long = "box", default_value_t = 1.0)]
        half_width: f64,
        #[arg(long, default_value = "bump")]
        phi: String,
    },
    /// Negative Holder regularity from a single test function
    Holder {
        #[arg(long)]
        dist: String,
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long)]
        r: Option<usize>,
        #[arg(long = "box", default_value_t = 1.0)]
        half_width: f64,
        #[arg(long, default_value_t = 4)]
        psis: usize,
        #[arg(long, default_value = "bump")]
        phi: String,
    },
    /// Coherence implied by a local approximation bound
    Necessity {
        #[arg(long)]
        germ: String,
        /// distribution preset approximated by the germ
        #[arg(long)]
        target: String,
        #[arg(long, allow_hyphen_values = true)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = 3)]
        r: usize,
        /// constant of the hypothesis; measured when absent
        #[arg(long)]
        c: Option<f64>,
        #[arg(long = "box", default_value_t = 1.0)]
        half_width: f64,
        #[arg(long, default_value_t = 4)]
        psis: usize,
    },
    /// Reconstruct a germ and certify the local approximation rate
    Reconstruct {
        #[command(flatten)]
        rec: RecArgs,
        #[arg(long)]
        germ: String,
        #[arg(long, allow_hyphen_values = true)]
        gamma: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<f64>,
    },
    /// Young product of a Holder function and a distribution
    Young {
        #[command(flatten)]
        rec: RecArgs,
        #[arg(long)]
        f: String,
        #[arg(long)]
        g: String,
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<f64>,
        #[arg(long)]
        skip_continuity: bool,
    },
    /// List germ, distribution and function presets
    ListPresets,
}

#[derive(Args, Debug)]
struct RecArgs {
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    nmax: Option<usize>,
    #[arg(long = "box", default_value_t = 1.0)]
    half_width: f64,
    /// finest and coarsest rate scales are 2^-lmax and 2^-lmin
    #[arg(long, default_value_t = 2)]
    lmin: usize,
    #[arg(long)]
    lmax: Option<usize>,
    /// centers per axis
    #[arg(long, default_value_t = 5)]
    centers: usize,
    #[arg(long, default_value_t = 1)]
    psis: usize,
}

enum Failure {
    Invalid(String),
}

impl From<recon_core::Error> for Failure {
    fn from(e: recon_core::Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

type Outcome = Result<Report, Failure>;

/// What a pipeline produced: CSV rows, a JSON summary, a one-line summary and
/// an optional failed check.
struct Report {
    name: &'static str,
    header: String,
    rows: Vec<String>,
    summary: Value,
    line: String,
    budget: f64,
    grid: String,
    failed: Option<String>,
}

fn phi_preset(name: &str, dim: usize) -> Result<TestFunction, Failure> {
    match (name, dim) {
        ("bump", _) => Ok(make_standard_bump(dim)?),
        ("squared", _) => Ok(make_squared_bump(dim)?),
        ("separable", 2) => Ok(make_separable_bump()),
        _ => Err(Failure::Invalid(format!("unknown test function '{name}' (bump, squared, separable in 2D)"))),
    }
}

fn quadrature(common: &Common) -> Result<QuadratureSpec, Failure> {
    match common.grid {
        Some(n) => Ok(QuadratureSpec::new(n)?),
        None => Ok(QuadratureSpec::default_for(common.dim)),
    }
}

fn cube(dim: usize, h: f64) -> Result<BoxDomain, Failure> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Failure::Invalid(format!("box half-width must be positive, got {h}")));
    }
    Ok(BoxDomain::cube(dim, h))
}

fn fmt_point(p: &Point) -> String {
    p.coords().iter().map(|c| format!("{c}")).collect::<Vec<_>>().join(" ")
}

fn tweak(common: &Common, r: usize, phi: &str) -> Outcome {
    let phi = phi_preset(phi, common.dim)?;
    let kit = build_cascade(&phi, r, 1)?;
    let t = tweak_coefficients(r, phi.support_radius())?;
    let residuals = kit.phi_hat_moment_residuals();
    let worst = residuals.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max);
    let bound = std::f64::consts::E.powi(2);
    let rows = t.lambdas.iter().zip(&t.coeffs).enumerate().map(|(i, (l, c))| format!("{i},{l},{c}")).collect();
    let failed = if worst >= 1e-6 || t.max_abs_coeff() > bound {
        Some(format!("moment residual {worst:e} or max |c| {} above bound", t.max_abs_coeff()))
    } else {
        None
    };
    Ok(Report {
        name: "tweak",
        header: "i,lambda,coefficient".into(),
        rows,
        summary: json!({
            "r": r,
            "lambdas": t.lambdas,
            "coefficients": t.coeffs,
            "vandermonde_residuals": t.residuals,
            "solve_gap": t.solve_gap,
            "moment_residuals": residuals.iter().map(|(k, v)| json!({"k": k.entries(), "residual": v})).collect::<Vec<_>>(),
            "max_moment_residual": worst,
            "max_abs_coefficient": t.max_abs_coeff(),
            "coefficient_bound": bound,
        }),
        line: format!("tweak r={r}: max moment residual {worst:.3e}, max |c| {:.4} (bound {bound:.4})", t.max_abs_coeff()),
        budget: worst,
        grid: format!("kit ppa {}", recon_core::multiscale::kit_ppa(common.dim)),
        failed,
    })
}

fn coherence(common: &Common, germ: &str, alpha: Option<f64>, gamma: Option<f64>, h: f64, phi: &str) -> Outcome {
    let f = parse_germ(germ, common.dim)?;
    let gamma = gamma.unwrap_or(f.meta.gamma);
    if !gamma.is_finite() {
        return Err(Failure::Invalid("this germ declares no finite gamma; pass --gamma".into()));
    }
    let alpha = alpha.or(f.meta.alpha).unwrap_or(gamma.min(0.0));
    let phi = phi_preset(phi, common.dim)?;
    let s = Sampling::default_for(common.dim);
    let q = quadrature(common)?;
    let rep = coherence_seminorm(&f, &cube(common.dim, h)?, &phi, alpha, gamma, &s, &q)?;
    let rows = rep.records.iter().map(|r| format!("{},{},{},{},{}", fmt_point(&r.y), fmt_point(&r.z), r.eps, r.value, r.ratio)).collect();
    Ok(Report {
        name: "coherence",
        header: "y,z,eps,value,ratio".into(),
        rows,
        summary: json!({"seminorm": rep.seminorm, "alpha": alpha, "gamma": gamma, "per_level": rep.per_level, "diverging": rep.diverging}),
        line: format!("coherence {germ}: seminorm {:.6e} over {} samples, diverging={}", rep.seminorm, rep.records.len(), rep.diverging),
        budget: 0.0,
        grid: rep.grid.clone(),
        failed: rep.diverging.then(|| "per-level maxima diverge".to_string()),
    })
}

#[allow(clippy::too_many_arguments)]
fn holder(common: &Common, dist: &str, alpha: f64, r: Option<usize>, h: f64, psis: usize, phi: &str) -> Outcome {
    let t = parse_distribution(dist, common.dim)?;
    let phi = phi_preset(phi, common.dim)?;
    let rr = r.unwrap_or((-alpha).floor().max(0.0) as usize + 1);
    let ps = sample_br(rr, common.dim, psis.max(1), common.seed)?;
    let q = quadrature(common)?;
    let s = Sampling::default_for(common.dim);
    let e = holder_estimate(Target::Distribution(&t.dist), alpha, &cube(common.dim, h)?, &phi, r, &s, &ps, &q)?;
    let rows = e.per_level.iter().map(|(eps, v)| format!("{eps},{v}")).collect();
    Ok(Report {
        name: "holder",
        header: "eps,max_ratio".into(),
        rows,
        summary: serde_json::to_value(&e).unwrap_or(Value::Null),
        line: format!(
            "holder {dist}: exponent fit {:.4} (R^2 {:.4}), sup {:.4e} +- {:.1e}, diverging={}",
            e.exponent_fit, e.r_squared, e.single_phi_sup, e.single_phi_budget, e.diverging
        ),
        budget: e.single_phi_budget,
        grid: e.grid.clone(),
        failed: e.diverging.then(|| format!("alpha = {alpha} is too optimistic: the ratios diverge")),
    })
}

#[allow(clippy::too_many_arguments)]
fn necessity(common: &Common, germ: &str, target: &str, gamma: Option<f64>, r: usize, c: Option<f64>, h: f64, psis: usize) -> Outcome {
    let f = parse_germ(germ, common.dim)?;
    let t = parse_distribution(target, common.dim)?;
    let gamma = gamma.unwrap_or(f.meta.gamma);
    if !gamma.is_finite() {
        return Err(Failure::Invalid("this germ declares no finite gamma; pass --gamma".into()));
    }
    let ps = sample_br(r, common.dim, psis.max(1), common.seed)?;
    let q = quadrature(common)?;
    let s = Sampling::default_for(common.dim);
    let rep = necessity_check(&f, Target::Distribution(&t.dist), gamma, r, &cube(common.dim, h)?, c, &s, &ps, &q)?;
    let ok = rep.hypothesis_holds && rep.worst_ratio <= rep.bound * 1.1;
    Ok(Report {
        name: "necessity",
        header: "alpha,hypothesis_constant,worst_ratio,bound,tuples".into(),
        rows: vec![format!("{},{},{},{},{}", rep.alpha, rep.hypothesis_constant, rep.worst_ratio, rep.bound, rep.tuples)],
        summary: serde_json::to_value(&rep).unwrap_or(Value::Null),
        line: format!("necessity {germ}: worst ratio {:.4e} against bound {:.4e} over {} tuples", rep.worst_ratio, rep.bound, rep.tuples),
        budget: 0.0,
        grid: s.describe(),
        failed: (!ok).then(|| "the coherence bound 2C is exceeded".to_string()),
    })
}

fn rate_inputs(common: &Common, rec: &RecArgs, r: usize, nmax: usize) -> Result<(Vec<Point>, Vec<f64>, Vec<TestFunction>), Failure> {
    let lmax = rec.lmax.unwrap_or(7.min(nmax - 1));
    if rec.lmin > lmax || lmax > nmax - 1 {
        return Err(Failure::Invalid(format!("need lmin <= lmax <= nmax - 1, got {}..{lmax} with nmax {nmax}", rec.lmin)));
    }
    let lambdas = (rec.lmin..=lmax).map(|k| 2f64.powi(-(k as i32))).collect();
    let centers = cube(common.dim, 0.5 * rec.half_width)?.grid(rec.centers.max(1));
    let psis = sample_br(r, common.dim, rec.psis.max(1), common.seed)?;
    Ok((centers, lambdas, psis))
}

fn rec_config(common: &Common, rec: &RecArgs, gamma: f64, alpha: f64, beta: f64) -> Result<ReconstructionConfig, Failure> {
    let r = rec.r.unwrap_or(((-alpha).max(-beta).max(0.0)).floor() as usize + 1);
    let mut cfg = ReconstructionConfig::new(common.dim, gamma, alpha, beta, r)?;
    cfg.n_max = rec.nmax.unwrap_or(default_nmax(common.dim));
    cfg.domain = cube(common.dim, rec.half_width)?;
    cfg.quadrature = quadrature(common)?;
    cfg.validate()?;
    Ok(cfg)
}

fn rate_report(name: &'static str, t: &RateTable, extra: Value, line: String, grid: String) -> Report {
    let rows = t.rows.iter().map(|r| format!("{},{},{},{}", fmt_point(&r.x), r.lambda, r.psi_id, r.error)).collect();
    let mut summary = json!({
        "slope": t.fitted_slope,
        "intercept": t.fitted_intercept,
        "r_squared": t.r_squared,
        "power_slope": t.power_slope,
        "model": format!("{:?}", t.model),
        "degenerate": t.degenerate,
        "budget": t.max_budget,
        "tail_estimate": t.rows.iter().map(|r| r.budget - r.quadrature_budget).fold(0.0, f64::max),
        "frak_c": t.frak_c,
        "coherence_seminorm": t.coherence_seminorm,
        "worst_ratio": t.worst_ratio,
        "bound_violations": t.bound_violations,
        "envelope": t.envelope,
    });
    if let (Value::Object(m), Value::Object(e)) = (&mut summary, extra) {
        m.extend(e);
    }
    let failed = (t.bound_violations > 0).then(|| format!("{} rows exceed the explicit bound", t.bound_violations));
    Report { name, header: "x,lambda,psi_id,error".into(), rows, summary, line, budget: t.max_budget, grid, failed }
}

fn reconstruct_cmd(common: &Common, rec: &RecArgs, germ: &str, gamma: Option<f64>, alpha: Option<f64>, beta: Option<f64>) -> Outcome {
    let f = parse_germ(germ, common.dim)?;
    let gamma = gamma.unwrap_or(f.meta.gamma);
    if !gamma.is_finite() {
        return Err(Failure::Invalid("this germ declares no finite gamma; pass --gamma".into()));
    }
    let alpha = alpha.or(f.meta.alpha).unwrap_or(gamma.min(0.0));
    let beta = beta.or(f.meta.beta).unwrap_or(alpha);
    let cfg = rec_config(common, rec, gamma, alpha, beta)?;
    let res = reconstruct(&f, &cfg)?;
    let (centers, lambdas, psis) = rate_inputs(common, rec, cfg.r, cfg.n_max)?;
    let t = rate_certificate(&f, &res, &cfg, &centers, &lambdas, &psis)?;
    let extra = json!({"branch": format!("{:?}", res.branch), "c_hat1": res.c_hat1, "c_hat2": res.c_hat2, "truncation": res.truncation, "r": cfg.r, "n_max": cfg.n_max});
    let slope = t.fitted_slope.map_or("skipped (degenerate)".to_string(), |s| format!("{s:.4}"));
    let line = format!("reconstruct {germ}: slope {slope}, {} rows, budget {:.3e}", t.rows.len(), t.max_budget);
    Ok(rate_report("reconstruct", &t, extra, line, format!("points_per_axis={}", cfg.quadrature.ppa())))
}

fn young_cmd(common: &Common, rec: &RecArgs, f: &str, g: &str, alpha: f64, beta: Option<f64>, skip: bool) -> Outcome {
    let fun = parse_function(f, common.dim)?;
    let dist = parse_distribution(g, common.dim)?;
    let beta = beta.unwrap_or(dist.exponent.min(0.0));
    let cfg = rec_config(common, rec, alpha + beta, beta, beta)?;
    let y = young_product(&fun, alpha, &dist.dist, beta, &cfg)?;
    let (centers, lambdas, psis) = rate_inputs(common, rec, cfg.r, cfg.n_max)?;
    let t = young_rate_check(&y, &centers, &lambdas, &psis)?;
    let continuity = if skip {
        None
    } else {
        Some(young_continuity_check(&[(fun, dist.dist)], alpha, beta, &cfg.domain, &cfg)?.max_ratio)
    };
    let extra = json!({"regime": format!("{:?}", y.regime), "continuity_ratio": continuity, "r": cfg.r, "n_max": cfg.n_max});
    let slope = t.fitted_slope.map_or("skipped (degenerate)".to_string(), |s| format!("{s:.4}"));
    let line = format!("young {f} x {g}: regime {:?}, slope {slope}, budget {:.3e}", y.regime, t.max_budget);
    Ok(rate_report("young", &t, extra, line, format!("points_per_axis={}", cfg.quadrature.ppa())))
}

/// Write to a temporary file next to `path`, then rename over it.
fn write_atomic(path: &Path, data: &str) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(data.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn emit(cli: &Cli, rep: &Report) -> std::io::Result<PathBuf> {
    let hash = format!("{:x}", Sha256::digest(format!("{:?}|{}|{}|{:?}", cli.cmd, cli.common.dim, cli.common.seed, cli.common.grid)));
    let ext = if cli.common.format == Format::Csv { "csv" } else { "json" };
    let path = cli.common.out.clone().unwrap_or_else(|| PathBuf::from(format!("recon-{}.{ext}", rep.name)));
    let summary = json!({"subcommand": rep.name, "config_sha256": hash, "budget": rep.budget, "grid": rep.grid, "summary": rep.summary});
    match cli.common.format {
        Format::Csv => {
            let mut s = format!("# recon {} config_sha256={hash} budget={:e} grid={}\n{}\n", rep.name, rep.budget, rep.grid, rep.header);
            for r in &rep.rows {
                s.push_str(r);
                s.push('\n');
            }
            write_atomic(&path, &s)?;
            let side = path.with_extension("summary.json");
            write_atomic(&side, &(serde_json::to_string_pretty(&summary).unwrap_or_default() + "\n"))?;
        }
        Format::Json => {
            let mut all = summary;
            all["header"] = json!(rep.header);
            all["rows"] = json!(rep.rows);
            write_atomic(&path, &(serde_json::to_string_pretty(&all).unwrap_or_default() + "\n"))?;
        }
    }
    Ok(path)
}

/// argv with the entries of the --config file appended as flags.
fn expand_config(mut argv: Vec<String>) -> Result<Vec<String>, String> {
    let mut file = None;
    for (i, a) in argv.iter().enumerate() {
        if let Some(p) = a.strip_prefix("--config=") {
            file = Some(p.to_string());
        } else if a == "--config" {
            file = argv.get(i + 1).cloned();
        }
    }
    let Some(file) = file else { return Ok(argv) };
    let text = std::fs::read_to_string(&file).map_err(|e| format!("cannot read config {file}: {e}"))?;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("{file}:{}: expected key=value", n + 1))?;
        let (k, v) = (k.trim(), v.trim());
        if matches!(v, "true" | "false") {
            if v == "true" {
                argv.push(format!("--{k}"));
            }
        } else {
            argv.push(format!("--{k}={v}"));
        }
    }
    Ok(argv)
}

fn run(cli: &Cli) -> Outcome {
    let c = &cli.common;
    if c.dim != 1 && c.dim != 2 {
        return Err(Failure::Invalid(format!("--dim must be 1 or 2, got {}", c.dim)));
    }
    match &cli.cmd {
        Cmd::Tweak { r, phi } => tweak(c, *r, phi),
        Cmd::Coherence { germ, alpha, gamma, half_width, phi } => coherence(c, germ, *alpha, *gamma, *half_width, phi),
        Cmd::Holder { dist, alpha, r, half_width, psis, phi } => holder(c, dist, *alpha, *r, *half_width, *psis, phi),
        Cmd::Necessity { germ, target, gamma, r, c: cc, half_width, psis } => {
            necessity(c, germ, target, *gamma, *r, *cc, *half_width, *psis)
        }
        Cmd::Reconstruct { rec, germ, gamma, alpha, beta } => reconstruct_cmd(c, rec, germ, *gamma, *alpha, *beta),
        Cmd::Young { rec, f, g, alpha, beta, skip_continuity } => young_cmd(c, rec, f, g, *alpha, *beta, *skip_continuity),
        Cmd::ListPresets => unreachable!(),
    }
}

fn main() -> ExitCode {
    let argv = match expand_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if matches!(cli.cmd, Cmd::ListPresets) {
        print!("{}", list_presets());
        return ExitCode::SUCCESS;
    }
    match run(&cli) {
        Ok(rep) => {
            let path = match emit(&cli, &rep) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("error: cannot write output: {e}");
                    return ExitCode::from(2);
                }
            };
            println!("{} -> {}", rep.line, path.display());
            match &rep.failed {
                Some(msg) => {
                    eprintln!("check failed: {msg}");
                    ExitCode::from(3)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
