//! Named germs, distributions and functions, as addressed from the command line.

use crate::error::{Error, Result};
use crate::functions::{cos, one, sin, square, weierstrass, SmoothFn};
use crate::germs::{constant_germ, log_density, log_germ, product_germ, taylor_germ, Germ};
use crate::geom::{check_dim, MultiIndex, Point};
use crate::pairing::Distribution;

/// A distribution with the Holder exponent it is known to have.
#[derive(Clone, Debug)]
pub struct DistPreset {
    pub dist: Distribution,
    pub exponent: f64,
}

fn parse_param(s: &str, what: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::Parse(format!("{what}: expected a number, got '{s}'")))
}

fn hurst(s: &str) -> Result<f64> {
    let h = parse_param(s, "weierstrass exponent")?;
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::Parse(format!("weierstrass exponent must lie in (0,1), got {h}")));
    }
    Ok(h)
}

fn unknown(kind: &str, name: &str) -> Error {
    Error::Parse(format!("unknown {kind} preset '{name}'\n{}", list_presets()))
}

pub fn parse_function(name: &str, dim: usize) -> Result<SmoothFn> {
    check_dim(dim)?;
    let parts: Vec<&str> = name.split(':').collect();
    match parts.as_slice() {
        ["cos"] => Ok(cos(dim)),
        ["sin"] => Ok(sin(dim)),
        ["one"] => Ok(one(dim)),
        ["square"] => Ok(square(dim)),
        ["weierstrass", h] => weierstrass(dim, hurst(h)?),
        _ => Err(unknown("function", name)),
    }
}

pub fn parse_distribution(name: &str, dim: usize) -> Result<DistPreset> {
    check_dim(dim)?;
    let d = dim as f64;
    let parts: Vec<&str> = name.split(':').collect();
    let smooth = |f: SmoothFn| DistPreset { dist: Distribution::density(dim, move |p| f.eval(p), name), exponent: 0.0 };
    match parts.as_slice() {
        ["delta"] => Ok(DistPreset { dist: Distribution::point_mass(Point::zero(dim), 1.0), exponent: -d }),
        ["one"] => Ok(smooth(one(dim))),
        ["cos"] => Ok(smooth(cos(dim))),
        ["sin"] => Ok(smooth(sin(dim))),
        ["abs", p] => {
            let p = parse_param(p, "abs exponent")?;
            if !(p > -d && p < 0.0) {
                return Err(Error::Parse(format!("abs exponent must lie in (-{d}, 0), got {p}")));
            }
            let zero = Point::zero(dim);
            Ok(DistPreset {
                dist: Distribution::singular_density(dim, move |y| y.norm().powf(p), zero, name),
                exponent: p,
            })
        }
        ["log"] => {
            let mut dist = log_density(&Point::zero(dim));
            dist.label = name.into();
            Ok(DistPreset { dist, exponent: 0.0 })
        }
        ["weierstrass", h] => {
            let f = weierstrass(dim, hurst(h)?)?;
            let len = f.feature().unwrap_or(f64::INFINITY);
            Ok(DistPreset { dist: Distribution::density(dim, move |p| f.eval(p), name).with_feature(len), exponent: 0.0 })
        }
        ["dweierstrass", h] => {
            let h = hurst(h)?;
            let f = weierstrass(dim, h)?;
            let k = MultiIndex::axis(dim, 0, 1);
            let len = f.feature().unwrap_or(f64::INFINITY);
            Ok(DistPreset { dist: Distribution::weak_derivative(dim, move |p| f.eval(p), k, name).with_feature(len), exponent: h - 1.0 })
        }
        _ => Err(unknown("distribution", name)),
    }
}

/// Germ presets; `product` takes beta from the distribution's exponent
/// (capped at 0).
pub fn parse_germ(name: &str, dim: usize) -> Result<Germ> {
    check_dim(dim)?;
    let parts: Vec<&str> = name.split(':').collect();
    match parts.as_slice() {
        ["log"] => log_germ(dim),
        ["constant", rest @ ..] if !rest.is_empty() => {
            let mut g = constant_germ(parse_distribution(&rest.join(":"), dim)?.dist);
            g.label = name.into();
            Ok(g)
        }
        ["weierstrass", h] => {
            let h = hurst(h)?;
            let mut g = taylor_germ(weierstrass(dim, h)?, h)?;
            g.label = name.into();
            Ok(g)
        }
        ["taylor", rest @ .., gamma] if !rest.is_empty() => {
            let gamma = parse_param(gamma, "gamma")?;
            let mut g = taylor_germ(parse_function(&rest.join(":"), dim)?, gamma)?;
            g.label = name.into();
            Ok(g)
        }
        ["product", rest @ .., alpha] if rest.len() >= 2 => {
            let alpha = parse_param(alpha, "alpha")?;
            // g and f may contain ':' themselves; take the first split that parses
            for cut in 1..rest.len() {
                let (gs, fs) = (rest[..cut].join(":"), rest[cut..].join(":"));
                if let (Ok(g), Ok(f)) = (parse_distribution(&gs, dim), parse_function(&fs, dim)) {
                    let mut germ = product_germ(g.dist, f, alpha, g.exponent.min(0.0))?;
                    germ.label = name.into();
                    return Ok(germ);
                }
            }
            Err(unknown("germ", name))
        }
        _ => Err(unknown("germ", name)),
    }
}

/// Stable, human-readable listing of every preset and its declared exponents.
pub fn list_presets() -> String {
    let lines = [
        "germs:",
        "  constant:<dist>            F_x = T for all x; coherent for every gamma (declared gamma = inf)",
        "  taylor:<f>:<gamma>         Taylor polynomial of f at x, terms |k| < gamma; (alpha, gamma) = (0, gamma), beta = 0",
        "  log                        F_x = log(1 + 1/|. - x|); (alpha, gamma) = (-0.5, 0)",
        "  product:<g>:<f>:<alpha>    g times the Taylor polynomial of f; beta = min(0, exponent of g), (beta, alpha + beta)",
        "  weierstrass:<H>            constant Taylor polynomial of W_H, H in (0,1); (alpha, gamma) = (0, H)",
        "distributions:",
        "  delta                      point mass at 0; exponent -d",
        "  one | cos | sin            smooth densities; exponent 0",
        "  abs:<p>                    |y|^p, p in (-d, 0); exponent p",
        "  log                        log(1 + 1/|y|); exponent 0 (every negative exponent)",
        "  weierstrass:<H>            W_H as a density, H in (0,1); exponent 0 (bounded)",
        "  dweierstrass:<H>           first weak derivative of W_H along x_1, H in (0,1); exponent H - 1",
        "functions:",
        "  cos | sin | one | square   smooth, all derivatives",
        "  weierstrass:<H>            W_H(t) = sum_{j<=16} 2^{-jH} cos(2^j t), H in (0,1); no derivatives",
    ];
    let mut s = lines.join("\n");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_family() {
        for g in ["log", "constant:delta", "constant:abs:-0.5", "taylor:cos:2.5", "weierstrass:0.5", "taylor:weierstrass:0.4:0.3"] {
            parse_germ(g, 1).unwrap_or_else(|e| panic!("{g}: {e}"));
        }
        let p = parse_germ("product:dweierstrass:0.6:weierstrass:0.8:0.75", 1).unwrap();
        assert!((p.meta.gamma - 0.35).abs() < 1e-12);
        assert_eq!(p.meta.beta, Some(-0.4));
        assert_eq!(parse_germ("weierstrass:0.5", 2).unwrap().meta.gamma, 0.5);
        assert_eq!(parse_distribution("delta", 2).unwrap().exponent, -2.0);
    }

    #[test]
    fn rejects_unknown_names_with_listing() {
        for bad in ["cosine", "taylor:cos", "weierstrass:1.5", "abs:-2", "product:delta:cos"] {
            let e = parse_germ(bad, 1).unwrap_err();
            assert!(matches!(e, Error::Parse(_) | Error::Exponent(_)), "{bad}: {e}");
        }
        let Error::Parse(msg) = parse_germ("nope", 1).unwrap_err() else { panic!() };
        assert!(msg.contains("weierstrass:<H>"));
    }

    #[test]
    fn listing_mentions_log_and_weierstrass() {
        let l = list_presets();
        assert!(l.contains("log") && l.contains("(-0.5, 0)") && l.contains("weierstrass:<H>") && l.contains("(0,1)"));
        assert_eq!(l, list_presets());
    }
}
