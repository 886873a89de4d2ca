//! Function oracles with (optional) derivatives, used by Taylor and product germs.

use crate::error::{Error, Result};
use crate::geom::{MultiIndex, Point};
use std::fmt;
use std::sync::Arc;

type DerivFn = dyn Fn(&MultiIndex, &Point) -> f64 + Send + Sync;

/// A function R^d -> R with derivatives available up to `max_order`.
#[derive(Clone)]
pub struct SmoothFn {
    dim: usize,
    max_order: usize,
    f: Arc<DerivFn>,
    label: String,
    feature: Option<f64>,
}

impl fmt::Debug for SmoothFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SmoothFn({})", self.label)
    }
}

/// Number of terms minus one in the Weierstrass sum.
pub const WEIERSTRASS_TERMS: usize = 16;

impl SmoothFn {
    /// `f(k, x)` must return d^k u(x) for |k| <= max_order.
    pub fn new(
        dim: usize,
        max_order: usize,
        f: impl Fn(&MultiIndex, &Point) -> f64 + Send + Sync + 'static,
        label: impl Into<String>,
    ) -> Self {
        SmoothFn { dim, max_order, f: Arc::new(f), label: label.into(), feature: None }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn max_order(&self) -> usize {
        self.max_order
    }
    pub fn label(&self) -> &str {
        &self.label
    }

    /// Shortest wavelength present, if the function oscillates faster than
    /// quadrature at the default resolution can follow.
    pub fn feature(&self) -> Option<f64> {
        self.feature
    }

    pub fn with_feature(mut self, len: f64) -> Self {
        self.feature = Some(len);
        self
    }

    #[inline]
    pub fn eval(&self, x: &Point) -> f64 {
        (self.f)(&MultiIndex::zero(self.dim), x)
    }

    pub fn deriv(&self, k: &MultiIndex, x: &Point) -> Result<f64> {
        if k.order() > self.max_order {
            return Err(Error::OrderExceeded { requested: k.order(), available: self.max_order });
        }
        Ok((self.f)(k, x))
    }

    /// a * f
    pub fn amplified(&self, a: f64) -> SmoothFn {
        let f = self.f.clone();
        SmoothFn::new(self.dim, self.max_order, move |k, x| a * f(k, x), format!("{a}*{}", self.label))
    }

    /// The pointwise oracle as a shareable closure.
    pub fn as_field(&self) -> Arc<dyn Fn(&Point) -> f64 + Send + Sync> {
        let f = self.f.clone();
        let z = MultiIndex::zero(self.dim);
        Arc::new(move |x| f(&z, x))
    }
}

fn sum_coords(x: &Point) -> f64 {
    x.coords().iter().sum()
}

/// n-th derivative of cos (shift = 0) or sin (shift = 3) at t.
fn trig_deriv(shift: usize, n: usize, t: f64) -> f64 {
    match (shift + n) % 4 {
        0 => t.cos(),
        1 => -t.sin(),
        2 => -t.cos(),
        _ => t.sin(),
    }
}

/// cos(x_1 + ... + x_d)
pub fn cos(dim: usize) -> SmoothFn {
    SmoothFn::new(dim, usize::MAX, |k, x| trig_deriv(0, k.order(), sum_coords(x)), "cos")
}

/// sin(x_1 + ... + x_d)
pub fn sin(dim: usize) -> SmoothFn {
    SmoothFn::new(dim, usize::MAX, |k, x| trig_deriv(3, k.order(), sum_coords(x)), "sin")
}

pub fn one(dim: usize) -> SmoothFn {
    SmoothFn::new(dim, usize::MAX, |k, _| if k.order() == 0 { 1.0 } else { 0.0 }, "one")
}

/// a + b . x
pub fn affine(a: f64, b: Point) -> SmoothFn {
    let dim = b.dim();
    SmoothFn::new(
        dim,
        usize::MAX,
        move |k, x| match k.order() {
            0 => a + (0..dim).map(|i| b.get(i) * x.get(i)).sum::<f64>(),
            1 => (0..dim).find(|&i| k.get(i) == 1).map_or(0.0, |i| b.get(i)),
            _ => 0.0,
        },
        "affine",
    )
}

/// |x|^2
pub fn square(dim: usize) -> SmoothFn {
    SmoothFn::new(
        dim,
        usize::MAX,
        |k, x| match k.order() {
            0 => x.norm_sq(),
            1 => (0..x.dim()).find(|&i| k.get(i) == 1).map_or(0.0, |i| 2.0 * x.get(i)),
            2 => {
                if (0..x.dim()).any(|i| k.get(i) == 2) {
                    2.0
                } else {
                    0.0
                }
            }
            _ => 0.0,
        },
        "square",
    )
}

/// W_H(t) = sum_{j=0}^{16} 2^{-jH} cos(2^j t), applied to each coordinate
/// and summed in 2D. Declared without derivatives (it is only C^H).
pub fn weierstrass(dim: usize, h: f64) -> Result<SmoothFn> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::Exponent(format!("Weierstrass exponent must lie in (0,1), got {h}")));
    }
    let amps: Vec<(f64, f64)> = (0..=WEIERSTRASS_TERMS).map(|j| (2f64.powf(-(j as f64) * h), 2f64.powi(j as i32))).collect();
    Ok(SmoothFn::new(
        dim,
        0,
        move |_, x| {
            let mut s = 0.0;
            for &t in x.coords() {
                for &(a, w) in &amps {
                    s += a * (w * t).cos();
                }
            }
            s
        },
        format!("weierstrass:{h}"),
    )
    .with_feature(weierstrass_wavelength()))
}

/// Wavelength of the fastest Weierstrass term.
pub fn weierstrass_wavelength() -> f64 {
    std::f64::consts::TAU / 2f64.powi(WEIERSTRASS_TERMS as i32)
}

/// d^k f(y) minus the k-th derivative at y of the order-`order` Taylor
/// polynomial of f based at z.
pub fn taylor_remainder(f: &SmoothFn, order: usize, k: &MultiIndex, y: &Point, z: &Point) -> Result<f64> {
    let mut p = 0.0;
    if k.order() <= order {
        for l in MultiIndex::up_to(f.dim(), order - k.order()) {
            p += f.deriv(&k.add(&l), z)? * (*y - *z).pow(&l) / l.factorial();
        }
    }
    Ok(f.deriv(k, y)? - p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trig_derivatives_cycle() {
        let c = cos(1);
        let x = Point::d1(0.3);
        assert!((c.deriv(&MultiIndex::new(&[1]), &x).unwrap() + 0.3f64.sin()).abs() < 1e-15);
        assert!((c.deriv(&MultiIndex::new(&[4]), &x).unwrap() - 0.3f64.cos()).abs() < 1e-15);
        let s = sin(2);
        let p = Point::d2(0.1, 0.2);
        assert!((s.deriv(&MultiIndex::new(&[1, 1]), &p).unwrap() + 0.3f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn weierstrass_has_no_derivatives() {
        let w = weierstrass(1, 0.7).unwrap();
        assert!(w.deriv(&MultiIndex::new(&[1]), &Point::d1(0.0)).is_err());
        let total: f64 = (0..=WEIERSTRASS_TERMS).map(|j| 2f64.powf(-0.7 * j as f64)).sum();
        assert!((w.eval(&Point::d1(0.0)) - total).abs() < 1e-12);
        assert!(weierstrass(1, 1.0).is_err());
    }

    #[test]
    fn remainder_vanishes_for_affine() {
        let f = affine(1.0, Point::d1(2.0));
        let r = taylor_remainder(&f, 1, &MultiIndex::zero(1), &Point::d1(0.7), &Point::d1(-0.2)).unwrap();
        assert_eq!(r, 0.0);
    }
}
