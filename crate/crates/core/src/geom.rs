//! Points, multi-indices, boxes and small polynomials in one or two variables.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

pub fn check_dim(dim: usize) -> Result<()> {
    if dim == 1 || dim == 2 {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(dim))
    }
}

/// A point of R^d with d in {1, 2}. Unused coordinates are kept at zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    c: [f64; 2],
    dim: u8,
}

impl Point {
    pub fn new(coords: &[f64]) -> Self {
        match coords.len() {
            1 => Point::d1(coords[0]),
            2 => Point::d2(coords[0], coords[1]),
            n => panic!("points live in dimension 1 or 2, got {n} coordinates"),
        }
    }

    pub fn d1(x: f64) -> Self {
        Point { c: [x, 0.0], dim: 1 }
    }

    pub fn d2(x: f64, y: f64) -> Self {
        Point { c: [x, y], dim: 2 }
    }

    pub fn zero(dim: usize) -> Self {
        Point { c: [0.0, 0.0], dim: dim as u8 }
    }

    pub fn splat(dim: usize, v: f64) -> Self {
        if dim == 1 {
            Point::d1(v)
        } else {
            Point::d2(v, v)
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.c[..self.dim as usize]
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.c[i]
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.c[0] * self.c[0] + self.c[1] * self.c[1]
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn dist(&self, other: &Point) -> f64 {
        (*self - *other).norm()
    }

    /// `self + s * v`
    #[inline]
    pub fn axpy(&self, s: f64, v: &Point) -> Point {
        Point { c: [self.c[0] + s * v.c[0], self.c[1] + s * v.c[1]], dim: self.dim }
    }

    /// Monomial `self^k`.
    #[inline]
    pub fn pow(&self, k: &MultiIndex) -> f64 {
        let mut p = 1.0;
        for i in 0..self.dim() {
            p *= self.c[i].powi(k.get(i) as i32);
        }
        p
    }
}

impl Add for Point {
    type Output = Point;
    #[inline]
    fn add(self, o: Point) -> Point {
        Point { c: [self.c[0] + o.c[0], self.c[1] + o.c[1]], dim: self.dim }
    }
}

impl Sub for Point {
    type Output = Point;
    #[inline]
    fn sub(self, o: Point) -> Point {
        Point { c: [self.c[0] - o.c[0], self.c[1] - o.c[1]], dim: self.dim }
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    #[inline]
    fn mul(self, s: f64) -> Point {
        Point { c: [self.c[0] * s, self.c[1] * s], dim: self.dim }
    }
}

impl Neg for Point {
    type Output = Point;
    #[inline]
    fn neg(self) -> Point {
        Point { c: [-self.c[0], -self.c[1]], dim: self.dim }
    }
}

/// Multi-index k in N_0^d.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex {
    k: [u8; 2],
    dim: u8,
}

impl MultiIndex {
    pub fn new(entries: &[usize]) -> Self {
        match entries.len() {
            1 => MultiIndex { k: [entries[0] as u8, 0], dim: 1 },
            2 => MultiIndex { k: [entries[0] as u8, entries[1] as u8], dim: 2 },
            n => panic!("multi-indices live in dimension 1 or 2, got {n} entries"),
        }
    }

    pub fn zero(dim: usize) -> Self {
        MultiIndex { k: [0, 0], dim: dim as u8 }
    }

    /// The multi-index with `n` in slot `axis`.
    pub fn axis(dim: usize, axis: usize, n: usize) -> Self {
        let mut k = [0u8; 2];
        k[axis] = n as u8;
        MultiIndex { k, dim: dim as u8 }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn get(&self, i: usize) -> usize {
        self.k[i] as usize
    }

    pub fn entries(&self) -> Vec<usize> {
        (0..self.dim()).map(|i| self.get(i)).collect()
    }

    #[inline]
    pub fn order(&self) -> usize {
        (self.k[0] + self.k[1]) as usize
    }

    pub fn factorial(&self) -> f64 {
        (0..self.dim()).map(|i| factorial(self.get(i))).product()
    }

    /// Componentwise `j <= self`.
    pub fn dominates(&self, j: &MultiIndex) -> bool {
        (0..self.dim()).all(|i| j.get(i) <= self.get(i))
    }

    pub fn sub(&self, j: &MultiIndex) -> MultiIndex {
        MultiIndex { k: [self.k[0] - j.k[0], self.k[1] - j.k[1]], dim: self.dim }
    }

    pub fn add(&self, j: &MultiIndex) -> MultiIndex {
        MultiIndex { k: [self.k[0] + j.k[0], self.k[1] + j.k[1]], dim: self.dim }
    }

    /// Product of binomials C(self, j).
    pub fn binomial(&self, j: &MultiIndex) -> f64 {
        (0..self.dim()).map(|i| binomial(self.get(i), j.get(i))).product()
    }

    /// All multi-indices j with j <= self componentwise.
    pub fn below(&self) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        for a in 0..=self.k[0] {
            for b in 0..=self.k[1] {
                out.push(MultiIndex { k: [a, b], dim: self.dim });
            }
        }
        out
    }

    /// All multi-indices of order at most `r` in dimension `dim`, sorted by order.
    pub fn up_to(dim: usize, r: usize) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        for n in 0..=r {
            out.extend(Self::of_order(dim, n));
        }
        out
    }

    /// All multi-indices of order exactly `n`.
    pub fn of_order(dim: usize, n: usize) -> Vec<MultiIndex> {
        if dim == 1 {
            vec![MultiIndex::new(&[n])]
        } else {
            (0..=n).rev().map(|a| MultiIndex::new(&[a, n - a])).collect()
        }
    }
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut b = 1.0;
    for i in 0..k {
        b = b * (n - i) as f64 / (i + 1) as f64;
    }
    b
}

/// Axis-aligned compact box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Point,
    pub hi: Point,
}

impl BoxDomain {
    pub fn new(lo: Point, hi: Point) -> Result<Self> {
        if lo.dim() != hi.dim() {
            return Err(Error::InvalidInput("box corners differ in dimension".into()));
        }
        check_dim(lo.dim())?;
        for i in 0..lo.dim() {
            if !(lo.get(i) < hi.get(i)) {
                return Err(Error::InvalidInput(format!(
                    "box side {i} is empty: [{}, {}]",
                    lo.get(i),
                    hi.get(i)
                )));
            }
        }
        Ok(BoxDomain { lo, hi })
    }

    /// The cube [-h, h]^d.
    pub fn cube(dim: usize, h: f64) -> Self {
        BoxDomain { lo: Point::splat(dim, -h), hi: Point::splat(dim, h) }
    }

    /// Default domain [-1, 1]^d.
    pub fn unit(dim: usize) -> Self {
        Self::cube(dim, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    /// Enlargement by `r` in every direction (box stand-in for the R-neighbourhood).
    pub fn inflate(&self, r: f64) -> Self {
        BoxDomain { lo: self.lo - Point::splat(self.dim(), r), hi: self.hi + Point::splat(self.dim(), r) }
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.hi.get(i) - self.lo.get(i)).product()
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0..self.dim()).all(|i| p.get(i) >= self.lo.get(i) && p.get(i) <= self.hi.get(i))
    }

    /// Whether the closed ball B(c, r) lies inside the box.
    pub fn contains_ball(&self, c: &Point, r: f64) -> bool {
        (0..self.dim()).all(|i| c.get(i) - r >= self.lo.get(i) - 1e-12 && c.get(i) + r <= self.hi.get(i) + 1e-12)
    }

    pub fn center(&self) -> Point {
        (self.lo + self.hi) * 0.5
    }

    /// Tensor grid with `n` equispaced points per axis including the corners.
    pub fn grid(&self, n: usize) -> Vec<Point> {
        let axis = |i: usize| -> Vec<f64> {
            let (a, b) = (self.lo.get(i), self.hi.get(i));
            if n == 1 {
                vec![0.5 * (a + b)]
            } else {
                (0..n).map(|j| a + (b - a) * j as f64 / (n - 1) as f64).collect()
            }
        };
        tensor(self.dim(), &axis(0), &axis(1.min(self.dim() - 1)))
    }

    /// Grid of points `c + j*h` (integer j) lying in the box, so that the
    /// box centre is a node.
    pub fn lattice(&self, h: f64) -> Vec<Point> {
        let axis = |i: usize| -> Vec<f64> {
            let (a, b) = (self.lo.get(i), self.hi.get(i));
            let c = 0.5 * (a + b);
            let m = ((b - c) / h + 1e-9).floor() as i64;
            (-m..=m).map(|j| c + j as f64 * h).collect()
        };
        tensor(self.dim(), &axis(0), &axis(1.min(self.dim() - 1)))
    }
}

pub fn tensor(dim: usize, xs: &[f64], ys: &[f64]) -> Vec<Point> {
    if dim == 1 {
        xs.iter().map(|&x| Point::d1(x)).collect()
    } else {
        let mut out = Vec::with_capacity(xs.len() * ys.len());
        for &x in xs {
            for &y in ys {
                out.push(Point::d2(x, y));
            }
        }
        out
    }
}

/// Polynomial in d variables, stored as (exponent, coefficient) pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    dim: usize,
    terms: Vec<(MultiIndex, f64)>,
}

impl Poly {
    pub fn new(dim: usize, terms: Vec<(MultiIndex, f64)>) -> Self {
        let mut p = Poly { dim, terms: Vec::new() };
        for (k, c) in terms {
            p.add_term(k, c);
        }
        p
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Poly::new(dim, vec![(MultiIndex::zero(dim), c)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[(MultiIndex, f64)] {
        &self.terms
    }

    pub fn degree(&self) -> usize {
        self.terms.iter().map(|(k, _)| k.order()).max().unwrap_or(0)
    }

    fn add_term(&mut self, k: MultiIndex, c: f64) {
        if let Some(t) = self.terms.iter_mut().find(|(j, _)| *j == k) {
            t.1 += c;
        } else {
            self.terms.push((k, c));
        }
    }

    #[inline]
    pub fn eval(&self, z: &Point) -> f64 {
        self.terms.iter().map(|(k, c)| c * z.pow(k)).sum()
    }

    pub fn deriv(&self, j: &MultiIndex) -> Poly {
        let mut out = Vec::new();
        for (k, c) in &self.terms {
            if k.dominates(j) {
                let mut f = *c;
                for i in 0..self.dim {
                    for m in 0..j.get(i) {
                        f *= (k.get(i) - m) as f64;
                    }
                }
                out.push((k.sub(j), f));
            }
        }
        Poly::new(self.dim, out)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|(_, c)| *c == 0.0)
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly { dim: self.dim, terms: self.terms.iter().map(|(k, c)| (*k, c * s)).collect() }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly { dim: self.dim, terms: Vec::new() };
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                out.add_term(a.add(b), ca * cb);
            }
        }
        out
    }

    /// The polynomial z -> p(a + s*z).
    pub fn affine_pullback(&self, a: &Point, s: f64) -> Poly {
        let mut out = Poly::constant(self.dim, 0.0);
        for (k, c) in &self.terms {
            let mut t = Poly::constant(self.dim, *c);
            for i in 0..self.dim {
                let lin = Poly::new(
                    self.dim,
                    vec![(MultiIndex::zero(self.dim), a.get(i)), (MultiIndex::axis(self.dim, i, 1), s)],
                );
                for _ in 0..k.get(i) {
                    t = t.mul(&lin);
                }
            }
            for (k2, c2) in t.terms {
                out.add_term(k2, c2);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multi_index_order_is_sum() {
        let k = MultiIndex::new(&[2, 3]);
        assert_eq!(k.order(), 5);
        assert_eq!(MultiIndex::up_to(2, 2).len(), 6);
        assert_eq!(MultiIndex::up_to(1, 3).len(), 4);
    }

    #[test]
    fn poly_derivative_and_pullback() {
        // p(x, y) = 1 + 2x y^2
        let p = Poly::new(2, vec![(MultiIndex::new(&[0, 0]), 1.0), (MultiIndex::new(&[1, 2]), 2.0)]);
        let z = Point::d2(0.3, -0.7);
        let d = p.deriv(&MultiIndex::new(&[0, 1]));
        assert!((d.eval(&z) - 4.0 * 0.3 * -0.7).abs() < 1e-14);
        let a = Point::d2(0.1, 0.2);
        let q = p.affine_pullback(&a, 0.5);
        assert!((q.eval(&z) - p.eval(&a.axpy(0.5, &z))).abs() < 1e-14);
    }

    #[test]
    fn lattice_contains_centre() {
        let b = BoxDomain::unit(1);
        let g = b.lattice(0.125);
        assert!(g.iter().any(|p| p.get(0) == 0.0));
        assert_eq!(g.len(), 17);
    }
}
