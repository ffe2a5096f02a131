//! Truncated bivariate Taylor series ("jets") in the light-cone coordinates (z, z̄).
//!
//! A jet of order K at a point holds c[a][b] = ∂ᵃ∂̄ᵇf / (a! b!) for a + b ≤ K.  Arithmetic on
//! jets is exact truncated power-series arithmetic, so composing closed-form expressions yields
//! exact derivatives (automatic differentiation) — this is the "analytic" derivative mode.

use num_complex::Complex64;
use std::ops::{Add, Mul, Neg, Sub};

use crate::algebra::Algebra;
use crate::grassmann::Parity;

#[inline]
fn idx(a: usize, b: usize) -> usize {
    let d = a + b;
    d * (d + 1) / 2 + b
}

fn len_for(order: usize) -> usize {
    (order + 1) * (order + 2) / 2
}

#[derive(Clone, Debug, PartialEq)]
pub struct Jet<T> {
    order: usize,
    coeffs: Vec<T>,
}

impl<T: Algebra> Jet<T> {
    pub fn constant(value: T, order: usize) -> Self {
        let zero = value.zero_like();
        let mut coeffs = vec![zero; len_for(order)];
        coeffs[0] = value;
        Self { order, coeffs }
    }

    /// The coordinate function z around z0, in the context of `like`.
    pub fn z(z0: f64, like: &T, order: usize) -> Self {
        let mut j = Self::constant(like.lift(Complex64::new(z0, 0.0)), order);
        if order >= 1 {
            j.coeffs[idx(1, 0)] = like.lift(Complex64::new(1.0, 0.0));
        }
        j
    }

    pub fn zbar(zb0: f64, like: &T, order: usize) -> Self {
        let mut j = Self::constant(like.lift(Complex64::new(zb0, 0.0)), order);
        if order >= 1 {
            j.coeffs[idx(0, 1)] = like.lift(Complex64::new(1.0, 0.0));
        }
        j
    }

    /// Build from a coefficient function c(a, b) (Taylor-normalised).
    pub fn from_fn(order: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut coeffs = Vec::with_capacity(len_for(order));
        for d in 0..=order {
            for b in 0..=d {
                coeffs.push(f(d - b, b));
            }
        }
        Self { order, coeffs }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> &T {
        &self.coeffs[0]
    }

    pub fn into_value(self) -> T {
        self.coeffs.into_iter().next().expect("jet has a value")
    }

    /// Taylor coefficient c[a][b].
    pub fn coeff(&self, a: usize, b: usize) -> &T {
        &self.coeffs[idx(a, b)]
    }

    pub fn coeff_mut(&mut self, a: usize, b: usize) -> &mut T {
        &mut self.coeffs[idx(a, b)]
    }

    /// ∂ᵃ∂̄ᵇ at the expansion point.
    pub fn derivative(&self, a: usize, b: usize) -> T {
        let f = (1..=a).chain(1..=b).fold(1.0, |acc, k| acc * k as f64);
        self.coeffs[idx(a, b)].clone() * f
    }

    pub fn truncate(&self, order: usize) -> Self {
        assert!(order <= self.order, "cannot raise jet order by truncation");
        Self { order, coeffs: self.coeffs[..len_for(order)].to_vec() }
    }

    /// ∂ as a jet of one lower order.
    pub fn d_z(&self) -> Self {
        assert!(self.order >= 1, "d_z of an order-0 jet");
        Self::from_fn(self.order - 1, |a, b| self.coeffs[idx(a + 1, b)].clone() * (a + 1) as f64)
    }

    /// ∂̄ as a jet of one lower order.
    pub fn d_zbar(&self) -> Self {
        assert!(self.order >= 1, "d_zbar of an order-0 jet");
        Self::from_fn(self.order - 1, |a, b| self.coeffs[idx(a, b + 1)].clone() * (b + 1) as f64)
    }

    pub fn map<U: Algebra>(&self, f: impl Fn(&T) -> U) -> Jet<U> {
        Jet { order: self.order, coeffs: self.coeffs.iter().map(f).collect() }
    }

    pub fn coefficients(&self) -> &[T] {
        &self.coeffs
    }

    fn aligned(&self, other: &Self) -> (Self, Self) {
        let k = self.order.min(other.order);
        (self.truncate(k), other.truncate(k))
    }
}

impl<T: Algebra> Add for Jet<T> {
    type Output = Jet<T>;
    fn add(self, rhs: Jet<T>) -> Jet<T> {
        self + &rhs
    }
}

impl<'a, T: Algebra> Add<&'a Jet<T>> for Jet<T> {
    type Output = Jet<T>;
    fn add(self, rhs: &'a Jet<T>) -> Jet<T> {
        let k = self.order.min(rhs.order);
        let coeffs = self.coeffs[..len_for(k)]
            .iter()
            .zip(&rhs.coeffs[..len_for(k)])
            .map(|(a, b)| a.clone() + b)
            .collect();
        Jet { order: k, coeffs }
    }
}

impl<T: Algebra> Sub for Jet<T> {
    type Output = Jet<T>;
    fn sub(self, rhs: Jet<T>) -> Jet<T> {
        self - &rhs
    }
}

impl<'a, T: Algebra> Sub<&'a Jet<T>> for Jet<T> {
    type Output = Jet<T>;
    fn sub(self, rhs: &'a Jet<T>) -> Jet<T> {
        let k = self.order.min(rhs.order);
        let coeffs = self.coeffs[..len_for(k)]
            .iter()
            .zip(&rhs.coeffs[..len_for(k)])
            .map(|(a, b)| a.clone() - b)
            .collect();
        Jet { order: k, coeffs }
    }
}

impl<T: Algebra> Mul for Jet<T> {
    type Output = Jet<T>;
    fn mul(self, rhs: Jet<T>) -> Jet<T> {
        self * &rhs
    }
}

impl<'a, T: Algebra> Mul<&'a Jet<T>> for Jet<T> {
    type Output = Jet<T>;
    fn mul(self, rhs: &'a Jet<T>) -> Jet<T> {
        let (x, y) = if self.order == rhs.order {
            (self, rhs.clone())
        } else {
            self.aligned(rhs)
        };
        let k = x.order;
        // Cauchy product; the left factor stays on the left (entries may anticommute).
        Jet::from_fn(k, |i, j| {
            let mut acc: Option<T> = None;
            for a in 0..=i {
                for b in 0..=j {
                    let term = x.coeffs[idx(a, b)].clone() * &y.coeffs[idx(i - a, j - b)];
                    acc = Some(match acc {
                        None => term,
                        Some(s) => s + &term,
                    });
                }
            }
            acc.expect("non-empty sum")
        })
    }
}

impl<T: Algebra> Neg for Jet<T> {
    type Output = Jet<T>;
    fn neg(self) -> Jet<T> {
        Jet { order: self.order, coeffs: self.coeffs.into_iter().map(|c| -c).collect() }
    }
}

impl<T: Algebra> Mul<Complex64> for Jet<T> {
    type Output = Jet<T>;
    fn mul(self, c: Complex64) -> Jet<T> {
        Jet { order: self.order, coeffs: self.coeffs.into_iter().map(|v| v * c).collect() }
    }
}

impl<T: Algebra> Mul<f64> for Jet<T> {
    type Output = Jet<T>;
    fn mul(self, c: f64) -> Jet<T> {
        Jet { order: self.order, coeffs: self.coeffs.into_iter().map(|v| v * c).collect() }
    }
}

impl<T: Algebra> Add<Complex64> for Jet<T> {
    type Output = Jet<T>;
    fn add(mut self, c: Complex64) -> Jet<T> {
        let v = self.coeffs[0].clone() + c;
        self.coeffs[0] = v;
        self
    }
}

impl<T: Algebra> Sub<Complex64> for Jet<T> {
    type Output = Jet<T>;
    fn sub(mut self, c: Complex64) -> Jet<T> {
        let v = self.coeffs[0].clone() - c;
        self.coeffs[0] = v;
        self
    }
}

impl<T: Algebra> Algebra for Jet<T> {
    fn lift(&self, c: Complex64) -> Self {
        Jet::constant(self.coeffs[0].lift(c), self.order)
    }
    fn body(&self) -> Complex64 {
        self.coeffs[0].body()
    }
    fn soul(&self) -> Self {
        let mut s = self.clone();
        s.coeffs[0] = self.coeffs[0].soul();
        s
    }
    fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }
    fn parity(&self) -> Parity {
        self.coeffs.iter().fold(Parity::Zero, |p, c| p.join(c.parity()))
    }
    fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.max_abs()).fold(0.0, f64::max)
    }
}
