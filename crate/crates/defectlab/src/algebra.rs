//! The scalar interface shared by complex numbers, Grassmann elements and jets.
//!
//! Every field quantity in the crate is a value of some `A: Algebra`.  Analytic functions are
//! evaluated by expanding around the body: f(b + s) = Σ f⁽ⁿ⁾(b)/n! · sⁿ, which terminates
//! because the soul s is nilpotent.  For plain complex numbers the soul is zero and the series
//! collapses to f(b), so fermion-free computations reduce bit-for-bit to complex arithmetic.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use crate::grassmann::{GrassmannElement, GrassmannError, Parity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnalyticFn {
    Exp,
    Sinh,
    Cosh,
    Log,
    Sqrt,
    Recip,
}

impl AnalyticFn {
    pub fn name(self) -> &'static str {
        match self {
            AnalyticFn::Exp => "exp",
            AnalyticFn::Sinh => "sinh",
            AnalyticFn::Cosh => "cosh",
            AnalyticFn::Log => "log",
            AnalyticFn::Sqrt => "sqrt",
            AnalyticFn::Recip => "recip",
        }
    }

    pub fn eval(self, b: Complex64) -> Complex64 {
        match self {
            AnalyticFn::Exp => b.exp(),
            AnalyticFn::Sinh => b.sinh(),
            AnalyticFn::Cosh => b.cosh(),
            AnalyticFn::Log => b.ln(),
            AnalyticFn::Sqrt => b.sqrt(),
            AnalyticFn::Recip => b.inv(),
        }
    }

    /// f⁽ⁿ⁾(b)/n! for n ≥ 1.
    pub fn taylor(self, n: usize, b: Complex64) -> Complex64 {
        let nf = factorial(n);
        match self {
            AnalyticFn::Exp => b.exp() / nf,
            AnalyticFn::Sinh => {
                if n % 2 == 0 {
                    b.sinh() / nf
                } else {
                    b.cosh() / nf
                }
            }
            AnalyticFn::Cosh => {
                if n % 2 == 0 {
                    b.cosh() / nf
                } else {
                    b.sinh() / nf
                }
            }
            AnalyticFn::Log => {
                let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
                sign / (n as f64 * b.powi(n as i32))
            }
            AnalyticFn::Sqrt => {
                // binom(1/2, n) b^{1/2 - n}
                let mut c = 1.0;
                for k in 0..n {
                    c *= (0.5 - k as f64) / (k as f64 + 1.0);
                }
                b.sqrt() * c / b.powi(n as i32)
            }
            AnalyticFn::Recip => {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                sign / b.powi(n as i32 + 1)
            }
        }
    }

    fn domain_ok(self, b: Complex64) -> bool {
        match self {
            AnalyticFn::Log | AnalyticFn::Recip | AnalyticFn::Sqrt => b != Complex64::new(0.0, 0.0),
            _ => true,
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, k| a * k as f64)
}

/// Ring-with-analytic-functions interface.
pub trait Algebra:
    Clone
    + Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + for<'a> Add<&'a Self, Output = Self>
    + for<'a> Sub<&'a Self, Output = Self>
    + for<'a> Mul<&'a Self, Output = Self>
    + Mul<Complex64, Output = Self>
    + Mul<f64, Output = Self>
    + Add<Complex64, Output = Self>
    + Sub<Complex64, Output = Self>
{
    /// The constant `c` in the same context (generator count, jet order) as `self`.
    fn lift(&self, c: Complex64) -> Self;
    fn body(&self) -> Complex64;
    fn soul(&self) -> Self;
    fn is_zero(&self) -> bool;
    fn parity(&self) -> Parity;
    /// Coefficient-wise sup norm.
    fn max_abs(&self) -> f64;

    fn zero_like(&self) -> Self {
        self.lift(Complex64::new(0.0, 0.0))
    }

    fn one_like(&self) -> Self {
        self.lift(Complex64::new(1.0, 0.0))
    }

    /// f(self) through the nilpotent-soul Taylor series.
    fn try_apply(&self, f: AnalyticFn) -> Result<Self, GrassmannError> {
        let parity = self.parity();
        if !parity.is_even() {
            return Err(GrassmannError::Parity { op: f.name(), parity });
        }
        let b = self.body();
        let s = self.soul();
        if s.is_zero() {
            if !f.domain_ok(b) && f != AnalyticFn::Sqrt {
                return Err(GrassmannError::Domain { op: f.name(), body: b });
            }
            return Ok(self.lift(f.eval(b)));
        }
        if !f.domain_ok(b) {
            return Err(GrassmannError::Domain { op: f.name(), body: b });
        }
        let mut sum = self.lift(f.eval(b));
        let mut pow = s.clone();
        let mut n = 1;
        while !pow.is_zero() {
            sum = sum + pow.clone() * f.taylor(n, b);
            pow = pow * &s;
            n += 1;
            assert!(n < 256, "soul failed to become nilpotent");
        }
        Ok(sum)
    }

    fn exp(&self) -> Self {
        self.try_apply(AnalyticFn::Exp).expect("exp")
    }
    fn sinh(&self) -> Self {
        self.try_apply(AnalyticFn::Sinh).expect("sinh")
    }
    fn cosh(&self) -> Self {
        self.try_apply(AnalyticFn::Cosh).expect("cosh")
    }
    fn ln(&self) -> Self {
        self.try_apply(AnalyticFn::Log).expect("log")
    }
    fn sqrt(&self) -> Self {
        self.try_apply(AnalyticFn::Sqrt).expect("sqrt")
    }
    fn recip(&self) -> Self {
        self.try_apply(AnalyticFn::Recip).expect("recip")
    }
}

impl Algebra for Complex64 {
    fn lift(&self, c: Complex64) -> Self {
        c
    }
    fn body(&self) -> Complex64 {
        *self
    }
    fn soul(&self) -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn is_zero(&self) -> bool {
        *self == Complex64::new(0.0, 0.0)
    }
    fn parity(&self) -> Parity {
        if Algebra::is_zero(self) {
            Parity::Zero
        } else {
            Parity::Even
        }
    }
    fn max_abs(&self) -> f64 {
        self.norm()
    }
}

impl Algebra for GrassmannElement {
    fn lift(&self, c: Complex64) -> Self {
        GrassmannElement::scalar(self.num_generators(), c)
    }
    fn body(&self) -> Complex64 {
        GrassmannElement::body(self)
    }
    fn soul(&self) -> Self {
        GrassmannElement::soul(self)
    }
    fn is_zero(&self) -> bool {
        GrassmannElement::is_zero(self)
    }
    fn parity(&self) -> Parity {
        GrassmannElement::parity(self)
    }
    fn max_abs(&self) -> f64 {
        GrassmannElement::max_abs(self)
    }
}

/// Shorthand for a real complex constant.
#[inline]
pub fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
