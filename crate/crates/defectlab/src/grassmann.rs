//! Finite-generator Grassmann (exterior) algebra over complex scalars.
//!
//! A basis monomial θ_{k1}∧θ_{k2}∧… (k1 < k2 < …) is stored as a bitmask with bit `k-1`
//! set for every generator present.  Multiplying two monomials concatenates them and sorts
//! the result; the sign is the parity of the number of transpositions needed, which is the
//! number of pairs (a from the left factor, b from the right factor) with a > b.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use thiserror::Error;

use crate::algebra::AnalyticFn;

/// Hard cap on the number of generators (bitmask width and sanity).
pub const MAX_GENERATORS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrassmannError {
    #[error("context mismatch: {left} vs {right} generators")]
    ContextMismatch { left: usize, right: usize },
    #[error("generator index {index} outside 1..={n}")]
    GeneratorOutOfRange { index: usize, n: usize },
    #[error("{op} needs an even argument, got {parity:?}")]
    Parity { op: &'static str, parity: Parity },
    #[error("{op}: body {body} outside the domain")]
    Domain { op: &'static str, body: Complex64 },
    #[error("at most {MAX_GENERATORS} generators are supported (asked for {0})")]
    TooManyGenerators(usize),
    #[error("multi-index {0:?} is not strictly increasing")]
    BadMultiIndex(Vec<usize>),
}

/// Parity classification of an element (or matrix).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    /// The zero element: compatible with either parity.
    Zero,
    Even,
    Odd,
    Mixed,
}

impl Parity {
    pub fn of_mask(mask: u32) -> Parity {
        if mask.count_ones() % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    /// Combine the parities of two summands.
    pub fn join(self, other: Parity) -> Parity {
        match (self, other) {
            (Parity::Zero, p) | (p, Parity::Zero) => p,
            (a, b) if a == b => a,
            _ => Parity::Mixed,
        }
    }

    /// 0 for even (or zero), 1 for odd, `None` for mixed.
    pub fn bit(self) -> Option<u8> {
        match self {
            Parity::Zero | Parity::Even => Some(0),
            Parity::Odd => Some(1),
            Parity::Mixed => None,
        }
    }

    pub fn is_even(self) -> bool {
        matches!(self, Parity::Zero | Parity::Even)
    }
}

/// Sign of θ_A ∧ θ_B when reordered into increasing order (A, B disjoint).
#[inline]
pub fn reorder_sign(a: u32, b: u32) -> f64 {
    let mut swaps = 0u32;
    let mut rest = b;
    while rest != 0 {
        let j = rest.trailing_zeros();
        // generators of `a` sitting above generator j must hop over it
        swaps += (a >> (j + 1)).count_ones();
        rest &= rest - 1;
    }
    if swaps % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn mask_to_indices(mask: u32) -> Vec<usize> {
    (0..32).filter(|k| mask & (1 << k) != 0).map(|k| k as usize + 1).collect()
}

/// Generator count plus human-readable labels.  Elements only carry the count;
/// labels exist for diagnostics and for looking generators up by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrassmannContext {
    pub num_generators: usize,
    pub generator_labels: Vec<String>,
}

impl GrassmannContext {
    pub fn new(labels: &[&str]) -> Result<Self, GrassmannError> {
        if labels.len() > MAX_GENERATORS {
            return Err(GrassmannError::TooManyGenerators(labels.len()));
        }
        Ok(Self {
            num_generators: labels.len(),
            generator_labels: labels.iter().map(|s| s.to_string()).collect(),
        })
    }

    /// Context with generic labels g1..gN.
    pub fn with_generators(n: usize) -> Result<Self, GrassmannError> {
        let labels: Vec<String> = (1..=n).map(|k| format!("g{k}")).collect();
        let refs: Vec<&str> = labels.iter().map(|s| s.as_str()).collect();
        Self::new(&refs)
    }

    /// 1-based generator index for `label`.
    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.generator_labels.iter().position(|l| l == label).map(|p| p + 1)
    }

    pub fn zero(&self) -> GrassmannElement {
        GrassmannElement::zero(self.num_generators)
    }

    pub fn scalar(&self, c: Complex64) -> GrassmannElement {
        GrassmannElement::scalar(self.num_generators, c)
    }

    pub fn generator(&self, k: usize) -> Result<GrassmannElement, GrassmannError> {
        GrassmannElement::generator(self.num_generators, k)
    }

    pub fn named(&self, label: &str) -> Option<GrassmannElement> {
        self.index_of(label)
            .and_then(|k| GrassmannElement::generator(self.num_generators, k).ok())
    }

    pub fn label_of_mask(&self, mask: u32) -> String {
        if mask == 0 {
            return "1".into();
        }
        mask_to_indices(mask)
            .into_iter()
            .map(|k| self.generator_labels[k - 1].clone())
            .collect::<Vec<_>>()
            .join("∧")
    }
}

/// Element of the exterior algebra on `n` generators with complex coefficients.
///
/// Terms are kept sorted by mask; exact zeros are never stored.
#[derive(Clone, PartialEq)]
pub struct GrassmannElement {
    n: u8,
    terms: Vec<(u32, Complex64)>,
}

/// Serialized form of one term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerialTerm {
    pub multi_index: Vec<usize>,
    pub re: f64,
    pub im: f64,
}

impl GrassmannElement {
    pub fn zero(n: usize) -> Self {
        assert!(n <= MAX_GENERATORS, "too many generators: {n}");
        Self { n: n as u8, terms: Vec::new() }
    }

    pub fn scalar(n: usize, c: Complex64) -> Self {
        let mut e = Self::zero(n);
        if c != Complex64::new(0.0, 0.0) {
            e.terms.push((0, c));
        }
        e
    }

    /// The bare generator θ_k (1-based).
    pub fn generator(n: usize, k: usize) -> Result<Self, GrassmannError> {
        if k == 0 || k > n {
            return Err(GrassmannError::GeneratorOutOfRange { index: k, n });
        }
        let mut e = Self::zero(n);
        e.terms.push((1 << (k - 1), Complex64::new(1.0, 0.0)));
        Ok(e)
    }

    /// Build from (strictly increasing multi-index, coefficient) pairs; repeated indices add.
    pub fn from_terms<I>(n: usize, terms: I) -> Result<Self, GrassmannError>
    where
        I: IntoIterator<Item = (Vec<usize>, Complex64)>,
    {
        if n > MAX_GENERATORS {
            return Err(GrassmannError::TooManyGenerators(n));
        }
        let mut raw = Vec::new();
        for (idx, c) in terms {
            if idx.windows(2).any(|w| w[0] >= w[1]) {
                return Err(GrassmannError::BadMultiIndex(idx));
            }
            let mut mask = 0u32;
            for &k in &idx {
                if k == 0 || k > n {
                    return Err(GrassmannError::GeneratorOutOfRange { index: k, n });
                }
                mask |= 1 << (k - 1);
            }
            raw.push((mask, c));
        }
        Ok(Self::from_raw(n, raw))
    }

    /// Collect unsorted (mask, coefficient) pairs.  Accumulation order for equal masks is
    /// the input order, so results are deterministic.
    fn from_raw(n: usize, mut raw: Vec<(u32, Complex64)>) -> Self {
        raw.sort_by_key(|t| t.0);
        let mut terms: Vec<(u32, Complex64)> = Vec::with_capacity(raw.len());
        for (m, c) in raw {
            match terms.last_mut() {
                Some(last) if last.0 == m => last.1 += c,
                _ => terms.push((m, c)),
            }
        }
        terms.retain(|t| t.1 != Complex64::new(0.0, 0.0));
        Self { n: n as u8, terms }
    }

    pub fn num_generators(&self) -> usize {
        self.n as usize
    }

    pub fn terms(&self) -> &[(u32, Complex64)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, mask: u32) -> Complex64 {
        match self.terms.binary_search_by_key(&mask, |t| t.0) {
            Ok(p) => self.terms[p].1,
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn coefficient_of(&self, multi_index: &[usize]) -> Complex64 {
        let mask = multi_index.iter().fold(0u32, |m, &k| m | (1 << (k - 1)));
        self.coefficient(mask)
    }

    pub fn body(&self) -> Complex64 {
        self.coefficient(0)
    }

    pub fn soul(&self) -> Self {
        Self {
            n: self.n,
            terms: self.terms.iter().copied().filter(|t| t.0 != 0).collect(),
        }
    }

    pub fn body_soul(&self) -> (Complex64, Self) {
        (self.body(), self.soul())
    }

    pub fn parity(&self) -> Parity {
        self.terms
            .iter()
            .fold(Parity::Zero, |p, t| p.join(Parity::of_mask(t.0)))
    }

    /// Largest coefficient modulus (coefficient-wise sup norm).
    pub fn max_abs(&self) -> f64 {
        self.terms.iter().map(|t| t.1.norm()).fold(0.0, f64::max)
    }

    /// Drop coefficients with modulus ≤ `threshold`.
    pub fn pruned(&self, threshold: f64) -> Self {
        Self {
            n: self.n,
            terms: self
                .terms
                .iter()
                .copied()
                .filter(|t| t.1.norm() > threshold)
                .collect(),
        }
    }

    fn check_context(&self, other: &Self) -> Result<(), GrassmannError> {
        if self.n != other.n {
            Err(GrassmannError::ContextMismatch {
                left: self.n as usize,
                right: other.n as usize,
            })
        } else {
            Ok(())
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, GrassmannError> {
        self.check_context(other)?;
        Ok(self.merge(other, 1.0))
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self, GrassmannError> {
        self.check_context(other)?;
        Ok(self.merge(other, -1.0))
    }

    fn merge(&self, other: &Self, sign: f64) -> Self {
        let (a, b) = (&self.terms, &other.terms);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
                out.push(a[i]);
                i += 1;
            } else if i == a.len() || b[j].0 < a[i].0 {
                let c = if sign > 0.0 { b[j].1 } else { -b[j].1 };
                out.push((b[j].0, c));
                j += 1;
            } else {
                let c = if sign > 0.0 { a[i].1 + b[j].1 } else { a[i].1 - b[j].1 };
                if c != Complex64::new(0.0, 0.0) {
                    out.push((a[i].0, c));
                }
                i += 1;
                j += 1;
            }
        }
        Self { n: self.n, terms: out }
    }

    /// Wedge product.
    pub fn checked_mul(&self, other: &Self) -> Result<Self, GrassmannError> {
        self.check_context(other)?;
        Ok(self.wedge(other))
    }

    fn wedge(&self, other: &Self) -> Self {
        if self.terms.is_empty() || other.terms.is_empty() {
            return Self::zero(self.n as usize);
        }
        let mut raw = Vec::with_capacity(self.terms.len() * other.terms.len());
        for &(ma, ca) in &self.terms {
            for &(mb, cb) in &other.terms {
                if ma & mb != 0 {
                    continue;
                }
                let p = ca * cb;
                let p = if reorder_sign(ma, mb) > 0.0 { p } else { -p };
                raw.push((ma | mb, p));
            }
        }
        Self::from_raw(self.n as usize, raw)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        if c == Complex64::new(0.0, 0.0) {
            return Self::zero(self.n as usize);
        }
        Self {
            n: self.n,
            terms: self
                .terms
                .iter()
                .map(|&(m, v)| (m, v * c))
                .filter(|t| t.1 != Complex64::new(0.0, 0.0))
                .collect(),
        }
    }

    /// Left derivative ∂/∂θ_k: move θ_k to the front, then strip it.
    pub fn derivative(&self, k: usize) -> Result<Self, GrassmannError> {
        let n = self.n as usize;
        if k == 0 || k > n {
            return Err(GrassmannError::GeneratorOutOfRange { index: k, n });
        }
        let bit = 1u32 << (k - 1);
        let below = bit - 1;
        let raw = self
            .terms
            .iter()
            .filter(|t| t.0 & bit != 0)
            .map(|&(m, c)| {
                let hops = (m & below).count_ones();
                (m & !bit, if hops % 2 == 0 { c } else { -c })
            })
            .collect();
        Ok(Self::from_raw(n, raw))
    }

    /// Set θ_k = 0 (drop every term containing it).
    pub fn without_generator(&self, k: usize) -> Self {
        let bit = 1u32 << (k - 1);
        Self {
            n: self.n,
            terms: self.terms.iter().copied().filter(|t| t.0 & bit == 0).collect(),
        }
    }

    /// Terms whose mask contains any bit of `mask`.
    pub fn touches(&self, mask: u32) -> Self {
        Self {
            n: self.n,
            terms: self.terms.iter().copied().filter(|t| t.0 & mask != 0).collect(),
        }
    }

    /// f(a) via the body/soul Taylor expansion; see [`crate::algebra::Algebra::try_apply`].
    pub fn analytic(&self, f: AnalyticFn) -> Result<Self, GrassmannError> {
        crate::algebra::Algebra::try_apply(self, f)
    }

    pub fn to_serial(&self) -> Vec<SerialTerm> {
        self.terms
            .iter()
            .map(|&(m, c)| SerialTerm { multi_index: mask_to_indices(m), re: c.re, im: c.im })
            .collect()
    }

    pub fn from_serial(n: usize, terms: &[SerialTerm]) -> Result<Self, GrassmannError> {
        Self::from_terms(
            n,
            terms.iter().map(|t| (t.multi_index.clone(), Complex64::new(t.re, t.im))),
        )
    }
}

impl fmt::Debug for GrassmannElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({}{:+}i)", c.re, c.im)?;
            for k in mask_to_indices(*m) {
                write!(f, "θ{k}")?;
            }
        }
        Ok(())
    }
}

impl Serialize for GrassmannElement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_serial().serialize(s)
    }
}

// Operator sugar.  These panic on context mismatch; use the checked_* methods where the
// contexts are not known to agree.

macro_rules! binop {
    ($tr:ident, $m:ident, $checked:ident) => {
        impl $tr<GrassmannElement> for GrassmannElement {
            type Output = GrassmannElement;
            fn $m(self, rhs: GrassmannElement) -> GrassmannElement {
                self.$checked(&rhs).expect("Grassmann context mismatch")
            }
        }
        impl<'a> $tr<&'a GrassmannElement> for GrassmannElement {
            type Output = GrassmannElement;
            fn $m(self, rhs: &'a GrassmannElement) -> GrassmannElement {
                self.$checked(rhs).expect("Grassmann context mismatch")
            }
        }
        impl<'a, 'b> $tr<&'b GrassmannElement> for &'a GrassmannElement {
            type Output = GrassmannElement;
            fn $m(self, rhs: &'b GrassmannElement) -> GrassmannElement {
                self.$checked(rhs).expect("Grassmann context mismatch")
            }
        }
    };
}

binop!(Add, add, checked_add);
binop!(Sub, sub, checked_sub);
binop!(Mul, mul, checked_mul);

impl AddAssign<&GrassmannElement> for GrassmannElement {
    fn add_assign(&mut self, rhs: &GrassmannElement) {
        *self = self.checked_add(rhs).expect("Grassmann context mismatch");
    }
}

impl SubAssign<&GrassmannElement> for GrassmannElement {
    fn sub_assign(&mut self, rhs: &GrassmannElement) {
        *self = self.checked_sub(rhs).expect("Grassmann context mismatch");
    }
}

impl Neg for GrassmannElement {
    type Output = GrassmannElement;
    fn neg(mut self) -> GrassmannElement {
        for t in &mut self.terms {
            t.1 = -t.1;
        }
        self
    }
}

impl Mul<Complex64> for GrassmannElement {
    type Output = GrassmannElement;
    fn mul(self, c: Complex64) -> GrassmannElement {
        self.scale(c)
    }
}

impl Mul<f64> for GrassmannElement {
    type Output = GrassmannElement;
    fn mul(self, c: f64) -> GrassmannElement {
        self.scale(Complex64::new(c, 0.0))
    }
}

impl Add<Complex64> for GrassmannElement {
    type Output = GrassmannElement;
    fn add(self, c: Complex64) -> GrassmannElement {
        let s = GrassmannElement::scalar(self.n as usize, c);
        self.merge(&s, 1.0)
    }
}

impl Sub<Complex64> for GrassmannElement {
    type Output = GrassmannElement;
    fn sub(self, c: Complex64) -> GrassmannElement {
        let s = GrassmannElement::scalar(self.n as usize, c);
        self.merge(&s, -1.0)
    }
}
