//! Graded matrices, the osp(1,2) generators, graded brackets and curvature residuals.
//!
//! Grading convention for 3×3 matrices: indices 1, 2 bosonic, index 3 fermionic (the block
//! lines of the printed generators).  An entry at (r, c) contributes matrix parity
//! parity(entry) + |r| + |c|, so scalar entries in the mixed blocks make an odd matrix.

use num_complex::Complex64;
use serde::Serialize;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;
use thiserror::Error;

use crate::algebra::Algebra;
use crate::grassmann::{GrassmannElement, Parity};
use crate::grid::{DerivativeMode, FieldError, LightConeGrid};
use crate::jet::Jet;
use crate::report::{scan_grid, ResidualReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GradedError {
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("grading mismatch")]
    Grading,
    #[error("matrix has mixed parity")]
    MixedParity,
    #[error("spectral parameter must be non-zero")]
    ZeroLambda,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradedMatrix<T> {
    dim: usize,
    entries: Vec<T>,
    /// true for fermionic indices
    grading: Vec<bool>,
}

/// The usual (2|1) grading.
pub fn osp_grading() -> Vec<bool> {
    vec![false, false, true]
}

impl<T: Algebra> GradedMatrix<T> {
    pub fn zeros(grading: Vec<bool>, like: &T) -> Self {
        let dim = grading.len();
        Self { dim, entries: vec![like.zero_like(); dim * dim], grading }
    }

    pub fn identity(grading: Vec<bool>, like: &T) -> Self {
        let mut m = Self::zeros(grading, like);
        for k in 0..m.dim {
            m.entries[k * m.dim + k] = like.one_like();
        }
        m
    }

    /// Row-major entries.
    pub fn from_entries(grading: Vec<bool>, entries: Vec<T>) -> Self {
        let dim = grading.len();
        assert_eq!(entries.len(), dim * dim, "entry count");
        Self { dim, entries, grading }
    }

    /// Complex entries lifted into the context of `like`.
    pub fn from_complex(grading: Vec<bool>, rows: &[&[f64]], like: &T) -> Self {
        let dim = grading.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for r in rows {
            for &v in r.iter() {
                entries.push(like.lift(Complex64::new(v, 0.0)));
            }
        }
        Self::from_entries(grading, entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grading(&self) -> &[bool] {
        &self.grading
    }

    pub fn get(&self, r: usize, c: usize) -> &T {
        &self.entries[r * self.dim + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.entries[r * self.dim + c] = v;
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn map<U: Algebra>(&self, f: impl Fn(&T) -> U) -> GradedMatrix<U> {
        GradedMatrix { dim: self.dim, entries: self.entries.iter().map(f).collect(), grading: self.grading.clone() }
    }

    pub fn try_map<U: Algebra, E>(&self, f: impl Fn(&T) -> Result<U, E>) -> Result<GradedMatrix<U>, E> {
        Ok(GradedMatrix {
            dim: self.dim,
            entries: self.entries.iter().map(f).collect::<Result<_, _>>()?,
            grading: self.grading.clone(),
        })
    }

    pub fn transpose(&self) -> Self {
        let mut m = self.clone();
        for r in 0..self.dim {
            for c in 0..self.dim {
                m.entries[c * self.dim + r] = self.entries[r * self.dim + c].clone();
            }
        }
        m
    }

    /// Computed parity: Zero for the zero matrix, Mixed if entries disagree.
    pub fn parity(&self) -> Parity {
        let mut p = Parity::Zero;
        for r in 0..self.dim {
            for c in 0..self.dim {
                let e = self.get(r, c);
                if e.is_zero() {
                    continue;
                }
                let here = match e.parity().bit() {
                    None => return Parity::Mixed,
                    Some(b) => {
                        let bit = b ^ (self.grading[r] as u8) ^ (self.grading[c] as u8);
                        if bit == 0 {
                            Parity::Even
                        } else {
                            Parity::Odd
                        }
                    }
                };
                p = p.join(here);
                if p == Parity::Mixed {
                    return p;
                }
            }
        }
        p
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self, GradedError> {
        if self.dim != other.dim {
            return Err(GradedError::Dimension(self.dim, other.dim));
        }
        if self.grading != other.grading {
            return Err(GradedError::Grading);
        }
        let n = self.dim;
        let mut entries = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                let mut acc = self.get(r, 0).clone() * other.get(0, c);
                for k in 1..n {
                    acc = acc + self.get(r, k).clone() * other.get(k, c);
                }
                entries.push(acc);
            }
        }
        Ok(Self { dim: n, entries, grading: self.grading.clone() })
    }

    fn zip(&self, other: &Self, f: impl Fn(&T, &T) -> T) -> Result<Self, GradedError> {
        if self.dim != other.dim {
            return Err(GradedError::Dimension(self.dim, other.dim));
        }
        if self.grading != other.grading {
            return Err(GradedError::Grading);
        }
        Ok(Self {
            dim: self.dim,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| f(a, b)).collect(),
            grading: self.grading.clone(),
        })
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, GradedError> {
        self.zip(other, |a, b| a.clone() + b)
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self, GradedError> {
        self.zip(other, |a, b| a.clone() - b)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map(|e| e.clone() * c)
    }

    /// x·M (x multiplies every entry from the left).
    pub fn left_scale(&self, x: &T) -> Self {
        self.map(|e| x.clone() * e)
    }

    /// x ⊗ M written as a supermatrix in standard format: row r picks up (−1)^{|x||r|}, i.e. an
    /// odd coefficient flips the sign of the odd rows.  For even x this is `left_scale`.
    pub fn graded_scale(&self, x: &T) -> Result<Self, GradedError> {
        let odd = match x.parity() {
            Parity::Zero | Parity::Even => false,
            Parity::Odd => true,
            Parity::Mixed => return Err(GradedError::MixedParity),
        };
        let mut m = self.left_scale(x);
        if odd {
            for r in 0..self.dim {
                if self.grading[r] {
                    for c in 0..self.dim {
                        m.entries[r * self.dim + c] = -m.entries[r * self.dim + c].clone();
                    }
                }
            }
        }
        Ok(m)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|e| e.max_abs()).fold(0.0, f64::max)
    }

    pub fn trace(&self) -> T {
        let mut acc = self.get(0, 0).clone();
        for k in 1..self.dim {
            acc = acc + self.get(k, k);
        }
        acc
    }

    /// Supertrace Σ (−1)^{|k|} M_kk.  Auxiliary diagnostic.
    pub fn supertrace(&self) -> T {
        let mut acc = self.get(0, 0).zero_like();
        for k in 0..self.dim {
            acc = if self.grading[k] { acc - self.get(k, k) } else { acc + self.get(k, k) };
        }
        acc
    }

    /// P M P with P = diag((−1)^{|k|}): flips the sign of the mixed blocks.
    pub fn grade_conjugate(&self) -> Self {
        let mut m = self.clone();
        for r in 0..self.dim {
            for c in 0..self.dim {
                if self.grading[r] != self.grading[c] {
                    m.entries[r * self.dim + c] = -self.entries[r * self.dim + c].clone();
                }
            }
        }
        m
    }

    /// Serialized dump: grading header plus row-major entries (complex bodies or full
    /// Grassmann expansions through `serial`).
    pub fn dump<S: Serialize>(&self, serial: impl Fn(&T) -> S) -> MatrixDump<S> {
        MatrixDump { grading: self.grading.clone(), entries: self.entries.iter().map(serial).collect() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MatrixDump<S> {
    pub grading: Vec<bool>,
    pub entries: Vec<S>,
}

impl<T: Algebra> GradedMatrix<Jet<T>> {
    pub fn d_z(&self) -> Self {
        self.map(|e| e.d_z())
    }
    pub fn d_zbar(&self) -> Self {
        self.map(|e| e.d_zbar())
    }
    pub fn value(&self) -> GradedMatrix<T> {
        self.map(|e| e.value().clone())
    }
}

impl GradedMatrix<GrassmannElement> {
    /// Entry-wise left derivative with respect to generator k.
    pub fn generator_derivative(&self, k: usize) -> Result<Self, crate::grassmann::GrassmannError> {
        self.try_map(|e| e.derivative(k))
    }
}

impl<T: Algebra> Add for GradedMatrix<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.checked_add(&rhs).expect("graded add")
    }
}

impl<T: Algebra> Sub for GradedMatrix<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.checked_sub(&rhs).expect("graded sub")
    }
}

impl<T: Algebra> Mul for GradedMatrix<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.checked_mul(&rhs).expect("graded mul")
    }
}

impl<'a, T: Algebra> Mul<&'a GradedMatrix<T>> for &'a GradedMatrix<T> {
    type Output = GradedMatrix<T>;
    fn mul(self, rhs: &'a GradedMatrix<T>) -> GradedMatrix<T> {
        self.checked_mul(rhs).expect("graded mul")
    }
}

impl<T: Algebra> Neg for GradedMatrix<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.map(|e| -e.clone())
    }
}

/// XY − (−1)^{|X||Y|} YX.
pub fn graded_bracket<T: Algebra>(x: &GradedMatrix<T>, y: &GradedMatrix<T>) -> Result<GradedMatrix<T>, GradedError> {
    let px = x.parity().bit().ok_or(GradedError::MixedParity)?;
    let py = y.parity().bit().ok_or(GradedError::MixedParity)?;
    let xy = x.checked_mul(y)?;
    let yx = y.checked_mul(x)?;
    if px == 1 && py == 1 {
        xy.checked_add(&yx)
    } else {
        xy.checked_sub(&yx)
    }
}

#[derive(Debug, Clone)]
pub struct OspGenerators<T> {
    pub h: GradedMatrix<T>,
    pub e_plus: GradedMatrix<T>,
    pub e_minus: GradedMatrix<T>,
    pub f_plus: GradedMatrix<T>,
    pub f_minus: GradedMatrix<T>,
}

/// The five 3×3 osp(1,2) generators, entries lifted into the context of `like`.
pub fn osp_generators<T: Algebra>(like: &T) -> OspGenerators<T> {
    let g = osp_grading;
    OspGenerators {
        h: GradedMatrix::from_complex(g(), &[&[1., 0., 0.], &[0., -1., 0.], &[0., 0., 0.]], like),
        e_plus: GradedMatrix::from_complex(g(), &[&[0., 1., 0.], &[0., 0., 0.], &[0., 0., 0.]], like),
        e_minus: GradedMatrix::from_complex(g(), &[&[0., 0., 0.], &[1., 0., 0.], &[0., 0., 0.]], like),
        f_plus: GradedMatrix::from_complex(g(), &[&[0., 0., 1.], &[0., 0., 0.], &[0., 1., 0.]], like),
        f_minus: GradedMatrix::from_complex(g(), &[&[0., 0., 0.], &[0., 0., -1.], &[1., 0., 0.]], like),
    }
}

/// The 2×2 sl(2) subset {H, E+, E−}.
pub fn sl2_generators<T: Algebra>(like: &T) -> (GradedMatrix<T>, GradedMatrix<T>, GradedMatrix<T>) {
    let g = || vec![false, false];
    (
        GradedMatrix::from_complex(g(), &[&[1., 0.], &[0., -1.]], like),
        GradedMatrix::from_complex(g(), &[&[0., 1.], &[0., 0.]], like),
        GradedMatrix::from_complex(g(), &[&[0., 0.], &[1., 0.]], like),
    )
}

/// One evaluated relation.
#[derive(Debug, Clone, Serialize)]
pub struct RelationCheck {
    pub relation: String,
    pub deviation: f64,
}

/// Evaluate the printed (anti)commutation relations on the given generator set.
pub fn osp_relation_checks(g: &OspGenerators<Complex64>) -> Result<Vec<RelationCheck>, GradedError> {
    let b = |x: &GradedMatrix<Complex64>, y: &GradedMatrix<Complex64>| graded_bracket(x, y);
    let dev = |lhs: GradedMatrix<Complex64>, rhs: GradedMatrix<Complex64>| -> f64 {
        lhs.checked_sub(&rhs).map(|d| d.max_abs()).unwrap_or(f64::INFINITY)
    };
    let c = |k: f64| Complex64::new(k, 0.0);
    let mut out = Vec::new();
    let mut push = |name: &str, d: f64| out.push(RelationCheck { relation: name.into(), deviation: d });
    push("[H,E+] = 2E+", dev(b(&g.h, &g.e_plus)?, g.e_plus.scale(c(2.0))));
    push("[H,E-] = -2E-", dev(b(&g.h, &g.e_minus)?, g.e_minus.scale(c(-2.0))));
    push("[H,F+] = F+", dev(b(&g.h, &g.f_plus)?, g.f_plus.clone()));
    push("[H,F-] = -F-", dev(b(&g.h, &g.f_minus)?, g.f_minus.scale(c(-1.0))));
    push("[E+,E-] = H", dev(b(&g.e_plus, &g.e_minus)?, g.h.clone()));
    push("{F+,F-} = H", dev(b(&g.f_plus, &g.f_minus)?, g.h.clone()));
    push("[E+,F-] = -F+", dev(b(&g.e_plus, &g.f_minus)?, g.f_plus.scale(c(-1.0))));
    push("[E-,F+] = -F-", dev(b(&g.e_minus, &g.f_plus)?, g.f_minus.scale(c(-1.0))));
    push("{F+,F+} = 2E+", dev(b(&g.f_plus, &g.f_plus)?, g.e_plus.scale(c(2.0))));
    push("{F-,F-} = -2E-", dev(b(&g.f_minus, &g.f_minus)?, g.e_minus.scale(c(-2.0))));
    Ok(out)
}

/// All printed osp(1,2) relations; max deviation in the report (0 exactly for integers).
pub fn check_osp_relations() -> ResidualReport {
    check_osp_relations_on(&osp_generators(&Complex64::new(0.0, 0.0)))
}

pub fn check_osp_relations_on(g: &OspGenerators<Complex64>) -> ResidualReport {
    match osp_relation_checks(g) {
        Ok(checks) => {
            let max = checks.iter().map(|c| c.deviation).fold(0.0, f64::max);
            let mut r = ResidualReport::exact("osp(1,2) relations", max);
            for c in checks {
                r.notes.push(format!("{}: {}", c.relation, c.deviation));
            }
            r
        }
        Err(e) => ResidualReport::exact("osp(1,2) relations", f64::INFINITY).with_note(e.to_string()),
    }
}

/// sl(2) relations [H,E±] = ±2E±, [E+,E−] = H on the 2×2 subset.
pub fn check_sl2_relations() -> ResidualReport {
    let z = Complex64::new(0.0, 0.0);
    let (h, ep, em) = sl2_generators(&z);
    let c = |k: f64| Complex64::new(k, 0.0);
    let d1 = graded_bracket(&h, &ep).unwrap().checked_sub(&ep.scale(c(2.0))).unwrap().max_abs();
    let d2 = graded_bracket(&h, &em).unwrap().checked_sub(&em.scale(c(-2.0))).unwrap().max_abs();
    let d3 = graded_bracket(&ep, &em).unwrap().checked_sub(&h).unwrap().max_abs();
    ResidualReport::exact("sl(2) relations", d1.max(d2).max(d3))
}

/// A matrix-valued field: node → matrix of jets, honouring the derivative mode.
pub type MatrixFn<T> =
    Arc<dyn Fn(usize, usize, usize, DerivativeMode) -> Result<Option<GradedMatrix<Jet<T>>>, FieldError> + Send + Sync>;

#[derive(Clone)]
pub struct MatrixField<T> {
    pub grid: LightConeGrid,
    pub f: MatrixFn<T>,
}

impl<T: Algebra> MatrixField<T> {
    pub fn new(
        grid: LightConeGrid,
        f: impl Fn(usize, usize, usize, DerivativeMode) -> Result<Option<GradedMatrix<Jet<T>>>, FieldError>
            + Send
            + Sync
            + 'static,
    ) -> Self {
        Self { grid, f: Arc::new(f) }
    }

    /// Constant matrix everywhere.
    pub fn constant(grid: LightConeGrid, m: GradedMatrix<T>) -> Self {
        Self::new(grid, move |_, _, order, _| Ok(Some(m.map(|e| Jet::constant(e.clone(), order)))))
    }

    /// Matrix samples at every node; only finite-difference mode is available.
    pub fn sampled(grid: LightConeGrid, samples: Vec<GradedMatrix<T>>) -> Result<Self, FieldError> {
        if samples.len() != grid.len() {
            return Err(FieldError::GridMismatch("matrix sample count".into()));
        }
        let g = grid.clone();
        let samples = Arc::new(samples);
        Ok(Self::new(grid, move |i, j, order, mode| {
            if mode == DerivativeMode::Analytic {
                return Err(FieldError::NotAvailable("sampled matrix field".into()));
            }
            let m = crate::grid::fd_margin(order);
            if i < m || i + m >= g.nz || j < m || j + m >= g.nzbar {
                return Ok(None);
            }
            let base = &samples[g.index(i, j)];
            let mut entries = Vec::with_capacity(base.dim() * base.dim());
            for r in 0..base.dim() {
                for c in 0..base.dim() {
                    entries.push(crate::grid::fd_jet(order, g.h_z, g.h_zbar, |di, dj| {
                        let s = &samples[g.index((i as isize + di) as usize, (j as isize + dj) as usize)];
                        Ok(s.get(r, c).clone())
                    })?);
                }
            }
            Ok(Some(GradedMatrix::from_entries(base.grading().to_vec(), entries)))
        }))
    }

    pub fn at(&self, i: usize, j: usize, order: usize, mode: DerivativeMode) -> Result<Option<GradedMatrix<Jet<T>>>, FieldError> {
        (self.f)(i, j, order, mode)
    }
}

/// ∂̄A − ∂Ā + [A, Ā] at every node (component connections are even matrices).
pub fn zero_curvature_residual<T: Algebra>(
    a: &MatrixField<T>,
    abar: &MatrixField<T>,
    mode: DerivativeMode,
) -> Result<ResidualReport, FieldError> {
    a.grid.same_as(&abar.grid)?;
    let reports = scan_grid::<Complex64>(&a.grid, &["zero curvature"], mode, |i, j| {
        let (Some(aj), Some(bj)) = (a.at(i, j, 1, mode)?, abar.at(i, j, 1, mode)?) else {
            return Ok(None);
        };
        let av = aj.value();
        let bv = bj.value();
        let comm = av.checked_mul(&bv).and_then(|ab| ab.checked_sub(&bv.checked_mul(&av)?));
        let comm = comm.map_err(|e| FieldError::GridMismatch(e.to_string()))?;
        let r = aj.d_zbar().value().checked_sub(&bj.d_z().value()).and_then(|d| d.checked_add(&comm));
        let r = r.map_err(|e| FieldError::GridMismatch(e.to_string()))?;
        Ok(Some(vec![matrix_norm_element(&r)]))
    })?;
    Ok(reports.into_iter().next().expect("one report"))
}

/// Both intertwining residuals ∂K − (A1K − KA2) and ∂̄K − (Ā1K − KĀ2).
pub fn kmatrix_residual<T: Algebra>(
    k: &MatrixField<T>,
    a1: &MatrixField<T>,
    a2: &MatrixField<T>,
    abar1: &MatrixField<T>,
    abar2: &MatrixField<T>,
    mode: DerivativeMode,
) -> Result<Vec<ResidualReport>, FieldError> {
    for f in [a1, a2, abar1, abar2] {
        k.grid.same_as(&f.grid)?;
    }
    let map_err = |e: GradedError| FieldError::GridMismatch(e.to_string());
    scan_grid::<Complex64>(&k.grid, &["dK = A1 K - K A2", "dbar K = Abar1 K - K Abar2"], mode, |i, j| {
        let Some(kj) = k.at(i, j, 1, mode)? else { return Ok(None) };
        let mut vals = Vec::new();
        let kv = kj.value();
        for (x, y, dk) in [(a1, a2, kj.d_z().value()), (abar1, abar2, kj.d_zbar().value())] {
            let (Some(xj), Some(yj)) = (x.at(i, j, 0, mode)?, y.at(i, j, 0, mode)?) else {
                return Ok(None);
            };
            let (xv, yv) = (xj.value(), yj.value());
            if xv.dim() != kv.dim() || yv.dim() != kv.dim() {
                return Err(FieldError::GridMismatch(format!("dimension {} vs {}", xv.dim(), kv.dim())));
            }
            let rhs = xv.checked_mul(&kv).and_then(|p| p.checked_sub(&kv.checked_mul(&yv)?)).map_err(map_err)?;
            vals.push(matrix_norm_element(&dk.checked_sub(&rhs).map_err(map_err)?));
        }
        Ok(Some(vals))
    })
}

/// Reduce a matrix to a complex number carrying its coefficient-wise sup norm, so matrix
/// residuals can flow through the scalar report machinery.
fn matrix_norm_element<T: Algebra>(m: &GradedMatrix<T>) -> Complex64 {
    Complex64::new(m.max_abs(), 0.0)
}
