//! Uniform light-cone grids, sampled/closed-form fields, and finite-difference jets.
//!
//! Coordinates follow z = (x − t)/2, z̄ = (x + t)/2, so x = z + z̄ and t = z̄ − z.
//! Node (i, j) sits at (z_i, z̄_j).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

use crate::algebra::Algebra;
use crate::grassmann::GrassmannError;
use crate::jet::Jet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error(transparent)]
    Algebra(#[from] GrassmannError),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("grid too small: {0}")]
    Undersized(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("analytic derivatives are not available for {0}")]
    NotAvailable(String),
    #[error("singular {what} at z={z}, zbar={zbar}")]
    Singular { what: String, z: f64, zbar: f64 },
    #[error("blow-up: |{quantity}| = {magnitude:e} exceeds the guard at z={z}, zbar={zbar}")]
    BlowUp { quantity: String, magnitude: f64, z: f64, zbar: f64 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DerivativeMode {
    /// Exact derivatives from closed-form or equation-generated jets.
    Analytic,
    /// Centred second-order finite differences on node samples.
    FiniteDifference,
}

impl DerivativeMode {
    pub fn label(self) -> &'static str {
        match self {
            DerivativeMode::Analytic => "analytic",
            DerivativeMode::FiniteDifference => "finite-difference",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightConeGrid {
    pub z0: f64,
    pub zbar0: f64,
    pub h_z: f64,
    pub h_zbar: f64,
    pub nz: usize,
    pub nzbar: usize,
    /// Optional measurement window [z_lo, z_hi, zbar_lo, zbar_hi]: residual scans only visit
    /// nodes inside it, so refinement studies compare norms over one physical region.
    #[serde(default)]
    pub window: Option<[f64; 4]>,
}

impl LightConeGrid {
    /// `nz` × `nzbar` nodes spanning the closed ranges.
    pub fn new(z_range: (f64, f64), zbar_range: (f64, f64), nz: usize, nzbar: usize) -> Result<Self, FieldError> {
        if nz == 0 || nzbar == 0 {
            return Err(FieldError::InvalidGrid("empty grid".into()));
        }
        if !(z_range.1 >= z_range.0) || !(zbar_range.1 >= zbar_range.0) {
            return Err(FieldError::InvalidGrid("ranges must be increasing".into()));
        }
        let h_z = if nz > 1 { (z_range.1 - z_range.0) / (nz - 1) as f64 } else { 0.0 };
        let h_zbar = if nzbar > 1 { (zbar_range.1 - zbar_range.0) / (nzbar - 1) as f64 } else { 0.0 };
        if (nz > 1 && h_z <= 0.0) || (nzbar > 1 && h_zbar <= 0.0) {
            return Err(FieldError::InvalidGrid("samples must be strictly increasing".into()));
        }
        Ok(Self { z0: z_range.0, zbar0: zbar_range.0, h_z, h_zbar, nz, nzbar, window: None })
    }

    /// Square grid on [−a, a]² with `n` nodes per direction; x = 0 is the anti-diagonal
    /// i + j = n − 1.
    pub fn symmetric(a: f64, n: usize) -> Result<Self, FieldError> {
        Self::new((-a, a), (-a, a), n, n)
    }

    /// Validate explicit sample arrays (strictly increasing, uniform to 1e-9 relative).
    pub fn from_samples(z: &[f64], zbar: &[f64]) -> Result<Self, FieldError> {
        fn check(s: &[f64], name: &str) -> Result<f64, FieldError> {
            if s.is_empty() {
                return Err(FieldError::InvalidGrid(format!("{name}: no samples")));
            }
            if s.len() == 1 {
                return Ok(0.0);
            }
            let h = s[1] - s[0];
            for w in s.windows(2) {
                let d = w[1] - w[0];
                if d <= 0.0 {
                    return Err(FieldError::InvalidGrid(format!("{name}: samples not strictly increasing")));
                }
                if (d - h).abs() > 1e-9 * h.abs() {
                    return Err(FieldError::InvalidGrid(format!("{name}: spacing not uniform")));
                }
            }
            Ok(h)
        }
        let hz = check(z, "z")?;
        let hzb = check(zbar, "zbar")?;
        Ok(Self { z0: z[0], zbar0: zbar[0], h_z: hz, h_zbar: hzb, nz: z.len(), nzbar: zbar.len(), window: None })
    }

    pub fn z(&self, i: usize) -> f64 {
        self.z0 + i as f64 * self.h_z
    }

    pub fn zbar(&self, j: usize) -> f64 {
        self.zbar0 + j as f64 * self.h_zbar
    }

    pub fn x(&self, i: usize, j: usize) -> f64 {
        self.z(i) + self.zbar(j)
    }

    pub fn t(&self, i: usize, j: usize) -> f64 {
        self.zbar(j) - self.z(i)
    }

    pub fn len(&self) -> usize {
        self.nz * self.nzbar
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.nzbar + j
    }

    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.nz).flat_map(move |i| (0..self.nzbar).map(move |j| (i, j)))
    }

    pub fn in_window(&self, i: usize, j: usize) -> bool {
        match self.window {
            None => true,
            Some([a, b, c, d]) => {
                let eps = 1e-9 * (self.h_z + self.h_zbar);
                let (z, zb) = (self.z(i), self.zbar(j));
                z >= a - eps && z <= b + eps && zb >= c - eps && zb <= d + eps
            }
        }
    }

    /// Nodes inside the measurement window (all nodes when no window is set).
    pub fn window_nodes(&self) -> Vec<(usize, usize)> {
        self.nodes().filter(|&(i, j)| self.in_window(i, j)).collect()
    }

    pub fn with_window(mut self, window: [f64; 4]) -> Self {
        self.window = Some(window);
        self
    }

    /// `levels` grids refined by factors 1, 2, 4, … with the window fixed to this grid's
    /// interior shrunk by `margin` coarse cells — the standard convergence-study setup.
    pub fn refinement_levels(&self, levels: usize, margin: usize) -> Vec<Self> {
        let m = margin as f64;
        let w = [
            self.z0 + m * self.h_z,
            self.z(self.nz - 1) - m * self.h_z,
            self.zbar0 + m * self.h_zbar,
            self.zbar(self.nzbar - 1) - m * self.h_zbar,
        ];
        (0..levels).map(|k| self.refined(1 << k).with_window(w)).collect()
    }

    /// Same ranges with spacing divided by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        let nz = (self.nz - 1) * factor + 1;
        let nzbar = (self.nzbar - 1) * factor + 1;
        Self {
            nz,
            nzbar,
            h_z: self.h_z / factor as f64,
            h_zbar: self.h_zbar / factor as f64,
            ..self.clone()
        }
    }

    /// Nodes on the line x = 0 (within a small fraction of the spacing).
    pub fn defect_line(&self) -> Vec<(usize, usize)> {
        let tol = 1e-9 * (self.h_z + self.h_zbar).max(1e-300);
        self.nodes().filter(|&(i, j)| self.x(i, j).abs() <= tol && self.in_window(i, j)).collect()
    }

    pub fn same_as(&self, other: &LightConeGrid) -> Result<(), FieldError> {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()));
        if self.nz == other.nz
            && self.nzbar == other.nzbar
            && close(self.z0, other.z0)
            && close(self.zbar0, other.zbar0)
            && close(self.h_z, other.h_z)
            && close(self.h_zbar, other.h_zbar)
        {
            Ok(())
        } else {
            Err(FieldError::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// Centred second-order stencil for d^k/dx^k: (offsets, weights) scaled by 1/h^k.
fn stencil(k: usize) -> (&'static [isize], &'static [f64]) {
    match k {
        0 => (&[0], &[1.0]),
        1 => (&[-1, 1], &[-0.5, 0.5]),
        2 => (&[-1, 0, 1], &[1.0, -2.0, 1.0]),
        3 => (&[-2, -1, 1, 2], &[-0.5, 1.0, -1.0, 0.5]),
        4 => (&[-2, -1, 0, 1, 2], &[1.0, -4.0, 6.0, -4.0, 1.0]),
        _ => panic!("finite-difference stencils implemented up to fourth derivatives"),
    }
}

/// Half-width of the stencils needed for a jet of the given order.
pub fn fd_margin(order: usize) -> usize {
    match order {
        0 => 0,
        1 | 2 => 1,
        _ => 2,
    }
}

/// Build a jet of `order` at a node from neighbour values `get(di, dj)` using tensor-product
/// centred stencils.  Second-order accurate in every coefficient.
pub fn fd_jet<T: Algebra>(
    order: usize,
    h_z: f64,
    h_zbar: f64,
    mut get: impl FnMut(isize, isize) -> Result<T, FieldError>,
) -> Result<Jet<T>, FieldError> {
    let centre = get(0, 0)?;
    let m = fd_margin(order) as isize;
    let side = (2 * m + 1) as usize;
    // cache the neighbourhood once
    let mut cache: Vec<Option<T>> = vec![None; side * side];
    let slot = |di: isize, dj: isize| ((di + m) as usize) * side + (dj + m) as usize;
    cache[slot(0, 0)] = Some(centre.clone());
    let mut coeffs = Vec::new();
    for d in 0..=order {
        for b in 0..=d {
            let a = d - b;
            let (oa, wa) = stencil(a);
            let (ob, wb) = stencil(b);
            let scale = 1.0 / (h_z.powi(a as i32) * h_zbar.powi(b as i32) * fact(a) * fact(b));
            let mut acc = centre.zero_like();
            for (p, &w1) in oa.iter().zip(wa) {
                for (q, &w2) in ob.iter().zip(wb) {
                    let s = slot(*p, *q);
                    if cache[s].is_none() {
                        cache[s] = Some(get(*p, *q)?);
                    }
                    acc = acc + cache[s].clone().expect("cached") * (w1 * w2);
                }
            }
            coeffs.push(acc * scale);
        }
    }
    let mut it = coeffs.into_iter();
    Ok(Jet::from_fn(order, |_, _| it.next().expect("coefficient count")))
}

fn fact(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, k| a * k as f64)
}

/// Node-indexed jet closure: (i, j, order) → jet.
pub type ClosedFn<T> = Arc<dyn Fn(usize, usize, usize) -> Result<Jet<T>, FieldError> + Send + Sync>;
/// Derived-field closure: receives the derivative mode and may decline (stencil off-grid).
pub type DerivedFn<T> =
    Arc<dyn Fn(usize, usize, usize, DerivativeMode) -> Result<Option<Jet<T>>, FieldError> + Send + Sync>;

#[derive(Clone)]
enum Source<T> {
    Samples,
    Closed(ClosedFn<T>),
    Derived(DerivedFn<T>),
}

/// A scalar field on a light-cone grid.
///
/// * sampled fields only support finite-difference derivatives;
/// * closed-form fields (exact solutions, equation-generated jets) support both modes — in
///   finite-difference mode only their node values are used;
/// * derived fields compose other fields and forward the requested mode.
#[derive(Clone)]
pub struct Field<T> {
    grid: LightConeGrid,
    values: Option<Arc<Vec<T>>>,
    source: Source<T>,
    pub label: String,
}

impl<T: Algebra> std::fmt::Debug for Field<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.source {
            Source::Samples => "sampled",
            Source::Closed(_) => "closed-form",
            Source::Derived(_) => "derived",
        };
        write!(f, "Field({}, {kind}, {}x{})", self.label, self.grid.nz, self.grid.nzbar)
    }
}

impl<T: Algebra> Field<T> {
    pub fn sampled(grid: LightConeGrid, values: Vec<T>, label: &str) -> Result<Self, FieldError> {
        if values.len() != grid.len() {
            return Err(FieldError::GridMismatch(format!(
                "{label}: {} samples for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values: Some(Arc::new(values)), source: Source::Samples, label: label.into() })
    }

    pub fn closed_form(
        grid: LightConeGrid,
        label: &str,
        f: impl Fn(usize, usize, usize) -> Result<Jet<T>, FieldError> + Send + Sync + 'static,
    ) -> Self {
        Self { grid, values: None, source: Source::Closed(Arc::new(f)), label: label.into() }
    }

    pub fn derived(
        grid: LightConeGrid,
        label: &str,
        f: impl Fn(usize, usize, usize, DerivativeMode) -> Result<Option<Jet<T>>, FieldError>
            + Send
            + Sync
            + 'static,
    ) -> Self {
        Self { grid, values: None, source: Source::Derived(Arc::new(f)), label: label.into() }
    }

    /// Attach node samples to a closed-form field (used for integrated states whose
    /// analytic jets are regenerated from the node values).
    pub fn with_samples(mut self, values: Vec<T>) -> Result<Self, FieldError> {
        if values.len() != self.grid.len() {
            return Err(FieldError::GridMismatch(format!("{}: sample count", self.label)));
        }
        self.values = Some(Arc::new(values));
        Ok(self)
    }

    pub fn grid(&self) -> &LightConeGrid {
        &self.grid
    }

    pub fn has_analytic(&self) -> bool {
        !matches!(self.source, Source::Samples)
    }

    pub fn value(&self, i: usize, j: usize) -> Result<T, FieldError> {
        if let Some(v) = &self.values {
            return Ok(v[self.grid.index(i, j)].clone());
        }
        match &self.source {
            Source::Closed(f) => Ok(f(i, j, 0)?.into_value()),
            // analytic where the inputs allow it, otherwise their node samples
            Source::Derived(f) => match f(i, j, 0, DerivativeMode::Analytic) {
                Ok(Some(jt)) => Ok(jt.into_value()),
                Err(FieldError::NotAvailable(_)) | Ok(None) => f(i, j, 0, DerivativeMode::FiniteDifference)?
                    .map(|j| j.into_value())
                    .ok_or_else(|| FieldError::Undersized(format!("{}: value unavailable", self.label))),
                Err(e) => Err(e),
            },
            Source::Samples => unreachable!("sampled field without values"),
        }
    }

    /// Jet at node (i, j); `Ok(None)` when a finite-difference stencil would leave the grid.
    pub fn jet(&self, i: usize, j: usize, order: usize, mode: DerivativeMode) -> Result<Option<Jet<T>>, FieldError> {
        match (&self.source, mode) {
            (Source::Derived(f), _) => f(i, j, order, mode),
            (Source::Closed(f), DerivativeMode::Analytic) => f(i, j, order).map(Some),
            (Source::Samples, DerivativeMode::Analytic) => Err(FieldError::NotAvailable(self.label.clone())),
            (_, DerivativeMode::FiniteDifference) => {
                let m = fd_margin(order);
                let g = &self.grid;
                let need_z = if order == 0 { 0 } else { m };
                if i < need_z || i + need_z >= g.nz || j < need_z || j + need_z >= g.nzbar {
                    return Ok(None);
                }
                fd_jet(order, g.h_z, g.h_zbar, |di, dj| {
                    self.value((i as isize + di) as usize, (j as isize + dj) as usize)
                })
                .map(Some)
            }
        }
    }

    /// All node values in grid order.
    pub fn values(&self) -> Result<Vec<T>, FieldError> {
        if let Some(v) = &self.values {
            return Ok(v.as_ref().clone());
        }
        self.grid.nodes().map(|(i, j)| self.value(i, j)).collect()
    }

    /// Evaluate and keep only the node samples.
    pub fn sample(&self) -> Result<Self, FieldError> {
        Self::sampled(self.grid.clone(), self.values()?, &self.label)
    }

    pub fn max_abs(&self) -> Result<f64, FieldError> {
        Ok(self.values()?.iter().map(|v| v.max_abs()).fold(0.0, f64::max))
    }
}

/// Convenience: gather jets of several fields at a node; `None` if any is unavailable.
pub fn jets_at<T: Algebra>(
    fields: &[&Field<T>],
    i: usize,
    j: usize,
    order: usize,
    mode: DerivativeMode,
) -> Result<Option<Vec<Jet<T>>>, FieldError> {
    let mut out = Vec::with_capacity(fields.len());
    for f in fields {
        match f.jet(i, j, order, mode)? {
            Some(jt) => out.push(jt),
            None => return Ok(None),
        }
    }
    Ok(Some(out))
}

pub fn check_same_grid<T: Algebra>(fields: &[&Field<T>]) -> Result<(), FieldError> {
    for w in fields.windows(2) {
        w[0].grid().same_as(w[1].grid())?;
    }
    Ok(())
}

/// Constant field.
pub fn constant_field<T: Algebra>(grid: &LightConeGrid, value: T, label: &str) -> Field<T> {
    Field::closed_form(grid.clone(), label, move |_, _, order| Ok(Jet::constant(value.clone(), order)))
}

/// Coordinate jets (z, z̄) at node (i, j) in the context of `like`.
pub fn coordinate_jets<T: Algebra>(grid: &LightConeGrid, i: usize, j: usize, like: &T, order: usize) -> (Jet<T>, Jet<T>) {
    (Jet::z(grid.z(i), like, order), Jet::zbar(grid.zbar(j), like, order))
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}
