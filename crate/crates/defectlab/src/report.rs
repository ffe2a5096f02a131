//! Residual and charge reports, norm accumulation, and convergence slopes.

use serde::{Deserialize, Serialize};

use crate::algebra::Algebra;
use crate::grid::{DerivativeMode, FieldError, LightConeGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub equation_id: String,
    pub max_norm: f64,
    pub mean_norm: f64,
    /// Observed convergence order across refinement levels (finite-difference studies).
    pub slope: Option<f64>,
    /// Nodes per direction at each level, coarsest first.
    pub grid_sizes: Vec<usize>,
    /// Max norm at each level, aligned with `grid_sizes`.
    #[serde(default)]
    pub level_norms: Vec<f64>,
    #[serde(default)]
    pub mode: String,
    #[serde(default)]
    pub points: usize,
    /// Location (z, z̄) of the largest residual.
    #[serde(default)]
    pub argmax: Option<(f64, f64)>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl ResidualReport {
    pub fn exact(equation_id: &str, max_norm: f64) -> Self {
        Self {
            equation_id: equation_id.into(),
            max_norm,
            mean_norm: max_norm,
            slope: None,
            grid_sizes: Vec::new(),
            level_norms: Vec::new(),
            mode: "exact".into(),
            points: 1,
            argmax: None,
            notes: Vec::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    /// True when the finest level sits below `tol` or every level is exactly zero.
    pub fn below(&self, tol: f64) -> bool {
        self.max_norm <= tol
    }

    /// Slope requirement; a residual that is identically zero at every level passes.
    pub fn converges_at(&self, min_slope: f64) -> bool {
        if self.level_norms.iter().all(|&v| v == 0.0) {
            return true;
        }
        self.slope.map(|s| s >= min_slope).unwrap_or(false)
    }
}

/// Streaming max/mean accumulator.
#[derive(Debug, Clone, Default)]
pub struct NormAccumulator {
    pub max: f64,
    pub sum: f64,
    pub count: usize,
    pub argmax: Option<(f64, f64)>,
}

impl NormAccumulator {
    pub fn push(&mut self, v: f64, at: (f64, f64)) {
        if v > self.max || self.argmax.is_none() || v.is_nan() {
            self.max = if v.is_nan() { f64::NAN } else { v.max(self.max) };
            self.argmax = Some(at);
        }
        self.sum += v;
        self.count += 1;
    }

    pub fn report(&self, equation_id: &str, grid: &LightConeGrid, mode: DerivativeMode) -> ResidualReport {
        ResidualReport {
            equation_id: equation_id.into(),
            max_norm: self.max,
            mean_norm: if self.count > 0 { self.sum / self.count as f64 } else { 0.0 },
            slope: None,
            grid_sizes: vec![grid.nz],
            level_norms: vec![self.max],
            mode: mode.label().into(),
            points: self.count,
            argmax: self.argmax,
            notes: Vec::new(),
        }
    }
}

/// Evaluate residual vectors at the given nodes.  `f` returns `None` where the residual is
/// not defined (stencil off-grid); every returned component is reduced coefficient-wise.
pub fn scan_nodes<T: Algebra>(
    grid: &LightConeGrid,
    ids: &[&str],
    mode: DerivativeMode,
    nodes: impl IntoIterator<Item = (usize, usize)>,
    mut f: impl FnMut(usize, usize) -> Result<Option<Vec<T>>, FieldError>,
) -> Result<Vec<ResidualReport>, FieldError> {
    let mut acc = vec![NormAccumulator::default(); ids.len()];
    for (i, j) in nodes {
        if let Some(r) = f(i, j)? {
            assert_eq!(r.len(), ids.len(), "residual arity");
            for (a, v) in acc.iter_mut().zip(&r) {
                a.push(v.max_abs(), (grid.z(i), grid.zbar(j)));
            }
        }
    }
    Ok(ids
        .iter()
        .zip(&acc)
        .map(|(id, a)| a.report(id, grid, mode))
        .collect())
}

/// Scan all grid nodes.
pub fn scan_grid<T: Algebra>(
    grid: &LightConeGrid,
    ids: &[&str],
    mode: DerivativeMode,
    f: impl FnMut(usize, usize) -> Result<Option<Vec<T>>, FieldError>,
) -> Result<Vec<ResidualReport>, FieldError> {
    scan_nodes(grid, ids, mode, grid.window_nodes(), f)
}

/// Least-squares slope of log(err) against log(h).
pub fn convergence_slope(h: &[f64], err: &[f64]) -> Option<f64> {
    if h.len() < 2 || err.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
        return None;
    }
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Some(sxy / sxx)
}

/// Merge per-level report sets (same equation ids in the same order) into one report per
/// equation, carrying the finest-level norms and the observed slope.
pub fn merge_levels(spacings: &[f64], levels: Vec<Vec<ResidualReport>>) -> Vec<ResidualReport> {
    assert_eq!(spacings.len(), levels.len());
    let Some(finest) = levels.last().cloned() else {
        return Vec::new();
    };
    finest
        .into_iter()
        .enumerate()
        .map(|(k, mut r)| {
            let norms: Vec<f64> = levels.iter().map(|lv| lv[k].max_norm).collect();
            r.grid_sizes = levels.iter().map(|lv| lv[k].grid_sizes.first().copied().unwrap_or(0)).collect();
            r.slope = convergence_slope(spacings, &norms);
            r.level_norms = norms;
            r
        })
        .collect()
}

/// Look up a report by id.
pub fn find<'a>(reports: &'a [ResidualReport], id: &str) -> Option<&'a ResidualReport> {
    reports.iter().find(|r| r.equation_id == id)
}

/// Plain-text convergence table.
pub fn table(reports: &[ResidualReport]) -> String {
    let mut out = String::new();
    for r in reports {
        let norms: Vec<String> = r.level_norms.iter().map(|v| format!("{v:.3e}")).collect();
        let slope = r.slope.map(|s| format!("{s:.3}")).unwrap_or_else(|| "-".into());
        out.push_str(&format!(
            "{:<34} sizes={:?} norms=[{}] slope={}\n",
            r.equation_id,
            r.grid_sizes,
            norms.join(", "),
            slope
        ));
    }
    out
}

/// Run `f` on each grid (coarsest first) and merge the per-level reports by spacing h_z.
pub fn refinement_study<E>(
    grids: &[LightConeGrid],
    mut f: impl FnMut(&LightConeGrid) -> Result<Vec<ResidualReport>, E>,
) -> Result<Vec<ResidualReport>, E> {
    let mut levels = Vec::with_capacity(grids.len());
    for g in grids {
        levels.push(f(g)?);
    }
    let h: Vec<f64> = grids.iter().map(|g| g.h_z).collect();
    Ok(merge_levels(&h, levels))
}
