//! Bosonic Liouville theory with type-I and type-II defects.
//!
//! Conventions: z = (x − t)/2, z̄ = (x + t)/2, ∂ = ∂x − ∂t, ∂̄ = ∂x + ∂t, bulk equation
//! ∂∂̄φ = μ²e^{2φ}.  Everything is complex; the i factors of the defect conditions are taken
//! literally.  The defect equations are written once, generically over the scalar algebra, so
//! the super module reuses them verbatim (fermion-free reduction is then bitwise).

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::{re, Algebra, I};
use crate::characteristics::{integrated_fields, march, CharSystem, Known, MarchOrder};
use crate::graded_linalg::{GradedMatrix, MatrixField};
use crate::grid::{jets_at, DerivativeMode, Field, FieldError, LightConeGrid};
use crate::jet::Jet;
use crate::report::{scan_grid, scan_nodes, ResidualReport};

pub type BosonicField = Field<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefectParams {
    pub mu: Complex64,
    pub beta: Complex64,
    pub kappa: Complex64,
    /// K-matrix constants: a11, c11 (first bosonic solution), b11 (prime), b11, d11 (super).
    pub a11: Complex64,
    pub c11: Complex64,
    pub b11: Complex64,
    pub d11: Complex64,
    /// Abort marching when |e^{Λ0}| or |e^{φ+−Λ0}| exceeds this.
    pub blowup_bound: f64,
}

impl Default for DefectParams {
    fn default() -> Self {
        Self {
            mu: re(1.0),
            beta: re(1.0),
            kappa: re(0.0),
            a11: re(1.0),
            c11: re(1.0),
            b11: re(1.0),
            d11: re(1.0),
            blowup_bound: 1e12,
        }
    }
}

impl DefectParams {
    pub fn new(mu: Complex64, beta: Complex64, kappa: Complex64) -> Result<Self, FieldError> {
        let p = Self { mu, beta, kappa, ..Self::default() };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        if self.beta == re(0.0) {
            return Err(FieldError::Parameter("beta must be nonzero".into()));
        }
        if self.mu == re(0.0) {
            return Err(FieldError::Parameter("mu must be nonzero".into()));
        }
        if !(self.blowup_bound > 0.0) {
            return Err(FieldError::Parameter("blow-up bound must be positive".into()));
        }
        Ok(())
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = re(kappa);
        self
    }

    /// iμ/β², the coefficient of the ∂-direction defect terms.
    pub fn c(&self) -> Complex64 {
        I * self.mu / (self.beta * self.beta)
    }

    /// 2iμβ², the coefficient of the ∂̄-direction defect term.
    pub fn d(&self) -> Complex64 {
        2.0 * I * self.mu * self.beta * self.beta
    }

    /// Principal branch.
    pub fn sqrt_mu(&self) -> Complex64 {
        self.mu.sqrt()
    }
}

/// Nonzero spectral parameter; √λ is the principal branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralParameter(Complex64);

impl SpectralParameter {
    pub fn new(lambda: Complex64) -> Result<Self, FieldError> {
        if lambda == re(0.0) || !lambda.is_finite() {
            return Err(FieldError::Parameter("spectral parameter must be finite and nonzero".into()));
        }
        Ok(Self(lambda))
    }
    pub fn value(&self) -> Complex64 {
        self.0
    }
    pub fn sqrt(&self) -> Complex64 {
        self.0.sqrt()
    }
}

// ---------------------------------------------------------------------------------------------
// exact solutions

/// Holomorphic or antiholomorphic function supplied as a jet map (for exact derivatives).
pub type JetMap = Arc<dyn Fn(&Jet<Complex64>) -> Jet<Complex64> + Send + Sync>;

#[derive(Clone)]
pub enum ExactSolution {
    /// φ = −ln(μ(z + z̄ + x0)).
    StaticWall { x0: f64 },
    /// φ = ½ln(F′G′) − ln(μ(F + G)) from samples F(z_i), G(z̄_j); derivatives by centred
    /// differences, so the result carries node values only.
    TwoFunctionSamples { f: Vec<Complex64>, g: Vec<Complex64>, tolerance: f64 },
    /// Same ansatz with F, G given as jet maps (exact derivatives).
    TwoFunction { f: JetMap, g: JetMap, tolerance: f64 },
}

pub fn make_exact_solution(kind: &ExactSolution, grid: &LightConeGrid, mu: Complex64) -> Result<BosonicField, FieldError> {
    match kind {
        ExactSolution::StaticWall { x0 } => static_wall(grid, mu, *x0),
        ExactSolution::TwoFunctionSamples { f, g, tolerance } => two_function_samples(grid, mu, f, g, *tolerance),
        ExactSolution::TwoFunction { f, g, tolerance } => two_function(grid, mu, f.clone(), g.clone(), *tolerance),
    }
}

pub fn static_wall(grid: &LightConeGrid, mu: Complex64, x0: f64) -> Result<BosonicField, FieldError> {
    if mu == re(0.0) {
        return Err(FieldError::Parameter("static wall needs mu != 0".into()));
    }
    for (i, j) in grid.nodes() {
        if grid.z(i) + grid.zbar(j) + x0 <= 0.0 {
            return Err(FieldError::Singular { what: "z + zbar + x0 <= 0 (static wall)".into(), z: grid.z(i), zbar: grid.zbar(j) });
        }
    }
    let g = grid.clone();
    Ok(Field::closed_form(grid.clone(), "phi", move |i, j, order| {
        let w = Jet::z(g.z(i), &re(0.0), order) + Jet::zbar(g.zbar(j), &re(0.0), order) + re(x0);
        Ok(-(w * mu).ln())
    }))
}

fn check_bulk(phi: &BosonicField, mu: Complex64, mode: DerivativeMode, tolerance: f64) -> Result<(), FieldError> {
    // tolerance is relative to the size of the potential term
    let r = liouville_bulk_residual(phi, mu, mode)?;
    let scale = 1.0 + phi.values()?.iter().map(|v| (mu * mu * (2.0 * v).exp()).norm()).fold(0.0, f64::max);
    if !(r.max_norm <= tolerance * scale) {
        return Err(FieldError::Parameter(format!(
            "two-function ansatz rejected by the bulk oracle: residual {:.3e} > {:.1e} x {:.3e}",
            r.max_norm, tolerance, scale
        )));
    }
    Ok(())
}

pub fn two_function(
    grid: &LightConeGrid,
    mu: Complex64,
    f: JetMap,
    g: JetMap,
    tolerance: f64,
) -> Result<BosonicField, FieldError> {
    let gr = grid.clone();
    let (f2, g2) = (f.clone(), g.clone());
    let build = move |i: usize, j: usize, order: usize| -> Result<Jet<Complex64>, FieldError> {
        let fz = f2(&Jet::z(gr.z(i), &re(0.0), order + 1));
        let gz = g2(&Jet::zbar(gr.zbar(j), &re(0.0), order + 1));
        let (fp, gp) = (fz.d_z(), gz.d_zbar());
        let sum = (fz + &gz).truncate(order);
        if fp.value().norm() < 1e-300 || gp.value().norm() < 1e-300 || sum.value().norm() < 1e-300 {
            return Err(FieldError::Singular { what: "F'G' or F+G vanishes".into(), z: gr.z(i), zbar: gr.zbar(j) });
        }
        Ok((fp * gp).ln() * 0.5 - (sum * mu).ln())
    };
    for (i, j) in grid.nodes() {
        build(i, j, 0)?;
    }
    let phi = Field::closed_form(grid.clone(), "phi", build);
    check_bulk(&phi, mu, DerivativeMode::Analytic, tolerance)?;
    Ok(phi)
}

/// Centred first difference with one-sided second-order ends.
fn diff1(v: &[Complex64], h: f64) -> Vec<Complex64> {
    let n = v.len();
    (0..n)
        .map(|k| {
            if k == 0 {
                (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
            } else if k == n - 1 {
                (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h)
            } else {
                (v[k + 1] - v[k - 1]) / (2.0 * h)
            }
        })
        .collect()
}

pub fn two_function_samples(
    grid: &LightConeGrid,
    mu: Complex64,
    f: &[Complex64],
    g: &[Complex64],
    tolerance: f64,
) -> Result<BosonicField, FieldError> {
    if f.len() != grid.nz || g.len() != grid.nzbar {
        return Err(FieldError::GridMismatch("F needs one sample per z node, G one per zbar node".into()));
    }
    if grid.nz < 3 || grid.nzbar < 3 {
        return Err(FieldError::Undersized("two-function samples need >= 3 nodes per direction".into()));
    }
    let (fp, gp) = (diff1(f, grid.h_z), diff1(g, grid.h_zbar));
    let mut values = Vec::with_capacity(grid.len());
    for (i, j) in grid.nodes() {
        let (s, d) = (f[i] + g[j], fp[i] * gp[j]);
        if s.norm() < 1e-300 || d.norm() < 1e-300 {
            return Err(FieldError::Singular { what: "F'G' or F+G vanishes".into(), z: grid.z(i), zbar: grid.zbar(j) });
        }
        values.push(0.5 * d.ln() - (mu * s).ln());
    }
    let phi = Field::sampled(grid.clone(), values, "phi")?;
    check_bulk(&phi, mu, DerivativeMode::FiniteDifference, tolerance)?;
    Ok(phi)
}

/// Möbius data for the exact Bäcklund pair (a + d = −2κ, ad − bc = 1) with shift σ:
/// w = z + σ, w̄ = z̄ + σ, F̃ = (aw + b)/(cw + d), s = 1/(cw + d),
/// φ1 = −ln(μ(w + w̄)), φ2 = ln s − ln(μ(F̃ + w̄)), Λ0 = ln(2iβ²s / (μ(w − F̃))).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobiusPair {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub sigma: f64,
}

impl Default for MobiusPair {
    /// κ = −1 branch; the double root of w = F̃(w) sits at w = 5, far from the unit box.
    fn default() -> Self {
        Self { a: 1.1, b: -0.5, c: 0.02, d: 0.9, sigma: 1.0 }
    }
}

impl MobiusPair {
    pub fn for_kappa(kappa: f64, a: f64, c: f64, sigma: f64) -> Self {
        let d = -2.0 * kappa - a;
        Self { a, b: (a * d - 1.0) / c, c, d, sigma }
    }

    pub fn kappa(&self) -> f64 {
        -(self.a + self.d) / 2.0
    }

    /// Closed-form (φ1, φ2, Λ0) on the grid.
    pub fn state(&self, grid: &LightConeGrid, params: &DefectParams) -> Result<TypeIIState, FieldError> {
        if (self.a * self.d - self.b * self.c - 1.0).abs() > 1e-12 {
            return Err(FieldError::Parameter("Mobius data needs ad - bc = 1".into()));
        }
        if (self.kappa() - params.kappa.re).abs() > 1e-12 || params.kappa.im != 0.0 {
            return Err(FieldError::Parameter(format!("Mobius data has kappa {} but params have {}", self.kappa(), params.kappa)));
        }
        let m = *self;
        let p = *params;
        let parts = move |g: &LightConeGrid, i: usize, j: usize, order: usize| {
            let w = Jet::z(g.z(i), &re(0.0), order) + re(m.sigma);
            let wb = Jet::zbar(g.zbar(j), &re(0.0), order) + re(m.sigma);
            let den = w.clone() * re(m.c) + re(m.d);
            let s = den.recip();
            let ft = (w.clone() * re(m.a) + re(m.b)) * &s;
            (w, wb, s, ft)
        };
        for (i, j) in grid.nodes() {
            let (w, wb, s, ft) = parts(grid, i, j, 0);
            let bad = [(w.clone() + &wb), (ft.clone() + &wb), (w - &ft), s];
            if bad.iter().any(|v| v.value().norm() < 1e-12) {
                return Err(FieldError::Singular { what: "Mobius pair denominator".into(), z: grid.z(i), zbar: grid.zbar(j) });
            }
        }
        let g1 = grid.clone();
        let phi1 = Field::closed_form(grid.clone(), "phi1", move |i, j, order| {
            let (w, wb, _, _) = parts(&g1, i, j, order);
            Ok(-((w + &wb) * p.mu).ln())
        });
        let g2 = grid.clone();
        let phi2 = Field::closed_form(grid.clone(), "phi2", move |i, j, order| {
            let (_, wb, s, ft) = parts(&g2, i, j, order);
            Ok(s.ln() - ((ft + &wb) * p.mu).ln())
        });
        let g3 = grid.clone();
        let lambda0 = Field::closed_form(grid.clone(), "lambda0", move |i, j, order| {
            let (w, _, s, ft) = parts(&g3, i, j, order);
            Ok((s * (2.0 * I * p.beta * p.beta) * ((w - &ft) * p.mu).recip()).ln())
        });
        Ok(TypeIIState { phi1, phi2, lambda0, params: p, cross_defect: None })
    }
}

// ---------------------------------------------------------------------------------------------
// bulk

/// ∂∂̄φ − μ²e^{2φ} from a jet of order ≥ 2.
pub fn bulk_expr<A: Algebra>(phi: &Jet<A>, mu: Complex64) -> A {
    phi.derivative(1, 1) - (phi.value().clone() * 2.0).exp() * (mu * mu)
}

pub fn liouville_bulk_residual(phi: &BosonicField, mu: Complex64, mode: DerivativeMode) -> Result<ResidualReport, FieldError> {
    let g = phi.grid();
    if mode == DerivativeMode::FiniteDifference && (g.nz < 3 || g.nzbar < 3) {
        return Err(FieldError::Undersized("finite-difference bulk residual needs >= 3 nodes per direction".into()));
    }
    let r = scan_grid(g, &["liouville bulk"], mode, |i, j| Ok(phi.jet(i, j, 2, mode)?.map(|jt| vec![bulk_expr(&jt, mu)])))?;
    Ok(r.into_iter().next().expect("one report"))
}

// ---------------------------------------------------------------------------------------------
// type-II defect

pub const TYPE2_IDS: [&str; 4] = [
    "d(phi+ - L0) + c e^L0 sinh phi-",
    "dbar L0",
    "dbar phi- - d e^(phi+ - L0)",
    "d phi- + c e^L0 (cosh phi- + kappa)",
];

/// c e^{Λ0}(cosh φ− + κ) and c e^{Λ0} sinh φ−.
pub fn type2_z_terms<A: Algebra>(p: &DefectParams, phi1: &A, phi2: &A, l0: &A) -> (A, A) {
    let pm = phi1.clone() - phi2;
    let el = l0.exp() * p.c();
    ((el.clone() * (pm.cosh() + p.kappa)), el * pm.sinh())
}

/// d e^{φ+ − Λ0}.
pub fn type2_zbar_term<A: Algebra>(p: &DefectParams, phi1: &A, phi2: &A, l0: &A) -> A {
    ((phi1.clone() + phi2) - l0).exp() * p.d()
}

/// The four type-II Bäcklund residuals from order-≥1 jets.
pub fn type2_exprs<A: Algebra>(p: &DefectParams, phi1: &Jet<A>, phi2: &Jet<A>, l0: &Jet<A>) -> Vec<A> {
    let (v1, v2, vl) = (phi1.value(), phi2.value(), l0.value());
    let (x, y) = type2_z_terms(p, v1, v2, vl);
    let w = type2_zbar_term(p, v1, v2, vl);
    let (d1, d2, dl) = (phi1.derivative(1, 0), phi2.derivative(1, 0), l0.derivative(1, 0));
    let (b1, b2, bl) = (phi1.derivative(0, 1), phi2.derivative(0, 1), l0.derivative(0, 1));
    vec![
        ((d1.clone() + &d2) - &dl) + &y,
        bl,
        (b1 - &b2) - &w,
        (d1 - &d2) + &x,
    ]
}

#[derive(Debug, Clone)]
pub struct TypeIIState {
    pub phi1: BosonicField,
    pub phi2: BosonicField,
    pub lambda0: BosonicField,
    pub params: DefectParams,
    /// Max |state(z-then-z̄) − state(z̄-then-z)| over the grid, for integrated states.
    pub cross_defect: Option<f64>,
}

impl TypeIIState {
    pub fn grid(&self) -> &LightConeGrid {
        self.phi1.grid()
    }
}

pub fn type2_backlund_residual(state: &TypeIIState, mode: DerivativeMode) -> Result<Vec<ResidualReport>, FieldError> {
    crate::grid::check_same_grid(&[&state.phi1, &state.phi2, &state.lambda0])?;
    let p = state.params;
    scan_grid(state.grid(), &TYPE2_IDS, mode, |i, j| {
        Ok(jets_at(&[&state.phi1, &state.phi2, &state.lambda0], i, j, 1, mode)?.map(|v| type2_exprs(&p, &v[0], &v[1], &v[2])))
    })
}

/// ∂[e^{−(φ+−Λ0)}(cosh φ− + κ)].
pub fn antiholomorphic_functional_check(state: &TypeIIState, mode: DerivativeMode) -> Result<ResidualReport, FieldError> {
    let k = state.params.kappa;
    let r = scan_grid(state.grid(), &["d[e^-(phi+ - L0)(cosh phi- + kappa)]"], mode, |i, j| {
        Ok(jets_at(&[&state.phi1, &state.phi2, &state.lambda0], i, j, 1, mode)?.map(|v| {
            let q = (-((v[0].clone() + &v[1]) - &v[2])).exp() * ((v[0].clone() - &v[1]).cosh() + k);
            vec![q.derivative(1, 0)]
        }))
    })?;
    Ok(r.into_iter().next().expect("one report"))
}

/// Characteristic system for (φ2, Λ0) given φ1.
pub struct TypeIISystem {
    pub phi1: BosonicField,
    pub params: DefectParams,
}

impl CharSystem<Complex64> for TypeIISystem {
    fn n_state(&self) -> usize {
        2
    }
    fn state_labels(&self) -> Vec<&'static str> {
        vec!["phi2", "lambda0"]
    }
    fn grid(&self) -> &LightConeGrid {
        self.phi1.grid()
    }
    fn known_jets(&self, i: usize, j: usize, order: usize, mode: DerivativeMode) -> Result<Option<Vec<Jet<Complex64>>>, FieldError> {
        Ok(self.phi1.jet(i, j, order, mode)?.map(|x| vec![x]))
    }
    fn rate_z<A: Algebra>(&self, k: &Known<A>, s: &[A]) -> Vec<A> {
        let (x, y) = type2_z_terms(&self.params, &k.v[0], &s[0], &s[1]);
        let dphi2 = k.dz[0].clone() + &x;
        let dl = (k.dz[0].clone() + &dphi2) + &y;
        vec![dphi2, dl]
    }
    fn rate_zbar<A: Algebra>(&self, k: &Known<A>, s: &[A]) -> Vec<A> {
        let w = type2_zbar_term(&self.params, &k.v[0], &s[0], &s[1]);
        vec![k.dzbar[0].clone() - &w, s[1].zero_like()]
    }
    fn guard(&self, k: &Known<Complex64>, s: &[Complex64]) -> Option<(String, f64)> {
        blowup_guard(self.params.blowup_bound, k.v[0], s[0], s[1])
    }
}

pub(crate) fn blowup_guard(bound: f64, phi1: Complex64, phi2: Complex64, l0: Complex64) -> Option<(String, f64)> {
    let el = l0.exp().norm();
    if !(el <= bound) {
        return Some(("e^L0".into(), el));
    }
    let ep = (phi1 + phi2 - l0).exp().norm();
    if !(ep <= bound) {
        return Some(("e^(phi+ - L0)".into(), ep));
    }
    None
}

/// Seed values of (φ2, Λ0) at the corner node (z_min, z̄_min).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BacklundSeed {
    pub phi2: Complex64,
    pub lambda0: Complex64,
}

fn require_bulk(phi1: &BosonicField, mu: Complex64) -> Result<(), FieldError> {
    if phi1.grid().len() < 2 {
        return Ok(());
    }
    let r = liouville_bulk_residual(phi1, mu, DerivativeMode::Analytic)?;
    let scale = 1.0 + phi1.max_abs()?.exp().powi(2) * mu.norm_sqr();
    if !(r.max_norm <= 1e-8 * scale) {
        return Err(FieldError::Parameter(format!("phi1 is not a Liouville solution (bulk residual {:.3e})", r.max_norm)));
    }
    Ok(())
}

/// March tII1–tII4 from the corner seed; φ1 must carry analytic jets.
pub fn backlund_integrate(phi1: &BosonicField, seed: BacklundSeed, params: &DefectParams) -> Result<TypeIIState, FieldError> {
    params.validate()?;
    require_bulk(phi1, params.mu)?;
    let sys = Arc::new(TypeIISystem { phi1: phi1.clone(), params: *params });
    let s0 = [seed.phi2, seed.lambda0];
    let main = march(sys.as_ref(), &s0, MarchOrder::ZbarThenZ)?;
    let alt = march(sys.as_ref(), &s0, MarchOrder::ZThenZbar)?;
    let cross = main
        .iter()
        .zip(&alt)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm()))
        .fold(0.0, f64::max);
    let mut f = integrated_fields(sys, main)?.into_iter();
    let phi2 = f.next().expect("phi2");
    let lambda0 = f.next().expect("lambda0");
    Ok(TypeIIState { phi1: phi1.clone(), phi2, lambda0, params: *params, cross_defect: Some(cross) })
}

// ---------------------------------------------------------------------------------------------
// type-I defect

pub const TYPE1_IDS: [&str; 2] = ["d phi+ + c sinh phi-", "dbar phi- - d e^phi+"];

pub fn type1_exprs<A: Algebra>(p: &DefectParams, phi1: &Jet<A>, phi2: &Jet<A>) -> Vec<A> {
    let (v1, v2) = (phi1.value(), phi2.value());
    let x = (v1.clone() - v2).sinh() * p.c();
    let w = (v1.clone() + v2).exp() * p.d();
    vec![
        (phi1.derivative(1, 0) + &phi2.derivative(1, 0)) + &x,
        (phi1.derivative(0, 1) - &phi2.derivative(0, 1)) - &w,
    ]
}

#[derive(Debug, Clone)]
pub struct TypeIState {
    pub phi1: BosonicField,
    pub phi2: BosonicField,
    pub params: DefectParams,
}

pub struct TypeISystem {
    pub phi1: BosonicField,
    pub params: DefectParams,
}

impl CharSystem<Complex64> for TypeISystem {
    fn n_state(&self) -> usize {
        1
    }
    fn state_labels(&self) -> Vec<&'static str> {
        vec!["phi2"]
    }
    fn grid(&self) -> &LightConeGrid {
        self.phi1.grid()
    }
    fn known_jets(&self, i: usize, j: usize, order: usize, mode: DerivativeMode) -> Result<Option<Vec<Jet<Complex64>>>, FieldError> {
        Ok(self.phi1.jet(i, j, order, mode)?.map(|x| vec![x]))
    }
    fn rate_z<A: Algebra>(&self, k: &Known<A>, s: &[A]) -> Vec<A> {
        let x = (k.v[0].clone() - &s[0]).sinh() * self.params.c();
        vec![-k.dz[0].clone() - &x]
    }
    fn rate_zbar<A: Algebra>(&self, k: &Known<A>, s: &[A]) -> Vec<A> {
        let w = (k.v[0].clone() + &s[0]).exp() * self.params.d();
        vec![k.dzbar[0].clone() - &w]
    }
    fn guard(&self, k: &Known<Complex64>, s: &[Complex64]) -> Option<(String, f64)> {
        blowup_guard(self.params.blowup_bound, k.v[0], s[0], re(0.0))
    }
}

pub fn type1_integrate(phi1: &BosonicField, seed_phi2: Complex64, params: &DefectParams) -> Result<TypeIState, FieldError> {
    params.validate()?;
    require_bulk(phi1, params.mu)?;
    let sys = Arc::new(TypeISystem { phi1: phi1.clone(), params: *params });
    let states = march(sys.as_ref(), &[seed_phi2], MarchOrder::ZbarThenZ)?;
    let phi2 = integrated_fields(sys, states)?.pop().expect("phi2");
    Ok(TypeIState { phi1: phi1.clone(), phi2, params: *params })
}

#[derive(Debug, Clone)]
pub struct Type1Report {
    pub residuals: Vec<ResidualReport>,
    /// max |type-II residual with Λ0 = 0 − type-I residual| over the shared two equations.
    pub reduction_gap: f64,
}

/// tId residuals, plus the Λ0 → 0 reduction of the type-II residuals (tII1 ↦ first, tII3 ↦
/// second) compared pointwise.
pub fn type1_conditions_residual(
    phi1: &BosonicField,
    phi2: &BosonicField,
    params: &DefectParams,
    mode: DerivativeMode,
) -> Result<Type1Report, FieldError> {
    crate::grid::check_same_grid(&[phi1, phi2])?;
    let zero = crate::grid::constant_field(phi1.grid(), re(0.0), "lambda0");
    let mut gap = 0.0f64;
    let residuals = scan_grid(phi1.grid(), &TYPE1_IDS, mode, |i, j| {
        let Some(v) = jets_at(&[phi1, phi2, &zero], i, j, 1, mode)? else { return Ok(None) };
        let r1 = type1_exprs(params, &v[0], &v[1]);
        let r2 = type2_exprs(params, &v[0], &v[1], &v[2]);
        gap = gap.max((r1[0] - r2[0]).norm()).max((r1[1] - r2[2]).norm());
        Ok(Some(r1))
    })?;
    Ok(Type1Report { residuals, reduction_gap: gap })
}

// ---------------------------------------------------------------------------------------------
// stress tensor and conformal gluing

/// T = (∂φ)² − ∂²φ from a jet of order k ≥ 2 (result has order k − 2).
pub fn t_jet<A: Algebra>(phi: &Jet<A>) -> Jet<A> {
    let d = phi.d_z();
    d.clone() * &d - d.d_z()
}

pub fn tbar_jet<A: Algebra>(phi: &Jet<A>) -> Jet<A> {
    let d = phi.d_zbar();
    d.clone() * &d - d.d_zbar()
}

pub struct StressTensor {
    pub t: BosonicField,
    pub tbar: BosonicField,
    /// ∂̄T and ∂T̄.
    pub conservation: Vec<ResidualReport>,
}

fn derived_from(phi: &BosonicField, label: &str, f: fn(&Jet<Complex64>) -> Jet<Complex64>) -> BosonicField {
    let p = phi.clone();
    Field::derived(phi.grid().clone(), label, move |i, j, order, mode| Ok(p.jet(i, j, order + 2, mode)?.map(|jt| f(&jt))))
}

pub fn stress_tensor(phi: &BosonicField, mode: DerivativeMode) -> Result<StressTensor, FieldError> {
    let t = derived_from(phi, "T", t_jet);
    let tbar = derived_from(phi, "Tbar", tbar_jet);
    let conservation = scan_grid(phi.grid(), &["dbar T", "d Tbar"], mode, |i, j| {
        let (Some(a), Some(b)) = (t.jet(i, j, 1, mode)?, tbar.jet(i, j, 1, mode)?) else { return Ok(None) };
        Ok(Some(vec![a.derivative(0, 1), b.derivative(1, 0)]))
    })?;
    Ok(StressTensor { t, tbar, conservation })
}

fn defect_nodes(grid: &LightConeGrid) -> Result<Vec<(usize, usize)>, FieldError> {
    let nodes = grid.defect_line();
    if nodes.is_empty() {
        return Err(FieldError::Parameter("grid has no nodes on x = 0".into()));
    }
    Ok(nodes)
}

/// |T⁽¹⁾ − T⁽²⁾| and |T̄⁽¹⁾ − T̄⁽²⁾| on the nodes of x = 0.
pub fn conformal_defect_check(state: &TypeIIState, mode: DerivativeMode) -> Result<Vec<ResidualReport>, FieldError> {
    let g = state.grid();
    scan_nodes(g, &["T1 - T2 at x=0", "Tbar1 - Tbar2 at x=0"], mode, defect_nodes(g)?, |i, j| {
        let Some(v) = jets_at(&[&state.phi1, &state.phi2], i, j, 2, mode)? else { return Ok(None) };
        Ok(Some(vec![
            *t_jet(&v[0]).value() - t_jet(&v[1]).value(),
            *tbar_jet(&v[0]).value() - tbar_jet(&v[1]).value(),
        ]))
    })
}

pub struct Type1Conformal {
    /// T̄ gluing, raw T deviation, and the anomaly identity residual.
    pub reports: Vec<ResidualReport>,
    /// max |(T1 − T2) − anomaly| / max |anomaly| over x = 0.
    pub anomaly_mismatch: f64,
}

/// Type-I gluing: T̄ continuous, T jumps by ∂t[2∂φ− + (2iμ/β²)(cosh φ− + κ)].
pub fn type1_conformal_check(state: &TypeIState, mode: DerivativeMode) -> Result<Type1Conformal, FieldError> {
    let g = state.phi1.grid();
    let p = state.params;
    let (mut num, mut den) = (0.0f64, 0.0f64);
    let reports = scan_nodes(
        g,
        &["Tbar1 - Tbar2 at x=0", "T1 - T2 at x=0", "T1 - T2 - anomaly at x=0"],
        mode,
        defect_nodes(g)?,
        |i, j| {
            let Some(v) = jets_at(&[&state.phi1, &state.phi2], i, j, 2, mode)? else { return Ok(None) };
            let pm = v[0].clone() - &v[1];
            let x = pm.d_z() * 2.0 + (pm.cosh() + p.kappa) * (2.0 * p.c());
            let anomaly = (x.derivative(0, 1) - x.derivative(1, 0)) * 0.5;
            let dt = *t_jet(&v[0]).value() - t_jet(&v[1]).value();
            num = num.max((dt - anomaly).norm());
            den = den.max(anomaly.norm());
            Ok(Some(vec![*tbar_jet(&v[0]).value() - tbar_jet(&v[1]).value(), dt, dt - anomaly]))
        },
    )?;
    let anomaly_mismatch = if den > 0.0 { num / den } else if num == 0.0 { 0.0 } else { f64::INFINITY };
    Ok(Type1Conformal { reports, anomaly_mismatch })
}

// ---------------------------------------------------------------------------------------------
// Lax pair and defect matrices

fn two_by_two<A: Algebra>(e: [Jet<A>; 4]) -> GradedMatrix<Jet<A>> {
    GradedMatrix::from_entries(vec![false, false], e.into())
}

/// A = [[−∂φ/2, −λμe^φ], [0, ∂φ/2]], Ā = [[∂̄φ/2, 0], [−(μ/λ)e^φ, −∂̄φ/2]] from a jet of
/// order k + 1 (entries have order k).
pub fn lax_entries<A: Algebra>(phi: &Jet<A>, mu: Complex64, lambda: Complex64) -> ([Jet<A>; 4], [Jet<A>; 4]) {
    let k = phi.order().saturating_sub(1);
    let v = phi.truncate(k);
    let e = v.exp();
    let zero = v.zero_like();
    let (dz, dzb) = (phi.d_z(), phi.d_zbar());
    (
        [dz.clone() * -0.5, e.clone() * (-lambda * mu), zero.clone(), dz * 0.5],
        [dzb.clone() * 0.5, zero, e * (-mu / lambda), dzb * -0.5],
    )
}

pub fn lax_connection(phi: &BosonicField, mu: Complex64, lambda: SpectralParameter) -> (MatrixField<Complex64>, MatrixField<Complex64>) {
    let l = lambda.value();
    let (p1, p2) = (phi.clone(), phi.clone());
    let a = MatrixField::new(phi.grid().clone(), move |i, j, order, mode| {
        Ok(p1.jet(i, j, order + 1, mode)?.map(|jt| two_by_two(lax_entries(&jt, mu, l).0)))
    });
    let abar = MatrixField::new(phi.grid().clone(), move |i, j, order, mode| {
        Ok(p2.jet(i, j, order + 1, mode)?.map(|jt| two_by_two(lax_entries(&jt, mu, l).1)))
    });
    (a, abar)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KVariant {
    First,
    Prime,
}

/// Entries (row-major) of the bosonic K-matrix from jets of φ1, φ2, Λ0.
pub fn k_entries<A: Algebra>(
    p: &DefectParams,
    lambda: Complex64,
    variant: KVariant,
    phi1: &Jet<A>,
    phi2: &Jet<A>,
    l0: &Jet<A>,
) -> [Jet<A>; 4] {
    let b2 = p.beta * p.beta;
    let pm = phi1.clone() - phi2;
    let half = (phi1.clone() + phi2) * 0.5 - l0;
    let bracket = pm.cosh() + p.kappa;
    match variant {
        KVariant::First => {
            let (a11, c11) = (p.a11, p.c11);
            let ep = (pm.clone() * 0.5).exp();
            let em = (pm * -0.5).exp();
            let l2 = lambda * lambda;
            [
                ep.clone() * a11 + &(em.clone() * (c11 / l2)),
                half.exp() * (-2.0 * I * b2 / lambda * c11),
                (-half).exp() * (I * a11 / (lambda * b2)) * &bracket,
                em * a11 + &(ep * (c11 / l2)),
            ]
        }
        KVariant::Prime => {
            let b11 = p.b11;
            let ch = (pm * 0.5).cosh() * (b11 / lambda);
            [
                ch.clone(),
                half.exp() * (-I * b2 * b11),
                (-half).exp() * (I * b11 / (2.0 * b2 * lambda * lambda)) * &bracket,
                ch,
            ]
        }
    }
}

pub fn defect_matrix_k(state: &TypeIIState, lambda: SpectralParameter, variant: KVariant) -> MatrixField<Complex64> {
    let st = state.clone();
    let l = lambda.value();
    MatrixField::new(state.grid().clone(), move |i, j, order, mode| {
        Ok(jets_at(&[&st.phi1, &st.phi2, &st.lambda0], i, j, order, mode)?
            .map(|v| two_by_two(k_entries(&st.params, l, variant, &v[0], &v[1], &v[2]))))
    })
}

/// Intertwining residuals of K between the Lax pairs of φ1 and φ2.
pub fn kmatrix_check(state: &TypeIIState, lambda: SpectralParameter, variant: KVariant, mode: DerivativeMode) -> Result<Vec<ResidualReport>, FieldError> {
    let k = defect_matrix_k(state, lambda, variant);
    let (a1, ab1) = lax_connection(&state.phi1, state.params.mu, lambda);
    let (a2, ab2) = lax_connection(&state.phi2, state.params.mu, lambda);
    crate::graded_linalg::kmatrix_residual(&k, &a1, &a2, &ab1, &ab2, mode)
}
