//! Time-domain simulation of two Liouville (or super-Liouville) half-lines glued at x = 0.
//!
//! Each side is evolved in first-order characteristic form: with r = ∂φ = φx − φt (moving
//! right) and l = ∂̄φ = φx + φt (moving left),
//!
//!   φt = (l − r)/2,   rt = −rx + S,   lt = lx − S,   S = μ²e^{2φ} + iμe^φ ψ̄ψ,
//!   ψt = −ψx + iμe^φ ψ̄,   ψ̄t = ψ̄x + iμe^φ ψ.
//!
//! Spatial derivatives are fourth-order finite differences (one-sided at the ends), time
//! stepping is classical RK4.  At x = 0 the data carried into the defect by the interiors
//! (r1, ψ1 from the left; l2, ψ̄2 from the right) are evolved with the bulk equations, and the
//! outgoing values l1, r2, ψ̄1, ψ2 are set after every stage by solving the defect conditions,
//! which also give the rates of the defect fields Λ0 and f1.  At x = ±L the outgoing data are
//! upwinded and the incoming characteristic keeps its initial spatial gradient; the fluxes
//! through the edges are integrated alongside so the monitored charges account for them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{re, Algebra, I};
use crate::grassmann::GrassmannElement;
use crate::liouville::{type2_z_terms, type2_zbar_term, DefectParams};
use crate::super_liouville::{
    bulk_charge_densities, defect_charge_terms, ix, lambda1_from, roots, ChargeReport, DefectTerms, Transcription,
    CHARGE_NAMES, DEFAULT_GENERATORS, EPSILON, GE, SEED1, SEED2,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("CFL violated: dt = {dt} exceeds {cfl} dx = {limit}")]
    Cfl { dt: f64, cfl: f64, limit: f64 },
    #[error("blow-up at t = {t}: {what}")]
    BlowUp { t: f64, what: String },
    #[error("empty monitor series")]
    EmptySeries,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    BosonicType1,
    BosonicType2,
    SuperType2,
}

impl Model {
    pub fn is_super(self) -> bool {
        self == Model::SuperType2
    }
}

/// How the two sides are glued.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Closure {
    /// The defect conditions of the model.
    Defect,
    /// φ1 ≡ φ2 continued through x = 0, no defect at all (baseline).
    Transparent,
}

/// Initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeedSpec {
    /// Static defect configuration of two Liouville walls with φ1(0) = φ2(0) = u, plus a
    /// right-moving packet amp·exp(−((x − x0)/width)²) on the left.  Needs κ ≥ 1 (type II) or
    /// u ≥ 0 (type I) for walls that stay regular on their half-lines.
    StaticPacket { u: f64, amp: f64, x0: f64, width: f64 },
    /// Uniform φ ≡ phi, Λ0 = l0, right-moving packet on the left, and (super) fermion packets:
    /// ψ = psi_amp·θ1·G(x − psi_x0) on the left and ψ̄ = psib_amp·θ2·G(x − psib_x0) on the
    /// right, f1 = f1_amp·ε.  Side 2 carries a localized offset that makes the defect
    /// conditions hold at t = 0.
    UniformPacket {
        phi: f64,
        l0: f64,
        amp: f64,
        x0: f64,
        width: f64,
        psi_amp: f64,
        psi_x0: f64,
        psib_amp: f64,
        psib_x0: f64,
        f1_amp: f64,
    },
    /// φ1 = φ2 = amp·G(x + t − x0) (left-moving), Λ0 = 0.
    FreePacket { amp: f64, x0: f64, width: f64 },
    /// Everything zero except Λ0 = l0.
    Zero { l0: f64 },
}

impl SeedSpec {
    /// The reference scenario of each model.
    pub fn reference(model: Model) -> Self {
        match model {
            Model::BosonicType2 => SeedSpec::StaticPacket { u: -0.5, amp: 0.3, x0: -2.5, width: 0.5 },
            Model::BosonicType1 => SeedSpec::StaticPacket { u: 0.2, amp: 0.3, x0: -2.5, width: 0.5 },
            Model::SuperType2 => SeedSpec::UniformPacket {
                phi: -1.0,
                l0: 0.0,
                amp: 0.2,
                x0: -2.5,
                width: 0.5,
                psi_amp: 0.5,
                psi_x0: -2.5,
                psib_amp: 0.4,
                psib_x0: 2.5,
                f1_amp: 0.0,
            },
        }
    }

    /// Parses `name` or `name:key=value,key=value`; unspecified keys take the reference values.
    pub fn parse(text: &str, model: Model) -> Result<Self, SimError> {
        let text = text.trim();
        let (name, rest) = text.split_once(':').unwrap_or((text, ""));
        let mut kv = Vec::new();
        for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item.split_once('=').ok_or_else(|| SimError::Config(format!("seed_spec item '{item}' is not key=value")))?;
            let v: f64 = v.trim().parse().map_err(|_| SimError::Config(format!("seed_spec value '{v}' is not a number")))?;
            kv.push((k.trim().to_string(), v));
        }
        let mut seed = match name {
            "reference" => Self::reference(model),
            "static_packet" => match Self::reference(model) {
                s @ SeedSpec::StaticPacket { .. } => s,
                _ => SeedSpec::StaticPacket { u: -0.5, amp: 0.3, x0: -2.5, width: 0.5 },
            },
            "uniform_packet" => Self::reference(Model::SuperType2),
            "free_packet" => SeedSpec::FreePacket { amp: 0.3, x0: 2.5, width: 0.5 },
            "zero" => SeedSpec::Zero { l0: 0.0 },
            other => return Err(SimError::Config(format!("unknown seed_spec '{other}'"))),
        };
        for (k, v) in kv {
            seed.set(&k, v)?;
        }
        Ok(seed)
    }

    fn set(&mut self, key: &str, v: f64) -> Result<(), SimError> {
        let slot = match (self, key) {
            (SeedSpec::StaticPacket { u, .. }, "u") => u,
            (SeedSpec::StaticPacket { amp, .. }, "amp") => amp,
            (SeedSpec::StaticPacket { x0, .. }, "x0") => x0,
            (SeedSpec::StaticPacket { width, .. }, "width") => width,
            (SeedSpec::UniformPacket { phi, .. }, "phi") => phi,
            (SeedSpec::UniformPacket { l0, .. }, "l0") => l0,
            (SeedSpec::UniformPacket { amp, .. }, "amp") => amp,
            (SeedSpec::UniformPacket { x0, .. }, "x0") => x0,
            (SeedSpec::UniformPacket { width, .. }, "width") => width,
            (SeedSpec::UniformPacket { psi_amp, .. }, "psi_amp") => psi_amp,
            (SeedSpec::UniformPacket { psi_x0, .. }, "psi_x0") => psi_x0,
            (SeedSpec::UniformPacket { psib_amp, .. }, "psib_amp") => psib_amp,
            (SeedSpec::UniformPacket { psib_x0, .. }, "psib_x0") => psib_x0,
            (SeedSpec::UniformPacket { f1_amp, .. }, "f1_amp") => f1_amp,
            (SeedSpec::FreePacket { amp, .. }, "amp") => amp,
            (SeedSpec::FreePacket { x0, .. }, "x0") => x0,
            (SeedSpec::FreePacket { width, .. }, "width") => width,
            (SeedSpec::Zero { l0 }, "l0") => l0,
            (_, k) => return Err(SimError::Config(format!("seed_spec key '{k}' does not apply"))),
        };
        *slot = v;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub model: Model,
    /// Half-length L: the sides are [−L, 0] and [0, L].
    pub half_length: f64,
    /// Lattice points per side, both ends included.
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    pub params: DefectParams,
    pub seed: SeedSpec,
    /// Relative drift allowed for the asserted charges.
    pub tolerance: f64,
    pub closure: Closure,
    /// dt ≤ cfl·dx.
    pub cfl: f64,
    /// Record a monitor row every this many steps (0: about 400 rows).
    pub record_every: usize,
    /// Grassmann generators in super mode.
    pub generators: usize,
    /// Self-test: flip the sign of the ∂̄φ− defect term in the closure.
    pub inject_sign_fault: bool,
    /// Abort when a body value exceeds this in modulus.
    pub blowup: f64,
}

/// The flat key-value document read from disk.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: Model,
    #[serde(rename = "L")]
    l: f64,
    n: usize,
    dt: f64,
    #[serde(rename = "T")]
    t: f64,
    mu_re: f64,
    #[serde(default)]
    mu_im: f64,
    beta_re: f64,
    #[serde(default)]
    beta_im: f64,
    #[serde(default)]
    kappa: f64,
    #[serde(default)]
    seed_spec: Option<String>,
    #[serde(default)]
    tolerance: Option<f64>,
}

impl SimConfig {
    /// The reference scenario of a model: real μ = 1 with β = e^{−iπ/4}, so that iμ/β² and
    /// 2iμβ² are real and all bosonic fields and charges stay real.
    pub fn reference(model: Model) -> Self {
        let beta = Complex64::from_polar(1.0, -std::f64::consts::FRAC_PI_4);
        let kappa = if model == Model::SuperType2 { -1.0 } else { 1.0 };
        let params = DefectParams { mu: re(1.0), beta, kappa: re(kappa), ..DefectParams::default() };
        Self {
            model,
            half_length: 6.0,
            n: if model == Model::SuperType2 { 481 } else { 961 },
            dt: if model == Model::SuperType2 { 0.005 } else { 0.0025 },
            t_end: 4.0,
            params,
            seed: SeedSpec::reference(model),
            tolerance: 1e-6,
            closure: Closure::Defect,
            cfl: 0.5,
            record_every: 0,
            generators: DEFAULT_GENERATORS,
            inject_sign_fault: false,
            blowup: 1e6,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        let mut cfg = Self::reference(raw.model);
        cfg.half_length = raw.l;
        cfg.n = raw.n;
        cfg.dt = raw.dt;
        cfg.t_end = raw.t;
        cfg.params.mu = Complex64::new(raw.mu_re, raw.mu_im);
        cfg.params.beta = Complex64::new(raw.beta_re, raw.beta_im);
        cfg.params.kappa = re(raw.kappa);
        if let Some(s) = raw.seed_spec {
            cfg.seed = SeedSpec::parse(&s, raw.model)?;
        }
        if let Some(t) = raw.tolerance {
            cfg.tolerance = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// The same scenario `levels` halvings coarser (n − 1 and dt both divided), so that
    /// refining it `levels` times lands back on `self`.
    pub fn coarsened(&self, levels: usize) -> Result<Self, SimError> {
        let f = 1usize << levels;
        if (self.n - 1) % f != 0 || (self.n - 1) / f + 1 < 16 {
            return Err(SimError::Config(format!("n = {} cannot be halved {levels} times", self.n)));
        }
        let mut c = self.clone();
        c.n = (self.n - 1) / f + 1;
        c.dt = self.dt * f as f64;
        c.validate()?;
        Ok(c)
    }

    pub fn dx(&self) -> f64 {
        self.half_length / (self.n as f64 - 1.0)
    }

    /// Steps and the (possibly slightly reduced) step that lands exactly on T.
    pub fn steps(&self) -> (usize, f64) {
        if self.t_end <= 0.0 {
            return (0, self.dt);
        }
        let k = (self.t_end / self.dt - 1e-9).ceil().max(1.0) as usize;
        (k, self.t_end / k as f64)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        if self.n < 16 {
            return bad("n must be at least 16");
        }
        if !(self.half_length > 0.0) || !(self.dt > 0.0) || !(self.t_end >= 0.0) {
            return bad("L and dt must be positive and T non-negative");
        }
        if self.params.beta == re(0.0) {
            return bad("beta must be nonzero");
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad("cfl factor must lie in (0, 1]");
        }
        if self.model.is_super() && !(4..=crate::grassmann::MAX_GENERATORS).contains(&self.generators) {
            return bad("super mode needs at least 4 generators");
        }
        let limit = self.cfl * self.dx();
        if self.dt > limit * (1.0 + 1e-12) {
            return Err(SimError::Cfl { dt: self.dt, cfl: self.cfl, limit });
        }
        Ok(())
    }
}

/// Conversion of a simulation scalar into a Grassmann element for reporting.
pub trait SimScalar: Algebra {
    fn to_ge(&self, n: usize) -> GE;
}

impl SimScalar for Complex64 {
    fn to_ge(&self, n: usize) -> GE {
        GE::scalar(n, *self)
    }
}

impl SimScalar for GrassmannElement {
    fn to_ge(&self, _n: usize) -> GE {
        self.clone()
    }
}

/// Lattice fields of one side.
#[derive(Debug, Clone, PartialEq)]
pub struct Side<A> {
    pub phi: Vec<A>,
    pub r: Vec<A>,
    pub l: Vec<A>,
    pub psi: Vec<A>,
    pub psib: Vec<A>,
}

impl<A: Algebra> Side<A> {
    fn zeros(zero: &A, n: usize) -> Self {
        let v = vec![zero.clone(); n];
        Self { phi: v.clone(), r: v.clone(), l: v.clone(), psi: v.clone(), psib: v }
    }

    fn arrays(&self) -> [&Vec<A>; 5] {
        [&self.phi, &self.r, &self.l, &self.psi, &self.psib]
    }

    fn arrays_mut(&mut self) -> [&mut Vec<A>; 5] {
        [&mut self.phi, &mut self.r, &mut self.l, &mut self.psi, &mut self.psib]
    }

    pub fn phi_t(&self, j: usize) -> A {
        (self.l[j].clone() - &self.r[j]) * 0.5
    }

    pub fn phi_x(&self, j: usize) -> A {
        (self.l[j].clone() + &self.r[j]) * 0.5
    }
}

/// Full simulation state.  `edge` holds ∫(J(L) − J(−L))dt for (E, P, Q, Q̄).
#[derive(Debug, Clone, PartialEq)]
pub struct SimState<A> {
    pub t: f64,
    pub left: Side<A>,
    pub right: Side<A>,
    pub l0: A,
    pub f1: A,
    pub edge: [A; 4],
    /// Spatial gradients of the incoming characteristics at x = −L (r, ψ) and x = +L (l, ψ̄),
    /// frozen at t = 0.
    inflow: [A; 4],
}

impl<A: Algebra> SimState<A> {
    fn axpy(&self, h: f64, k: &SimState<A>) -> SimState<A> {
        let mut out = self.clone();
        for (o, d) in [(&mut out.left, &k.left), (&mut out.right, &k.right)] {
            for (dst, src) in o.arrays_mut().into_iter().zip(d.arrays()) {
                for (a, b) in dst.iter_mut().zip(src) {
                    *a = a.clone() + &(b.clone() * h);
                }
            }
        }
        out.l0 = out.l0.clone() + &(k.l0.clone() * h);
        out.f1 = out.f1.clone() + &(k.f1.clone() * h);
        for (a, b) in out.edge.iter_mut().zip(&k.edge) {
            *a = a.clone() + &(b.clone() * h);
        }
        out
    }

    /// The nine core boundary values (φ1, ψ1, ψ̄1, φ2, ψ2, ψ̄2, Λ0, Λ1, f1) at x = 0.
    pub fn boundary_values(&self, p: &DefectParams) -> Vec<A> {
        let n = self.left.phi.len() - 1;
        let mut v = vec![
            self.left.phi[n].clone(),
            self.left.psi[n].clone(),
            self.left.psib[n].clone(),
            self.right.phi[0].clone(),
            self.right.psi[0].clone(),
            self.right.psib[0].clone(),
            self.l0.clone(),
            self.l0.zero_like(),
            self.f1.clone(),
        ];
        v[ix::L1] = lambda1_from(p, &v);
        v
    }
}

/// Fourth-order first derivative on a uniform lattice.
pub fn ddx<A: Algebra>(f: &[A], h: f64) -> Vec<A> {
    let n = f.len();
    assert!(n >= 5, "ddx needs at least five points");
    let s = 1.0 / (12.0 * h);
    let comb = |c: [f64; 5], at: [usize; 5]| -> A {
        let mut acc = f[at[0]].clone() * (c[0] * s);
        for k in 1..5 {
            acc = acc + &(f[at[k]].clone() * (c[k] * s));
        }
        acc
    };
    let mut out = Vec::with_capacity(n);
    out.push(comb([-25.0, 48.0, -36.0, 16.0, -3.0], [0, 1, 2, 3, 4]));
    out.push(comb([-3.0, -10.0, 18.0, -6.0, 1.0], [0, 1, 2, 3, 4]));
    for j in 2..n - 2 {
        out.push(comb([1.0, -8.0, 8.0, -1.0, 0.0], [j - 2, j - 1, j + 1, j + 2, j]));
    }
    out.push(comb([3.0, 10.0, -18.0, 6.0, -1.0], [n - 1, n - 2, n - 3, n - 4, n - 5]));
    out.push(comb([25.0, -48.0, 36.0, -16.0, 3.0], [n - 1, n - 2, n - 3, n - 4, n - 5]));
    out
}

/// Endpoint-corrected trapezoid weights (fourth order).
pub fn quadrature_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    for (k, c) in [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0].into_iter().enumerate() {
        w[k] = c * h;
        w[n - 1 - k] = c * h;
    }
    w
}

/// Outgoing data at x = 0 and the rates of the defect fields.
#[derive(Debug, Clone)]
pub struct ClosureValues<A> {
    pub l1: A,
    pub r2: A,
    pub psib1: A,
    pub psi2: A,
    pub l0_rate: A,
    pub f1_rate: A,
}

/// Solves the defect conditions for the outgoing data given the incoming r1, l2, ψ1, ψ̄2.
#[allow(clippy::too_many_arguments)]
pub fn closure<A: Algebra>(cfg: &SimConfig, phi1: &A, phi2: &A, r1: &A, l2: &A, psi1: &A, psib2: &A, l0: &A, f1: &A) -> ClosureValues<A> {
    let p = &cfg.params;
    let zero = phi1.zero_like();
    if cfg.closure == Closure::Transparent {
        return ClosureValues { l1: l2.clone(), r2: r1.clone(), psib1: psib2.clone(), psi2: psi1.clone(), l0_rate: zero.clone(), f1_rate: zero };
    }
    let fault = if cfg.inject_sign_fault { -1.0 } else { 1.0 };
    match cfg.model {
        Model::BosonicType1 => {
            let x = (phi1.clone() - phi2).sinh() * p.c();
            let w = (phi1.clone() + phi2).exp() * p.d();
            ClosureValues {
                l1: l2.clone() + &(w * fault),
                r2: -(r1.clone() + &x),
                psib1: psib2.clone(),
                psi2: psi1.clone(),
                l0_rate: zero.clone(),
                f1_rate: zero,
            }
        }
        Model::BosonicType2 | Model::SuperType2 => {
            let (a, b) = roots(p);
            let (x, y) = type2_z_terms(p, phi1, phi2, l0);
            let w = type2_zbar_term(p, phi1, phi2, l0);
            // Outgoing fermions from the algebraic ψ−, ψ̄− conditions first.
            let mut v = vec![zero.clone(); 9];
            v[ix::PHI1] = phi1.clone();
            v[ix::PHI2] = phi2.clone();
            v[ix::L0] = l0.clone();
            let t0 = DefectTerms::new(&v);
            let psi2 = psi1.clone() - &(((t0.el2.clone() * &t0.sh) * f1) * a);
            let psib1 = psib2.clone() + &((t0.ep2.clone() * f1) * b);
            let psi_p = psi1.clone() + &psi2;
            let psib_p = psib1.clone() + psib2;
            let core = psi_p.clone() * f1;
            let coreb = psib_p.clone() * f1;
            let r2 = (r1.clone() + &x) + &(((t0.el2.clone() * &t0.sh) * &core) * (a / 2.0));
            let l1 = (l2.clone() + &(w * fault)) - &((t0.ep2.clone() * &coreb) * (b / 2.0));
            let dphi_p = r1.clone() + &r2;
            let l0_rate = ((dphi_p + &y) + &(((t0.el2.clone() * &t0.ch) * &core) * (a / 2.0))) * -0.5;
            let f1_rate = ((t0.ep2.clone() * &psib_p) * (I * b / 2.0)) + &(((t0.el2 * &t0.sh) * &psi_p) * (I * a / 2.0));
            ClosureValues { l1, r2, psib1, psi2, l0_rate, f1_rate }
        }
    }
}

fn source<A: Algebra>(mu: Complex64, phi: &A, psi: &A, psib: &A, fermions: bool) -> A {
    let e = phi.exp();
    let pot = (e.clone() * &e) * (mu * mu);
    if fermions {
        pot + &(((e * (I * mu)) * psib) * psi)
    } else {
        pot
    }
}

/// Edge fluxes (J_E, J_P, J_Q, J_Q̄) with ∂t(density) = ∂x J; the fermionic parts of J_E, J_P
/// are omitted (runs keep the fermions away from the edges).
fn edge_flux<A: Algebra>(mu: Complex64, s: &Side<A>, j: usize) -> [A; 4] {
    let (r, l, phi) = (&s.r[j], &s.l[j], &s.phi[j]);
    let e = phi.exp();
    let je = ((l.clone() * l) - &(r.clone() * r)) * 0.5;
    let jp = (((l.clone() * l) + &(r.clone() * r)) * 0.5) - &((e.clone() * &e) * (mu * mu));
    let jq = (s.psi[j].clone() * r) - &((e.clone() * (I * mu)) * &s.psib[j]);
    let jqb = (s.psib[j].clone() * l) + &((e * (I * mu)) * &s.psi[j]);
    [je, jp, jq, jqb]
}

fn side_rates<A: Algebra>(s: &Side<A>, h: f64, mu: Complex64, fermions: bool) -> Side<A> {
    let n = s.phi.len();
    let (rx, lx) = (ddx(&s.r, h), ddx(&s.l, h));
    let zero = s.phi[0].zero_like();
    let (psix, psibx) = if fermions { (ddx(&s.psi, h), ddx(&s.psib, h)) } else { (Vec::new(), Vec::new()) };
    let mut out = Side::zeros(&zero, n);
    for j in 0..n {
        let src = source(mu, &s.phi[j], &s.psi[j], &s.psib[j], fermions);
        out.phi[j] = s.phi_t(j);
        out.r[j] = src.clone() - &rx[j];
        out.l[j] = lx[j].clone() - &src;
        if fermions {
            let m = s.phi[j].exp() * (I * mu);
            out.psi[j] = (m.clone() * &s.psib[j]) - &psix[j];
            out.psib[j] = psibx[j].clone() + &(m * &s.psi[j]);
        }
    }
    out
}

fn rates<A: Algebra>(st: &SimState<A>, cfg: &SimConfig) -> SimState<A> {
    let h = cfg.dx();
    let mu = cfg.params.mu;
    let fermions = cfg.model.is_super();
    let n = cfg.n;
    let mut left = side_rates(&st.left, h, mu, fermions);
    let mut right = side_rates(&st.right, h, mu, fermions);
    // Incoming characteristics at the outer edges keep their initial gradient.
    let src_l = source(mu, &st.left.phi[0], &st.left.psi[0], &st.left.psib[0], fermions);
    left.r[0] = src_l - &st.inflow[0];
    let src_r = source(mu, &st.right.phi[n - 1], &st.right.psi[n - 1], &st.right.psib[n - 1], fermions);
    right.l[n - 1] = st.inflow[2].clone() - &src_r;
    if fermions {
        let m = st.left.phi[0].exp() * (I * mu);
        left.psi[0] = (m * &st.left.psib[0]) - &st.inflow[1];
        let m = st.right.phi[n - 1].exp() * (I * mu);
        right.psib[n - 1] = st.inflow[3].clone() + &(m * &st.right.psi[n - 1]);
    }
    // Outgoing values at x = 0 are set by the closure; their rates are irrelevant.
    let c = closure(
        cfg,
        &st.left.phi[n - 1],
        &st.right.phi[0],
        &st.left.r[n - 1],
        &st.right.l[0],
        &st.left.psi[n - 1],
        &st.right.psib[0],
        &st.l0,
        &st.f1,
    );
    let zero = st.l0.zero_like();
    left.l[n - 1] = zero.clone();
    right.r[0] = zero.clone();
    left.psib[n - 1] = zero.clone();
    right.psi[0] = zero;
    let fl = edge_flux(mu, &st.left, 0);
    let fr = edge_flux(mu, &st.right, n - 1);
    let edge = [0, 1, 2, 3].map(|k| fr[k].clone() - &fl[k]);
    SimState { t: 0.0, left, right, l0: c.l0_rate, f1: c.f1_rate, edge, inflow: st.inflow.clone() }
}

/// Overwrites the outgoing values at x = 0 with the closure solution.
fn project<A: Algebra>(st: &mut SimState<A>, cfg: &SimConfig) {
    let n = cfg.n;
    let c = closure(
        cfg,
        &st.left.phi[n - 1],
        &st.right.phi[0],
        &st.left.r[n - 1],
        &st.right.l[0],
        &st.left.psi[n - 1],
        &st.right.psib[0],
        &st.l0,
        &st.f1,
    );
    st.left.l[n - 1] = c.l1;
    st.right.r[0] = c.r2;
    st.left.psib[n - 1] = c.psib1;
    st.right.psi[0] = c.psi2;
}

fn guard<A: Algebra>(st: &SimState<A>, cfg: &SimConfig) -> Result<(), SimError> {
    let check = |what: &str, v: &A| -> Result<(), SimError> {
        let b = v.body();
        if !b.re.is_finite() || !b.im.is_finite() || b.norm() > cfg.blowup {
            return Err(SimError::BlowUp { t: st.t, what: format!("{what} = {b}") });
        }
        Ok(())
    };
    for (name, s) in [("phi1", &st.left), ("phi2", &st.right)] {
        for k in 0..s.phi.len() {
            check(name, &s.phi[k])?;
            check(name, &s.r[k])?;
            check(name, &s.l[k])?;
        }
    }
    check("Lambda0", &st.l0)
}

/// One RK4 step of size `dt`.
pub fn step_by<A: Algebra>(st: &SimState<A>, cfg: &SimConfig, dt: f64) -> Result<SimState<A>, SimError> {
    let k1 = rates(st, cfg);
    let mut y2 = st.axpy(dt / 2.0, &k1);
    project(&mut y2, cfg);
    let k2 = rates(&y2, cfg);
    let mut y3 = st.axpy(dt / 2.0, &k2);
    project(&mut y3, cfg);
    let k3 = rates(&y3, cfg);
    let mut y4 = st.axpy(dt, &k3);
    project(&mut y4, cfg);
    let k4 = rates(&y4, cfg);
    let mut out = st.axpy(dt / 6.0, &k1).axpy(dt / 3.0, &k2).axpy(dt / 3.0, &k3).axpy(dt / 6.0, &k4);
    out.t = st.t + dt;
    project(&mut out, cfg);
    guard(&out, cfg)?;
    Ok(out)
}

/// One step of size `config.dt`.
pub fn step<A: Algebra>(state: &SimState<A>, config: &SimConfig) -> Result<SimState<A>, SimError> {
    config.validate()?;
    step_by(state, config, config.dt)
}

// ---------------------------------------------------------------------------------------------
// initial data

fn gauss(x: f64, x0: f64, w: f64) -> (f64, f64) {
    let u = (x - x0) / w;
    let g = (-u * u).exp();
    (g, -2.0 * u / w * g)
}

/// Static Liouville profile with φ(0) = u, φ'(0) = s: e^{−φ} = e^{−u}(cosh kx − (s/k) sinh kx),
/// k² = s² − μ²e^{2u}.  Returns (φ, φ').
pub fn static_profile(u: Complex64, s: Complex64, mu: Complex64, x: f64) -> (Complex64, Complex64) {
    let k2 = s * s - mu * mu * (2.0 * u).exp();
    let k = k2.sqrt();
    let (ch, shk) = if k.norm() * x.abs() < 1e-6 {
        (1.0 + k2 * x * x / 2.0, re(x) + k2 * x * x * x / 6.0)
    } else {
        ((k * x).cosh(), (k * x).sinh() / k)
    };
    let g = (-u).exp() * (ch - s * shk);
    let dg = (-u).exp() * (k2 * shk - s * ch);
    (-g.ln(), -dg / g)
}

/// φ(0), φ'(0) at x = 0⁻ and Λ0 of the symmetric static defect configuration.
pub fn static_defect_data(cfg: &SimConfig, u: f64) -> Result<(Complex64, Complex64, Complex64), SimError> {
    let p = &cfg.params;
    let u = re(u);
    match cfg.model {
        Model::BosonicType1 => Ok((u, p.d() * (2.0 * u).exp() / 2.0, re(0.0))),
        _ => {
            let denom = p.c() * (p.kappa + 1.0);
            if denom.norm() < 1e-14 {
                return Err(SimError::Config("static type-II configuration needs kappa != -1".into()));
            }
            // d e^{2u−Λ0} = −c e^{Λ0}(1 + κ)  ⇒  e^{2Λ0} = −d e^{2u}/(c(1 + κ)).
            let l0 = ((-p.d() * (2.0 * u).exp() / denom).ln()) / 2.0;
            Ok((u, p.d() * (2.0 * u - l0).exp() / 2.0, l0))
        }
    }
}

fn side_positions(cfg: &SimConfig, left: bool) -> Vec<f64> {
    let h = cfg.dx();
    (0..cfg.n).map(|j| if left { -cfg.half_length + j as f64 * h } else { j as f64 * h }).collect()
}

/// Initial bosonic and fermionic profiles: per side (φ, φx, φt, ψ, ψ̄) as Grassmann-ready
/// coefficient lists [(generator, value)], plus Λ0 and f1.
struct Profiles {
    phi: [Vec<Complex64>; 2],
    phix: [Vec<Complex64>; 2],
    phit: [Vec<Complex64>; 2],
    psi: [Vec<Complex64>; 2],
    psib: [Vec<Complex64>; 2],
    l0: Complex64,
    f1: Complex64,
}

fn profiles(cfg: &SimConfig) -> Result<Profiles, SimError> {
    let xs = [side_positions(cfg, true), side_positions(cfg, false)];
    let n = cfg.n;
    let z = vec![re(0.0); n];
    let mut pr = Profiles {
        phi: [z.clone(), z.clone()],
        phix: [z.clone(), z.clone()],
        phit: [z.clone(), z.clone()],
        psi: [z.clone(), z.clone()],
        psib: [z.clone(), z],
        l0: re(0.0),
        f1: re(0.0),
    };
    let mu = cfg.params.mu;
    match cfg.seed {
        SeedSpec::StaticPacket { u, amp, x0, width } => {
            let (u, s, l0) = static_defect_data(cfg, u)?;
            pr.l0 = l0;
            for j in 0..n {
                let (f, fx) = static_profile(u, s, mu, xs[0][j]);
                let (g, gx) = gauss(xs[0][j], x0, width);
                pr.phi[0][j] = f + amp * g;
                pr.phix[0][j] = fx + amp * gx;
                pr.phit[0][j] = re(-amp * gx);
                // Mirror image on the right.
                let (f, fx) = static_profile(u, s, mu, -xs[1][j]);
                pr.phi[1][j] = f;
                pr.phix[1][j] = -fx;
            }
        }
        SeedSpec::UniformPacket { phi, l0, amp, x0, width, psi_amp, psi_x0, psib_amp, psib_x0, f1_amp } => {
            pr.l0 = re(l0);
            pr.f1 = re(f1_amp);
            for j in 0..n {
                let (g, gx) = gauss(xs[0][j], x0, width);
                pr.phi[0][j] = re(phi + amp * g);
                pr.phix[0][j] = re(amp * gx);
                pr.phit[0][j] = re(-amp * gx);
                pr.phi[1][j] = re(phi);
                pr.psi[0][j] = re(psi_amp * gauss(xs[0][j], psi_x0, width).0);
                pr.psib[1][j] = re(psib_amp * gauss(xs[1][j], psib_x0, width).0);
            }
            // Localized offsets on side 2 so that l1 = l2 + W and r2 = r1 + X hold at t = 0
            // (bosonic body; fermions vanish at x = 0 initially).
            let v = (pr.phi[0][n - 1], pr.phi[1][0], pr.l0);
            let (l1, r1) = (pr.phix[0][n - 1] + pr.phit[0][n - 1], pr.phix[0][n - 1] - pr.phit[0][n - 1]);
            let (x, w) = match cfg.model {
                Model::BosonicType1 => ((v.0 - v.1).sinh() * cfg.params.c(), (v.0 + v.1).exp() * cfg.params.d()),
                _ => (type2_z_terms(&cfg.params, &v.0, &v.1, &v.2).0, type2_zbar_term(&cfg.params, &v.0, &v.1, &v.2)),
            };
            let (l2, r2) = match cfg.model {
                Model::BosonicType1 => (l1 - w, -r1 - x),
                _ => (l1 - w, r1 + x),
            };
            let (sx, st) = ((l2 + r2) / 2.0, (l2 - r2) / 2.0);
            // The ψ̄− condition with f1 ≠ 0.
            let psib_jump = if cfg.model.is_super() {
                let (_, b) = roots(&cfg.params);
                ((v.0 + v.1 - v.2) / 2.0).exp() * b * pr.f1
            } else {
                re(0.0)
            };
            // Second order: the time derivatives of the two conditions must vanish too, which
            // fixes φ2xx(0) and φ2xt(0).
            let (q, pt) = second_order_offsets(cfg, &pr, (sx, st));
            for j in 0..n {
                let x = xs[1][j];
                let (g, gx) = gauss(x, 0.0, 1.0);
                pr.phi[1][j] += sx * x * g + q / 2.0 * x * x * g;
                pr.phix[1][j] += sx * (g + x * gx) + q / 2.0 * (2.0 * x * g + x * x * gx);
                pr.phit[1][j] += st * g + pt * x * g;
                pr.psib[0][j] += psib_jump * gauss(xs[0][j], 0.0, 1.0).0;
            }
        }
        SeedSpec::FreePacket { amp, x0, width } => {
            for side in 0..2 {
                for j in 0..n {
                    let (g, gx) = gauss(xs[side][j], x0, width);
                    pr.phi[side][j] = re(amp * g);
                    pr.phix[side][j] = re(amp * gx);
                    pr.phit[side][j] = re(amp * gx);
                }
            }
        }
        SeedSpec::Zero { l0 } => pr.l0 = re(l0),
    }
    Ok(pr)
}

/// Corrections (to φ2xx(0), φ2xt(0)) that make d/dt of the outgoing-data conditions vanish at
/// t = 0, for a side 2 whose second derivatives at x = 0 vanish before the offsets.  The time
/// derivatives of the closure are taken with the nilpotent even element η = θ1θ2 as a dual unit.
fn second_order_offsets(cfg: &SimConfig, pr: &Profiles, first: (Complex64, Complex64)) -> (Complex64, Complex64) {
    let n = cfg.n;
    let h = cfg.dx();
    let mu = cfg.params.mu;
    let eta = GE::generator(2, 1).expect("generator") * GE::generator(2, 2).expect("generator");
    let dual = |v: Complex64, dv: Complex64| GE::scalar(2, v) + &(eta.clone() * dv);
    let tangent = |g: &GE| g.coefficient(0b11);
    let src = |phi: Complex64| mu * mu * (2.0 * phi).exp();
    // Side-1 values and derivatives at x = 0⁻ (from the lattice data).
    let r1v: Vec<Complex64> = pr.phix[0].iter().zip(&pr.phit[0]).map(|(x, t)| x - t).collect();
    let l1v: Vec<Complex64> = pr.phix[0].iter().zip(&pr.phit[0]).map(|(x, t)| x + t).collect();
    let (r1x, l1x) = (ddx(&r1v, h)[n - 1], ddx(&l1v, h)[n - 1]);
    let (phi1, phi2) = (pr.phi[0][n - 1], pr.phi[1][0]);
    let (s1, s2) = (src(phi1), src(phi2));
    let r1 = r1v[n - 1];
    let l2 = pr.phix[1][0] + first.0 + pr.phit[1][0] + first.1;
    let (phi1t, phi2t) = (pr.phit[0][n - 1], pr.phit[1][0] + first.1);
    let r1t = -r1x + s1;
    let l1t = l1x - s1;
    let z = re(0.0);
    let base = closure(cfg, &phi1, &phi2, &r1, &l2, &z, &z, &pr.l0, &z);
    let zero = GE::zero(2);
    let c = closure(
        cfg,
        &dual(phi1, phi1t),
        &dual(phi2, phi2t),
        &dual(r1, r1t),
        &dual(l2, z),
        &zero,
        &zero,
        &dual(pr.l0, base.l0_rate),
        &zero,
    );
    // l1 = l2 + (terms without l2): l2t = l1t − d/dt(terms); r2t comes out directly.
    let l2t = l1t - tangent(&c.l1);
    let r2t = tangent(&c.r2);
    let (l2x, r2x) = (l2t + s2, s2 - r2t);
    ((l2x + r2x) / 2.0, (l2x - r2x) / 2.0)
}

fn assemble<A: Algebra>(cfg: &SimConfig, pr: &Profiles, lift: impl Fn(Complex64) -> A, odd: impl Fn(usize, Complex64) -> A) -> SimState<A> {
    let build = |k: usize| Side {
        phi: pr.phi[k].iter().map(|v| lift(*v)).collect(),
        r: pr.phix[k].iter().zip(&pr.phit[k]).map(|(x, t)| lift(x - t)).collect(),
        l: pr.phix[k].iter().zip(&pr.phit[k]).map(|(x, t)| lift(x + t)).collect(),
        psi: pr.psi[k].iter().map(|v| odd(SEED1, *v)).collect(),
        psib: pr.psib[k].iter().map(|v| odd(SEED2, *v)).collect(),
    };
    let (left, right) = (build(0), build(1));
    let h = cfg.dx();
    let n = cfg.n;
    let inflow = [
        ddx(&left.r, h)[0].clone(),
        ddx(&left.psi, h)[0].clone(),
        ddx(&right.l, h)[n - 1].clone(),
        ddx(&right.psib, h)[n - 1].clone(),
    ];
    let zero = lift(re(0.0));
    let mut st = SimState {
        t: 0.0,
        left,
        right,
        l0: lift(pr.l0),
        f1: odd(EPSILON, pr.f1),
        edge: [zero.clone(), zero.clone(), zero.clone(), zero],
        inflow,
    };
    project(&mut st, cfg);
    st
}

/// Bosonic initial state.
pub fn initial_state(cfg: &SimConfig) -> Result<SimState<Complex64>, SimError> {
    cfg.validate()?;
    let pr = profiles(cfg)?;
    Ok(assemble(cfg, &pr, |c| c, |_, _| re(0.0)))
}

/// Grassmann-valued initial state (odd data on θ1, θ2 and f1 on ε).
pub fn initial_super_state(cfg: &SimConfig) -> Result<SimState<GE>, SimError> {
    cfg.validate()?;
    let pr = profiles(cfg)?;
    let n = cfg.generators;
    let gen = |k: usize| GE::generator(n, k).expect("generator index");
    Ok(assemble(cfg, &pr, |c| GE::scalar(n, c), |k, c| if c == re(0.0) { GE::zero(n) } else { gen(k) * c }))
}

// ---------------------------------------------------------------------------------------------
// monitors

/// (E, P, Q, Q̄) integrated over both sides, before edge corrections.
pub fn bulk_charges<A: Algebra>(st: &SimState<A>, cfg: &SimConfig) -> [A; 4] {
    let h = cfg.dx();
    let w = quadrature_weights(cfg.n, h);
    let mu = cfg.params.mu;
    let zero = st.l0.zero_like();
    let mut acc = [zero.clone(), zero.clone(), zero.clone(), zero];
    for s in [&st.left, &st.right] {
        let (psix, psibx) = (ddx(&s.psi, h), ddx(&s.psib, h));
        for j in 0..cfg.n {
            let d = bulk_charge_densities(mu, &s.phi[j], &s.phi_x(j), &s.phi_t(j), &s.psi[j], &psix[j], &s.psib[j], &psibx[j]);
            for (a, v) in acc.iter_mut().zip(d) {
                *a = a.clone() + &(v * w[j]);
            }
        }
    }
    acc
}

/// Charges at the current time, with the edge fluxes folded into the canonical part.
pub fn charge_report<A: SimScalar>(st: &SimState<A>, cfg: &SimConfig) -> ChargeReport {
    let ng = if cfg.model.is_super() { cfg.generators } else { 0 };
    let bulk = bulk_charges(st, cfg);
    let bulk: [GE; 4] = [0, 1, 2, 3].map(|k| (bulk[k].clone() - &st.edge[k]).to_ge(ng));
    let defect: [GE; 4] = match cfg.closure {
        Closure::Transparent => [0, 1, 2, 3].map(|_| GE::zero(ng)),
        Closure::Defect => {
            let v = st.boundary_values(&cfg.params);
            let d = defect_charge_terms(&cfg.params, &v, Transcription::Corrected);
            [0, 1, 2, 3].map(|k| d[k].to_ge(ng))
        }
    };
    ChargeReport::from_parts(st.t, bulk, defect)
}

/// Defect-condition residuals at x = 0 measured with x-derivatives taken from the φ lattice
/// (one-sided stencils) rather than from the characteristic variables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosureRow {
    pub t: f64,
    /// ∂φ+ + 2∂tΛ0 + …, ∂̄φ− − …, ∂φ− + … (type I: the two type-I conditions and 0).
    pub residuals: [f64; 3],
}

pub fn closure_residuals<A: Algebra>(st: &SimState<A>, cfg: &SimConfig) -> ClosureRow {
    let h = cfg.dx();
    let n = cfg.n;
    let px1 = ddx(&st.left.phi, h)[n - 1].clone();
    let px2 = ddx(&st.right.phi, h)[0].clone();
    let (pt1, pt2) = (st.left.phi_t(n - 1), st.right.phi_t(0));
    let (d1, d2) = (px1.clone() - &pt1, px2.clone() - &pt2);
    let (db1, db2) = (px1 + &pt1, px2 + &pt2);
    let (r1, r2) = (&st.left.r[n - 1], &st.right.r[0]);
    let (l1, l2) = (&st.left.l[n - 1], &st.right.l[0]);
    // The conditions are linear in the light-cone derivatives and hold exactly for (r, l), so
    // each residual is the measured combination minus the characteristic one.
    let row1 = (d1.clone() + &d2) - &(r1.clone() + r2);
    let row2 = (db1 - &db2) - &(l1.clone() - l2);
    let row3 = (d1 - &d2) - &(r1.clone() - r2);
    let third = if cfg.model == Model::BosonicType1 { 0.0 } else { row3.max_abs() };
    ClosureRow { t: st.t, residuals: [row1.max_abs(), row2.max_abs(), third] }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitorSeries {
    pub model: Model,
    pub closure: Closure,
    pub dx: f64,
    pub dt: f64,
    pub rows: Vec<ChargeReport>,
    pub closure_rows: Vec<ClosureRow>,
}

/// Runs the configured scenario and records charges and closure residuals.
pub fn run(config: &SimConfig) -> Result<MonitorSeries, SimError> {
    config.validate()?;
    if config.model.is_super() {
        run_from(initial_super_state(config)?, config)
    } else {
        run_from(initial_state(config)?, config)
    }
}

pub fn run_from<A: SimScalar>(mut st: SimState<A>, config: &SimConfig) -> Result<MonitorSeries, SimError> {
    let (steps, dt) = config.steps();
    let every = if config.record_every == 0 { (steps / 400).max(1) } else { config.record_every };
    let mut series = MonitorSeries {
        model: config.model,
        closure: config.closure,
        dx: config.dx(),
        dt,
        rows: vec![charge_report(&st, config)],
        closure_rows: vec![closure_residuals(&st, config)],
    };
    for k in 1..=steps {
        st = step_by(&st, config, dt)?;
        if k % every == 0 || k == steps {
            series.rows.push(charge_report(&st, config));
            series.closure_rows.push(closure_residuals(&st, config));
        }
    }
    Ok(series)
}

/// Largest coefficient-wise change of a charge over the series, and its scale.
fn drift_of(rows: &[ChargeReport], k: usize) -> (f64, f64) {
    let first = rows[0].values()[k];
    let mut drift = 0.0f64;
    let mut scale = first.max_abs();
    for r in rows {
        let v = r.values()[k];
        drift = drift.max((v.clone() - first).max_abs());
        scale = scale.max(if first.max_abs() > 0.0 { 0.0 } else { v.max_abs() });
    }
    (drift, scale)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChargeDrift {
    pub name: String,
    pub max_drift: f64,
    pub scale: f64,
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftSummary {
    pub charges: Vec<ChargeDrift>,
    /// Drift of the canonical charge over that of its modified counterpart (absolute drifts,
    /// since both share units).
    pub ratios: Vec<(String, f64)>,
    pub asserted: Vec<String>,
    pub tolerance: f64,
    pub pass: bool,
    pub max_closure_residual: f64,
}

impl DriftSummary {
    pub fn relative(&self, name: &str) -> Option<f64> {
        self.charges.iter().find(|c| c.name == name).map(|c| c.relative)
    }

    pub fn ratio(&self, name: &str) -> Option<f64> {
        self.ratios.iter().find(|(n, _)| n == name).map(|(_, r)| *r)
    }
}

/// The charges whose conservation is asserted for a model and closure.
pub fn asserted_charges(model: Model, closure: Closure) -> Vec<&'static str> {
    match (closure, model) {
        (Closure::Transparent, Model::SuperType2) => vec!["E", "P", "Q", "Qbar"],
        (Closure::Transparent, _) => vec!["E", "P"],
        (Closure::Defect, Model::SuperType2) => vec!["Q_mod", "Qbar_mod"],
        (Closure::Defect, _) => vec!["E_mod", "P_mod"],
    }
}

/// Drift of every charge, canonical/modified ratios, and pass/fail of the asserted ones.
pub fn drift_report(series: &MonitorSeries, tolerance: f64) -> Result<DriftSummary, SimError> {
    drift_report_for(series, tolerance, &asserted_charges(series.model, series.closure))
}

pub fn drift_report_for(series: &MonitorSeries, tolerance: f64, asserted: &[&str]) -> Result<DriftSummary, SimError> {
    if series.rows.is_empty() {
        return Err(SimError::EmptySeries);
    }
    let charges: Vec<ChargeDrift> = CHARGE_NAMES
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let (d, s) = drift_of(&series.rows, k);
            ChargeDrift { name: name.to_string(), max_drift: d, scale: s, relative: if s > 0.0 { d / s } else { d } }
        })
        .collect();
    let ratios = (0..4)
        .map(|k| {
            let (u, m) = (charges[k].max_drift, charges[k + 4].max_drift);
            (CHARGE_NAMES[k].to_string(), if m > 0.0 { u / m } else { f64::INFINITY })
        })
        .collect();
    let pass = asserted.iter().all(|a| charges.iter().any(|c| c.name == *a && c.relative <= tolerance));
    let max_closure_residual = series.closure_rows.iter().flat_map(|r| r.residuals).fold(0.0, f64::max);
    Ok(DriftSummary {
        charges,
        ratios,
        asserted: asserted.iter().map(|s| s.to_string()).collect(),
        tolerance,
        pass,
        max_closure_residual,
    })
}

/// Long-format CSV of the series: t, charge, monomial, re, im.
pub fn series_csv(series: &MonitorSeries) -> String {
    let mut out = String::from("t,charge,monomial,re,im\n");
    for row in &series.rows {
        for (name, v) in CHARGE_NAMES.iter().zip(row.values()) {
            let terms = v.terms();
            if terms.is_empty() {
                out.push_str(&format!("{},{},1,0,0\n", row.t, name));
            }
            for (mask, c) in terms {
                let mono = if *mask == 0 { "1".to_string() } else { crate::grassmann::mask_to_indices(*mask).iter().map(|k| format!("t{k}")).collect::<Vec<_>>().join("*") };
                out.push_str(&format!("{},{},{},{:e},{:e}\n", row.t, name, mono, c.re, c.im));
            }
        }
    }
    out
}

pub fn closure_csv(series: &MonitorSeries) -> String {
    let mut out = String::from("t,res1,res2,res3\n");
    for r in &series.closure_rows {
        out.push_str(&format!("{},{:e},{:e},{:e}\n", r.t, r.residuals[0], r.residuals[1], r.residuals[2]));
    }
    out
}

/// Drift of the asserted charges at successively halved dx (dt scaled along) and the
/// observed orders between consecutive levels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftRefinement {
    pub dx: Vec<f64>,
    /// Per asserted charge: relative drift at each level.
    pub drifts: Vec<(String, Vec<f64>)>,
    pub slopes: Vec<(String, Vec<f64>)>,
    /// The finest level's run and its drift summary.
    #[serde(skip)]
    pub finest: Option<(MonitorSeries, DriftSummary)>,
}

pub fn drift_refinement(config: &SimConfig, levels: usize) -> Result<DriftRefinement, SimError> {
    let mut cfg = config.clone();
    let names = asserted_charges(cfg.model, cfg.closure);
    let mut dx = Vec::new();
    let mut drifts: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    let mut finest = None;
    for level in 0..levels {
        if level > 0 {
            cfg.n = 2 * cfg.n - 1;
            cfg.dt /= 2.0;
        }
        let series = run(&cfg)?;
        let s = drift_report(&series, cfg.tolerance)?;
        dx.push(cfg.dx());
        for (k, n) in names.iter().enumerate() {
            drifts[k].push(s.relative(n).unwrap_or(f64::NAN));
        }
        finest = Some((series, s));
    }
    let slopes = drifts.iter().map(|d| d.windows(2).map(|w| (w[0] / w[1]).log2()).collect()).collect::<Vec<Vec<f64>>>();
    Ok(DriftRefinement {
        dx,
        drifts: names.iter().map(|n| n.to_string()).zip(drifts).collect(),
        slopes: names.iter().map(|n| n.to_string()).zip(slopes).collect(),
        finest,
    })
}
