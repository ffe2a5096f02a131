//! N=1 super-Liouville theory with a type-II defect.
//!
//! Component fields take values in a finite Grassmann algebra.  The default layout has six
//! generators: two seeds for fermionic data, the two SUSY parameters ε, ε̄, and θ, θ̄ reserved
//! for superspace.  Every relation is written once over a generic [`Algebra`] and reuses the
//! bosonic type-II terms of [`crate::liouville`], so with the odd fields set to zero the super
//! code performs the same floating-point operations as the bosonic code.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::{re, Algebra, I};
use crate::characteristics::{integrated_fields, march, CharSystem, Known, MarchOrder};
use crate::graded_linalg::{kmatrix_residual, osp_grading, zero_curvature_residual, GradedMatrix, MatrixField};
use crate::grassmann::{GrassmannContext, GrassmannElement, GrassmannError, Parity};
use crate::grid::{jets_at, DerivativeMode, Field, FieldError, LightConeGrid};
use crate::jet::Jet;
use crate::liouville::{
    blowup_guard, bulk_expr, lax_entries, static_wall, t_jet, tbar_jet, type2_z_terms, type2_zbar_term, BosonicField,
    DefectParams, SpectralParameter,
};
use crate::report::{scan_grid, scan_nodes, ResidualReport};

pub type GE = GrassmannElement;
pub type SuperField = Field<GrassmannElement>;

pub const SEED1: usize = 1;
pub const SEED2: usize = 2;
pub const EPSILON: usize = 3;
pub const EPSILON_BAR: usize = 4;
pub const THETA: usize = 5;
pub const THETA_BAR: usize = 6;
pub const DEFAULT_GENERATORS: usize = 6;

pub fn default_context() -> GrassmannContext {
    GrassmannContext::new(&["g1", "g2", "eps", "epsbar", "theta", "thetabar"]).expect("six generators")
}

/// Indices of the nine core defect-pair values (φ1, ψ1, ψ̄1, φ2, ψ2, ψ̄2, Λ0, Λ1, f1), followed
/// by the derived components used by the long Appendix-B list.
pub mod ix {
    pub const PHI1: usize = 0;
    pub const PSI1: usize = 1;
    pub const PSIB1: usize = 2;
    pub const PHI2: usize = 3;
    pub const PSI2: usize = 4;
    pub const PSIB2: usize = 5;
    pub const L0: usize = 6;
    pub const L1: usize = 7;
    pub const F1: usize = 8;
    pub const B1: usize = 9;
    pub const B2: usize = 10;
    pub const F2: usize = 11;
    pub const FA1: usize = 12;
    pub const FA2: usize = 13;
}
use ix::*;

pub fn lift_jet(j: &Jet<Complex64>, n: usize) -> Jet<GE> {
    j.map(|c| GE::scalar(n, *c))
}

/// A complex field seen as an even Grassmann field with zero soul.
pub fn lift_field(f: &BosonicField, n: usize) -> SuperField {
    let src = f.clone();
    Field::derived(f.grid().clone(), &f.label, move |i, j, order, mode| Ok(src.jet(i, j, order, mode)?.map(|jt| lift_jet(&jt, n))))
}

pub fn zero_field(grid: &LightConeGrid, n: usize, label: &str) -> SuperField {
    crate::grid::constant_field(grid, GE::zero(n), label)
}

/// A field computed pointwise from the jets (order + `extra`) of other fields.
pub fn derive(
    grid: &LightConeGrid,
    label: &str,
    inputs: &[&SuperField],
    extra: usize,
    f: impl Fn(&[Jet<GE>]) -> Jet<GE> + Send + Sync + 'static,
) -> SuperField {
    let inputs: Vec<SuperField> = inputs.iter().map(|f| (*f).clone()).collect();
    Field::derived(grid.clone(), label, move |i, j, order, mode| {
        let refs: Vec<&SuperField> = inputs.iter().collect();
        Ok(jets_at(&refs, i, j, order + extra, mode)?.map(|v| f(&v).truncate(order)))
    })
}

fn parity_error(op: &'static str, parity: Parity) -> FieldError {
    FieldError::Algebra(GrassmannError::Parity { op, parity })
}

/// Every node value of `f` must be even (or zero) / odd (or zero).
pub fn check_parity(f: &SuperField, odd: bool, what: &'static str) -> Result<(), FieldError> {
    let g = f.grid();
    for (i, j) in g.nodes() {
        let p = f.value(i, j)?.parity();
        let ok = match p {
            Parity::Zero => true,
            Parity::Even => !odd,
            Parity::Odd => odd,
            Parity::Mixed => false,
        };
        if !ok {
            return Err(parity_error(what, p));
        }
    }
    Ok(())
}

fn generators_of(f: &SuperField) -> Result<usize, FieldError> {
    Ok(f.value(0, 0)?.num_generators())
}

// ---------------------------------------------------------------------------------------------
// component fields

/// φ, ψ, ψ̄ and the auxiliary F of one side.
#[derive(Debug, Clone)]
pub struct SuperFieldComponents {
    pub phi: SuperField,
    pub psi: SuperField,
    pub psibar: SuperField,
    pub f: SuperField,
}

/// F = −μe^φ, the auxiliary field eliminated on-shell.
pub fn on_shell_f(phi: &SuperField, mu: Complex64) -> SuperField {
    derive(phi.grid(), "F", &[phi], 0, move |v| v[0].exp() * (-mu))
}

impl SuperFieldComponents {
    pub fn new(phi: SuperField, psi: SuperField, psibar: SuperField, f: SuperField) -> Self {
        Self { phi, psi, psibar, f }
    }

    /// F eliminated by its algebraic equation of motion.
    pub fn on_shell(phi: SuperField, psi: SuperField, psibar: SuperField, mu: Complex64) -> Self {
        let f = on_shell_f(&phi, mu);
        Self { phi, psi, psibar, f }
    }

    /// Fermion-free lift of a bosonic solution.
    pub fn bosonic(phi: &BosonicField, n: usize, mu: Complex64) -> Self {
        let g = phi.grid().clone();
        Self::on_shell(lift_field(phi, n), zero_field(&g, n, "psi"), zero_field(&g, n, "psibar"), mu)
    }

    pub fn grid(&self) -> &LightConeGrid {
        self.phi.grid()
    }

    pub fn generators(&self) -> Result<usize, FieldError> {
        generators_of(&self.phi)
    }

    pub fn check_parities(&self) -> Result<(), FieldError> {
        crate::grid::check_same_grid(&[&self.phi, &self.psi, &self.psibar, &self.f])?;
        check_parity(&self.phi, false, "phi")?;
        check_parity(&self.psi, true, "psi")?;
        check_parity(&self.psibar, true, "psibar")?;
        check_parity(&self.f, false, "F")
    }
}

/// The static wall φ = −ln(μ(z + z̄ + x0)) dressed with ψ = a/(z + z̄ + x0), ψ̄ = iψ for an odd
/// constant a; since a² = 0 the bosonic equation is untouched and both fermion equations hold.
pub fn static_wall_super(grid: &LightConeGrid, mu: Complex64, x0: f64, amplitude: &GE) -> Result<SuperFieldComponents, FieldError> {
    match amplitude.parity() {
        Parity::Odd | Parity::Zero => {}
        p => return Err(parity_error("fermion amplitude", p)),
    }
    let n = amplitude.num_generators();
    let phi = lift_field(&static_wall(grid, mu, x0)?, n);
    let g = grid.clone();
    let a = amplitude.clone();
    let psi = Field::closed_form(grid.clone(), "psi", move |i, j, order| {
        let like = GE::zero(n);
        let s = (Jet::z(g.z(i), &like, order) + &Jet::zbar(g.zbar(j), &like, order)) + re(x0);
        Ok(Jet::constant(a.clone(), order) * &s.recip())
    });
    let p2 = psi.clone();
    let psibar = Field::derived(grid.clone(), "psibar", move |i, j, order, mode| Ok(p2.jet(i, j, order, mode)?.map(|x| x * I)));
    Ok(SuperFieldComponents::on_shell(phi, psi, psibar, mu))
}

// ---------------------------------------------------------------------------------------------
// bulk equations

pub const SUPER_BULK_IDS: [&str; 3] = [
    "dd̄phi - mu^2 e^2phi - i mu e^phi psibar psi",
    "d̄psi - i mu e^phi psibar",
    "dpsibar + i mu e^phi psi",
];

/// The three bulk residuals from φ (order ≥ 2) and ψ, ψ̄ (order ≥ 1).
pub fn super_bulk_exprs<A: Algebra>(phi: &Jet<A>, psi: &Jet<A>, psibar: &Jet<A>, mu: Complex64) -> [A; 3] {
    let e = phi.value().exp() * (I * mu);
    [
        bulk_expr(phi, mu) - ((e.clone() * psibar.value()) * psi.value()),
        psi.derivative(0, 1) - (e.clone() * psibar.value()),
        psibar.derivative(1, 0) + (e * psi.value()),
    ]
}

pub fn super_bulk_residual(fields: &SuperFieldComponents, mu: Complex64, mode: DerivativeMode) -> Result<Vec<ResidualReport>, FieldError> {
    fields.check_parities()?;
    let g = fields.grid();
    if mode == DerivativeMode::FiniteDifference && (g.nz < 3 || g.nzbar < 3) {
        return Err(FieldError::Undersized("finite-difference bulk residual needs >= 3 nodes per direction".into()));
    }
    scan_grid(g, &SUPER_BULK_IDS, mode, |i, j| {
        let Some(phi) = fields.phi.jet(i, j, 2, mode)? else { return Ok(None) };
        let Some(v) = jets_at(&[&fields.psi, &fields.psibar], i, j, 1, mode)? else { return Ok(None) };
        Ok(Some(super_bulk_exprs(&phi, &v[0], &v[1], mu).to_vec()))
    })
}

// ---------------------------------------------------------------------------------------------
// superspace

/// Which generators play θ and θ̄.  D = ∂/∂θ + θ∂ with the left derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Superspace {
    pub theta: usize,
    pub thetabar: usize,
}

impl Default for Superspace {
    fn default() -> Self {
        Self { theta: THETA, thetabar: THETA_BAR }
    }
}

impl Superspace {
    pub fn check(&self, n: usize) -> Result<(), FieldError> {
        for k in [self.theta, self.thetabar] {
            if k == 0 || k > n {
                return Err(FieldError::Algebra(GrassmannError::GeneratorOutOfRange { index: k, n }));
            }
        }
        if self.theta == self.thetabar {
            return Err(FieldError::Parameter("theta and thetabar must be distinct generators".into()));
        }
        Ok(())
    }

    fn gen_jet(&self, k: usize, n: usize, order: usize) -> Jet<GE> {
        Jet::constant(GE::generator(n, k).expect("checked generator"), order)
    }

    /// Φ = φ + iθ̄ψ̄ + iθψ + iθ̄θF (all jets of the same order).
    pub fn superfield(&self, phi: &Jet<GE>, psi: &Jet<GE>, psibar: &Jet<GE>, f: &Jet<GE>) -> Jet<GE> {
        let n = phi.value().num_generators();
        let k = phi.order();
        let t = self.gen_jet(self.theta, n, k);
        let tb = self.gen_jet(self.thetabar, n, k);
        phi.clone() + &((tb.clone() * psibar) * I) + &((t.clone() * psi) * I) + &(((tb * &t) * f) * I)
    }

    fn super_derivative(&self, x: &Jet<GE>, k: usize, holomorphic: bool) -> Jet<GE> {
        let n = x.value().num_generators();
        let order = x.order().saturating_sub(1);
        let odd = x.map(|e| e.derivative(k).expect("checked generator")).truncate(order);
        let d = if holomorphic { x.d_z() } else { x.d_zbar() };
        odd + &(self.gen_jet(k, n, order) * &d)
    }

    /// D = ∂/∂θ + θ∂ (drops one jet order).
    pub fn d(&self, x: &Jet<GE>) -> Jet<GE> {
        self.super_derivative(x, self.theta, true)
    }

    /// D̄ = ∂/∂θ̄ + θ̄∂̄.
    pub fn dbar(&self, x: &Jet<GE>) -> Jet<GE> {
        self.super_derivative(x, self.thetabar, false)
    }

    /// Coefficients (C0, C1, C2, C3) of X = C0 + θ̄C1 + θC2 + θ̄θC3, each free of θ and θ̄.
    pub fn expand(&self, x: &GE) -> [GE; 4] {
        let (t, tb) = (self.theta, self.thetabar);
        let dtb = x.derivative(tb).expect("checked generator");
        [
            x.without_generator(t).without_generator(tb),
            dtb.without_generator(t),
            x.derivative(t).expect("checked generator").without_generator(tb),
            dtb.derivative(t).expect("checked generator"),
        ]
    }

    /// The θ-coefficients of DD̄Φ + iμe^Φ from order-2 component jets, together with what the
    /// component equations predict for them:
    /// 1: i(F + μe^φ),  θ̄: −i r_ψ,  θ: i r_ψ̄,  θ̄θ: −r_φ − μe^φ (F + μe^φ).
    pub fn superspace_coefficients(&self, phi: &Jet<GE>, psi: &Jet<GE>, psibar: &Jet<GE>, f: &Jet<GE>, mu: Complex64) -> ([GE; 4], [GE; 4]) {
        let big = self.superfield(phi, psi, psibar, f);
        let x = self.d(&self.dbar(&big));
        let x = x.value().clone() + &(big.value().exp() * (I * mu));
        let got = self.expand(&x);
        let [rphi, rpsi, rpsib] = super_bulk_exprs(phi, psi, psibar, mu);
        let e = phi.value().exp();
        let rf = f.value().clone() + &(e.clone() * mu);
        let want = [rf.clone() * I, rpsi * (-I), rpsib * I, -rphi - &((e * mu) * &rf)];
        (got, want)
    }
}

pub const SUPERSPACE_IDS: [&str; 8] = [
    "superspace [1]",
    "superspace [thetabar]",
    "superspace [theta]",
    "superspace [thetabar theta]",
    "superspace [1] - i(F + mu e^phi)",
    "superspace [thetabar] + i r_psi",
    "superspace [theta] - i r_psibar",
    "superspace [thetabar theta] + r_phi + mu e^phi r_F",
];

/// The superspace equation DD̄Φ = −iμe^Φ on assembled component fields: its four
/// θ-coefficients, and their deviation from the component residuals.
pub fn superspace_residual(fields: &SuperFieldComponents, ss: Superspace, mu: Complex64, mode: DerivativeMode) -> Result<Vec<ResidualReport>, FieldError> {
    fields.check_parities()?;
    ss.check(fields.generators()?)?;
    scan_grid(fields.grid(), &SUPERSPACE_IDS, mode, |i, j| {
        let Some(v) = jets_at(&[&fields.phi, &fields.psi, &fields.psibar, &fields.f], i, j, 2, mode)? else { return Ok(None) };
        let (got, want) = ss.superspace_coefficients(&v[0], &v[1], &v[2], &v[3], mu);
        let mut out = got.to_vec();
        out.extend(got.iter().zip(&want).map(|(a, b)| a.clone() - b));
        Ok(Some(out))
    })
}

// ---------------------------------------------------------------------------------------------
// defect relations

/// Shorthands shared by the super defect relations, from the nine core values.
#[derive(Debug, Clone)]
pub struct DefectTerms<A> {
    /// sinh(φ−/2), cosh(φ−/2)
    pub sh: A,
    pub ch: A,
    /// e^{Λ0/2}, e^{(φ+−Λ0)/2}
    pub el2: A,
    pub ep2: A,
    pub psi_p: A,
    pub psi_m: A,
    pub psib_p: A,
    pub psib_m: A,
}

impl<A: Algebra> DefectTerms<A> {
    pub fn new(v: &[A]) -> Self {
        let half = (v[PHI1].clone() - &v[PHI2]) * 0.5;
        Self {
            sh: half.sinh(),
            ch: half.cosh(),
            el2: (v[L0].clone() * 0.5).exp(),
            ep2: (((v[PHI1].clone() + &v[PHI2]) - &v[L0]) * 0.5).exp(),
            psi_p: v[PSI1].clone() + &v[PSI2],
            psi_m: v[PSI1].clone() - &v[PSI2],
            psib_p: v[PSIB1].clone() + &v[PSIB2],
            psib_m: v[PSIB1].clone() - &v[PSIB2],
        }
    }
}

/// (√μ/β, √μβ) on the principal branch of √μ.
pub(crate) fn roots(p: &DefectParams) -> (Complex64, Complex64) {
    let s = p.sqrt_mu();
    (s / p.beta, s * p.beta)
}

/// ψ2 and ψ̄2 from the algebraic ψ−, ψ̄− relations.
pub fn algebraic_psi2<A: Algebra>(p: &DefectParams, phi1: &A, psi1: &A, psib1: &A, phi2: &A, l0: &A, f1: &A) -> (A, A) {
    let (a, b) = roots(p);
    let half = (phi1.clone() - phi2) * 0.5;
    let el2 = (l0.clone() * 0.5).exp();
    let ep2 = (((phi1.clone() + phi2) - l0) * 0.5).exp();
    (
        psi1.clone() - &(((el2 * &half.sinh()) * f1) * a),
        psib1.clone() - &((ep2 * f1) * b),
    )
}

/// Λ1 from ψ+ − Λ1 = (√μ/β)e^{Λ0/2}cosh(φ−/2)f1.
pub fn lambda1_from<A: Algebra>(p: &DefectParams, v: &[A]) -> A {
    let (a, _) = roots(p);
    let t = DefectTerms::new(v);
    t.psi_p - &(((t.el2 * &t.ch) * &v[F1]) * a)
}

/// b1, b2, f2, F+, F− from their algebraic Appendix-B determinations (the first printed form of
/// f2 and F−).
pub fn algebraic_aux<A: Algebra>(p: &DefectParams, v: &[A]) -> [A; 5] {
    let (a, b) = roots(p);
    let t = DefectTerms::new(v);
    let f1 = &v[F1];
    let b1 = (t.el2.clone() * &t.sh) * (-2.0 * a);
    let b2 = t.ep2.clone() * (2.0 * b);
    let f2 = ((t.el2.clone() * &t.ch) * &t.psib_m) * (I * a);
    let fp = (t.el2.clone() * &((b2.clone() * &t.ch) + &(((t.sh.clone() * &t.psib_m) * f1) * (0.5 * I)))) * (-a);
    let fm = (t.ep2.clone() * &(b1.clone() + &(((t.psi_p.clone() - &v[L1]) * f1) * (0.5 * I)))) * b;
    [b1, b2, f2, fp, fm]
}

pub const REDUCED_IDS: [&str; 9] = [
    "d(phi+ - L0) + c e^L0 sinh phi- + (sqrt(mu)/2beta) e^(L0/2) cosh psi+ f1",
    "d phi- + c e^L0 (cosh phi- + kappa) + (sqrt(mu)/2beta) e^(L0/2) sinh psi+ f1",
    "dbar phi- - d e^(phi+ - L0) + (beta sqrt(mu)/2) e^((phi+ - L0)/2) psibar+ f1",
    "psi- - (sqrt(mu)/beta) e^(L0/2) sinh f1",
    "psibar- - sqrt(mu) beta e^((phi+ - L0)/2) f1",
    "d f1 + (i sqrt(mu)/beta) e^(L0/2) sinh psi+",
    "dbar f1 - i sqrt(mu) beta e^((phi+ - L0)/2) psibar+",
    "dbar L0",
    "dbar L1",
];

/// The eight-equation reduced system (κ enters through cosh φ− + κ, which is 2sinh²(φ−/2) at κ = −1).
pub fn reduced_exprs<A: Algebra>(p: &DefectParams, j: &[Jet<A>]) -> Vec<A> {
    let v: Vec<A> = j.iter().map(|x| x.value().clone()).collect();
    let dz = |k: usize| j[k].derivative(1, 0);
    let dzb = |k: usize| j[k].derivative(0, 1);
    let (a, b) = roots(p);
    let t = DefectTerms::new(&v);
    let (x, y) = type2_z_terms(p, &v[PHI1], &v[PHI2], &v[L0]);
    let w = type2_zbar_term(p, &v[PHI1], &v[PHI2], &v[L0]);
    let f1 = &v[F1];
    let core = t.psi_p.clone() * f1;
    let coreb = t.psib_p.clone() * f1;
    vec![
        (((dz(PHI1) + &dz(PHI2)) - &dz(L0)) + &y) + &(((t.el2.clone() * &t.ch) * &core) * (a / 2.0)),
        ((dz(PHI1) - &dz(PHI2)) + &x) + &(((t.el2.clone() * &t.sh) * &core) * (a / 2.0)),
        ((dzb(PHI1) - &dzb(PHI2)) - &w) + &((t.ep2.clone() * &coreb) * (b / 2.0)),
        t.psi_m.clone() - &(((t.el2.clone() * &t.sh) * f1) * a),
        t.psib_m.clone() - &((t.ep2.clone() * f1) * b),
        dz(F1) + &(((t.el2.clone() * &t.sh) * &t.psi_p) * (I * a)),
        dzb(F1) - &((t.ep2.clone() * &t.psib_p) * (I * b)),
        dzb(L0),
        dzb(L1),
    ]
}

pub const FULL_IDS: [&str; 21] = [
    "d(phi+ - L0) [with psi-, L1]",
    "psi+ - L1",
    "F+",
    "d psibar+",
    "psibar-",
    "F- [first form]",
    "F- [second form]",
    "dbar phi- [with b2]",
    "dbar psi-",
    "b1",
    "f2 [first form]",
    "f2 [second form]",
    "d f1 [with L1]",
    "d b2",
    "b2",
    "dbar f1",
    "dbar b1",
    "psi-",
    "d phi- [with b1]",
    "d psibar-",
    "dbar L0, dbar L1",
];

/// The long Appendix-B component list from order-1 jets of the fourteen fields (core nine, then
/// b1, b2, f2, F1, F2).  `AsPrinted` keeps the typeset prefactors; `Corrected` replaces the
/// prefactor −i√μ/β of the second F− form by −√μ/β and i√μ/4β of ∂ψ̄− by −√μ/4β, the values
/// forced by differentiating ψ̄− = √μβ e^{(φ+−Λ0)/2} f1 and by F1 + F2 = F+.
pub fn full_exprs<A: Algebra>(p: &DefectParams, j: &[Jet<A>], tr: Transcription) -> Vec<A> {
    let v: Vec<A> = j.iter().map(|x| x.value().clone()).collect();
    let dz = |k: usize| j[k].derivative(1, 0);
    let dzb = |k: usize| j[k].derivative(0, 1);
    let (a, b) = roots(p);
    let t = DefectTerms::new(&v);
    let (_, y) = type2_z_terms(p, &v[PHI1], &v[PHI2], &v[L0]);
    let (f1, l1, b1, b2, f2) = (&v[F1], &v[L1], &v[B1], &v[B2], &v[F2]);
    let fp = v[FA1].clone() + &v[FA2];
    let fm = v[FA1].clone() - &v[FA2];
    let (sh, ch, el2, ep2) = (&t.sh, &t.ch, &t.el2, &t.ep2);
    let (psip, psim, psibp, psibm) = (&t.psi_p, &t.psi_m, &t.psib_p, &t.psib_m);
    let pl = psip.clone() - l1; // ψ+ − Λ1
    let h = 0.5 * I;
    let c1 = (((dz(PHI1) + &dz(PHI2)) - &dz(L0)) + &y)
        + &(el2.clone() * &(((sh.clone() * psim) * f1) + &((ch.clone() * l1) * f1)) * (a / 2.0));
    let c2 = pl.clone() - &(((el2.clone() * ch) * f1) * a);
    let c3 = fp.clone() + &((el2.clone() * &((b2.clone() * ch) + &(((sh.clone() * psibm) * f1) * h))) * a);
    let c4 = {
        let s_part = (b1.clone() * psibm) + &(((l1.clone() * f1) * psibm) * h) - &(b2.clone() * psim) - &(fm.clone() * f1);
        let c_part = (f2.clone() * 2.0) + &((l1.clone() * b2) * I) + &(((psibm.clone() * psim) * f1) * 0.5);
        (dz(PSIB1) + &dz(PSIB2)) - &((el2.clone() * &(((sh.clone() * &s_part) * I) - &(ch.clone() * &c_part))) * (a / 2.0))
    };
    let c5 = psibm.clone() - &((ep2.clone() * f1) * b);
    let c6 = fm.clone() - &((ep2.clone() * &(b1.clone() + &((pl.clone() * f1) * h))) * b);
    let (k6b, k18) = match tr {
        Transcription::AsPrinted => (-I * a, I * a / 4.0),
        Transcription::Corrected => (-a, -a / 4.0),
    };
    let c6b = fm.clone() - &((el2.clone() * &((b2.clone() * sh) + &(((ch.clone() * psibm) * f1) * h))) * k6b);
    let c7 = (dzb(PHI1) - &dzb(PHI2)) - &((ep2.clone() * &(b2.clone() + &((psibp.clone() * f1) * h))) * (I * b));
    let c8 = {
        let inner = (f2.clone() * 2.0) - &((b1.clone() * psibp) * I) + &((b2.clone() * &pl) * I)
            + &(((fp.clone() * I) + &((psibp.clone() * &pl) * 0.5)) * f1);
        (dzb(PSI1) - &dzb(PSI2)) - &((ep2.clone() * &inner) * (b / 2.0))
    };
    let c9 = b1.clone() + &((el2.clone() * sh) * (2.0 * a));
    let c10 = f2.clone() - &(((el2.clone() * ch) * psibm) * (I * a));
    let c10b = f2.clone() - &((ep2.clone() * &pl) * (I * b));
    let c11 = dz(F1) + &((el2.clone() * &((ch.clone() * psim) + &(sh.clone() * l1))) * (I * a));
    let c12 = {
        let inner = ((ch.clone() * &fm) * I) + &(((sh.clone() * psibm) * psim) * 0.5) + &(((ch.clone() * psibm) * l1) * 0.5);
        dz(B2) - &((el2.clone() * &inner) * a)
    };
    let c13 = b2.clone() - &(ep2.clone() * (2.0 * b));
    let c14 = dzb(F1) - &((ep2.clone() * psibp) * (I * b));
    let c15 = dzb(B1) - &((ep2.clone() * &((fp.clone() * I) + &((psibp.clone() * &pl) * 0.5))) * b);
    let c16 = psim.clone() - &(((el2.clone() * sh) * f1) * a);
    let c17 = {
        let inner = (b1.clone() * sh) + &(((sh.clone() * l1) * f1) * h) + &(((ch.clone() * psim) * f1) * h);
        (dz(PHI1) - &dz(PHI2)) - &((el2.clone() * &inner) * (I * a))
    };
    let c18 = {
        let two_i = 2.0 * I;
        let inner = ((ch.clone() * &(l1.clone() * f1)) * psibm)
            + &((sh.clone() * &(psibm.clone() * psim)) * f1)
            + &(((ch.clone() * &fm) * f1) * two_i)
            - &(((ch.clone() * b1) * psibm) * two_i)
            + &(((ch.clone() * b2) * psim) * two_i)
            + &(((sh.clone() * b2) * l1) * two_i)
            + &((f2.clone() * sh) * 4.0);
        (dz(PSIB1) - &dz(PSIB2)) - &((el2.clone() * &inner) * k18)
    };
    // both chirality conditions in one row
    let c19 = dzb(L0) + &dzb(L1);
    vec![c1, c2, c3, c4, c5, c6, c6b, c7, c8, c9, c10, c10b, c11, c12, c13, c14, c15, c16, c17, c18, c19]
}

// ---------------------------------------------------------------------------------------------
// super-Bäcklund state

/// Λ0, Λ1, f1 and the components b1, b2, f2 of Ξ = f1 + θb1 + θ̄b2 + θ̄θf2.
#[derive(Debug, Clone)]
pub struct DefectDegrees {
    pub lambda0: SuperField,
    pub lambda1: SuperField,
    pub f1: SuperField,
    pub b1: SuperField,
    pub b2: SuperField,
    pub f2: SuperField,
}

impl DefectDegrees {
    pub fn check_parities(&self) -> Result<(), FieldError> {
        check_parity(&self.lambda0, false, "Lambda0")?;
        check_parity(&self.lambda1, true, "Lambda1")?;
        check_parity(&self.f1, true, "f1")?;
        check_parity(&self.b1, false, "b1")?;
        check_parity(&self.b2, false, "b2")?;
        check_parity(&self.f2, true, "f2")
    }
}

#[derive(Debug, Clone)]
pub struct SuperState {
    pub side1: SuperFieldComponents,
    pub side2: SuperFieldComponents,
    pub defect: DefectDegrees,
    pub params: DefectParams,
    /// Coefficient-wise max |march(z then z̄) − march(z̄ then z)| for integrated states.
    pub cross_defect: Option<f64>,
}

impl SuperState {
    /// Assemble from the nine core fields; b1, b2, f2 and F1, F2 are assigned from their
    /// algebraic Appendix-B determinations (F± = F1 ± F2).
    pub fn assemble(core: [SuperField; 9], params: DefectParams) -> Self {
        let g = core[0].grid().clone();
        let refs: Vec<&SuperField> = core.iter().collect();
        let aux = |k: usize, label: &str| {
            derive(&g, label, &refs, 0, move |v| {
                let x = algebraic_aux(&params, v);
                match k {
                    5 => (x[3].clone() + &x[4]) * 0.5,
                    6 => (x[3].clone() - &x[4]) * 0.5,
                    _ => x[k].clone(),
                }
            })
        };
        let (b1, b2, f2, fa1, fa2) = (aux(0, "b1"), aux(1, "b2"), aux(2, "f2"), aux(5, "F1"), aux(6, "F2"));
        let [phi1, psi1, psib1, phi2, psi2, psib2, lambda0, lambda1, f1] = core;
        Self {
            side1: SuperFieldComponents::new(phi1, psi1, psib1, fa1),
            side2: SuperFieldComponents::new(phi2, psi2, psib2, fa2),
            defect: DefectDegrees { lambda0, lambda1, f1, b1, b2, f2 },
            params,
            cross_defect: None,
        }
    }

    /// Fermion-free lift of a bosonic type-II state (Λ1 = f1 = 0).
    pub fn from_bosonic(state: &crate::liouville::TypeIIState, n: usize) -> Self {
        let g = state.grid().clone();
        let z = |l: &str| zero_field(&g, n, l);
        Self::assemble(
            [
                lift_field(&state.phi1, n),
                z("psi1"),
                z("psibar1"),
                lift_field(&state.phi2, n),
                z("psi2"),
                z("psibar2"),
                lift_field(&state.lambda0, n),
                z("lambda1"),
                z("f1"),
            ],
            state.params,
        )
    }

    pub fn grid(&self) -> &LightConeGrid {
        self.side1.grid()
    }

    pub fn core(&self) -> [&SuperField; 9] {
        [
            &self.side1.phi,
            &self.side1.psi,
            &self.side1.psibar,
            &self.side2.phi,
            &self.side2.psi,
            &self.side2.psibar,
            &self.defect.lambda0,
            &self.defect.lambda1,
            &self.defect.f1,
        ]
    }

    /// Core nine, then b1, b2, f2, F1, F2.
    pub fn all_fields(&self) -> [&SuperField; 14] {
        let c = self.core();
        [c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7], c[8], &self.defect.b1, &self.defect.b2, &self.defect.f2, &self.side1.f, &self.side2.f]
    }

    pub fn generators(&self) -> Result<usize, FieldError> {
        self.side1.generators()
    }

    pub fn check_parities(&self) -> Result<(), FieldError> {
        self.side1.check_parities()?;
        self.side2.check_parities()?;
        self.defect.check_parities()
    }
}

/// Characteristic system of the reduced super-Bäcklund equations: state (φ2, Λ0, f1), known
/// (φ1, ψ1, ψ̄1); ψ2 and ψ̄2 are algebraic.
pub struct SuperBacklundSystem {
    pub side1: SuperFieldComponents,
    pub params: DefectParams,
}

impl CharSystem<GE> for SuperBacklundSystem {
    fn n_state(&self) -> usize {
        3
    }
    fn state_labels(&self) -> Vec<&'static str> {
        vec!["phi2", "lambda0", "f1"]
    }
    fn grid(&self) -> &LightConeGrid {
        self.side1.grid()
    }
    fn known_jets(&self, i: usize, j: usize, order: usize, mode: DerivativeMode) -> Result<Option<Vec<Jet<GE>>>, FieldError> {
        jets_at(&[&self.side1.phi, &self.side1.psi, &self.side1.psibar], i, j, order, mode)
    }
    fn rate_z<A: Algebra>(&self, k: &Known<A>, s: &[A]) -> Vec<A> {
        let p = &self.params;
        let (a, _) = roots(p);
        let (phi1, psi1, psib1) = (&k.v[0], &k.v[1], &k.v[2]);
        let (phi2, l0, f1) = (&s[0], &s[1], &s[2]);
        let (x, y) = type2_z_terms(p, phi1, phi2, l0);
        let (psi2, _) = algebraic_psi2(p, phi1, psi1, psib1, phi2, l0, f1);
        let half = (phi1.clone() - phi2) * 0.5;
        let el2 = (l0.clone() * 0.5).exp();
        let psip = psi1.clone() + &psi2;
        let core = (el2.clone() * &psip) * f1;
        let dphi2 = (k.dz[0].clone() + &x) + &((half.sinh() * &core) * (a / 2.0));
        let dl = ((k.dz[0].clone() + &dphi2) + &y) + &((half.cosh() * &core) * (a / 2.0));
        let df1 = ((el2 * &half.sinh()) * &psip) * (-I * a);
        vec![dphi2, dl, df1]
    }
    fn rate_zbar<A: Algebra>(&self, k: &Known<A>, s: &[A]) -> Vec<A> {
        let p = &self.params;
        let (_, b) = roots(p);
        let (phi1, psi1, psib1) = (&k.v[0], &k.v[1], &k.v[2]);
        let (phi2, l0, f1) = (&s[0], &s[1], &s[2]);
        let w = type2_zbar_term(p, phi1, phi2, l0);
        let (_, psib2) = algebraic_psi2(p, phi1, psi1, psib1, phi2, l0, f1);
        let ep2 = (((phi1.clone() + phi2) - l0) * 0.5).exp();
        let psibp = psib1.clone() + &psib2;
        let dphi2 = (k.dzbar[0].clone() - &w) + &(((ep2.clone() * &psibp) * f1) * (b / 2.0));
        let df1 = (ep2 * &psibp) * (I * b);
        vec![dphi2, s[1].zero_like(), df1]
    }
    fn guard(&self, k: &Known<GE>, s: &[GE]) -> Option<(String, f64)> {
        blowup_guard(self.params.blowup_bound, k.v[0].body(), s[0].body(), s[1].body())
    }
}

/// Corner values of (φ2, Λ0, f1).
#[derive(Debug, Clone, PartialEq)]
pub struct SuperSeed {
    pub phi2: GE,
    pub lambda0: GE,
    pub f1: GE,
}

fn require_super_bulk(side: &SuperFieldComponents, mu: Complex64) -> Result<(), FieldError> {
    if side.grid().len() < 2 {
        return Ok(());
    }
    let r = super_bulk_residual(side, mu, DerivativeMode::Analytic)?;
    let scale = 1.0 + side.phi.max_abs()?.exp().powi(2) * mu.norm_sqr();
    for x in &r {
        if !(x.max_norm <= 1e-8 * scale) {
            return Err(FieldError::Parameter(format!("side-1 fields are off-shell ({}: {:.3e})", x.equation_id, x.max_norm)));
        }
    }
    Ok(())
}

/// March the reduced super-Bäcklund system from the corner seed.  κ must be −1; the side-1
/// fields must carry analytic jets and satisfy the bulk equations.
pub fn super_backlund_integrate(side1: &SuperFieldComponents, seed: &SuperSeed, params: &DefectParams) -> Result<SuperState, FieldError> {
    params.validate()?;
    if params.kappa != re(-1.0) {
        return Err(FieldError::Parameter(format!("the super-Bäcklund system needs kappa = -1, got {}", params.kappa)));
    }
    side1.check_parities()?;
    for (v, odd, what) in [(&seed.phi2, false, "phi2 seed"), (&seed.lambda0, false, "Lambda0 seed"), (&seed.f1, true, "f1 seed")] {
        let p = v.parity();
        if !(p == Parity::Zero || (p == Parity::Odd) == odd && p != Parity::Mixed) {
            return Err(parity_error(what, p));
        }
    }
    require_super_bulk(side1, params.mu)?;
    let n = side1.generators()?;
    let sys = Arc::new(SuperBacklundSystem { side1: side1.clone(), params: *params });
    let s0 = [seed.phi2.clone(), seed.lambda0.clone(), seed.f1.clone()];
    let main = march(sys.as_ref(), &s0, MarchOrder::ZbarThenZ)?;
    let alt = march(sys.as_ref(), &s0, MarchOrder::ZThenZbar)?;
    let cross = main
        .iter()
        .zip(&alt)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x.clone() - y).max_abs()))
        .fold(0.0, f64::max);
    let mut f = integrated_fields(sys, main)?.into_iter();
    let (phi2, lambda0, f1) = (f.next().expect("phi2"), f.next().expect("lambda0"), f.next().expect("f1"));
    let g = side1.grid().clone();
    let p = *params;
    let inputs = [&side1.phi, &side1.psi, &side1.psibar, &phi2, &lambda0, &f1];
    let psi2 = derive(&g, "psi2", &inputs, 0, move |v| algebraic_psi2(&p, &v[0], &v[1], &v[2], &v[3], &v[4], &v[5]).0);
    let psib2 = derive(&g, "psibar2", &inputs, 0, move |v| algebraic_psi2(&p, &v[0], &v[1], &v[2], &v[3], &v[4], &v[5]).1);
    let l1_inputs = [&side1.phi, &side1.psi, &side1.psibar, &phi2, &psi2, &psib2, &lambda0, &lambda0, &f1];
    let lambda1 = derive(&g, "lambda1", &l1_inputs, 0, move |v| lambda1_from(&p, v));
    let _ = n;
    let mut st = SuperState::assemble(
        [side1.phi.clone(), side1.psi.clone(), side1.psibar.clone(), phi2, psi2, psib2, lambda0, lambda1, f1],
        *params,
    );
    st.cross_defect = Some(cross);
    Ok(st)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BacklundForm {
    Full,
    Reduced,
}

pub fn super_backlund_residual(state: &SuperState, form: BacklundForm, tr: Transcription, mode: DerivativeMode) -> Result<Vec<ResidualReport>, FieldError> {
    let p = state.params;
    let g = state.grid();
    match form {
        BacklundForm::Reduced => {
            let core = state.core();
            scan_grid(g, &REDUCED_IDS, mode, |i, j| Ok(jets_at(&core, i, j, 1, mode)?.map(|v| reduced_exprs(&p, &v))))
        }
        BacklundForm::Full => {
            let all = state.all_fields();
            scan_grid(g, &FULL_IDS, mode, |i, j| Ok(jets_at(&all, i, j, 1, mode)?.map(|v| full_exprs(&p, &v, tr))))
        }
    }
}

/// F_p + μe^{φ_p} for both sides: the F assigned from the Appendix-B relations against the
/// auxiliary field's own equation of motion.
pub fn auxiliary_consistency(state: &SuperState, mode: DerivativeMode) -> Result<Vec<ResidualReport>, FieldError> {
    let mu = state.params.mu;
    let (s1, s2) = (&state.side1, &state.side2);
    scan_grid(state.grid(), &["F1 + mu e^phi1", "F2 + mu e^phi2"], mode, |i, j| {
        let Some(v) = jets_at(&[&s1.phi, &s1.f, &s2.phi, &s2.f], i, j, 0, mode)? else { return Ok(None) };
        Ok(Some(vec![
            v[1].value().clone() + &(v[0].value().exp() * mu),
            v[3].value().clone() + &(v[2].value().exp() * mu),
        ]))
    })
}

// ---------------------------------------------------------------------------------------------
// defect conditions at x = 0

/// Boundary values and their x- and t-derivatives for the nine core fields.
#[derive(Debug, Clone)]
pub struct BoundarySample<A> {
    pub v: Vec<A>,
    pub dx: Vec<A>,
    pub dt: Vec<A>,
}

impl<A: Algebra> BoundarySample<A> {
    /// ∂x = (∂ + ∂̄)/2, ∂t = (∂̄ − ∂)/2.
    pub fn from_jets(j: &[Jet<A>]) -> Self {
        Self {
            v: j.iter().map(|x| x.value().clone()).collect(),
            dx: j.iter().map(|x| (x.derivative(1, 0) + &x.derivative(0, 1)) * 0.5).collect(),
            dt: j.iter().map(|x| (x.derivative(0, 1) - &x.derivative(1, 0)) * 0.5).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConditionForm {
    /// The set carrying the Lagrange multiplier Λ1.
    WithLambda1,
    /// Λ1 eliminated.
    Reduced,
}

/// Typeset formula versus the form that is consistent with the reduced Bäcklund system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transcription {
    Corrected,
    AsPrinted,
}

pub const WITH_LAMBDA1_IDS: [&str; 7] = [
    "dx phi1 - dt(phi2 - L0)",
    "dx phi2 - dt(phi1 - L0)",
    "dt phi-",
    "psi+ - L1",
    "psi-",
    "psibar-",
    "dt f1",
];

pub const REDUCED_CONDITION_IDS: [&str; 6] = ["dx phi1 - dt(phi2 - L0)", "dx phi2 - dt(phi1 - L0)", "dt phi-", "psi-", "psibar-", "dt f1"];

/// Defect conditions as residuals (lhs − rhs).  With `Transcription::Corrected`, the bracket of
/// the ∂tφ− condition in the Λ1 form is cosh(φ−/2)ψ− + sinh(φ−/2)Λ1 (as in the ∂tf1 condition)
/// and the reduced ∂tφ− condition carries sinh²(φ−/2).
pub fn defect_condition_exprs<A: Algebra>(p: &DefectParams, form: ConditionForm, tr: Transcription, s: &BoundarySample<A>) -> Vec<A> {
    let v = &s.v;
    let (dx, dt) = (&s.dx, &s.dt);
    let (a, b) = roots(p);
    let t = DefectTerms::new(v);
    let (x, y) = type2_z_terms(p, &v[PHI1], &v[PHI2], &v[L0]);
    let w = type2_zbar_term(p, &v[PHI1], &v[PHI2], &v[L0]);
    let (f1, l1) = (&v[F1], &v[L1]);
    let (sh, ch, el2, ep2) = (&t.sh, &t.ch, &t.el2, &t.ep2);
    let g_a = ((ep2.clone() * &t.psib_p) * f1) * (b / 4.0);
    let lhs1 = dx[PHI1].clone() - &(dt[PHI2].clone() - &dt[L0]);
    let lhs2 = dx[PHI2].clone() - &(dt[PHI1].clone() - &dt[L0]);
    let lhs3 = dt[PHI1].clone() - &dt[PHI2];
    let w2 = w * 0.5;
    let y2 = y * 0.5;
    let psi_m_cond = t.psi_m.clone() - &(((el2.clone() * sh) * f1) * a);
    let psib_m_cond = t.psib_m.clone() - &((ep2.clone() * f1) * b);
    match form {
        ConditionForm::WithLambda1 => {
            let br1 = (el2.clone() * &(((sh.clone() * &t.psi_m) + &(ch.clone() * l1)) * f1)) * (a / 4.0);
            let bracket = (ch.clone() * &t.psi_m) + &(sh.clone() * l1);
            let br3 = match tr {
                Transcription::Corrected => (el2.clone() * &(bracket.clone() * f1)) * (a / 4.0),
                Transcription::AsPrinted => br1.clone(),
            };
            vec![
                lhs1 - &(((w2.clone() - &y2) - &g_a) - &br1),
                lhs2 - &(((-w2.clone() - &y2) + &g_a) - &br1),
                lhs3 - &(((w2 + &(x * 0.5)) - &g_a) + &br3),
                (t.psi_p.clone() - l1) - &(((el2.clone() * ch) * f1) * a),
                psi_m_cond,
                psib_m_cond,
                dt[F1].clone() - &(((el2.clone() * &bracket) * (I * a / 2.0)) + &((ep2.clone() * &t.psib_p) * (I * b / 2.0))),
            ]
        }
        ConditionForm::Reduced => {
            let g_s = (((el2.clone() * ch) * &t.psi_p) * f1) * (a / 4.0);
            let s2 = match tr {
                Transcription::Corrected => sh.clone() * sh,
                Transcription::AsPrinted => sh.clone(),
            };
            let pot = (v[L0].exp() * &s2) * p.c();
            let fermi3 = (((ep2.clone() * &t.psib_p) * b) - &(((el2.clone() * sh) * &t.psi_p) * a)) * f1;
            vec![
                lhs1 - &(((w2.clone() - &y2) - &g_a) - &g_s),
                lhs2 - &(((-w2.clone() - &y2) + &g_a) - &g_s),
                lhs3 - &((w2 + &pot) - &(fermi3 * 0.25)),
                psi_m_cond,
                psib_m_cond,
                dt[F1].clone() - &(((ep2.clone() * &t.psib_p) * (I * b / 2.0)) + &(((el2.clone() * sh) * &t.psi_p) * (I * a / 2.0))),
            ]
        }
    }
}

fn condition_ids(form: ConditionForm) -> &'static [&'static str] {
    match form {
        ConditionForm::WithLambda1 => &WITH_LAMBDA1_IDS,
        ConditionForm::Reduced => &REDUCED_CONDITION_IDS,
    }
}

fn defect_nodes(grid: &LightConeGrid) -> Result<Vec<(usize, usize)>, FieldError> {
    let nodes = grid.defect_line();
    if nodes.is_empty() {
        return Err(FieldError::Parameter("grid has no nodes on x = 0".into()));
    }
    Ok(nodes)
}

/// The defect conditions on the x = 0 nodes of a state.
pub fn defect_condition_residual(state: &SuperState, form: ConditionForm, tr: Transcription, mode: DerivativeMode) -> Result<Vec<ResidualReport>, FieldError> {
    let p = state.params;
    let core = state.core();
    let g = state.grid();
    scan_nodes(g, condition_ids(form), mode, defect_nodes(g)?, |i, j| {
        Ok(jets_at(&core, i, j, 1, mode)?.map(|v| defect_condition_exprs(&p, form, tr, &BoundarySample::from_jets(&v))))
    })
}

/// The defect conditions over a boundary time series (t, sample).
pub fn defect_condition_series(
    p: &DefectParams,
    samples: &[(f64, BoundarySample<GE>)],
    form: ConditionForm,
    tr: Transcription,
) -> Vec<ResidualReport> {
    let ids = condition_ids(form);
    let mut acc = vec![crate::report::NormAccumulator::default(); ids.len()];
    for (t, s) in samples {
        for (a, r) in acc.iter_mut().zip(defect_condition_exprs(p, form, tr, s)) {
            a.push(r.max_abs(), (*t, 0.0));
        }
    }
    ids.iter()
        .zip(&acc)
        .map(|(id, a)| {
            let mut r = ResidualReport::exact(id, a.max);
            r.mean_norm = if a.count > 0 { a.sum / a.count as f64 } else { 0.0 };
            r.points = a.count;
            r.mode = "time series".into();
            r.argmax = a.argmax;
            r
        })
        .collect()
}

// ---------------------------------------------------------------------------------------------
// supersymmetry

/// Odd constant parameters ε, ε̄ of a SUSY transformation.
#[derive(Debug, Clone, PartialEq)]
pub struct SusyParams {
    pub epsilon: GE,
    pub epsilonbar: GE,
}

impl SusyParams {
    /// ε and ε̄ as bare generators (0 for "absent").
    pub fn generators(n: usize, eps: usize, epsbar: usize) -> Result<Self, FieldError> {
        let g = |k: usize| if k == 0 { Ok(GE::zero(n)) } else { GE::generator(n, k) };
        Ok(Self { epsilon: g(eps)?, epsilonbar: g(epsbar)? })
    }

    pub fn default_pair() -> Self {
        Self::generators(DEFAULT_GENERATORS, EPSILON, EPSILON_BAR).expect("default layout")
    }

    /// Union of the generator bits appearing in ε and ε̄.
    pub fn mask(&self) -> u32 {
        self.epsilon.terms().iter().chain(self.epsilonbar.terms()).fold(0, |m, t| m | t.0)
    }
}

fn transform_side(sd: &SuperFieldComponents, s: &SusyParams, mu: Complex64) -> SuperFieldComponents {
    let g = sd.grid().clone();
    let (e, eb) = (s.epsilon.clone(), s.epsilonbar.clone());
    let c = |x: &GE, order: usize| Jet::constant(x.clone(), order);
    let ins = [&sd.phi, &sd.psi, &sd.psibar];
    let (e1, eb1) = (e.clone(), eb.clone());
    let phi = derive(&g, "phi'", &ins, 0, move |v| {
        let k = v[0].order();
        v[0].clone() + &(c(&e1, k) * &v[1]) + &(c(&eb1, k) * &v[2])
    });
    let (e2, eb2) = (e.clone(), eb.clone());
    let psi = derive(&g, "psi'", &ins, 1, move |v| {
        let k = v[0].order() - 1;
        let ex = v[0].truncate(k).exp();
        v[1].truncate(k) - &(c(&e2, k) * &v[0].d_z()) - &((c(&eb2, k) * &ex) * (I * mu))
    });
    let (e3, eb3) = (e, eb);
    let psibar = derive(&g, "psibar'", &ins, 1, move |v| {
        let k = v[0].order() - 1;
        let ex = v[0].truncate(k).exp();
        v[2].truncate(k) - &(c(&eb3, k) * &v[0].d_zbar()) + &((c(&e3, k) * &ex) * (I * mu))
    });
    SuperFieldComponents::on_shell(phi, psi, psibar, mu)
}

fn check_susy_params(s: &SusyParams) -> Result<(), FieldError> {
    for (v, what) in [(&s.epsilon, "epsilon"), (&s.epsilonbar, "epsilonbar")] {
        match v.parity() {
            Parity::Odd | Parity::Zero => {}
            p => return Err(parity_error(what, p)),
        }
    }
    Ok(())
}

fn check_fresh(fields: &[&SuperField], mask: u32) -> Result<(), FieldError> {
    if mask == 0 {
        return Ok(());
    }
    for f in fields {
        for (i, j) in f.grid().nodes() {
            if !f.value(i, j)?.touches(mask).is_zero() {
                return Err(FieldError::Parameter(format!("SUSY parameters collide with generators already present in {}", f.label)));
            }
        }
    }
    Ok(())
}

/// Bulk fields + δ(bulk fields), F on-shell.  Since the parameters square to zero, a single
/// parameter moves a solution to an exact solution.
pub fn susy_transform_fields(fields: &SuperFieldComponents, s: &SusyParams, mu: Complex64) -> Result<SuperFieldComponents, FieldError> {
    check_susy_params(s)?;
    check_fresh(&[&fields.phi, &fields.psi, &fields.psibar], s.mask())?;
    Ok(transform_side(fields, s, mu))
}

/// Part of `x` linear in the generators of `mask` (terms containing exactly one of them).
pub fn linear_sector(x: &GE, mask: u32) -> GE {
    let n = x.num_generators();
    let terms = x
        .terms()
        .iter()
        .filter(|(m, _)| (m & mask).count_ones() == 1)
        .map(|(m, c)| (crate::grassmann::mask_to_indices(*m), *c));
    GE::from_terms(n, terms).expect("terms of a valid element")
}

/// state + δ(state):
/// δφ = εψ + ε̄ψ̄, δψ = −ε∂φ − iμε̄e^φ, δψ̄ = −ε̄∂̄φ + iμεe^φ, δΛ0 = εΛ1, δΛ1 = −ε∂Λ0,
/// δf1 = (2iε√μ/β)e^{Λ0/2}sinh(φ−/2) − 2i√μβ ε̄ e^{(φ+−Λ0)/2}.
pub fn susy_transform(state: &SuperState, s: &SusyParams) -> Result<SuperState, FieldError> {
    check_susy_params(s)?;
    check_fresh(&state.core(), s.mask())?;
    let p = state.params;
    let (a, b) = roots(&p);
    let g = state.grid().clone();
    let (e, eb) = (s.epsilon.clone(), s.epsilonbar.clone());
    let c = |x: &GE, order: usize| Jet::constant(x.clone(), order);
    let side = |sd: &SuperFieldComponents| -> [SuperField; 3] {
        let m = transform_side(sd, s, p.mu);
        [m.phi, m.psi, m.psibar]
    };
    let [phi1, psi1, psib1] = side(&state.side1);
    let [phi2, psi2, psib2] = side(&state.side2);
    let d = &state.defect;
    let e4 = e.clone();
    let lambda0 = derive(&g, "lambda0'", &[&d.lambda0, &d.lambda1], 0, move |v| {
        let k = v[0].order();
        v[0].clone() + &(c(&e4, k) * &v[1])
    });
    let e5 = e.clone();
    let lambda1 = derive(&g, "lambda1'", &[&d.lambda0, &d.lambda1], 1, move |v| {
        let k = v[0].order() - 1;
        v[1].truncate(k) - &(c(&e5, k) * &v[0].d_z())
    });
    let (e6, eb6) = (e.clone(), eb.clone());
    let f1 = derive(&g, "f1'", &[&state.side1.phi, &state.side2.phi, &d.lambda0, &d.f1], 0, move |v| {
        let k = v[0].order();
        let half = (v[0].clone() - &v[1]) * 0.5;
        let el2 = (v[2].clone() * 0.5).exp();
        let ep2 = (((v[0].clone() + &v[1]) - &v[2]) * 0.5).exp();
        v[3].clone() + &(((c(&e6, k) * &el2) * &half.sinh()) * (2.0 * I * a)) - &((c(&eb6, k) * &ep2) * (2.0 * I * b))
    });
    let mut out = SuperState::assemble([phi1, psi1, psib1, phi2, psi2, psib2, lambda0, lambda1, f1], p);
    out.cross_defect = state.cross_defect;
    Ok(out)
}

pub struct SusyInvariance {
    /// ε-sector (terms linear in ε, ε̄) of each Λ1-form defect condition.
    pub reports: Vec<ResidualReport>,
    pub max_eps_sector: f64,
    pub kappa: Complex64,
}

/// Evaluate the Λ1-form defect conditions, with the given κ, on the SUSY transform of `state`
/// and keep the ε-linear sector.  (Transforming with ε and ε̄ at once is exact only to first
/// order; the εε̄ terms are not part of the check.)
pub fn susy_invariance_check(state: &SuperState, s: &SusyParams, kappa: f64, mode: DerivativeMode) -> Result<SusyInvariance, FieldError> {
    let moved = susy_transform(state, s)?;
    let mask = s.mask();
    let p = state.params.with_kappa(kappa);
    let core = moved.core();
    let g = moved.grid();
    let reports = scan_nodes(g, &WITH_LAMBDA1_IDS, mode, defect_nodes(g)?, |i, j| {
        Ok(jets_at(&core, i, j, 1, mode)?.map(|v| {
            defect_condition_exprs(&p, ConditionForm::WithLambda1, Transcription::Corrected, &BoundarySample::from_jets(&v))
                .into_iter()
                .map(|r| linear_sector(&r, mask))
                .collect()
        }))
    })?;
    let max_eps_sector = reports.iter().map(|r| r.max_norm).fold(0.0, f64::max);
    Ok(SusyInvariance { reports, max_eps_sector, kappa: p.kappa })
}

// ---------------------------------------------------------------------------------------------
// supercurrents and superconformal gluing

/// (T, T̄, J, J̄) of order k from φ (order k + 2) and ψ, ψ̄ (order k + 1).
pub fn supercurrent_jets<A: Algebra>(phi: &Jet<A>, psi: &Jet<A>, psibar: &Jet<A>) -> [Jet<A>; 4] {
    let k = phi.order().saturating_sub(2);
    let (ps, pb) = (psi.truncate(k), psibar.truncate(k));
    let (dps, dpb) = (psi.d_z().truncate(k), psibar.d_zbar().truncate(k));
    [
        t_jet(phi) + &(ps.clone() * &dps),
        tbar_jet(phi) + &(pb.clone() * &dpb),
        (ps * &phi.d_z().truncate(k)) - &dps,
        (pb * &phi.d_zbar().truncate(k)) - &dpb,
    ]
}

pub struct Supercurrents {
    pub t: SuperField,
    pub tbar: SuperField,
    pub j: SuperField,
    pub jbar: SuperField,
    /// ∂̄T, ∂T̄, ∂̄J, ∂J̄.
    pub conservation: Vec<ResidualReport>,
}

pub fn supercurrents(fields: &SuperFieldComponents, mode: DerivativeMode) -> Result<Supercurrents, FieldError> {
    let g = fields.grid().clone();
    let ins = [&fields.phi, &fields.psi, &fields.psibar];
    let make = |k: usize, label: &str| {
        let inputs: Vec<SuperField> = ins.iter().map(|f| (*f).clone()).collect();
        Field::derived(g.clone(), label, move |i, j, order, mode| {
            let Some(phi) = inputs[0].jet(i, j, order + 2, mode)? else { return Ok(None) };
            let Some(v) = jets_at(&[&inputs[1], &inputs[2]], i, j, order + 1, mode)? else { return Ok(None) };
            Ok(Some(supercurrent_jets(&phi, &v[0], &v[1])[k].clone()))
        })
    };
    let (t, tbar, j, jbar) = (make(0, "T"), make(1, "Tbar"), make(2, "J"), make(3, "Jbar"));
    let conservation = scan_grid(&g, &["dbar T", "d Tbar", "dbar J", "d Jbar"], mode, |i, jj| {
        let Some(v) = jets_at(&[&t, &tbar, &j, &jbar], i, jj, 1, mode)? else { return Ok(None) };
        Ok(Some(vec![v[0].derivative(0, 1), v[1].derivative(1, 0), v[2].derivative(0, 1), v[3].derivative(1, 0)]))
    })?;
    Ok(Supercurrents { t, tbar, j, jbar, conservation })
}

pub const GLUING_IDS: [&str; 4] = ["T1 - T2 at x=0", "Tbar1 - Tbar2 at x=0", "J1 - J2 at x=0", "Jbar1 - Jbar2 at x=0"];

pub fn superconformal_check(state: &SuperState, mode: DerivativeMode) -> Result<Vec<ResidualReport>, FieldError> {
    let g = state.grid();
    let (s1, s2) = (&state.side1, &state.side2);
    scan_nodes(g, &GLUING_IDS, mode, defect_nodes(g)?, |i, j| {
        let Some(p) = jets_at(&[&s1.phi, &s2.phi], i, j, 2, mode)? else { return Ok(None) };
        let Some(f) = jets_at(&[&s1.psi, &s1.psibar, &s2.psi, &s2.psibar], i, j, 1, mode)? else { return Ok(None) };
        let c1 = supercurrent_jets(&p[0], &f[0], &f[1]);
        let c2 = supercurrent_jets(&p[1], &f[2], &f[3]);
        Ok(Some(c1.iter().zip(&c2).map(|(a, b)| a.value().clone() - b.value()).collect()))
    })
}

// ---------------------------------------------------------------------------------------------
// super-Lax and the defect super-matrix

/// Coefficients (p, q) of ψe^{φ/2}F⁺ in A and ψ̄e^{φ/2}F⁻ in Ā: (i√λ√μ, √μ/√λ).
pub fn super_lax_coefficients(mu: Complex64, lambda: Complex64) -> (Complex64, Complex64) {
    let (sl, sm) = (lambda.sqrt(), mu.sqrt());
    (I * sl * sm, sm / sl)
}

/// 3×3 component super-Lax connections from φ (order k + 1) and ψ, ψ̄ (order ≥ k).
///
/// The odd coefficient ψe^{φ/2} multiplies the odd generator F⁺ as a supermatrix, which flips
/// the sign of the fermionic row: A13 = pψe^{φ/2}, A32 = −pψe^{φ/2}.  With that embedding the
/// zero-curvature condition reproduces the component equations (pq = iμ, q = −ip/λ).  The upper
/// 2×2 block is the bosonic connection itself.
pub fn super_lax_entries<A: Algebra>(
    phi: &Jet<A>,
    psi: &Jet<A>,
    psibar: &Jet<A>,
    mu: Complex64,
    lambda: Complex64,
) -> (GradedMatrix<Jet<A>>, GradedMatrix<Jet<A>>) {
    let ([a11, a12, a21, a22], [b11, b12, b21, b22]) = lax_entries(phi, mu, lambda);
    let k = a11.order();
    let (pc, qc) = super_lax_coefficients(mu, lambda);
    let eh = (phi.truncate(k) * 0.5).exp();
    let zero = a11.zero_like();
    let gens = crate::graded_linalg::osp_generators(&zero);
    let fp = (psi.truncate(k) * &eh) * pc;
    let fm = (psibar.truncate(k) * &eh) * qc;
    let z = || zero.clone();
    let bos = GradedMatrix::from_entries(osp_grading(), vec![a11, a12, z(), a21, a22, z(), z(), z(), z()]);
    let bosb = GradedMatrix::from_entries(osp_grading(), vec![b11, b12, z(), b21, b22, z(), z(), z(), z()]);
    let odd = |g: &GradedMatrix<Jet<A>>, x: &Jet<A>| {
        // a mixed coefficient would mean ψ itself has the wrong parity; fall back to plain scaling
        g.graded_scale(x).unwrap_or_else(|_| g.left_scale(x))
    };
    (bos + odd(&gens.f_plus, &fp), bosb + odd(&gens.f_minus, &fm))
}

pub fn super_lax(fields: &SuperFieldComponents, lambda: SpectralParameter, mu: Complex64) -> (MatrixField<GE>, MatrixField<GE>) {
    let l = lambda.value();
    let mk = |which: usize| {
        let fl = fields.clone();
        MatrixField::new(fields.grid().clone(), move |i, j, order, mode| {
            let Some(phi) = fl.phi.jet(i, j, order + 1, mode)? else { return Ok(None) };
            let Some(v) = jets_at(&[&fl.psi, &fl.psibar], i, j, order, mode)? else { return Ok(None) };
            let (a, ab) = super_lax_entries(&phi, &v[0], &v[1], mu, l);
            Ok(Some(if which == 0 { a } else { ab }))
        })
    };
    (mk(0), mk(1))
}

pub fn super_zero_curvature(fields: &SuperFieldComponents, lambda: SpectralParameter, mu: Complex64, mode: DerivativeMode) -> Result<ResidualReport, FieldError> {
    let (a, ab) = super_lax(fields, lambda, mu);
    zero_curvature_residual(&a, &ab, mode)
}

/// 𝒦 from jets of φ1, φ2, Λ0, f1 (constants b11, d11 from the params).  `AsPrinted` is the
/// typeset matrix; `Corrected` flips the sign of 𝒦31, the one change that makes 𝒦 intertwine
/// the super-Lax connections of both sides.
pub fn super_k_entries<A: Algebra>(
    p: &DefectParams,
    lambda: Complex64,
    tr: Transcription,
    phi1: &Jet<A>,
    phi2: &Jet<A>,
    l0: &Jet<A>,
    f1: &Jet<A>,
) -> GradedMatrix<Jet<A>> {
    let (b11, d11, beta) = (p.b11, p.d11, p.beta);
    let sl = lambda.sqrt();
    let b2 = beta * beta;
    let pm = phi1.clone() - phi2;
    let pp = phi1.clone() + phi2;
    let ep = (pm.clone() * 0.5).exp();
    let em = (pm.clone() * -0.5).exp();
    let sh = (pm * 0.5).sinh();
    let k33 = ep.lift(b11 / sl + d11 * sl).clone();
    let k31_sign = match tr {
        Transcription::AsPrinted => 1.0,
        Transcription::Corrected => -1.0,
    };
    GradedMatrix::from_entries(
        osp_grading(),
        vec![
            em.clone() * (b11 / sl) + &(ep.clone() * (d11 * sl)),
            ((pp.clone() * 0.5) - l0).exp() * (-2.0 * I * b2 * b11 * sl),
            (((phi2.clone() - l0) * 0.5).exp() * f1) * (-beta * b11),
            ((l0.clone() - &(pp * 0.5)).exp() * &(sh.clone() * &sh)) * (2.0 * I * d11 / (sl * b2)),
            ep * (b11 / sl) + &(em * (d11 * sl)),
            ((((l0.clone() - phi1) * 0.5).exp() * &sh) * f1) * (I * d11 / beta),
            ((((l0.clone() - phi2) * 0.5).exp() * &sh) * f1) * (-I * d11 / beta * k31_sign),
            (((phi1.clone() - l0) * 0.5).exp() * f1) * (beta * b11),
            k33,
        ],
    )
}

pub fn super_defect_matrix(state: &SuperState, lambda: SpectralParameter, tr: Transcription) -> MatrixField<GE> {
    let st = state.clone();
    let l = lambda.value();
    MatrixField::new(state.grid().clone(), move |i, j, order, mode| {
        let d = &st.defect;
        Ok(jets_at(&[&st.side1.phi, &st.side2.phi, &d.lambda0, &d.f1], i, j, order, mode)?
            .map(|v| super_k_entries(&st.params, l, tr, &v[0], &v[1], &v[2], &v[3])))
    })
}

/// Intertwining residuals of 𝒦 between the super-Lax connections of both sides.
pub fn super_kmatrix_check(state: &SuperState, lambda: SpectralParameter, tr: Transcription, mode: DerivativeMode) -> Result<Vec<ResidualReport>, FieldError> {
    let mu = state.params.mu;
    let k = super_defect_matrix(state, lambda, tr);
    let (a1, ab1) = super_lax(&state.side1, lambda, mu);
    let (a2, ab2) = super_lax(&state.side2, lambda, mu);
    kmatrix_residual(&k, &a1, &a2, &ab1, &ab2, mode)
}

// ---------------------------------------------------------------------------------------------
// charges

/// Bulk densities (E, P, Q, Q̄) at one lattice point from φ, φx, φt, ψ, ψx, ψ̄, ψ̄x.
#[allow(clippy::too_many_arguments)]
pub fn bulk_charge_densities<A: Algebra>(mu: Complex64, phi: &A, phi_x: &A, phi_t: &A, psi: &A, psi_x: &A, psib: &A, psib_x: &A) -> [A; 4] {
    let e = phi.exp();
    let pot = (e.clone() * &e) * (mu * mu);
    let yuk = ((e.clone() * (2.0 * I * mu)) * psib) * psi;
    let energy = (phi_x.clone() * phi_x) + &(phi_t.clone() * phi_t) + &(psib.clone() * psib_x) + &(psi.clone() * psi_x) + &pot + &yuk;
    let momentum = ((phi_t.clone() * phi_x) * 2.0) + &(psib.clone() * psib_x) - &(psi.clone() * psi_x);
    let d = phi_x.clone() - phi_t;
    let db = phi_x.clone() + phi_t;
    let q = -((psi.clone() * &d) + &((e.clone() * (I * mu)) * psib));
    let qbar = (psib.clone() * &db) - &((e * (I * mu)) * psi);
    [energy, momentum, q, qbar]
}

/// Defect contributions (ℰ − E, 𝒫 − P, 𝒬 − Q, 𝒬̄ − Q̄) from the nine core boundary values.
///
/// `Corrected` uses the potential c e^{Λ0}(cosh φ− + κ) (= (2iμ/β²)e^{Λ0}sinh²(φ−/2) at
/// κ = −1), the opposite sign for the fermionic f1 bracket of 𝒫, and +(2√μ/β) for 𝒬.
pub fn defect_charge_terms<A: Algebra>(p: &DefectParams, v: &[A], tr: Transcription) -> [A; 4] {
    let (a, b) = roots(p);
    let t = DefectTerms::new(v);
    let f1 = &v[F1];
    let el = v[L0].exp();
    let bulk_b = ((v[PHI1].clone() + &v[PHI2]) - &v[L0]).exp() * p.d();
    let bulk_a = match tr {
        Transcription::Corrected => (el * &((v[PHI1].clone() - &v[PHI2]).cosh() + p.kappa)) * p.c(),
        Transcription::AsPrinted => (el * &t.sh) * (2.0 * p.c()),
    };
    let pa = ((t.el2.clone() * &t.sh) * &t.psi_p) * a;
    let pb = (t.ep2.clone() * &t.psib_p) * b;
    let bil_e = (v[PSIB1].clone() * &v[PSIB2]) + &(v[PSI1].clone() * &v[PSI2]);
    let bil_p = (v[PSIB1].clone() * &v[PSIB2]) - &(v[PSI1].clone() * &v[PSI2]);
    let de = (bil_e + &(bulk_a.clone() - &bulk_b)) + &((pa.clone() + &pb) * f1);
    let fermi_p = (pa - &pb) * f1;
    let dp = match tr {
        Transcription::Corrected => (bil_p - &(bulk_a + &bulk_b)) - &fermi_p,
        Transcription::AsPrinted => (bil_p - &(bulk_a + &bulk_b)) + &fermi_p,
    };
    let qsign = match tr {
        Transcription::Corrected => 2.0 * a,
        Transcription::AsPrinted => -2.0 * a,
    };
    let dq = ((t.el2.clone() * &t.sh) * f1) * qsign;
    let dqb = (t.ep2.clone() * f1) * (-2.0 * b);
    [de, dp, dq, dqb]
}

/// Canonical and modified charges at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChargeReport {
    pub t: f64,
    #[serde(rename = "E")]
    pub e: GE,
    #[serde(rename = "P")]
    pub p: GE,
    #[serde(rename = "Q")]
    pub q: GE,
    #[serde(rename = "Qbar")]
    pub qbar: GE,
    #[serde(rename = "E_mod")]
    pub e_mod: GE,
    #[serde(rename = "P_mod")]
    pub p_mod: GE,
    #[serde(rename = "Q_mod")]
    pub q_mod: GE,
    #[serde(rename = "Qbar_mod")]
    pub qbar_mod: GE,
}

impl ChargeReport {
    /// Canonical (E, P, Q, Q̄) plus the defect terms.
    pub fn from_parts(t: f64, bulk: [GE; 4], defect: [GE; 4]) -> Self {
        let [e, p, q, qbar] = bulk;
        let [de, dp, dq, dqb] = defect;
        Self {
            t,
            e_mod: e.clone() + &de,
            p_mod: p.clone() + &dp,
            q_mod: q.clone() + &dq,
            qbar_mod: qbar.clone() + &dqb,
            e,
            p,
            q,
            qbar,
        }
    }

    /// (E, P, Q, Q̄, ℰ, 𝒫, 𝒬, 𝒬̄) in order.
    pub fn values(&self) -> [&GE; 8] {
        [&self.e, &self.p, &self.q, &self.qbar, &self.e_mod, &self.p_mod, &self.q_mod, &self.qbar_mod]
    }
}

pub const CHARGE_NAMES: [&str; 8] = ["E", "P", "Q", "Qbar", "E_mod", "P_mod", "Q_mod", "Qbar_mod"];
