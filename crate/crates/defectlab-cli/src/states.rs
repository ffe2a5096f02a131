//! Integrated defect states shared by the `backlund` and `kmatrix` commands.

use std::sync::Arc;

use defectlab::liouville::{backlund_integrate, static_wall, two_function, BacklundSeed, DefectParams, JetMap, TypeIIState};
use defectlab::super_liouville::{
    super_backlund_integrate, susy_transform_fields, SuperFieldComponents, SuperSeed, SuperState, SusyParams, SEED1, SEED2,
};
use defectlab::{Algebra, FieldError, GrassmannElement, Jet, LightConeGrid};
use num_complex::Complex64;

use crate::config::StateConfig;

pub fn box_grid(cfg: &StateConfig) -> Result<LightConeGrid, FieldError> {
    LightConeGrid::symmetric(cfg.half_width, cfg.n)
}

/// Coarsest grid and its refinements, all restricted to a common window.
pub fn levels(cfg: &StateConfig) -> Result<Vec<LightConeGrid>, FieldError> {
    Ok(box_grid(cfg)?.refinement_levels(cfg.levels, 2))
}

/// Side 1 is a static wall; side 2 and Λ0 are marched from the corner seed.
pub fn marched_bosonic(g: &LightConeGrid, p: &DefectParams, cfg: &StateConfig) -> Result<TypeIIState, FieldError> {
    let phi1 = static_wall(g, p.mu, cfg.wall_x0)?;
    backlund_integrate(&phi1, BacklundSeed { phi2: cfg.seed_phi2, lambda0: cfg.seed_lambda0 }, p)
}

/// Two-function Liouville solution (F = e^w, G = w̄ + 2) carried into the fermionic sector by
/// two finite supersymmetry transformations on the seed generators.  ψ̄ψ ≠ 0 on it.
pub fn fermionic_side(g: &LightConeGrid, mu: Complex64, n: usize) -> Result<SuperFieldComponents, FieldError> {
    let f: JetMap = Arc::new(|w: &Jet<Complex64>| w.exp());
    let gg: JetMap = Arc::new(|w: &Jet<Complex64>| w.clone() + Complex64::new(2.0, 0.0));
    let phi = two_function(g, mu, f, gg, 1e-8)?;
    let side = SuperFieldComponents::bosonic(&phi, n, mu);
    let side = susy_transform_fields(&side, &SusyParams::generators(n, SEED1, 0)?, mu)?;
    susy_transform_fields(&side, &SusyParams::generators(n, 0, SEED2)?, mu)
}

pub fn super_seed(cfg: &StateConfig) -> Result<SuperSeed, FieldError> {
    let n = cfg.generators;
    let f1 = GrassmannElement::generator(n, SEED1).map_err(|e| FieldError::Parameter(e.to_string()))?;
    Ok(SuperSeed {
        phi2: GrassmannElement::scalar(n, cfg.seed_phi2),
        lambda0: GrassmannElement::scalar(n, cfg.seed_lambda0),
        f1: f1.scale(Complex64::new(cfg.seed_f1, 0.0)),
    })
}

/// Super state marched from the fermionic side-1 data.
pub fn integrated_super(g: &LightConeGrid, p: &DefectParams, cfg: &StateConfig) -> Result<SuperState, FieldError> {
    let side1 = fermionic_side(g, p.mu, cfg.generators)?;
    super_backlund_integrate(&side1, &super_seed(cfg)?, p)
}
