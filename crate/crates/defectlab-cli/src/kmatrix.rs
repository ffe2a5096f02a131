//! `kmatrix bosonic_first|bosonic_prime|super`: intertwining residuals of the defect matrices on
//! integrated states.

use defectlab::algebra::re;
use defectlab::graded_linalg::{kmatrix_residual, MatrixField};
use defectlab::liouville::*;
use defectlab::report::refinement_study;
use defectlab::super_liouville::*;
use defectlab::{Algebra, DerivativeMode, FieldError, ResidualReport};
use serde::Serialize;
use serde_json::json;

use crate::config::{Sector, StateConfig};
use crate::states::{box_grid, integrated_super, levels, marched_bosonic};
use crate::{convergence_check, convergence_csv, Check, CliError, Outcome};

const FD: DerivativeMode = DerivativeMode::FiniteDifference;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KKind {
    BosonicFirst,
    BosonicPrime,
    Super,
}

impl KKind {
    pub fn sector(self) -> Sector {
        if self == KKind::Super {
            Sector::Super
        } else {
            Sector::Bosonic
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KKind::BosonicFirst => "bosonic_first",
            KKind::BosonicPrime => "bosonic_prime",
            KKind::Super => "super",
        }
    }
}

/// Both residuals computed for K and for 2K; the second must be exactly twice the first.
fn rescale_gap<T: Algebra>(
    k: MatrixField<T>,
    (a1, ab1): &(MatrixField<T>, MatrixField<T>),
    (a2, ab2): &(MatrixField<T>, MatrixField<T>),
) -> Result<f64, FieldError> {
    let scaled = {
        let k = k.clone();
        MatrixField::new(k.grid.clone(), move |i, j, o, m| Ok(k.at(i, j, o, m)?.map(|x| x.scale(re(2.0)))))
    };
    let base = kmatrix_residual(&k, a1, a2, ab1, ab2, FD)?;
    let twice = kmatrix_residual(&scaled, a1, a2, ab1, ab2, FD)?;
    Ok(base.iter().zip(&twice).map(|(b, t)| (t.max_norm - 2.0 * b.max_norm).abs()).fold(0.0, f64::max))
}

pub fn kmatrix(kind: KKind, cfg: &StateConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let p = cfg.params()?;
    let lam = cfg.spectral()?;
    let grids = levels(cfg)?;
    let g0 = box_grid(cfg)?;
    let mut checks = Vec::new();

    let (residuals, gap, limit) = match kind {
        KKind::BosonicFirst | KKind::BosonicPrime => {
            let v = if kind == KKind::BosonicFirst { KVariant::First } else { KVariant::Prime };
            let r = refinement_study(&grids, |g| kmatrix_check(&marched_bosonic(g, &p, cfg)?, lam, v, FD))?;
            let st = marched_bosonic(&g0, &p, cfg)?;
            let gap = rescale_gap(
                defect_matrix_k(&st, lam, v),
                &lax_connection(&st.phi1, p.mu, lam),
                &lax_connection(&st.phi2, p.mu, lam),
            )?;
            (r, gap, None)
        }
        KKind::Super => {
            let r = refinement_study(&grids, |g| super_kmatrix_check(&integrated_super(g, &p, cfg)?, lam, Transcription::Corrected, FD))?;
            let st = integrated_super(&g0, &p, cfg)?;
            let gap = rescale_gap(
                super_defect_matrix(&st, lam, Transcription::Corrected),
                &super_lax(&st.side1, lam, p.mu),
                &super_lax(&st.side2, lam, p.mu),
            )?;
            // without fermions the bosonic block of 𝒦 is the first K with a11 = d11√λ and
            // c11 = b11λ√λ (at κ = −1)
            let sl = lam.sqrt();
            let pb = DefectParams { a11: p.d11 * sl, c11: p.b11 * lam.value() * sl, ..p };
            let bos = marched_bosonic(&g0, &pb, cfg)?;
            let lifted = super_kmatrix_check(&SuperState::from_bosonic(&bos, cfg.generators), lam, Transcription::Corrected, FD)?;
            let plain = kmatrix_check(&bos, lam, KVariant::First, FD)?;
            let d = lifted.iter().zip(&plain).map(|(a, b)| (a.max_norm - b.max_norm).abs()).fold(0.0, f64::max);
            (r, gap, Some((d, lifted, plain)))
        }
    };
    checks.push(convergence_check(Some(6), &format!("{} intertwining residuals converge", kind.name()), &residuals, 1.8));
    checks.push(Check::new(Some(6), format!("{} residual scales exactly with K", kind.name()), gap == 0.0, format!("|r(2K) - 2 r(K)| = {gap:e}")));
    let mut extra: Vec<ResidualReport> = Vec::new();
    if let Some((d, lifted, plain)) = limit {
        checks.push(Check::new(
            None,
            "super matrix without fermions reproduces the bosonic residuals",
            d <= 1e-12 * plain.iter().map(|r| r.max_norm).fold(1.0, f64::max),
            format!("max difference {d:.3e}"),
        ));
        extra.extend(lifted);
        extra.extend(plain);
    }
    let all: Vec<ResidualReport> = [residuals, extra].concat();
    let report = json!({ "kind": kind, "config": cfg, "residuals": all, "rescale_gap": gap });
    Ok(Outcome { checks, report, files: vec![(format!("kmatrix_{}_convergence.csv", kind.name()), convergence_csv(&all))] })
}
