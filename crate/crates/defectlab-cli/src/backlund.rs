//! `backlund bosonic|super`: integrate type-II Bäcklund states on refined grids and check every
//! residual the construction must satisfy.

use defectlab::grassmann::mask_to_indices;
use defectlab::liouville::*;
use defectlab::report::refinement_study;
use defectlab::super_liouville::*;
use defectlab::{DerivativeMode, FieldError, GrassmannElement, Jet, ResidualReport};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::json;

use crate::config::StateConfig;
use crate::states::{box_grid, fermionic_side, integrated_super, levels, marched_bosonic};
use crate::{convergence_check, convergence_csv, Check, CliError, Outcome};

const AN: DerivativeMode = DerivativeMode::Analytic;
const FD: DerivativeMode = DerivativeMode::FiniteDifference;

pub fn backlund_bosonic(cfg: &StateConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let p = cfg.params()?;
    let grids = levels(cfg)?;
    let mut checks = Vec::new();

    // exact-solution oracle
    let wall = static_wall(&box_grid(cfg)?, p.mu, cfg.wall_x0)?;
    let exact = liouville_bulk_residual(&wall, p.mu, AN)?;
    let wall_fd = refinement_study(&grids, |g| Ok::<_, FieldError>(vec![liouville_bulk_residual(&static_wall(g, p.mu, cfg.wall_x0)?, p.mu, FD)?]))?;
    let slope = wall_fd[0].slope.unwrap_or(f64::NAN);
    checks.push(Check::new(
        Some(3),
        "static wall oracle",
        exact.max_norm < 1e-12 && (slope - 2.0).abs() <= 0.2,
        format!("analytic residual {:.3e}; finite-difference slope {slope:.3}", exact.max_norm),
    ));

    // Bäcklund soundness
    let soundness = refinement_study(&grids, |g| {
        let st = marched_bosonic(g, &p, cfg)?;
        let mut out = type2_backlund_residual(&st, FD)?;
        out.push(liouville_bulk_residual(&st.phi2, p.mu, FD)?);
        out.push(antiholomorphic_functional_check(&st, FD)?);
        Ok::<_, FieldError>(out)
    })?;
    checks.push(convergence_check(Some(4), "type-II Bäcklund residuals, bulk equation of phi2, dbar L0 and the functional", &soundness, 1.8));

    // conformal gluing, type II and type I
    let gluing2 = refinement_study(&grids, |g| conformal_defect_check(&marched_bosonic(g, &p, cfg)?, FD))?;
    let mut mismatch = f64::NAN;
    let gluing1 = refinement_study(&grids, |g| {
        let phi1 = static_wall(g, p.mu, cfg.wall_x0)?;
        let st = type1_integrate(&phi1, cfg.type1_seed, &p)?;
        let c = type1_conformal_check(&st, FD)?;
        mismatch = c.anomaly_mismatch;
        let mut out = type1_conditions_residual(&st.phi1, &st.phi2, &p, FD)?.residuals;
        out.push(c.reports[0].clone());
        out.push(c.reports[2].clone());
        Ok::<_, FieldError>(out)
    })?;
    let mut g2 = convergence_check(Some(5), "conformal gluing", &[gluing2.clone(), gluing1.clone()].concat(), 1.8);
    g2.pass &= mismatch < 0.05;
    g2.detail = format!("{}; type-I T jump vs total-derivative anomaly: relative mismatch {mismatch:.3e}", g2.detail);
    checks.push(g2);

    let all: Vec<ResidualReport> = [vec![exact], wall_fd, soundness, gluing2, gluing1].concat();
    let report = json!({ "config": cfg, "residuals": all, "type1_anomaly_mismatch": mismatch });
    Ok(Outcome { checks, report, files: vec![("backlund_bosonic_convergence.csv".into(), convergence_csv(&all))] })
}

/// Random element over the first `k` generators (those not reserved for θ, θ̄).
fn random_ge(rng: &mut StdRng, n: usize, k: usize, odd: bool) -> GrassmannElement {
    let mut terms = Vec::new();
    for mask in 0u32..(1 << k) {
        if (mask.count_ones() % 2 == 1) == odd {
            terms.push((mask_to_indices(mask), Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5))));
        }
    }
    GrassmannElement::from_terms(n, terms).expect("valid multi-indices")
}

/// θ-expansion of the superspace equation against the component equations on random off-shell
/// jets: returns (max coefficient-wise deviation, smallest off-shell size seen).
pub fn superspace_samples(samples: usize, mu: Complex64, seed: u64) -> (f64, f64) {
    let ss = Superspace::default();
    let n = DEFAULT_GENERATORS;
    let free = THETA.min(THETA_BAR) - 1;
    let mut rng = StdRng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut smallest = f64::INFINITY;
    for _ in 0..samples {
        let mut jet = |odd: bool| Jet::from_fn(2, |_, _| random_ge(&mut rng, n, free, odd));
        let (phi, psi, psib, f) = (jet(false), jet(true), jet(true), jet(false));
        let (got, want) = ss.superspace_coefficients(&phi, &psi, &psib, &f, mu);
        for (a, b) in got.iter().zip(&want) {
            worst = worst.max((a.clone() - b).max_abs());
        }
        smallest = smallest.min(got.iter().map(|x| x.max_abs()).fold(0.0, f64::max));
    }
    (worst, smallest)
}

/// Every super operation with vanishing odd fields against its bosonic counterpart, compared
/// for exact equality.  Returns the list of mismatches.
pub fn fermion_free_mismatches(cfg: &StateConfig, p: &DefectParams) -> Result<Vec<String>, CliError> {
    let n = cfg.generators;
    let g = box_grid(cfg)?;
    let mut bad = Vec::new();
    // (what, bosonic value, super value), compared at the end
    let mut pairs: Vec<(String, f64, f64)> = Vec::new();
    let mut same = |what: &str, a: f64, b: f64| pairs.push((what.to_string(), a, b));

    let phi1 = static_wall(&g, p.mu, cfg.wall_x0)?;
    let side1 = SuperFieldComponents::bosonic(&phi1, n, p.mu);
    let rb = liouville_bulk_residual(&phi1, p.mu, FD)?;
    let rs = super_bulk_residual(&side1, p.mu, FD)?;
    same("bulk equation", rb.max_norm, rs[0].max_norm);
    same("psi equation", 0.0, rs[1].max_norm);
    same("psibar equation", 0.0, rs[2].max_norm);

    let seed = BacklundSeed { phi2: cfg.seed_phi2, lambda0: cfg.seed_lambda0 };
    let bos = backlund_integrate(&phi1, seed, p)?;
    let sseed = SuperSeed {
        phi2: GrassmannElement::scalar(n, seed.phi2),
        lambda0: GrassmannElement::scalar(n, seed.lambda0),
        f1: GrassmannElement::zero(n),
    };
    let sup = super_backlund_integrate(&side1, &sseed, p)?;
    for (i, j) in g.nodes() {
        let b = sup.side2.phi.value(i, j)?;
        if !b.soul().is_zero() || b.body() != bos.phi2.value(i, j)? || sup.defect.lambda0.value(i, j)?.body() != bos.lambda0.value(i, j)? {
            bad.push(format!("integrated fields differ at node ({i}, {j})"));
            break;
        }
    }
    let rb = type2_backlund_residual(&bos, FD)?;
    let rs = super_backlund_residual(&sup, BacklundForm::Reduced, Transcription::Corrected, FD)?;
    for (k, s) in [(0, 0), (3, 1), (2, 2), (1, 7)] {
        same(&format!("Bäcklund row '{}'", rb[k].equation_id), rb[k].max_norm, rs[s].max_norm);
    }
    for k in [3, 4, 5, 6, 8] {
        same(&format!("fermionic row '{}'", rs[k].equation_id), 0.0, rs[k].max_norm);
    }
    let cb = conformal_defect_check(&bos, AN)?;
    let cs = superconformal_check(&SuperState::from_bosonic(&bos, n), AN)?;
    same("T gluing", cb[0].max_norm, cs[0].max_norm);
    same("Tbar gluing", cb[1].max_norm, cs[1].max_norm);

    // Lax pair: the bosonic block reproduces the bosonic connection entry by entry
    let lam = cfg.spectral()?;
    let (a, ab) = super_lax(&side1, lam, p.mu);
    let (b, bb) = lax_connection(&phi1, p.mu, lam);
    'nodes: for (i, j) in g.nodes() {
        let (Some(x), Some(xb), Some(y), Some(yb)) = (a.at(i, j, 1, AN)?, ab.at(i, j, 1, AN)?, b.at(i, j, 1, AN)?, bb.at(i, j, 1, AN)?) else {
            continue;
        };
        for r in 0..3 {
            for c in 0..3 {
                for (d1, d2) in [(0, 0), (1, 0), (0, 1)] {
                    let (s, sb) = (x.get(r, c).derivative(d1, d2), xb.get(r, c).derivative(d1, d2));
                    let ok = if r < 2 && c < 2 {
                        s.soul().is_zero() && sb.soul().is_zero() && s.body() == y.get(r, c).derivative(d1, d2) && sb.body() == yb.get(r, c).derivative(d1, d2)
                    } else {
                        (d1, d2) != (0, 0) || (s.is_zero() && sb.is_zero())
                    };
                    if !ok {
                        bad.push(format!("Lax entry ({r}, {c}) differs at node ({i}, {j})"));
                        break 'nodes;
                    }
                }
            }
        }
    }
    for (what, a, b) in pairs {
        if a != b {
            bad.push(format!("{what}: {a:e} vs {b:e}"));
        }
    }
    Ok(bad)
}

pub fn backlund_super(cfg: &StateConfig, kappa_compare: f64) -> Result<Outcome, CliError> {
    cfg.validate()?;
    if cfg.kappa != -1.0 {
        return Err(CliError::Config("the super Bäcklund system is integrated at kappa = -1".into()));
    }
    let p = cfg.params()?;
    let grids = levels(cfg)?;
    let mut checks = Vec::new();

    let mut states = Vec::new();
    let integ = refinement_study(&grids, |g| {
        let st = integrated_super(g, &p, cfg)?;
        let mut out = super_backlund_residual(&st, BacklundForm::Reduced, Transcription::Corrected, FD)?;
        out.extend(super_bulk_residual(&st.side2, p.mu, FD)?);
        out.extend(defect_condition_residual(&st, ConditionForm::WithLambda1, Transcription::Corrected, FD)?);
        out.extend(superconformal_check(&st, FD)?);
        states.push(st);
        Ok::<_, FieldError>(out)
    })?;
    // rows that vanish to rounding at every level carry no slope
    let converging: Vec<ResidualReport> = integ.iter().filter(|r| r.level_norms.iter().any(|&v| v > 1e-9)).cloned().collect();
    checks.push(convergence_check(None, "super Bäcklund, bulk, defect-condition and superconformal residuals", &converging, 1.8));

    // superspace consistency
    let (dev, size) = superspace_samples(cfg.samples, p.mu, 7);
    checks.push(Check::new(
        Some(7),
        "superspace expansion matches the component equations",
        dev <= 1e-10 && size > 1e-3,
        format!("{} random off-shell states, max coefficient deviation {dev:.3e} (smallest off-shell residual {size:.3e})", cfg.samples),
    ));

    // κ dichotomy on the finest integrated state
    let st = states.last().expect("at least two levels");
    let susy = SusyParams::default_pair();
    let at = |kappa: f64, mode| susy_invariance_check(st, &susy, kappa, mode).map(|r| r.max_eps_sector);
    let (good, bad) = (at(-1.0, AN)?, at(kappa_compare, AN)?);
    let fd = refinement_study(&grids, |g| {
        let s = integrated_super(g, &p, cfg)?;
        Ok::<_, FieldError>(susy_invariance_check(&s, &susy, -1.0, FD)?.reports)
    })?;
    let fd_max = fd.iter().map(|r| *r.level_norms.last().unwrap_or(&0.0)).fold(0.0, f64::max);
    checks.push(Check::new(
        Some(8),
        "supersymmetric defect conditions need kappa = -1",
        good <= 1e-8 && bad >= 1e3 * good.max(1e-300) && bad > 1e-5,
        format!(
            "eps-sector: {good:.3e} at kappa = -1, {bad:.3e} at kappa = {kappa_compare} (with finite differences {fd_max:.3e} at kappa = -1 on the finest grid)"
        ),
    ));

    // fermion-free reduction
    let mismatches = fermion_free_mismatches(cfg, &p)?;
    checks.push(Check::new(
        Some(10),
        "fermion-free reduction",
        mismatches.is_empty(),
        if mismatches.is_empty() { "bulk, Bäcklund, gluing and Lax entries equal bitwise".to_string() } else { mismatches.join("; ") },
    ));

    let side = fermionic_side(&box_grid(cfg)?, p.mu, cfg.generators)?;
    let yukawa = side.psibar.value(1, 1)?.clone() * &side.psi.value(1, 1)?;
    let all: Vec<ResidualReport> = [integ, fd].concat();
    let report = json!({
        "config": cfg,
        "residuals": all,
        "superspace": { "samples": cfg.samples, "max_deviation": dev },
        "kappa_dichotomy": { "kappa_minus_one": good, "kappa_compare": kappa_compare, "compare": bad },
        "fermion_free_mismatches": mismatches,
        "side1_psibar_psi_sample": yukawa.max_abs(),
    });
    Ok(Outcome { checks, report, files: vec![("backlund_super_convergence.csv".into(), convergence_csv(&all))] })
}
