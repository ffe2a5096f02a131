use defectlab::algebra::{re, I};
use defectlab::liouville::*;
use defectlab::report::{refinement_study, table};
use defectlab::{Algebra, DerivativeMode, LightConeGrid};
use num_complex::Complex64;

const AN: DerivativeMode = DerivativeMode::Analytic;
const FD: DerivativeMode = DerivativeMode::FiniteDifference;

fn box_grid(n: usize) -> LightConeGrid {
    LightConeGrid::symmetric(0.5, n).unwrap()
}

fn levels() -> Vec<LightConeGrid> {
    box_grid(17).refinement_levels(3, 2)
}

#[test]
fn static_wall_is_exact() {
    let g = LightConeGrid::new((0.25, 1.5), (0.25, 1.5), 21, 21).unwrap();
    let phi = static_wall(&g, re(1.0), 0.0).unwrap();
    let r = liouville_bulk_residual(&phi, re(1.0), AN).unwrap();
    assert!(r.max_norm < 1e-12, "{}", r.max_norm);
    // by hand: ∂∂̄φ = 1/(z+z̄)² = μ²e^{2φ}
    let v = phi.value(3, 5).unwrap();
    let s = g.z(3) + g.zbar(5);
    assert!((v + s.ln()).norm() < 1e-15);
}

#[test]
fn static_wall_rejects_singular_domain() {
    let g = LightConeGrid::symmetric(1.0, 9).unwrap();
    assert!(static_wall(&g, re(1.0), 0.0).is_err());
}

#[test]
fn trivial_bulk_cases() {
    let g = box_grid(9);
    let zero = defectlab::grid::constant_field(&g, re(0.0), "phi");
    // μ = 0 is rejected by the params type but the bulk residual itself accepts it
    assert_eq!(liouville_bulk_residual(&zero, re(0.0), AN).unwrap().max_norm, 0.0);
    let r = liouville_bulk_residual(&zero, re(1.0), FD).unwrap();
    assert!((r.max_norm - 1.0).abs() < 1e-15);
}

#[test]
fn static_wall_fd_converges_at_second_order() {
    let grids = LightConeGrid::new((0.3, 1.3), (0.3, 1.3), 9, 9).unwrap().refinement_levels(3, 1);
    let r = refinement_study(&grids, |g| {
        let phi = static_wall(g, re(0.8), 0.0)?;
        Ok::<_, defectlab::FieldError>(vec![liouville_bulk_residual(&phi, re(0.8), FD)?])
    })
    .unwrap();
    let s = r[0].slope.unwrap();
    assert!((s - 2.0).abs() < 0.2, "{}", table(&r));
}

#[test]
fn two_function_ansatz_passes_oracle() {
    let g = LightConeGrid::new((0.2, 1.0), (0.2, 1.0), 33, 33).unwrap();
    let f: Vec<Complex64> = (0..33).map(|i| re(g.z(i))).collect();
    let gg: Vec<Complex64> = (0..33).map(|j| re(g.zbar(j))).collect();
    two_function_samples(&g, re(1.0), &f, &gg, 1e-2).unwrap();
    // exact maps, nontrivial
    let phi = two_function(
        &g,
        Complex64::new(0.7, 0.2),
        std::sync::Arc::new(|w| w.exp()),
        std::sync::Arc::new(|w| (w.clone() * w.clone()) + re(0.5)),
        1e-10,
    )
    .unwrap();
    assert!(liouville_bulk_residual(&phi, Complex64::new(0.7, 0.2), AN).unwrap().max_norm < 1e-10);
    // G constant has G' = 0: singular
    assert!(two_function(&g, re(1.0), std::sync::Arc::new(|w| w.clone()), std::sync::Arc::new(|w| w.lift(re(2.0))), 1e-10).is_err());
}

fn generic_params(kappa: f64) -> DefectParams {
    DefectParams::new(Complex64::new(0.7, 0.2), Complex64::new(0.9, -0.3), re(kappa)).unwrap()
}

#[test]
fn mobius_pair_satisfies_everything_exactly() {
    for (kappa, m) in [(-1.0, MobiusPair::default()), (0.0, MobiusPair::for_kappa(0.0, 1.5, 0.5, 1.0))] {
        let p = generic_params(kappa);
        let st = m.state(&box_grid(11), &p).unwrap();
        for r in type2_backlund_residual(&st, AN).unwrap() {
            assert!(r.max_norm < 1e-12, "kappa {kappa}: {} {}", r.equation_id, r.max_norm);
        }
        assert!(liouville_bulk_residual(&st.phi1, p.mu, AN).unwrap().max_norm < 1e-12);
        assert!(liouville_bulk_residual(&st.phi2, p.mu, AN).unwrap().max_norm < 1e-12);
        assert!(antiholomorphic_functional_check(&st, AN).unwrap().max_norm < 1e-12);
        for r in conformal_defect_check(&st, AN).unwrap() {
            assert!(r.max_norm < 1e-12, "{} {}", r.equation_id, r.max_norm);
        }
        let lam = SpectralParameter::new(Complex64::new(1.2, 0.33)).unwrap();
        for v in [KVariant::First, KVariant::Prime] {
            for r in kmatrix_check(&st, lam, v, AN).unwrap() {
                assert!(r.max_norm < 1e-12, "{v:?} {} {}", r.equation_id, r.max_norm);
            }
        }
    }
}

#[test]
fn integrated_state_reproduces_mobius_pair() {
    let p = generic_params(-1.0);
    let m = MobiusPair::default();
    let mut errs = Vec::new();
    for g in levels() {
        let exact = m.state(&g, &p).unwrap();
        let seed = BacklundSeed { phi2: exact.phi2.value(0, 0).unwrap(), lambda0: exact.lambda0.value(0, 0).unwrap() };
        let st = backlund_integrate(&exact.phi1, seed, &p).unwrap();
        let e = g.nodes().map(|(i, j)| (st.phi2.value(i, j).unwrap() - exact.phi2.value(i, j).unwrap()).norm()).fold(0.0, f64::max);
        errs.push(e);
    }
    let rate = (errs[0] / errs[2]).log2() / 2.0;
    assert!(rate > 1.8, "{errs:?}");
}

fn marched(g: &LightConeGrid, p: &DefectParams) -> TypeIIState {
    let phi1 = static_wall(g, p.mu, 1.5).unwrap();
    backlund_integrate(&phi1, BacklundSeed { phi2: re(-0.2), lambda0: Complex64::new(0.1, 0.3) }, p).unwrap()
}

#[test]
fn backlund_from_static_wall_converges() {
    let p = DefectParams::default();
    let r = refinement_study(&levels(), |g| {
        let st = marched(g, &p);
        let mut out = type2_backlund_residual(&st, FD)?;
        out.push(liouville_bulk_residual(&st.phi2, p.mu, FD)?);
        out.push(antiholomorphic_functional_check(&st, FD)?);
        out.extend(conformal_defect_check(&st, FD)?);
        Ok::<_, defectlab::FieldError>(out)
    })
    .unwrap();
    println!("{}", table(&r));
    for x in &r {
        assert!(x.converges_at(1.8), "{}", table(&r));
    }
}

#[test]
fn kmatrices_intertwine_on_marched_state() {
    let mut p = DefectParams::default();
    p.a11 = Complex64::new(0.6, -0.1);
    p.c11 = re(-1.25);
    p.b11 = re(0.4);
    let lam = SpectralParameter::new(Complex64::new(1.2, 0.33)).unwrap();
    for v in [KVariant::First, KVariant::Prime] {
        let r = refinement_study(&levels(), |g| kmatrix_check(&marched(g, &p), lam, v, FD)).unwrap();
        println!("{v:?}\n{}", table(&r));
        for x in &r {
            assert!(x.converges_at(1.8), "{}", table(&r));
        }
    }
}

#[test]
fn one_node_grid_returns_seed() {
    let g = LightConeGrid::new((1.0, 1.0), (1.0, 1.0), 1, 1).unwrap();
    let phi1 = static_wall(&g, re(1.0), 0.0).unwrap();
    let seed = BacklundSeed { phi2: re(0.3), lambda0: I };
    let st = backlund_integrate(&phi1, seed, &DefectParams::default()).unwrap();
    assert_eq!(st.phi2.value(0, 0).unwrap(), re(0.3));
    assert_eq!(st.lambda0.value(0, 0).unwrap(), I);
}

#[test]
fn type1_state_conditions_and_anomaly() {
    let p = DefectParams::default();
    let mut last = None;
    let r = refinement_study(&levels(), |g| {
        let phi1 = static_wall(g, p.mu, 1.5)?;
        let st = type1_integrate(&phi1, Complex64::new(-0.3, 0.1), &p)?;
        let t1 = type1_conditions_residual(&st.phi1, &st.phi2, &p, FD)?;
        assert_eq!(t1.reduction_gap, 0.0);
        let c = type1_conformal_check(&st, FD)?;
        last = Some(c.anomaly_mismatch);
        let mut out = t1.residuals;
        out.push(c.reports[0].clone());
        out.push(c.reports[2].clone());
        Ok::<_, defectlab::FieldError>(out)
    })
    .unwrap();
    println!("{}", table(&r));
    for x in &r {
        assert!(x.converges_at(1.8), "{}", table(&r));
    }
    // the raw T jump is O(1) while the identity holds
    let mismatch = last.unwrap();
    assert!(mismatch < 0.05, "{mismatch}");
}

#[test]
fn type1_trivial_cases() {
    let g = box_grid(9);
    let p = DefectParams::default();
    let phi = static_wall(&g, p.mu, 1.5).unwrap();
    let r = type1_conditions_residual(&phi, &phi, &p, AN).unwrap();
    // first: |∂φ+| = 2|∂φ|; second: |2iμβ² e^{2φ}|
    let expect0 = g.nodes().map(|(i, j)| 2.0 / (g.z(i) + g.zbar(j) + 1.5)).fold(0.0, f64::max);
    let expect1 = g.nodes().map(|(i, j)| 2.0 / (g.z(i) + g.zbar(j) + 1.5).powi(2)).fold(0.0, f64::max);
    assert!((r.residuals[0].max_norm - expect0).abs() < 1e-12);
    assert!((r.residuals[1].max_norm - expect1).abs() < 1e-12);
}

#[test]
fn stress_tensor_is_conserved_on_exact_solutions() {
    let g = box_grid(11);
    let p = generic_params(-1.0);
    let st = MobiusPair::default().state(&g, &p).unwrap();
    for phi in [&st.phi1, &st.phi2] {
        for r in stress_tensor(phi, AN).unwrap().conservation {
            assert!(r.max_norm < 1e-10, "{} {}", r.equation_id, r.max_norm);
        }
    }
    // φ linear in z: T = (∂φ)², T̄ = 0
    let lin = defectlab::Field::closed_form(g.clone(), "phi", move |i, _, order| {
        Ok(defectlab::Jet::z(g.z(i), &re(0.0), order) * Complex64::new(0.3, 0.4))
    });
    let s = stress_tensor(&lin, AN).unwrap();
    let expect = Complex64::new(0.3, 0.4).powi(2);
    assert!((s.t.value(2, 3).unwrap() - expect).norm() < 1e-15);
    assert_eq!(s.tbar.value(2, 3).unwrap(), re(0.0));
}

#[test]
fn lax_pair_printed_entries_and_flatness() {
    let g = box_grid(5);
    let zero = defectlab::grid::constant_field(&g, re(0.0), "phi");
    let lam = SpectralParameter::new(re(1.0)).unwrap();
    let (a, ab) = lax_connection(&zero, re(1.0), lam);
    let av = a.at(1, 1, 0, AN).unwrap().unwrap().value();
    let bv = ab.at(1, 1, 0, AN).unwrap().unwrap().value();
    let a_expect = [re(0.0), re(-1.0), re(0.0), re(0.0)];
    let b_expect = [re(0.0), re(0.0), re(-1.0), re(0.0)];
    assert_eq!(av.entries(), &a_expect);
    assert_eq!(bv.entries(), &b_expect);
    assert!(SpectralParameter::new(re(0.0)).is_err());

    let p = generic_params(-1.0);
    let st = MobiusPair::default().state(&box_grid(9), &p).unwrap();
    let lam = SpectralParameter::new(Complex64::new(0.7, -1.1)).unwrap();
    let (a, ab) = lax_connection(&st.phi2, p.mu, lam);
    let r = defectlab::graded_linalg::zero_curvature_residual(&a, &ab, AN).unwrap();
    assert!(r.max_norm < 1e-10);
    let av = a.at(3, 4, 0, AN).unwrap().unwrap().value();
    assert!(av.trace().norm() < 1e-15);
}

#[test]
fn kmatrix_printed_entries_at_trivial_fields() {
    let g = box_grid(5);
    let p = DefectParams::new(re(1.0), Complex64::new(0.8, 0.3), re(0.5)).unwrap();
    let phi = static_wall(&g, p.mu, 1.5).unwrap();
    let zero = defectlab::grid::constant_field(&g, re(0.0), "lambda0");
    let st = TypeIIState { phi1: phi.clone(), phi2: phi.clone(), lambda0: zero, params: p, cross_defect: None };
    let lam = SpectralParameter::new(re(1.0)).unwrap();
    let k = defect_matrix_k(&st, lam, KVariant::First).at(2, 1, 0, AN).unwrap().unwrap().value();
    let ph = phi.value(2, 1).unwrap();
    let b2 = p.beta * p.beta;
    assert!((k.get(0, 0) - re(2.0)).norm() < 1e-15);
    assert!((k.get(1, 1) - re(2.0)).norm() < 1e-15);
    assert!((k.get(0, 1) - (-2.0 * I * b2 * ph.exp())).norm() < 1e-14);
    assert!((k.get(1, 0) - (I / b2 * (-ph).exp() * (1.0 + p.kappa))).norm() < 1e-14);
    let lam = SpectralParameter::new(Complex64::new(2.0, 1.0)).unwrap();
    let kp = defect_matrix_k(&st, lam, KVariant::Prime).at(2, 1, 0, AN).unwrap().unwrap().value();
    assert!((kp.get(0, 0) - p.b11 / lam.value()).norm() < 1e-15);
    let g21 = I * p.b11 / (2.0 * b2 * lam.value().powi(2)) * (-ph).exp() * (1.0 + p.kappa);
    assert!((kp.get(1, 0) - g21).norm() < 1e-14);
}

#[test]
fn kmatrix_residual_trivial_and_gauge_cases() {
    use defectlab::graded_linalg::{kmatrix_residual, GradedMatrix, MatrixField};
    let g = box_grid(7);
    let phi = static_wall(&g, re(1.0), 1.5).unwrap();
    let lam = SpectralParameter::new(re(1.3)).unwrap();
    let (a1, ab1) = lax_connection(&phi, re(1.0), lam);
    let one = MatrixField::constant(g.clone(), GradedMatrix::identity(vec![false, false], &re(0.0)));
    for r in kmatrix_residual(&one, &a1, &a1, &ab1, &ab1, AN).unwrap() {
        assert_eq!(r.max_norm, 0.0);
    }
    // K = 1 with A1 ≠ A2: residual = max |A1 − A2|
    let phi2 = static_wall(&g, re(1.0), 2.0).unwrap();
    let (a2, ab2) = lax_connection(&phi2, re(1.0), lam);
    let r = kmatrix_residual(&one, &a1, &a2, &ab1, &ab2, AN).unwrap();
    let mut dmax = 0.0f64;
    for (i, j) in g.nodes() {
        let d = a1.at(i, j, 0, AN).unwrap().unwrap().value() - a2.at(i, j, 0, AN).unwrap().unwrap().value();
        dmax = dmax.max(d.max_abs());
    }
    assert!((r[0].max_norm - dmax).abs() < 1e-15);

    // K → cK scales both residuals by |c|
    let st = marched(&box_grid(9), &DefectParams::default());
    let lam = SpectralParameter::new(Complex64::new(1.2, 0.33)).unwrap();
    let base = kmatrix_check(&st, lam, KVariant::First, FD).unwrap();
    let k = defect_matrix_k(&st, lam, KVariant::First);
    let k2 = MatrixField::new(st.grid().clone(), move |i, j, o, m| Ok(k.at(i, j, o, m)?.map(|x| x.scale(re(2.0)))));
    let (a1, ab1) = lax_connection(&st.phi1, re(1.0), lam);
    let (a2, ab2) = lax_connection(&st.phi2, re(1.0), lam);
    let scaled = kmatrix_residual(&k2, &a1, &a2, &ab1, &ab2, FD).unwrap();
    for (b, s) in base.iter().zip(&scaled) {
        assert_eq!(s.max_norm, 2.0 * b.max_norm);
    }
}

#[test]
fn negative_controls() {
    let g = box_grid(9);
    let p = DefectParams::default();
    let a = static_wall(&g, p.mu, 1.5).unwrap();
    let b = static_wall(&g, p.mu, 3.0).unwrap();
    let l = defectlab::Field::closed_form(g.clone(), "lambda0", move |i, j, o| {
        Ok(defectlab::Jet::zbar(g.zbar(j), &re(0.0), o) * 0.5 + defectlab::Jet::z(g.z(i), &re(0.0), o))
    });
    let st = TypeIIState { phi1: a, phi2: b, lambda0: l, params: p, cross_defect: None };
    let r = type2_backlund_residual(&st, AN).unwrap();
    // injected z̄ slope of Λ0 is reported verbatim
    assert!((r[1].max_norm - 0.5).abs() < 1e-15);
    assert!(r[0].max_norm > 0.1 && r[3].max_norm > 0.1);
    assert!(antiholomorphic_functional_check(&st, AN).unwrap().max_norm > 0.1);
}

#[test]
fn blowup_guard_aborts_with_location() {
    let g = box_grid(33);
    let mut p = DefectParams::default();
    p.blowup_bound = 1.0001;
    let phi1 = static_wall(&g, p.mu, 1.5).unwrap();
    let seed = BacklundSeed { phi2: -phi1.value(0, 0).unwrap(), lambda0: re(0.0) };
    let e = backlund_integrate(&phi1, seed, &p).unwrap_err();
    match e {
        defectlab::FieldError::BlowUp { z, zbar, magnitude, .. } => {
            assert!(magnitude > 1.0001);
            assert!(z > -0.5 || zbar > -0.5, "the seed itself is within bounds");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn fixed_point_branch_keeps_phi_minus_zero_along_z() {
    // κ = −1: with φ2 = φ1 on a line of constant z̄, the z-equations keep φ− ≡ 0 there (up to
    // the marching error, which drops fourfold per halving of h)
    let p = DefectParams::default().with_kappa(-1.0);
    let mut on_line = Vec::new();
    for n in [33, 65] {
        let g = box_grid(n);
        let phi1 = static_wall(&g, p.mu, 1.5).unwrap();
        let seed = BacklundSeed { phi2: phi1.value(0, 0).unwrap(), lambda0: re(0.2) };
        let st = backlund_integrate(&phi1, seed, &p).unwrap();
        let d = (0..g.nz).map(|i| (st.phi1.value(i, 0).unwrap() - st.phi2.value(i, 0).unwrap()).norm()).fold(0.0, f64::max);
        on_line.push(d);
        // ... but not off that line, since ∂̄φ− = 2iμβ²e^{φ+−Λ0} ≠ 0
        assert!((st.phi1.value(0, n / 4).unwrap() - st.phi2.value(0, n / 4).unwrap()).norm() > 1e-2);
    }
    assert!(on_line[0] / on_line[1] > 3.5, "{on_line:?}");
}
