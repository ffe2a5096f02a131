use defectlab::algebra::re;
use defectlab::graded_linalg::*;
use defectlab::liouville::{lax_connection, static_wall, SpectralParameter};
use defectlab::report::refinement_study;
use defectlab::{DerivativeMode, GrassmannElement, LightConeGrid, Parity};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type GE = GrassmannElement;
type M = GradedMatrix<GE>;

const N: usize = 4;

fn zero() -> Complex64 {
    re(0.0)
}

fn ge_zero() -> GE {
    GE::zero(N)
}

fn th(k: usize) -> GE {
    GE::generator(N, k).unwrap()
}

fn rand_c(rng: &mut StdRng) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// Random even Grassmann coefficient (body plus θ1θ2, θ3θ4, ... terms) or odd one.
fn rand_coeff(rng: &mut StdRng, odd: bool) -> GE {
    let mut terms = Vec::new();
    for mask in 0u32..(1 << N) {
        if (mask.count_ones() % 2 == 1) == odd {
            terms.push((defectlab::grassmann::mask_to_indices(mask), rand_c(rng)));
        }
    }
    GE::from_terms(N, terms).unwrap()
}

/// Random homogeneous element of the osp span with Grassmann coefficients: bosonic generators
/// with even coefficients and fermionic generators with odd ones give an even matrix; the
/// reverse gives an odd matrix.
fn rand_span(rng: &mut StdRng, odd: bool) -> M {
    let g = osp_generators(&ge_zero());
    let mut m = M::zeros(osp_grading(), &ge_zero());
    for b in [&g.h, &g.e_plus, &g.e_minus] {
        m = m.checked_add(&b.graded_scale(&rand_coeff(rng, odd)).unwrap()).unwrap();
    }
    for f in [&g.f_plus, &g.f_minus] {
        m = m.checked_add(&f.graded_scale(&rand_coeff(rng, !odd)).unwrap()).unwrap();
    }
    m
}

fn rand_matrix(rng: &mut StdRng) -> M {
    let entries = (0..9).map(|_| rand_coeff(rng, false) + &rand_coeff(rng, true)).collect();
    M::from_entries(osp_grading(), entries)
}

fn dev(a: &M, b: &M) -> f64 {
    a.checked_sub(b).unwrap().max_abs()
}

#[test]
fn printed_generators() {
    let g = osp_generators(&zero());
    let h: Vec<Complex64> = [1., 0., 0., 0., -1., 0., 0., 0., 0.].iter().map(|&x| re(x)).collect();
    assert_eq!(g.h.entries(), &h[..]);
    for r in 0..3 {
        for c in 0..3 {
            let want = if (r, c) == (0, 2) || (r, c) == (2, 1) { 1.0 } else { 0.0 };
            assert_eq!(*g.f_plus.get(r, c), re(want));
        }
    }
    assert_eq!(g.e_minus, g.e_plus.transpose());
    assert_eq!(g.h.parity(), Parity::Even);
    assert_eq!(g.f_plus.parity(), Parity::Odd);
    assert_eq!(g.f_minus.parity(), Parity::Odd);
    assert_eq!(osp_grading(), vec![false, false, true]);
}

#[test]
fn bracket_examples() {
    let g = osp_generators(&zero());
    let b = graded_bracket(&g.h, &g.e_plus).unwrap();
    assert_eq!(b, g.e_plus.scale(re(2.0)));
    let b = graded_bracket(&g.f_plus, &g.f_plus).unwrap();
    assert_eq!(b, g.e_plus.scale(re(2.0)));
    assert_eq!(graded_bracket(&g.h, &g.h).unwrap().max_abs(), 0.0);

    let mixed = g.h.checked_add(&g.f_plus).unwrap();
    assert_eq!(mixed.parity(), Parity::Mixed);
    assert_eq!(graded_bracket(&mixed, &g.h), Err(GradedError::MixedParity));
}

#[test]
fn relation_checker() {
    let r = check_osp_relations();
    assert_eq!(r.max_norm, 0.0);
    let checks = osp_relation_checks(&osp_generators(&zero())).unwrap();
    assert_eq!(checks.len(), 10);
    assert!(checks.iter().all(|c| c.deviation == 0.0));

    // the checker must notice a fault
    let mut g = osp_generators(&zero());
    let v = *g.f_minus.get(2, 0) + 0.1;
    g.f_minus.set(2, 0, v);
    let r = check_osp_relations_on(&g);
    assert!(r.max_norm > 0.05, "{}", r.max_norm);

    assert_eq!(check_sl2_relations().max_norm, 0.0);
}

#[test]
fn dimension_and_grading_mismatch() {
    let (h2, _, _) = sl2_generators(&zero());
    let g = osp_generators(&zero());
    assert_eq!(h2.checked_mul(&g.h), Err(GradedError::Dimension(2, 3)));
    let other = GradedMatrix::from_complex(vec![true, false, false], &[&[0.; 3], &[0.; 3], &[0.; 3]], &zero());
    assert_eq!(g.h.checked_add(&other), Err(GradedError::Grading));
}

#[test]
fn graded_scale_signs() {
    let g = osp_generators(&ge_zero());
    // even coefficient: plain scaling
    let e = th(1) * th(2);
    assert_eq!(g.f_plus.graded_scale(&e).unwrap(), g.f_plus.left_scale(&e));
    // odd coefficient flips the fermionic row
    let m = g.f_plus.graded_scale(&th(1)).unwrap();
    assert_eq!(*m.get(0, 2), th(1));
    assert_eq!(*m.get(2, 1), -th(1));
    assert_eq!(m.parity(), Parity::Even);
    let mixed = GE::scalar(N, re(1.0)) + th(1);
    assert_eq!(g.h.graded_scale(&mixed), Err(GradedError::MixedParity));
}

#[test]
fn supertrace_and_dump() {
    let g = osp_generators(&zero());
    let m = GradedMatrix::from_complex(osp_grading(), &[&[1., 2., 0.], &[3., 4., 0.], &[0., 0., 7.]], &zero());
    assert_eq!(m.trace(), re(12.0));
    assert_eq!(m.supertrace(), re(-2.0));
    assert_eq!(g.h.supertrace(), re(0.0));
    let d = g.f_plus.dump(|c| (c.re, c.im));
    assert_eq!(d.grading, vec![false, false, true]);
    assert_eq!(d.entries.len(), 9);
    assert_eq!(d.entries[2], (1.0, 0.0));
}

#[test]
fn bracket_is_graded_antisymmetric() {
    let mut rng = StdRng::seed_from_u64(21);
    for _ in 0..200 {
        let (px, py) = (rng.gen_bool(0.5), rng.gen_bool(0.5));
        let x = rand_span(&mut rng, px);
        let y = rand_span(&mut rng, py);
        let sign = if px && py { 1.0 } else { -1.0 };
        let lhs = graded_bracket(&x, &y).unwrap();
        let rhs = graded_bracket(&y, &x).unwrap().scale(re(sign));
        assert!(dev(&lhs, &rhs) < 1e-12);
    }
}

#[test]
fn graded_jacobi() {
    let mut rng = StdRng::seed_from_u64(22);
    for _ in 0..200 {
        let p: Vec<bool> = (0..3).map(|_| rng.gen_bool(0.5)).collect();
        let x = rand_span(&mut rng, p[0]);
        let y = rand_span(&mut rng, p[1]);
        let z = rand_span(&mut rng, p[2]);
        let b = |a: &M, c: &M| graded_bracket(a, c).unwrap();
        // [X,[Y,Z]] = [[X,Y],Z] + (−1)^{|X||Y|} [Y,[X,Z]]
        let s = if p[0] && p[1] { -1.0 } else { 1.0 };
        let lhs = b(&x, &b(&y, &z));
        let rhs = b(&b(&x, &y), &z).checked_add(&b(&y, &b(&x, &z)).scale(re(s))).unwrap();
        assert!(dev(&lhs, &rhs) < 1e-12, "{}", dev(&lhs, &rhs));
    }
}

#[test]
fn matrix_product_is_associative() {
    let mut rng = StdRng::seed_from_u64(23);
    for _ in 0..200 {
        let (a, b, c) = (rand_matrix(&mut rng), rand_matrix(&mut rng), rand_matrix(&mut rng));
        let l = a.checked_mul(&b).unwrap().checked_mul(&c).unwrap();
        let r = a.checked_mul(&b.checked_mul(&c).unwrap()).unwrap();
        assert!(dev(&l, &r) < 1e-12);
    }
}

#[test]
fn flat_connections() {
    let g = LightConeGrid::symmetric(0.5, 5).unwrap();
    let z = GradedMatrix::from_complex(vec![false, false], &[&[0., 0.], &[0., 0.]], &zero());
    let a = MatrixField::constant(g.clone(), z.clone());
    let r = zero_curvature_residual(&a, &a, DerivativeMode::Analytic).unwrap();
    assert_eq!(r.max_norm, 0.0);

    // a static Liouville wall in analytic mode, then with finite differences under refinement
    let wall = LightConeGrid::new((0.25, 1.5), (0.25, 1.5), 17, 17).unwrap();
    let lam = SpectralParameter::new(Complex64::new(0.8, 0.3)).unwrap();
    let phi = static_wall(&wall, re(1.0), 0.0).unwrap();
    let (a, ab) = lax_connection(&phi, re(1.0), lam);
    let r = zero_curvature_residual(&a, &ab, DerivativeMode::Analytic).unwrap();
    assert!(r.max_norm < 1e-10, "{}", r.max_norm);

    let levels = wall.refinement_levels(3, 2);
    let r = refinement_study(&levels, |g| {
        let phi = static_wall(g, re(1.0), 0.0)?;
        let (a, ab) = lax_connection(&phi, re(1.0), lam);
        zero_curvature_residual(&a, &ab, DerivativeMode::FiniteDifference).map(|r| vec![r])
    })
    .unwrap();
    let slope = r[0].slope.unwrap();
    assert!((slope - 2.0).abs() < 0.3, "slope {slope}");

    // a grid mismatch is an error
    let other = MatrixField::constant(LightConeGrid::symmetric(0.5, 7).unwrap(), z);
    let a0 = MatrixField::constant(g, GradedMatrix::from_complex(vec![false, false], &[&[0., 0.], &[0., 0.]], &zero()));
    assert!(zero_curvature_residual(&a0, &other, DerivativeMode::Analytic).is_err());
}
