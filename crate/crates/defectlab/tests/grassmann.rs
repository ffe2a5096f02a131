use defectlab::algebra::{re, AnalyticFn};
use defectlab::grassmann::*;
use defectlab::Algebra;
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const N: usize = 6;

fn th(k: usize) -> GrassmannElement {
    GrassmannElement::generator(N, k).unwrap()
}

fn one() -> GrassmannElement {
    GrassmannElement::scalar(N, re(1.0))
}

fn rand_c(rng: &mut StdRng) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// Random element; `parity` restricts the multi-index lengths (Some(0) even, Some(1) odd).
fn random(rng: &mut StdRng, parity: Option<u32>) -> GrassmannElement {
    let mut terms = Vec::new();
    for mask in 0u32..(1 << N) {
        if let Some(p) = parity {
            if mask.count_ones() % 2 != p {
                continue;
            }
        }
        if rng.gen_bool(0.4) {
            terms.push((mask_to_indices(mask), rand_c(rng)));
        }
    }
    GrassmannElement::from_terms(N, terms).unwrap()
}

fn random_homogeneous(rng: &mut StdRng) -> (GrassmannElement, u32) {
    let p = rng.gen_range(0..2u32);
    (random(rng, Some(p)), p)
}

/// Term-by-term product written out independently: concatenate the index lists and count
/// inversions with a bubble sort.
fn brute_mul(a: &GrassmannElement, b: &GrassmannElement) -> GrassmannElement {
    let mut out = Vec::new();
    for &(ma, ca) in a.terms() {
        for &(mb, cb) in b.terms() {
            if ma & mb != 0 {
                continue;
            }
            let mut idx: Vec<usize> = mask_to_indices(ma);
            idx.extend(mask_to_indices(mb));
            let mut sign = 1.0;
            for i in 0..idx.len() {
                for j in 0..idx.len() - 1 - i {
                    if idx[j] > idx[j + 1] {
                        idx.swap(j, j + 1);
                        sign = -sign;
                    }
                }
            }
            out.push((idx, ca * cb * sign));
        }
    }
    GrassmannElement::from_terms(N, out).unwrap()
}

fn rel_dev(a: &GrassmannElement, b: &GrassmannElement) -> f64 {
    (a - b).max_abs() / a.max_abs().max(b.max_abs()).max(1.0)
}

#[test]
fn generator_products() {
    assert!((th(1) * th(1)).is_zero());
    let t12 = th(1) * th(2);
    assert_eq!(t12.coefficient_of(&[1, 2]), re(1.0));
    assert_eq!(t12.len(), 1);
    let t21 = th(2) * th(1);
    assert_eq!(t21.coefficient_of(&[1, 2]), re(-1.0));

    let p = (one() + th(1)) * (one() + th(2));
    let expect = GrassmannElement::from_terms(
        N,
        vec![(vec![], re(1.0)), (vec![1], re(1.0)), (vec![2], re(1.0)), (vec![1, 2], re(1.0))],
    )
    .unwrap();
    assert_eq!(p, expect);
    assert_eq!(p, brute_mul(&(one() + th(1)), &(one() + th(2))));
}

#[test]
fn product_matches_brute_force() {
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..200 {
        let a = random(&mut rng, None);
        let b = random(&mut rng, None);
        assert!(rel_dev(&(&a * &b), &brute_mul(&a, &b)) < 1e-14);
    }
}

#[test]
fn analytic_functions() {
    let zero = GrassmannElement::zero(N);
    assert_eq!(zero.exp(), one());
    let t12 = th(1) * th(2);
    assert_eq!(t12.exp(), one() + &t12);

    let c = Complex64::new(0.3, -0.7);
    let a = t12.clone() + c;
    let s = a.sinh();
    assert!((s.body() - c.sinh()).norm() < 1e-15);
    assert!((s.coefficient_of(&[1, 2]) - c.cosh()).norm() < 1e-15);
    assert_eq!(s.len(), 2);

    // brute-force series: sinh(c+n) = Σ_k (c+n)^{2k+1}/(2k+1)!, with enough terms
    let mut brute = GrassmannElement::zero(N);
    let mut pow = a.clone();
    let mut fact = 1.0;
    for k in 1..60 {
        if k % 2 == 1 {
            brute = brute + pow.scale(re(1.0 / fact));
        }
        pow = pow * &a;
        fact *= (k + 1) as f64;
    }
    assert!(rel_dev(&s, &brute) < 1e-13);

    // log inverts exp; cosh² − sinh² = 1
    let mut rng = StdRng::seed_from_u64(3);
    let e = random(&mut rng, Some(0)) + re(2.0);
    assert!(rel_dev(&e.exp().ln(), &e) < 1e-12);
    let d = e.cosh() * e.cosh() - e.sinh() * e.sinh();
    assert!(rel_dev(&d, &one()) < 1e-10);
}

#[test]
fn analytic_errors() {
    let err = th(1).analytic(AnalyticFn::Exp).unwrap_err();
    assert!(matches!(err, GrassmannError::Parity { parity: Parity::Odd, .. }));
    let mixed = one() + th(1);
    assert!(matches!(mixed.analytic(AnalyticFn::Sinh), Err(GrassmannError::Parity { .. })));
    let nil = th(1) * th(2);
    assert!(matches!(nil.analytic(AnalyticFn::Log), Err(GrassmannError::Domain { .. })));
    assert!(matches!(GrassmannElement::zero(N).analytic(AnalyticFn::Log), Err(GrassmannError::Domain { .. })));
}

#[test]
fn body_and_soul() {
    let a = GrassmannElement::scalar(N, re(3.0)) + th(1).scale(re(2.0));
    let (b, s) = a.body_soul();
    assert_eq!(b, re(3.0));
    assert_eq!(s, th(1).scale(re(2.0)));
    assert_eq!(s.clone() + b, a);

    let (b, s) = GrassmannElement::zero(N).body_soul();
    assert_eq!(b, re(0.0));
    assert!(s.is_zero());

    let t12 = th(1) * th(2);
    let (b, s) = t12.body_soul();
    assert_eq!(b, re(0.0));
    assert_eq!(s, t12);
}

#[test]
fn left_derivative() {
    assert_eq!(th(1).derivative(1).unwrap(), one());
    assert_eq!((th(2) * th(1)).derivative(1).unwrap(), th(2).scale(re(-1.0)));
    assert!(GrassmannElement::scalar(N, re(4.0)).derivative(1).unwrap().is_zero());
    // left convention: ∂1(θ1θ2) = θ2, ∂2(θ1θ2) = −θ1
    assert_eq!((th(1) * th(2)).derivative(2).unwrap(), -th(1));
    assert!(th(1).derivative(0).is_err());
    assert!(th(1).derivative(N + 1).is_err());
}

#[test]
fn context_mismatch_is_an_error() {
    let a = GrassmannElement::generator(2, 1).unwrap();
    let b = GrassmannElement::generator(3, 1).unwrap();
    assert_eq!(a.checked_mul(&b), Err(GrassmannError::ContextMismatch { left: 2, right: 3 }));
    assert!(a.checked_add(&b).is_err());
    assert!(GrassmannElement::from_terms(3, vec![(vec![2, 1], re(1.0))]).is_err());
    assert!(GrassmannElement::from_terms(3, vec![(vec![4], re(1.0))]).is_err());
    assert!(GrassmannElement::zero(MAX_GENERATORS).num_generators() == MAX_GENERATORS);
}

#[test]
fn parity_classification() {
    assert_eq!(GrassmannElement::zero(N).parity(), Parity::Zero);
    assert_eq!(th(3).parity(), Parity::Odd);
    assert_eq!((th(1) * th(4)).parity(), Parity::Even);
    assert_eq!((one() + th(2)).parity(), Parity::Mixed);
}

#[test]
fn context_labels() {
    let ctx = GrassmannContext::new(&["seed1", "seed2", "eps"]).unwrap();
    assert_eq!(ctx.index_of("eps"), Some(3));
    let e = ctx.named("seed2").unwrap();
    assert_eq!(e, GrassmannElement::generator(3, 2).unwrap());
    assert!(ctx.named("theta").is_none());
}

#[test]
fn serialization_round_trip() {
    let a = GrassmannElement::from_terms(
        N,
        vec![(vec![], Complex64::new(1.5, -2.0)), (vec![1, 3], Complex64::new(0.0, 1.0))],
    )
    .unwrap();
    let json = serde_json::to_value(&a).unwrap();
    assert_eq!(
        json,
        serde_json::json!([
            {"multi_index": [], "re": 1.5, "im": -2.0},
            {"multi_index": [1, 3], "re": 0.0, "im": 1.0}
        ])
    );
    let terms: Vec<SerialTerm> = serde_json::from_value(json).unwrap();
    assert_eq!(GrassmannElement::from_serial(N, &terms).unwrap(), a);
}

#[test]
fn pruning() {
    let a = GrassmannElement::from_terms(N, vec![(vec![], re(1.0)), (vec![2], re(1e-14))]).unwrap();
    assert_eq!(a.len(), 2);
    assert_eq!(a.pruned(1e-12).len(), 1);
    // exact cancellation leaves nothing stored
    assert!((th(1) - th(1)).is_empty());
}

// Randomized properties, 1000 cases each.

#[test]
fn associativity() {
    let mut rng = StdRng::seed_from_u64(1);
    for _ in 0..1000 {
        let (a, b, c) = (random(&mut rng, None), random(&mut rng, None), random(&mut rng, None));
        assert!(rel_dev(&((&a * &b) * &c), &(&a * &(&b * &c))) <= 1e-12);
    }
}

#[test]
fn graded_commutativity() {
    let mut rng = StdRng::seed_from_u64(2);
    for _ in 0..1000 {
        let (a, pa) = random_homogeneous(&mut rng);
        let (b, pb) = random_homogeneous(&mut rng);
        let sign = if pa * pb == 1 { -1.0 } else { 1.0 };
        assert!(rel_dev(&(&a * &b), &(&b * &a).scale(re(sign))) <= 1e-12);
    }
}

#[test]
fn odd_elements_square_to_zero() {
    let mut rng = StdRng::seed_from_u64(3);
    for _ in 0..1000 {
        // integer coefficients keep every partial sum exact, so the cancellation is exact
        let a = random(&mut rng, Some(1));
        let ints: Vec<_> = a
            .terms()
            .iter()
            .map(|&(m, c)| (mask_to_indices(m), Complex64::new((c.re * 8.0).round(), (c.im * 8.0).round())))
            .collect();
        let a_int = GrassmannElement::from_terms(N, ints).unwrap();
        assert!((&a_int * &a_int).is_zero());
        // general complex coefficients: several cross terms share a monomial, so only rounding is left
        assert!((&a * &a).max_abs() <= 1e-14);
    }
}

#[test]
fn soul_is_nilpotent() {
    let mut rng = StdRng::seed_from_u64(4);
    for _ in 0..1000 {
        let s = random(&mut rng, Some(0)).soul();
        let mut p = one();
        for _ in 0..N / 2 + 1 {
            p = p * &s;
        }
        assert!(p.is_zero());
    }
}

#[test]
fn exp_is_a_homomorphism_on_evens() {
    let mut rng = StdRng::seed_from_u64(5);
    for _ in 0..1000 {
        let a = random(&mut rng, Some(0));
        let b = random(&mut rng, Some(0));
        assert!(rel_dev(&(&a + &b).exp(), &(a.exp() * b.exp())) <= 1e-12);
    }
}

#[test]
fn derivative_is_an_odd_derivation() {
    let mut rng = StdRng::seed_from_u64(6);
    for _ in 0..1000 {
        let (a, pa) = random_homogeneous(&mut rng);
        let b = random(&mut rng, None);
        let k = rng.gen_range(1..=N);
        let lhs = (&a * &b).derivative(k).unwrap();
        let sign = if pa == 1 { -1.0 } else { 1.0 };
        let rhs = a.derivative(k).unwrap() * &b + (&a * &b.derivative(k).unwrap()).scale(re(sign));
        assert!(rel_dev(&lhs, &rhs) <= 1e-12);
    }
}
