//! `verify-algebra`: the osp(1,2) relations and randomized Grassmann laws.

use defectlab::algebra::re;
use defectlab::graded_linalg::{check_osp_relations_on, check_sl2_relations, osp_generators, osp_relation_checks};
use defectlab::grassmann::{mask_to_indices, GrassmannElement, MAX_GENERATORS};
use defectlab::Algebra;
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;
use serde_json::json;

use crate::{Check, CliError, Outcome};

#[derive(Debug, Clone, Serialize)]
pub struct AlgebraOptions {
    pub generators: usize,
    pub cases: usize,
    pub rng_seed: u64,
    /// Self-test: add 0.1 to one entry of F− before checking.
    pub perturb: bool,
}

impl Default for AlgebraOptions {
    fn default() -> Self {
        Self { generators: 6, cases: 1000, rng_seed: 20240601, perturb: false }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertyRow {
    pub property: String,
    pub cases: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
}

type GE = GrassmannElement;

struct Sampler {
    rng: StdRng,
    n: usize,
}

impl Sampler {
    fn coeff(&mut self, integer: bool) -> Complex64 {
        if integer {
            Complex64::new(self.rng.gen_range(-4..=4) as f64, self.rng.gen_range(-4..=4) as f64)
        } else {
            Complex64::new(self.rng.gen_range(-1.0..1.0), self.rng.gen_range(-1.0..1.0))
        }
    }

    /// Random element; `parity` = Some(0) even, Some(1) odd, None mixed.
    fn element(&mut self, parity: Option<u32>, integer: bool) -> GE {
        let mut terms = Vec::new();
        for mask in 0u32..(1 << self.n) {
            if parity.is_some_and(|p| mask.count_ones() % 2 != p) {
                continue;
            }
            if self.rng.gen_bool(0.4) {
                let c = self.coeff(integer);
                terms.push((mask_to_indices(mask), c));
            }
        }
        GE::from_terms(self.n, terms).expect("valid multi-indices")
    }

    fn homogeneous(&mut self) -> (GE, u32) {
        let p = self.rng.gen_range(0..2u32);
        (self.element(Some(p), false), p)
    }
}

fn rel_dev(a: &GE, b: &GE) -> f64 {
    (a.clone() - b).max_abs() / a.max_abs().max(b.max_abs()).max(1.0)
}

/// The randomized Grassmann property suite on `n` generators.
pub fn grassmann_properties(n: usize, cases: usize, seed: u64) -> Vec<PropertyRow> {
    let mut s = Sampler { rng: StdRng::seed_from_u64(seed), n };
    let mut rows = Vec::new();
    let mut row = |name: &str, tol: f64, f: &mut dyn FnMut(&mut Sampler) -> f64, s: &mut Sampler| {
        let max = (0..cases).map(|_| f(s)).fold(0.0, f64::max);
        rows.push(PropertyRow { property: name.into(), cases, max_deviation: max, tolerance: tol });
    };
    row(
        "associativity (ab)c = a(bc)",
        1e-12,
        &mut |s| {
            let (a, b, c) = (s.element(None, false), s.element(None, false), s.element(None, false));
            rel_dev(&((a.clone() * &b) * &c), &(a * &(b * &c)))
        },
        &mut s,
    );
    row(
        "graded commutativity ab = (-1)^{|a||b|} ba",
        1e-12,
        &mut |s| {
            let (a, pa) = s.homogeneous();
            let (b, pb) = s.homogeneous();
            let sign = if pa * pb == 1 { -1.0 } else { 1.0 };
            rel_dev(&(a.clone() * &b), &(b * &a).scale(re(sign)))
        },
        &mut s,
    );
    // integer coefficients keep every partial sum exact, so a·a must vanish identically
    row(
        "nilpotency a.a = 0 (odd a, exact)",
        0.0,
        &mut |s| {
            let a = s.element(Some(1), true);
            (a.clone() * &a).max_abs()
        },
        &mut s,
    );
    row(
        "nilpotency a.a = 0 (odd a)",
        1e-12,
        &mut |s| {
            let a = s.element(Some(1), false);
            (a.clone() * &a).max_abs() / a.max_abs().powi(2).max(1.0)
        },
        &mut s,
    );
    row(
        "odd derivation d(ab) = (da)b + (-1)^{|a|} a(db)",
        1e-12,
        &mut |s| {
            let (a, pa) = s.homogeneous();
            let b = s.element(None, false);
            let k = s.rng.gen_range(1..=s.n);
            let lhs = (a.clone() * &b).derivative(k).expect("k in range");
            let sign = if pa == 1 { -1.0 } else { 1.0 };
            let rhs = a.derivative(k).expect("k in range") * &b + (a * &b.derivative(k).expect("k in range")).scale(re(sign));
            rel_dev(&lhs, &rhs)
        },
        &mut s,
    );
    row(
        "soul nilpotency soul(a)^{floor(N/2)+1} = 0",
        0.0,
        &mut |s| {
            let soul = s.element(Some(0), false).soul();
            let mut p = GE::scalar(s.n, re(1.0));
            for _ in 0..s.n / 2 + 1 {
                p = p * &soul;
            }
            p.max_abs()
        },
        &mut s,
    );
    row(
        "exp(a+b) = exp(a)exp(b), a, b even",
        1e-12,
        &mut |s| {
            let (a, b) = (s.element(Some(0), false), s.element(Some(0), false));
            rel_dev(&(a.clone() + &b).exp(), &(a.exp() * b.exp()))
        },
        &mut s,
    );
    rows
}

pub fn verify_algebra(opts: &AlgebraOptions) -> Result<Outcome, CliError> {
    if !(1..=MAX_GENERATORS).contains(&opts.generators) {
        return Err(CliError::Config(format!("--generators must lie in 1..={MAX_GENERATORS}")));
    }
    if opts.cases == 0 {
        return Err(CliError::Config("at least one random case is needed".into()));
    }
    let mut g = osp_generators(&Complex64::new(0.0, 0.0));
    if opts.perturb {
        let v = *g.f_minus.get(2, 0) + 0.1;
        g.f_minus.set(2, 0, v);
    }
    let relations = osp_relation_checks(&g).map_err(|e| CliError::Run(e.to_string()))?;
    let osp = check_osp_relations_on(&g);
    let sl2 = check_sl2_relations();
    let props = grassmann_properties(opts.generators, opts.cases, opts.rng_seed);

    let mut checks = vec![
        Check::new(
            Some(1),
            "osp(1,2) (anti)commutation relations",
            osp.max_norm == 0.0,
            format!("{} relations, max deviation {:e}", relations.len(), osp.max_norm),
        ),
        Check::new(None, "sl(2) subalgebra relations", sl2.max_norm == 0.0, format!("max deviation {:e}", sl2.max_norm)),
    ];
    let failing: Vec<&PropertyRow> = props.iter().filter(|r| !(r.max_deviation <= r.tolerance)).collect();
    let worst = props.iter().map(|r| r.max_deviation).fold(0.0, f64::max);
    checks.push(Check::new(
        Some(2),
        "Grassmann algebra laws",
        failing.is_empty(),
        if failing.is_empty() {
            format!("{} properties x {} cases on {} generators, max deviation {worst:.3e}", props.len(), opts.cases, opts.generators)
        } else {
            failing.iter().map(|r| format!("{}: {:.3e}", r.property, r.max_deviation)).collect::<Vec<_>>().join("; ")
        },
    ));

    let mut csv = String::from("property,cases,max_deviation,tolerance\n");
    for r in &props {
        csv.push_str(&format!("\"{}\",{},{:.6e},{:e}\n", r.property, r.cases, r.max_deviation, r.tolerance));
    }
    let report = json!({
        "osp_relations": relations,
        "sl2_max_deviation": sl2.max_norm,
        "grassmann_properties": props,
    });
    Ok(Outcome { checks, report, files: vec![("grassmann_properties.csv".into(), csv)] })
}
