//! Characteristic marching for first-order light-cone systems, and the matching jet
//! recursion that turns node values into exact local Taylor data.
//!
//! A system carries "known" fields (given bulk solutions, with jets) and "state" fields that
//! obey ∂S = Z(known, ∂known, ∂̄known, S) and ∂̄S = Zbar(...).  Rates are written once,
//! generically over the scalar algebra, and used both for node marching (A = T) and for
//! building jets at a node (A = Jet<T>).

use crate::algebra::Algebra;
use crate::grid::{DerivativeMode, FieldError, LightConeGrid};
use crate::jet::Jet;

/// Values of the known fields and their first light-cone derivatives at a point.
#[derive(Debug, Clone)]
pub struct Known<A> {
    pub v: Vec<A>,
    pub dz: Vec<A>,
    pub dzbar: Vec<A>,
}

pub trait CharSystem<T: Algebra>: Sync {
    fn n_state(&self) -> usize;
    fn state_labels(&self) -> Vec<&'static str>;
    fn grid(&self) -> &LightConeGrid;
    /// Jets of the known fields at node (i, j).
    fn known_jets(&self, i: usize, j: usize, order: usize, mode: DerivativeMode) -> Result<Option<Vec<Jet<T>>>, FieldError>;
    fn rate_z<A: Algebra>(&self, k: &Known<A>, s: &[A]) -> Vec<A>;
    fn rate_zbar<A: Algebra>(&self, k: &Known<A>, s: &[A]) -> Vec<A>;
    /// Blow-up guard on a freshly computed node state; returns the offending quantity.
    fn guard(&self, _k: &Known<T>, _s: &[T]) -> Option<(String, f64)> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarchOrder {
    /// Fill the first column (z = z_min) along z̄, then every row along z.
    ZbarThenZ,
    /// Fill the first row (z̄ = z̄_min) along z, then every column along z̄.
    ZThenZbar,
}

fn known_at<T: Algebra, S: CharSystem<T>>(sys: &S, i: usize, j: usize) -> Result<Known<T>, FieldError> {
    let jets = sys
        .known_jets(i, j, 1, DerivativeMode::Analytic)?
        .ok_or_else(|| FieldError::NotAvailable("known-field jets at a marching node".into()))?;
    Ok(Known {
        v: jets.iter().map(|j| j.value().clone()).collect(),
        dz: jets.iter().map(|j| j.derivative(1, 0)).collect(),
        dzbar: jets.iter().map(|j| j.derivative(0, 1)).collect(),
    })
}

fn axpy<T: Algebra>(y: &[T], h: f64, k: &[T]) -> Vec<T> {
    y.iter().zip(k).map(|(a, b)| a.clone() + &(b.clone() * h)).collect()
}

/// One Heun (explicit trapezoid) step between two nodes.
fn heun<T: Algebra>(
    y: &[T],
    h: f64,
    k_from: &Known<T>,
    k_to: &Known<T>,
    rate: impl Fn(&Known<T>, &[T]) -> Vec<T>,
) -> Vec<T> {
    let k1 = rate(k_from, y);
    let pred = axpy(y, h, &k1);
    let k2 = rate(k_to, &pred);
    y.iter()
        .zip(k1.iter().zip(&k2))
        .map(|(a, (p, q))| a.clone() + &((p.clone() + q) * (0.5 * h)))
        .collect()
}

/// March the state over the whole grid from its value at the corner node (0, 0).
/// Returns node-major states (index = i·nzbar + j).
pub fn march<T: Algebra, S: CharSystem<T>>(sys: &S, seed: &[T], order: MarchOrder) -> Result<Vec<Vec<T>>, FieldError> {
    let g = sys.grid().clone();
    if seed.len() != sys.n_state() {
        return Err(FieldError::Parameter(format!("seed has {} components, system needs {}", seed.len(), sys.n_state())));
    }
    // known data is evaluated once per node
    let mut known = Vec::with_capacity(g.len());
    for (i, j) in g.nodes() {
        known.push(known_at(sys, i, j)?);
    }
    let mut out: Vec<Option<Vec<T>>> = vec![None; g.len()];
    let check = |i: usize, j: usize, s: &[T]| -> Result<(), FieldError> {
        if let Some((quantity, magnitude)) = sys.guard(&known[g.index(i, j)], s) {
            return Err(FieldError::BlowUp { quantity, magnitude, z: g.z(i), zbar: g.zbar(j) });
        }
        if s.iter().any(|v| !v.max_abs().is_finite()) {
            return Err(FieldError::BlowUp { quantity: "state".into(), magnitude: f64::INFINITY, z: g.z(i), zbar: g.zbar(j) });
        }
        Ok(())
    };
    check(0, 0, seed)?;
    out[0] = Some(seed.to_vec());
    let rz = |k: &Known<T>, s: &[T]| sys.rate_z(k, s);
    let rzb = |k: &Known<T>, s: &[T]| sys.rate_zbar(k, s);
    match order {
        MarchOrder::ZbarThenZ => {
            for j in 1..g.nzbar {
                let prev = out[g.index(0, j - 1)].clone().expect("filled");
                let next = heun(&prev, g.h_zbar, &known[g.index(0, j - 1)], &known[g.index(0, j)], rzb);
                check(0, j, &next)?;
                out[g.index(0, j)] = Some(next);
            }
            for j in 0..g.nzbar {
                for i in 1..g.nz {
                    let prev = out[g.index(i - 1, j)].clone().expect("filled");
                    let next = heun(&prev, g.h_z, &known[g.index(i - 1, j)], &known[g.index(i, j)], rz);
                    check(i, j, &next)?;
                    out[g.index(i, j)] = Some(next);
                }
            }
        }
        MarchOrder::ZThenZbar => {
            for i in 1..g.nz {
                let prev = out[g.index(i - 1, 0)].clone().expect("filled");
                let next = heun(&prev, g.h_z, &known[g.index(i - 1, 0)], &known[g.index(i, 0)], rz);
                check(i, 0, &next)?;
                out[g.index(i, 0)] = Some(next);
            }
            for i in 0..g.nz {
                for j in 1..g.nzbar {
                    let prev = out[g.index(i, j - 1)].clone().expect("filled");
                    let next = heun(&prev, g.h_zbar, &known[g.index(i, j - 1)], &known[g.index(i, j)], rzb);
                    check(i, j, &next)?;
                    out[g.index(i, j)] = Some(next);
                }
            }
        }
    }
    Ok(out.into_iter().map(|s| s.expect("every node visited")).collect())
}

/// Jets of the state at a node from its node value, by recursion on the rates:
/// coefficients with a ≥ 1 come from the z-rates, the pure-z̄ column from the z̄-rates.
/// Exact (up to rounding) for compatible systems on exact known data.
pub fn state_jets<T: Algebra, S: CharSystem<T>>(
    sys: &S,
    i: usize,
    j: usize,
    value: &[T],
    order: usize,
) -> Result<Vec<Jet<T>>, FieldError> {
    let known = sys
        .known_jets(i, j, order, DerivativeMode::Analytic)?
        .ok_or_else(|| FieldError::NotAvailable("known-field jets".into()))?;
    let mut s: Vec<Jet<T>> = value.iter().map(|v| Jet::constant(v.clone(), 0)).collect();
    for k in 1..=order {
        let kn = Known {
            v: known.iter().map(|j| j.truncate(k - 1)).collect(),
            dz: known.iter().map(|j| j.d_z().truncate(k - 1)).collect(),
            dzbar: known.iter().map(|j| j.d_zbar().truncate(k - 1)).collect(),
        };
        let rz = sys.rate_z(&kn, &s);
        let rzb = sys.rate_zbar(&kn, &s);
        s = value
            .iter()
            .enumerate()
            .map(|(n, v)| {
                Jet::from_fn(k, |a, b| {
                    if a == 0 && b == 0 {
                        v.clone()
                    } else if a >= 1 {
                        rz[n].coeff(a - 1, b).clone() * (1.0 / a as f64)
                    } else {
                        rzb[n].coeff(0, b - 1).clone() * (1.0 / b as f64)
                    }
                })
            })
            .collect();
    }
    Ok(s)
}

/// Wrap marched node states as fields whose analytic jets come from [`state_jets`].
pub fn integrated_fields<T: Algebra, S: CharSystem<T> + Send + 'static>(
    sys: std::sync::Arc<S>,
    states: Vec<Vec<T>>,
) -> Result<Vec<crate::grid::Field<T>>, FieldError> {
    let g = sys.grid().clone();
    let states = std::sync::Arc::new(states);
    let labels = sys.state_labels();
    let mut out = Vec::with_capacity(labels.len());
    for (n, label) in labels.into_iter().enumerate() {
        let sys = sys.clone();
        let st = states.clone();
        let gg = g.clone();
        let samples: Vec<T> = st.iter().map(|s| s[n].clone()).collect();
        let f = crate::grid::Field::closed_form(g.clone(), label, move |i, j, order| {
            let mut jets = state_jets(sys.as_ref(), i, j, &st[gg.index(i, j)], order)?;
            Ok(jets.swap_remove(n))
        })
        .with_samples(samples)?;
        out.push(f);
    }
    Ok(out)
}
