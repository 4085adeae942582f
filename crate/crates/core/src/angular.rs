//! Rotation generators for three-dimensional models in the Maggiore scheme
//! `{q_i, q_j} = a(ρ) ε_ijk J_k`, `{q_i, p_j} = f(ρ) δ_ij`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{Expr, PhasePoint, Symbol};
use crate::report::{CheckEntry, CheckReport};
use crate::sampling::{self, Worst};
use crate::solver::RHO;
use crate::structure::{GupModel, Observable};

pub const TOLERANCE: f64 = 1e-9;
/// `p·J` cancels term by term, so it gets a tighter threshold.
pub const SCALAR_TOLERANCE: f64 = 1e-12;

/// Levi-Civita symbol on 0-based indices.
pub fn epsilon(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// `(q × p)_k`: `q2 p3 − q3 p2`, `q3 p1 − q1 p3`, `q1 p2 − q2 p1`.
pub fn orbital(k: usize) -> Expr {
    let (a, b) = ((k + 1) % 3 + 1, (k + 2) % 3 + 1);
    Expr::q(a) * Expr::p(b) - Expr::q(b) * Expr::p(a)
}

#[derive(Clone, Debug)]
pub struct AngularScheme {
    /// `a` as a function of `rho`.
    pub a_rho: Expr,
    /// `f` as a function of `rho`.
    pub f_rho: Expr,
    /// `a` and `f` with `rho = sqrt(p1² + p2² + p3²)`.
    pub a: Expr,
    pub f: Expr,
    pub s: [Expr; 3],
    /// `J_k = s_k + (q × p)_k / f`.
    pub j: [Expr; 3],
    pub model: GupModel,
}

/// Replace `rho` by `sqrt(p1² + p2² + p3²)`.
pub fn rho_to_momenta(e: &Expr) -> Expr {
    let b = BTreeMap::from([(Symbol::named(RHO), Expr::momentum_squared(3).sqrt())]);
    e.substitute(&b).simplify()
}

fn check_radial(e: &Expr, what: &str, params: &BTreeMap<String, f64>) -> Result<()> {
    for s in e.symbols() {
        match &s {
            Symbol::Named(n) if n == RHO || params.contains_key(n) => {}
            Symbol::Named(n) => return Err(Error::Model(format!("{what}: unbound parameter `{n}`"))),
            other => return Err(Error::Model(format!("{what} must depend on `{RHO}` only, found {other}"))),
        }
    }
    Ok(())
}

/// Scheme and induced model with `L_ij = a ε_ijk J_k`. `s` defaults to zero.
pub fn build_scheme(a: &Expr, f: &Expr, s: Option<[Expr; 3]>, params: &BTreeMap<String, f64>) -> Result<AngularScheme> {
    check_radial(a, "a", params)?;
    check_radial(f, "f", params)?;
    let s = s.unwrap_or_else(|| [Expr::zero(), Expr::zero(), Expr::zero()]);
    for e in &s {
        if e.has_q() || e.symbols().contains(&Symbol::named(RHO)) {
            return Err(Error::Model(format!("s must depend on momenta only, got `{e}`")));
        }
    }
    let (ap, fp) = (rho_to_momenta(a), rho_to_momenta(f));
    let j: [Expr; 3] = std::array::from_fn(|k| (s[k].clone() + orbital(k) / fp.clone()).simplify());
    let l = |i: usize, jj: usize| {
        let k = 3 - i - jj;
        let e = (ap.clone() * j[k].clone()).simplify();
        if epsilon(i, jj, k) < 0.0 {
            (-e).simplify()
        } else {
            e
        }
    };
    let model = GupModel::from_fn(3, fp.clone(), l, params.clone())?.named("maggiore scheme");
    Ok(AngularScheme { a_rho: a.clone(), f_rho: f.clone(), a: ap, f: fp, s, j, model })
}

impl AngularScheme {
    pub fn s_is_zero(&self) -> bool {
        self.s.iter().all(|e| e.simplify().is_zero())
    }

    fn observables(&self) -> Result<[Observable; 3]> {
        let m = &self.model;
        Ok([Observable::new(m, &self.j[0])?, Observable::new(m, &self.j[1])?, Observable::new(m, &self.j[2])?])
    }
}

/// Residuals of `{J_i,q_j} = ε_ijk q_k`, `{J_i,p_j} = ε_ijk p_k`, `{J_i,J_j} = ε_ijk J_k`.
pub fn check_angular_algebra(s: &AngularScheme, points: &[PhasePoint]) -> Result<CheckReport> {
    let m = &s.model;
    let js = s.observables()?;
    let qs = [Observable::new(m, &Expr::q(1))?, Observable::new(m, &Expr::q(2))?, Observable::new(m, &Expr::q(3))?];
    let ps = [Observable::new(m, &Expr::p(1))?, Observable::new(m, &Expr::p(2))?, Observable::new(m, &Expr::p(3))?];
    let family = |rhs: &[Observable; 3], only_upper: bool| {
        sampling::max_over(points, |x| {
            let vals = [rhs[0].value(x)?, rhs[1].value(x)?, rhs[2].value(x)?];
            let mut worst: f64 = 0.0;
            for i in 0..3 {
                for jj in 0..3 {
                    if only_upper && jj <= i {
                        continue;
                    }
                    let expected: f64 = (0..3).map(|k| epsilon(i, jj, k) * vals[k]).sum();
                    let got = js[i].bracket(&rhs[jj], m, x)?;
                    worst = worst.max((got - expected).abs());
                }
            }
            Ok(worst)
        })
    };
    let jq = family(&qs, false)?;
    let jp = family(&ps, false)?;
    let jj = family(&js, true)?;
    Ok(CheckReport::new(
        vec![
            CheckEntry::from_worst("{J,q}", &jq, TOLERANCE),
            CheckEntry::from_worst("{J,p}", &jp, TOLERANCE),
            CheckEntry::from_worst("{J,J}", &jj, TOLERANCE),
        ],
        None,
    ))
}

/// `Σ p_k J_k` at `x`.
pub fn p_dot_j(s: &AngularScheme, x: &PhasePoint) -> Result<f64> {
    let mut total = 0.0;
    for k in 0..3 {
        total += x.p[k] * s.model.compile(&s.j[k])?.eval(&x.q, &x.p)?;
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SSystemDeterminant {
    /// `f^{-2}(f² + a ρ²)`.
    pub value: f64,
    pub singular: bool,
    pub note: Option<String>,
}

/// Determinant of the homogeneous linear system for `s`.
pub fn s_system_determinant(s: &AngularScheme, x: &PhasePoint) -> Result<SSystemDeterminant> {
    let rho = x.rho();
    let params = s.model.params();
    let ev = |e: &Expr| -> Result<f64> { Ok(crate::expr::Compiled::with_vars(e, params, &[RHO])?.eval_with(&[], &[], &[rho])?) };
    let (a, f) = (ev(&s.a_rho)?, ev(&s.f_rho)?);
    if f == 0.0 {
        return Err(Error::Degenerate { value: f, location: format!("rho = {rho}") });
    }
    let value = (f * f + a * rho * rho) / (f * f);
    let singular = value.abs() <= SCALAR_TOLERANCE;
    let note = singular.then(|| {
        "a rho^2 = -f^2 here; holding on an open set forces f = k rho, which has no undeformed limit".to_string()
    });
    Ok(SSystemDeterminant { value, singular, note })
}

/// `max_k |{J_k, H}|`.
pub fn rotation_invariance_residual(s: &AngularScheme, h: &Expr, points: &[PhasePoint]) -> Result<Worst> {
    let js = s.observables()?;
    let ho = Observable::new(&s.model, h)?;
    sampling::max_over(points, |x| {
        let mut w: f64 = 0.0;
        for j in &js {
            w = w.max(j.bracket(&ho, &s.model, x)?.abs());
        }
        Ok(w)
    })
}

/// `max_i |∂f/∂p_i + a p_i / f|`.
pub fn f_system_residual(s: &AngularScheme, points: &[PhasePoint]) -> Result<Worst> {
    let eqs: Vec<Expr> =
        (1..=3).map(|i| s.f.diff(&Symbol::P(i)) + s.a.clone() * Expr::p(i) / s.f.clone()).collect();
    max_abs_over(s, &eqs, points)
}

/// Residuals of the nine first-order equations for `s` obtained from `{J,q}`.
pub fn qpb_system_residual(s: &AngularScheme, points: &[PhasePoint]) -> Result<Worst> {
    let f2 = s.f.clone().powi(2);
    let mut eqs = Vec::new();
    for m in 0..3 {
        for l in 0..3 {
            let ds = s.s[m].diff(&Symbol::P(l + 1));
            let e = if m == l {
                let others = (0..3)
                    .filter(|&k| k != m)
                    .map(|k| s.s[k].clone() * Expr::p(k + 1))
                    .reduce(|x, y| x + y)
                    .unwrap_or_else(Expr::zero);
                f2.clone() * ds + s.a.clone() * others
            } else {
                f2.clone() * ds - s.a.clone() * Expr::p(l + 1) * s.s[m].clone()
            };
            eqs.push(e);
        }
    }
    max_abs_over(s, &eqs, points)
}

/// `max |p·J ∂a/∂ρ|`, the remaining cyclic closure condition of the scheme.
pub fn p_dot_j_da_residual(s: &AngularScheme, points: &[PhasePoint]) -> Result<Worst> {
    let da = rho_to_momenta(&s.a_rho.diff(&Symbol::named(RHO)));
    let pj = (0..3).map(|k| Expr::p(k + 1) * s.j[k].clone()).reduce(|x, y| x + y).expect("three terms");
    max_abs_over(s, &[pj * da], points)
}

fn max_abs_over(s: &AngularScheme, eqs: &[Expr], points: &[PhasePoint]) -> Result<Worst> {
    let compiled = eqs.iter().map(|e| s.model.compile(&e.simplify())).collect::<Result<Vec<_>>>()?;
    sampling::max_over(points, |x| {
        let mut w: f64 = 0.0;
        for c in &compiled {
            w = w.max(c.eval(&x.q, &x.p)?.abs());
        }
        Ok(w)
    })
}
