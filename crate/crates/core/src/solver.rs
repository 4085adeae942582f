//! Reconstruction of admissible deformation functions.
//!
//! Given the `q`-linear part `g` of `L`, `f` solves `∂f/∂p_i = g_i`; it
//! exists on simply connected domains iff `dg = 0`. In the rotation-invariant
//! 3D scheme, `f` and `a` are related by `f f' = −a ρ`.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{Compiled, Expr, PhasePoint, Symbol};
use crate::poly::{rational_sqrt, Monomial, Poly};
use crate::sampling::{self, Region, Worst};
use crate::structure::GupModel;

pub const INTEGRABILITY_TOLERANCE: f64 = 1e-10;
/// Per-segment absolute tolerance of the adaptive Simpson rule.
pub const QUADRATURE_TOLERANCE: f64 = 1e-10;
/// Name of the radial variable in `a(ρ)` and `f(ρ)`.
pub const RHO: &str = "rho";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Integrability {
    pub integrable: bool,
    pub residual: Worst,
}

/// `max |∂g_i/∂p_j − ∂g_j/∂p_i|` over `points`.
pub fn check_integrability(g: &[Expr], params: &BTreeMap<String, f64>, points: &[PhasePoint]) -> Result<Integrability> {
    if let Some(e) = g.iter().find(|e| e.has_q()) {
        return Err(Error::InvalidArgument(format!("g must depend on momenta only, got `{e}`")));
    }
    let d = g.len();
    let mut curls = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            let c = (g[i].diff(&Symbol::P(j + 1)) - g[j].diff(&Symbol::P(i + 1))).simplify();
            if !c.is_zero() {
                curls.push(Compiled::new(&c, params)?);
            }
        }
    }
    let residual = if curls.is_empty() {
        Worst::none()
    } else {
        sampling::max_over(points, |x| {
            let mut m: f64 = 0.0;
            for c in &curls {
                m = m.max(c.eval(&x.q, &x.p)?.abs());
            }
            Ok(m)
        })?
    };
    Ok(Integrability { integrable: residual.value <= INTEGRABILITY_TOLERANCE, residual })
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` with absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> Result<f64>, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn step(
        f: &dyn Fn(f64) -> Result<f64>,
        (a, fa): (f64, f64),
        (m, fm): (f64, f64),
        (b, fb): (f64, f64),
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64> {
        let (lm, rm) = ((a + m) / 2.0, (m + b) / 2.0);
        let (flm, frm) = (f(lm)?, f(rm)?);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        Ok(step(f, (a, fa), (lm, flm), (m, fm), left, tol / 2.0, depth - 1)?
            + step(f, (m, fm), (rm, frm), (b, fb), right, tol / 2.0, depth - 1)?)
    }
    if a == b {
        return Ok(0.0);
    }
    let m = (a + b) / 2.0;
    let (fa, fm, fb) = (f(a)?, f(m)?, f(b)?);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let v = step(f, (a, fa), (m, fm), (b, fb), whole, tol, 48)?;
    if !v.is_finite() {
        return Err(Error::StepFailure { t: b, reason: "quadrature produced a non-finite value".into() });
    }
    Ok(v)
}

/// Shape of the polyline from the origin to the target in momentum space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathShape {
    /// `0 → (p1,0,…) → (p1,p2,0,…) → … → p`.
    AxisAligned,
    /// Same, moving along the last axis first.
    AxisAlignedReversed,
    Straight,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathSpec {
    pub shape: PathShape,
    /// Momentum box the path must stay in.
    pub domain: Option<Vec<(f64, f64)>>,
    pub tolerance: f64,
}

impl Default for PathSpec {
    fn default() -> Self {
        PathSpec { shape: PathShape::AxisAligned, domain: None, tolerance: QUADRATURE_TOLERANCE }
    }
}

impl PathSpec {
    pub fn new(shape: PathShape) -> Self {
        PathSpec { shape, ..PathSpec::default() }
    }

    pub fn within(mut self, region: &Region) -> Self {
        self.domain = Some(region.p.clone());
        self
    }

    /// Polyline vertices from the origin to `target`.
    pub fn vertices(&self, target: &[f64]) -> Vec<Vec<f64>> {
        let d = target.len();
        let mut out = vec![vec![0.0; d]];
        match self.shape {
            PathShape::Straight => out.push(target.to_vec()),
            PathShape::AxisAligned | PathShape::AxisAlignedReversed => {
                let order: Vec<usize> = match self.shape {
                    PathShape::AxisAligned => (0..d).collect(),
                    _ => (0..d).rev().collect(),
                };
                let mut cur = vec![0.0; d];
                for k in order {
                    if target[k] != 0.0 {
                        cur[k] = target[k];
                        out.push(cur.clone());
                    }
                }
            }
        }
        out
    }
}

/// `f(target) = c + ∫ Σ g_i dp_i` along the path.
pub fn solve_f_line_integral(
    g: &[Expr],
    params: &BTreeMap<String, f64>,
    target: &[f64],
    c: f64,
    path: &PathSpec,
) -> Result<f64> {
    let d = g.len();
    if target.len() != d {
        return Err(Error::InvalidArgument(format!("target has {} components, g has {d}", target.len())));
    }
    let verts = path.vertices(target);
    if let Some(dom) = &path.domain {
        // A box is convex, so checking the vertices is enough.
        for v in &verts {
            if v.iter().zip(dom).any(|(x, (lo, hi))| x < lo || x > hi) {
                return Err(Error::PathOutsideDomain(v.clone()));
            }
        }
    }
    let box_region = Region {
        q: vec![(0.0, 0.0); d],
        p: target.iter().map(|t| if *t < 0.0 { (*t, 0.0) } else { (0.0, *t) }).collect(),
    };
    let probe = sampling::sample_points(&box_region, 16, sampling::DEFAULT_SEED, params);
    let integ = check_integrability(g, params, &probe)?;
    if !integ.integrable {
        return Err(Error::NotIntegrable(format!("curl of g reaches {:.3e}", integ.residual.value)));
    }
    let compiled: Vec<Compiled> = g.iter().map(|e| Compiled::new(e, params)).collect::<Result<_, _>>()?;
    let zeros = vec![0.0; d];
    let mut total = c;
    for w in verts.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let dir: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
        let integrand = |t: f64| -> Result<f64> {
            let p: Vec<f64> = a.iter().zip(&dir).map(|(x, v)| x + t * v).collect();
            let mut s = 0.0;
            for (gi, v) in compiled.iter().zip(&dir) {
                if *v != 0.0 {
                    s += gi.eval(&zeros, &p)? * v;
                }
            }
            Ok(s)
        };
        total += adaptive_simpson(&integrand, 0.0, 1.0, path.tolerance)?;
    }
    Ok(total)
}

/// Line-integral solution using the `g` of a conforming model.
pub fn solve_f_for_model(m: &GupModel, target: &[f64], c: f64, path: &PathSpec) -> Result<f64> {
    let dec = crate::closure::decompose_l(m)?;
    if !dec.exact {
        return Err(Error::Model("nonconforming L: no g to integrate".into()));
    }
    solve_f_line_integral(&dec.g, m.params(), target, c, path)
}

/// Difference between the two axis-aligned paths and the straight one.
pub fn path_independence_gap(g: &[Expr], params: &BTreeMap<String, f64>, target: &[f64]) -> Result<f64> {
    let vals = [PathShape::AxisAligned, PathShape::AxisAlignedReversed, PathShape::Straight]
        .iter()
        .map(|s| solve_f_line_integral(g, params, target, 0.0, &PathSpec::new(*s)))
        .collect::<Result<Vec<_>>>()?;
    Ok((vals[0] - vals[1]).abs().max((vals[0] - vals[2]).abs()))
}

/// Coefficients of a 2D `l` that is affine in `q`:
/// `l = Σ α_mn p1^m p2^n + q1 Σ β_mn p1^m p2^n + q2 Σ γ_mn p1^m p2^n`.
///
/// Coefficients are polynomials in named parameters (constants for numeric
/// models).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly2D {
    pub alpha: BTreeMap<(u32, u32), Poly>,
    pub beta: BTreeMap<(u32, u32), Poly>,
    pub gamma: BTreeMap<(u32, u32), Poly>,
}

fn split_p(poly: &Poly) -> Result<BTreeMap<(u32, u32), Poly>> {
    let mut out = BTreeMap::new();
    for (mono, coeff) in poly.coefficients_in(|s| matches!(s, Symbol::P(_) | Symbol::Q(_))) {
        let mut key = (0, 0);
        for (s, e) in &mono {
            match s {
                Symbol::P(1) => key.0 = *e,
                Symbol::P(2) => key.1 = *e,
                other => return Err(Error::InvalidArgument(format!("unexpected variable {other} in a 2D coefficient"))),
            }
        }
        if !coeff.is_zero() {
            out.insert(key, coeff);
        }
    }
    Ok(out)
}

impl Poly2D {
    /// Split `l(q1,q2,p1,p2)`; fails unless `l` is a polynomial affine in `q`
    /// whose coefficients satisfy `m β_{m,n−1} + n γ_{m−1,n} = 0`.
    pub fn from_l(l: &Expr) -> Result<Self> {
        let poly = Poly::from_expr(l)?;
        let mut out = Poly2D::default();
        for (qm, coeff) in poly.coefficients_in(|s| matches!(s, Symbol::Q(_))) {
            let slot = match qm.as_slice() {
                [] => &mut out.alpha,
                [(Symbol::Q(1), 1)] => &mut out.beta,
                [(Symbol::Q(2), 1)] => &mut out.gamma,
                _ => return Err(Error::NotIntegrable(format!("l is not affine in q1, q2: `{l}`"))),
            };
            *slot = split_p(&coeff)?;
        }
        out.validate()?;
        Ok(out)
    }

    /// Build from coefficient maps, checking the integrability constraint.
    pub fn new(
        alpha: BTreeMap<(u32, u32), Poly>,
        beta: BTreeMap<(u32, u32), Poly>,
        gamma: BTreeMap<(u32, u32), Poly>,
    ) -> Result<Self> {
        let strip = |m: BTreeMap<(u32, u32), Poly>| m.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        let out = Poly2D { alpha: strip(alpha), beta: strip(beta), gamma: strip(gamma) };
        out.validate()?;
        Ok(out)
    }

    fn coeff(map: &BTreeMap<(u32, u32), Poly>, m: u32, n: u32) -> Poly {
        map.get(&(m, n)).cloned().unwrap_or_default()
    }

    /// First `(m, n)` violating `m β_{m,n−1} + n γ_{m−1,n} = 0`, if any.
    pub fn constraint_violation(&self) -> Option<(u32, u32)> {
        let max_m = self.beta.keys().map(|k| k.0).chain(self.gamma.keys().map(|k| k.0 + 1)).max().unwrap_or(0);
        let max_n = self.beta.keys().map(|k| k.1 + 1).chain(self.gamma.keys().map(|k| k.1)).max().unwrap_or(0);
        for m in 1..=max_m {
            for n in 1..=max_n {
                let b = Self::coeff(&self.beta, m, n - 1).scale(&BigRational::from_integer(m.into()));
                let g = Self::coeff(&self.gamma, m - 1, n).scale(&BigRational::from_integer(n.into()));
                if !(&b + &g).is_zero() {
                    return Some((m, n));
                }
            }
        }
        None
    }

    fn validate(&self) -> Result<()> {
        match self.constraint_violation() {
            Some((m, n)) => Err(Error::NotIntegrable(format!("m β_(m,n-1) + n γ_(m-1,n) ≠ 0 at m = {m}, n = {n}"))),
            None => Ok(()),
        }
    }

    /// `β_n ≡ β_{0n}`.
    pub fn beta_n(&self, n: u32) -> Poly {
        Self::coeff(&self.beta, 0, n)
    }

    /// `γ_m ≡ −γ_{m0}`.
    pub fn gamma_m(&self, m: u32) -> Poly {
        -&Self::coeff(&self.gamma, m, 0)
    }

    pub fn to_l_expr(&self) -> Expr {
        let part = |map: &BTreeMap<(u32, u32), Poly>, q: Option<usize>| {
            let mut acc = Poly::zero();
            for ((m, n), c) in map {
                let mut mono: Monomial = Vec::new();
                if *m > 0 {
                    mono.push((Symbol::P(1), *m));
                }
                if *n > 0 {
                    mono.push((Symbol::P(2), *n));
                }
                let mut t = c * &Poly::monomial(mono, BigRational::one());
                if let Some(i) = q {
                    t = &t * &Poly::var(Symbol::Q(i));
                }
                acc = &acc + &t;
            }
            acc
        };
        let total = &(&part(&self.alpha, None) + &part(&self.beta, Some(1))) + &part(&self.gamma, Some(2));
        total.to_expr()
    }
}

fn p_mono(m: u32, n: u32) -> Poly {
    let mut mono: Monomial = Vec::new();
    if m > 0 {
        mono.push((Symbol::P(1), m));
    }
    if n > 0 {
        mono.push((Symbol::P(2), n));
    }
    Poly::monomial(mono, BigRational::one())
}

fn ratio(num: u32, den: u32) -> BigRational {
    BigRational::new(num.into(), den.into())
}

/// `f = −Σ γ_m/(m+1) p1^{m+1} − Σ β_n/(n+1) p2^{n+1} − Σ_{m,n≥1} β_{m,n−1}/n p1^m p2^n + c`.
pub fn solve_f_polynomial_2d(l: &Poly2D, c: &Expr) -> Result<Expr> {
    Ok((f_polynomial_2d(l)?.to_expr() + c.clone()).simplify())
}

/// The polynomial part of [`solve_f_polynomial_2d`] (no constant).
pub fn f_polynomial_2d(l: &Poly2D) -> Result<Poly> {
    l.validate()?;
    let mut f = Poly::zero();
    for (&(m, n), _) in l.gamma.iter().filter(|((_, n), _)| *n == 0) {
        debug_assert_eq!(n, 0);
        let t = l.gamma_m(m).scale(&ratio(1, m + 1));
        f = &f - &(&t * &p_mono(m + 1, 0));
    }
    for (&(m, n), coeff) in &l.beta {
        if m == 0 {
            let t = l.beta_n(n).scale(&ratio(1, n + 1));
            f = &f - &(&t * &p_mono(0, n + 1));
        } else {
            // β_{m,n} contributes to p1^m p2^{n+1} with weight 1/(n+1).
            let t = coeff.scale(&ratio(1, n + 1));
            f = &f - &(&t * &p_mono(m, n + 1));
        }
    }
    Ok(f)
}

/// Solution of `f f' = −a ρ` with `f(0)² = c`.
#[derive(Clone, Debug)]
pub struct RadialSolution {
    pub a: Expr,
    pub c: f64,
    /// `sqrt(c − 2∫_0^ρ a r dr)` in closed form when `a` is polynomial in `ρ`.
    pub closed_form: Option<Expr>,
    integrand: Compiled,
}

impl RadialSolution {
    /// Radicand `c − 2∫_0^ρ a(r) r dr` by adaptive quadrature.
    pub fn radicand(&self, rho: f64) -> Result<f64> {
        let f = |r: f64| -> Result<f64> { Ok(self.integrand.eval_with(&[], &[], &[r])? * r) };
        Ok(self.c - 2.0 * adaptive_simpson(&f, 0.0, rho, 1e-13)?)
    }

    pub fn eval(&self, rho: f64) -> Result<f64> {
        let r = self.radicand(rho)?;
        if r <= 0.0 {
            return Err(Error::NegativeRadicand { rho: self.critical_rho(rho)?, radicand: r });
        }
        Ok(r.sqrt())
    }

    /// First `ρ ∈ [0, upto]` where the radicand reaches zero (bisection).
    fn critical_rho(&self, upto: f64) -> Result<f64> {
        if self.c <= 0.0 {
            return Ok(0.0);
        }
        let n = 64;
        let mut prev = 0.0;
        for k in 1..=n {
            let r = upto * k as f64 / n as f64;
            if self.radicand(r)? <= 0.0 {
                let (mut lo, mut hi) = (prev, r);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if self.radicand(mid)? > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return Ok(hi);
            }
            prev = r;
        }
        Ok(upto)
    }
}

fn rho() -> Symbol {
    Symbol::named(RHO)
}

/// `f(ρ) = (c − 2∫_0^ρ a(r) r dr)^{1/2}`.
pub fn solve_f_radial(a: &Expr, params: &BTreeMap<String, f64>, c: f64) -> Result<RadialSolution> {
    check_radial(a, params)?;
    let integrand = Compiled::with_vars(a, params, &[RHO])?;
    let closed_form = radial_closed_form(a, c);
    Ok(RadialSolution { a: a.clone(), c, closed_form, integrand })
}

fn check_radial(e: &Expr, params: &BTreeMap<String, f64>) -> Result<()> {
    for s in e.symbols() {
        match &s {
            Symbol::Named(n) if n == RHO || params.contains_key(n) => {}
            Symbol::Named(n) => return Err(Error::Model(format!("unbound parameter `{n}`"))),
            other => return Err(Error::InvalidArgument(format!("radial function depends on {other}; use `{RHO}`"))),
        }
    }
    Ok(())
}

/// `c − 2∫_0^ρ a r dr` as a polynomial, when `a` is one.
pub fn radial_radicand_poly(a: &Expr, c: &BigRational) -> Option<Poly> {
    let a = Poly::from_expr(a).ok()?;
    let r = rho();
    let mut out = Poly::constant(c.clone());
    for (mono, coeff) in a.coefficients_in(|s| *s == r) {
        let k = mono.first().map(|(_, e)| *e).unwrap_or(0);
        // −2 ∫ coeff r^{k+1} dr = −2 coeff ρ^{k+2}/(k+2)
        let t = coeff.scale(&BigRational::new((-2).into(), (k + 2).into()));
        out = &out + &(&t * &Poly::monomial(vec![(r.clone(), k + 2)], BigRational::one()));
    }
    Some(out)
}

fn radial_closed_form(a: &Expr, c: f64) -> Option<Expr> {
    let c = crate::expr::rational_from_f64(c)?;
    let radicand = radial_radicand_poly(a, &c)?;
    if let Some(root) = poly_sqrt_in(&radicand, &rho()) {
        return Some(root.to_expr());
    }
    Some(radicand.to_expr().sqrt().simplify())
}

/// Exact square root of a polynomial in `s` whose constant term is a rational square.
pub fn poly_sqrt_in(p: &Poly, s: &Symbol) -> Option<Poly> {
    let by_deg: BTreeMap<u32, Poly> = p
        .coefficients_in(|v| v == s)
        .into_iter()
        .map(|(m, c)| (m.first().map(|(_, e)| *e).unwrap_or(0), c))
        .collect();
    let top = *by_deg.keys().max()?;
    if top % 2 == 1 {
        return None;
    }
    let c0 = by_deg.get(&0)?.as_constant()?;
    let r0 = rational_sqrt(&c0).filter(|r| !r.is_zero())?;
    let inv = (BigRational::from_integer(2.into()) * &r0).recip();
    let mut r: Vec<Poly> = vec![Poly::constant(r0)];
    for k in 1..=top / 2 {
        let mut acc = by_deg.get(&k).cloned().unwrap_or_default();
        for a in 1..k {
            acc = &acc - &(&r[a as usize] * &r[(k - a) as usize]);
        }
        r.push(acc.scale(&inv));
    }
    let root = r.iter().enumerate().fold(Poly::zero(), |acc, (k, c)| {
        &acc + &(c * &Poly::monomial(if k == 0 { vec![] } else { vec![(s.clone(), k as u32)] }, BigRational::one()))
    });
    (&(&root * &root) - p).is_zero().then_some(root)
}

/// `a(ρ) = −f f'/ρ`, with its value at `ρ = 0`.
#[derive(Clone, Debug)]
pub struct DerivedA {
    pub a: Expr,
    /// Limit of `a` at `ρ = 0` (`−f(0) f''(0)`), as an expression in the parameters.
    pub at_zero: Expr,
    /// True when `a` was obtained by exact polynomial division.
    pub exact: bool,
}

impl DerivedA {
    pub fn eval(&self, params: &BTreeMap<String, f64>, rho: f64) -> Result<f64> {
        if rho == 0.0 {
            return Ok(Compiled::new(&self.at_zero, params)?.eval(&[], &[])?);
        }
        Ok(Compiled::with_vars(&self.a, params, &[RHO])?.eval_with(&[], &[], &[rho])?)
    }
}

pub fn solve_a_from_f(f: &Expr, params: &BTreeMap<String, f64>) -> Result<DerivedA> {
    check_radial(f, params)?;
    let r = rho();
    let at0: BTreeMap<Symbol, Expr> = [(r.clone(), Expr::zero())].into();
    let f2 = f.clone().powi(2).simplify();
    if let Ok(poly) = Poly::from_expr(&f2) {
        // f f' = (f²)'/2 must vanish at 0 for a to be bounded.
        let half = poly.derivative(&r).scale(&BigRational::new(1.into(), 2.into()));
        return match half.divide_by_power(&r, 1) {
            Some(q) => {
                let a = (-&q).to_expr();
                let at_zero = a.substitute(&at0).simplify();
                Ok(DerivedA { a, at_zero, exact: true })
            }
            None => Err(Error::InvalidArgument(format!("f'(rho)/rho is unbounded at 0 for f = {f}"))),
        };
    }
    let df = f.diff(&r);
    let d2f = df.diff(&r);
    let slope0 = Compiled::new(&df.substitute(&at0).simplify(), params)?.eval(&[], &[])?;
    if slope0.abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("f'(0) = {slope0} ≠ 0, so f'(rho)/rho is unbounded at 0")));
    }
    let a = (-(f.clone() * df) / Expr::Sym(r.clone())).simplify();
    let at_zero = (-(f.clone() * d2f)).substitute(&at0).simplify();
    Ok(DerivedA { a, at_zero, exact: false })
}
