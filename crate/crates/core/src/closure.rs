//! Closure of the symplectic form: the equation systems in `f` and `L`,
//! the canonical `S`/`g` decomposition of `L`, and the Jacobi identity.
//!
//! All residuals use symbolic derivatives evaluated numerically, so an exact
//! zero shows up as rounding noise only.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{Compiled, Expr, PhasePoint, Symbol};
use crate::report::{CheckEntry, CheckReport};
use crate::sampling::{self, Region, SamplingInfo, Worst};
use crate::structure::{upper_index, upper_pairs, GupModel};

/// Default pass threshold for closure residuals.
pub const TOLERANCE: f64 = 1e-9;
/// Threshold for "exactly affine" decompositions.
pub const EXACT_TOLERANCE: f64 = 1e-10;

/// `L_ij = S_ij − g_j q_i + g_i q_j`.
#[derive(Clone, Debug)]
pub struct LDecomposition {
    /// Upper-triangular `S_ij = L_ij|_{q=0}`, same order as the model's `L`.
    pub s: Vec<Expr>,
    /// `g_i = ∂L_ij/∂q_j` for the first `j ≠ i`.
    pub g: Vec<Expr>,
    pub exact: bool,
    /// Largest second `q`-derivative of any `L_ij`.
    pub curvature: f64,
    /// Largest disagreement of `∂L_ij/∂q_j` across `j`.
    pub inconsistency: f64,
    /// Largest `|L − (S − g_j q_i + g_i q_j)|`.
    pub reconstruction: f64,
}

impl LDecomposition {
    pub fn s(&self, i: usize, j: usize) -> Expr {
        let d = self.g.len();
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.s[upper_index(i, j, d)].clone(),
            std::cmp::Ordering::Greater => (-self.s[upper_index(j, i, d)].clone()).simplify(),
            std::cmp::Ordering::Equal => Expr::zero(),
        }
    }

    /// Largest of the three conformity defects.
    pub fn defect(&self) -> f64 {
        self.curvature.max(self.inconsistency).max(self.reconstruction)
    }
}

fn q_zero(d: usize) -> BTreeMap<Symbol, Expr> {
    (1..=d).map(|i| (Symbol::Q(i), Expr::zero())).collect()
}

/// Decompose `L` on the model's own sampling box.
pub fn decompose_l(m: &GupModel) -> Result<LDecomposition> {
    let pts = sampling::sample_points(m.domain(), sampling::DEFAULT_POINTS, sampling::DEFAULT_SEED, m.params());
    decompose_l_at(m, &pts)
}

pub fn decompose_l_at(m: &GupModel, points: &[PhasePoint]) -> Result<LDecomposition> {
    let d = m.dim();
    let zero_q = q_zero(d);
    let s: Vec<Expr> = m.l_upper().iter().map(|e| e.substitute(&zero_q).simplify()).collect();
    let g: Vec<Expr> = (0..d)
        .map(|i| match (0..d).find(|&j| j != i) {
            Some(j) => m.l(i, j).diff(&Symbol::Q(j + 1)),
            None => Expr::zero(),
        })
        .collect();

    let mut second = Vec::new();
    for e in m.l_upper() {
        for a in 1..=d {
            let da = e.diff(&Symbol::Q(a));
            for b in a..=d {
                let dab = da.diff(&Symbol::Q(b));
                if !dab.is_zero() {
                    second.push(m.compile(&dab)?);
                }
            }
        }
    }
    let mut consistency = Vec::new();
    for i in 0..d {
        for j in (0..d).filter(|&j| j != i) {
            let e = (m.l(i, j).diff(&Symbol::Q(j + 1)) - g[i].clone()).simplify();
            if !e.is_zero() {
                consistency.push(m.compile(&e)?);
            }
        }
    }
    let mut recon = Vec::new();
    for (i, j) in upper_pairs(d) {
        let model = s[upper_index(i, j, d)].clone() - g[j].clone() * Expr::q(i + 1) + g[i].clone() * Expr::q(j + 1);
        let e = (m.l(i, j) - model).simplify();
        if !e.is_zero() {
            recon.push(m.compile(&e)?);
        }
    }
    let worst = |set: &[Compiled]| -> Result<f64> {
        if set.is_empty() {
            return Ok(0.0);
        }
        Ok(sampling::max_over(points, |x| max_abs(set, x))?.value)
    };
    let (curvature, inconsistency, reconstruction) = (worst(&second)?, worst(&consistency)?, worst(&recon)?);
    let exact = curvature <= EXACT_TOLERANCE && inconsistency <= EXACT_TOLERANCE && reconstruction <= EXACT_TOLERANCE;
    Ok(LDecomposition { s, g, exact, curvature, inconsistency, reconstruction })
}

fn max_abs(set: &[Compiled], x: &PhasePoint) -> Result<f64> {
    let mut m: f64 = 0.0;
    for c in set {
        let v = c.eval(&x.q, &x.p)?.abs();
        m = if v.is_nan() { f64::INFINITY } else { m.max(v) };
    }
    Ok(m)
}

/// Compiled `f`, `L` and all their first derivatives.
struct Jet {
    d: usize,
    f: Compiled,
    df: Vec<Compiled>,
    l: Vec<Compiled>,
    dl: Vec<Vec<Compiled>>,
}

/// Numeric values of a [`Jet`] at one point.
struct JetAt {
    d: usize,
    f: f64,
    df: Vec<f64>,
    l: Vec<f64>,
    dl: Vec<Vec<f64>>,
}

impl Jet {
    fn new(m: &GupModel) -> Result<Self> {
        Jet::from_parts(m, m.f(), m.l_upper())
    }

    fn from_parts(m: &GupModel, f: &Expr, l: &[Expr]) -> Result<Self> {
        let d = m.dim();
        let grad = |e: &Expr| -> Result<Vec<Compiled>> {
            (0..2 * d).map(|k| m.compile(&e.diff(&Symbol::coordinate(k, d)))).collect()
        };
        Ok(Jet {
            d,
            f: m.compile(f)?,
            df: grad(f)?,
            l: l.iter().map(|e| m.compile(e)).collect::<Result<_>>()?,
            dl: l.iter().map(grad).collect::<Result<_>>()?,
        })
    }

    fn at(&self, x: &PhasePoint) -> Result<JetAt> {
        let ev = |c: &Compiled| c.eval(&x.q, &x.p);
        Ok(JetAt {
            d: self.d,
            f: ev(&self.f)?,
            df: self.df.iter().map(ev).collect::<Result<_, _>>()?,
            l: self.l.iter().map(ev).collect::<Result<_, _>>()?,
            dl: self.dl.iter().map(|g| g.iter().map(ev).collect::<Result<Vec<_>, _>>()).collect::<Result<_, _>>()?,
        })
    }
}

impl JetAt {
    fn l(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.l[upper_index(i, j, self.d)],
            std::cmp::Ordering::Greater => -self.l[upper_index(j, i, self.d)],
            std::cmp::Ordering::Equal => 0.0,
        }
    }

    /// `∂L_ij/∂x^e`.
    fn dl(&self, i: usize, j: usize, e: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.dl[upper_index(i, j, self.d)][e],
            std::cmp::Ordering::Greater => -self.dl[upper_index(j, i, self.d)][e],
            std::cmp::Ordering::Equal => 0.0,
        }
    }

    /// Poisson bivector entry `π^{ab}`.
    fn pi(&self, a: usize, b: usize) -> f64 {
        let d = self.d;
        match (a < d, b < d) {
            (true, true) => self.l(a, b),
            (true, false) if b - d == a => self.f,
            (false, true) if a - d == b => -self.f,
            _ => 0.0,
        }
    }

    /// `∂π^{ab}/∂x^e`.
    fn dpi(&self, a: usize, b: usize, e: usize) -> f64 {
        let d = self.d;
        match (a < d, b < d) {
            (true, true) => self.dl(a, b, e),
            (true, false) if b - d == a => self.df[e],
            (false, true) if a - d == b => -self.df[e],
            _ => 0.0,
        }
    }

    /// `{x^a, π^{bc}}`.
    fn bracket_coord_pi(&self, a: usize, b: usize, c: usize) -> f64 {
        (0..2 * self.d).map(|e| self.pi(a, e) * self.dpi(b, c, e)).sum()
    }

    fn jacobi(&self, a: usize, b: usize, c: usize) -> f64 {
        self.bracket_coord_pi(a, b, c) + self.bracket_coord_pi(b, c, a) + self.bracket_coord_pi(c, a, b)
    }

    /// `2(f_k L_ij + f_i L_jk + f_j L_ki) − f(∂_k L_ij + ∂_i L_jk + ∂_j L_ki)`, derivatives in `p`.
    fn strange(&self, i: usize, j: usize, k: usize) -> f64 {
        let d = self.d;
        let fp = |n: usize| self.df[d + n];
        let dlp = |a: usize, b: usize, n: usize| self.dl(a, b, d + n);
        2.0 * (fp(k) * self.l(i, j) + fp(i) * self.l(j, k) + fp(j) * self.l(k, i))
            - self.f * (dlp(i, j, k) + dlp(j, k, i) + dlp(k, i, j))
    }
}

fn triples(n: usize) -> impl Iterator<Item = (usize, usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).flat_map(move |j| (j + 1..n).map(move |k| (i, j, k))))
}

/// `max |∂f/∂q_k|`.
pub fn q_independence_residual(m: &GupModel, points: &[PhasePoint]) -> Result<Worst> {
    let d = m.dim();
    let set: Vec<Compiled> = (1..=d)
        .map(|k| m.f().diff(&Symbol::Q(k)))
        .filter(|e| !e.is_zero())
        .map(|e| m.compile(&e))
        .collect::<Result<_>>()?;
    if set.is_empty() {
        return Ok(Worst::none());
    }
    sampling::max_over(points, |x| max_abs(&set, x))
}

/// `max |∂f/∂p_i − g_i|`; requires a conforming `L`.
pub fn gradient_residual(m: &GupModel, points: &[PhasePoint]) -> Result<Worst> {
    let dec = decompose_l_at(m, points)?;
    gradient_residual_with(m, &dec, points)
}

pub fn gradient_residual_with(m: &GupModel, dec: &LDecomposition, points: &[PhasePoint]) -> Result<Worst> {
    if !dec.exact {
        return Err(Error::Model(format!("nonconforming L (defect {:.3e})", dec.defect())));
    }
    let d = m.dim();
    let set: Vec<Compiled> = (0..d)
        .map(|i| (m.f().diff(&Symbol::P(i + 1)) - dec.g[i].clone()).simplify())
        .filter(|e| !e.is_zero())
        .map(|e| m.compile(&e))
        .collect::<Result<_>>()?;
    if set.is_empty() {
        return Ok(Worst::none());
    }
    sampling::max_over(points, |x| max_abs(&set, x))
}

/// Residuals of the cyclic equation in `L` and of its `S`-only form.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrangeResiduals {
    pub full: Worst,
    pub s_form: Worst,
}

/// Zero for `d < 3`, where the equation is absent.
pub fn strange_residual(m: &GupModel, points: &[PhasePoint]) -> Result<StrangeResiduals> {
    let dec = decompose_l_at(m, points)?;
    strange_residual_with(m, &dec, points)
}

pub fn strange_residual_with(m: &GupModel, dec: &LDecomposition, points: &[PhasePoint]) -> Result<StrangeResiduals> {
    let d = m.dim();
    if d < 3 {
        return Ok(StrangeResiduals { full: Worst::none(), s_form: Worst::none() });
    }
    let full = Jet::new(m)?;
    let s_only = Jet::from_parts(m, m.f(), &dec.s)?;
    let eval = |jet: &Jet| {
        sampling::max_over(points, |x| {
            let at = jet.at(x)?;
            Ok(triples(d).map(|(i, j, k)| at.strange(i, j, k).abs()).fold(0.0, f64::max))
        })
    };
    Ok(StrangeResiduals { full: eval(&full)?, s_form: eval(&s_only)? })
}

/// `max |{x^a,{x^b,x^c}} + cyclic|` over coordinate triples `a < b < c`.
pub fn jacobi_residual(m: &GupModel, points: &[PhasePoint]) -> Result<Worst> {
    let n = 2 * m.dim();
    if n < 3 {
        return Ok(Worst::none());
    }
    let jet = Jet::new(m)?;
    sampling::max_over(points, |x| {
        let at = jet.at(x)?;
        Ok(triples(n).map(|(a, b, c)| at.jacobi(a, b, c).abs()).fold(0.0, f64::max))
    })
}

/// Jacobi sum for one coordinate triple at one point.
pub fn jacobi_component(m: &GupModel, a: usize, b: usize, c: usize, x: &PhasePoint) -> Result<f64> {
    Ok(Jet::new(m)?.at(x)?.jacobi(a, b, c))
}

/// The four components of the closure 3-form in `d = 2`, computed directly
/// from `h = 1/f` and `l = L_12`: `(123) ∂h/∂q2`, `(124) −∂h/∂q1`,
/// `(134) ∂(h²l)/∂q1 − ∂h/∂p2`, `(234) ∂(h²l)/∂q2 + ∂h/∂p1`.
pub fn closure_form_2d(m: &GupModel, x: &PhasePoint) -> Result<[f64; 4]> {
    if m.dim() != 2 {
        return Err(Error::InvalidArgument("closure_form_2d needs d = 2".into()));
    }
    let h = Expr::one() / m.f().clone();
    let h2l = h.clone().powi(2) * m.l(0, 1);
    let ev = |e: Expr| -> Result<f64> { Ok(m.compile(&e.simplify())?.eval(&x.q, &x.p)?) };
    let d = |e: &Expr, s: Symbol| e.diff(&s);
    Ok([
        ev(d(&h, Symbol::Q(2)))?,
        ev(-d(&h, Symbol::Q(1)))?,
        ev(d(&h2l, Symbol::Q(1)) - d(&h, Symbol::P(2)))?,
        ev(d(&h2l, Symbol::Q(2)) + d(&h, Symbol::P(1)))?,
    ])
}

/// The same four components assembled from the general systems:
/// `q`-derivatives of `f` and the gradient defects `f_i − g_i`.
pub fn closure_form_2d_from_systems(m: &GupModel, x: &PhasePoint) -> Result<[f64; 4]> {
    if m.dim() != 2 {
        return Err(Error::InvalidArgument("closure_form_2d_from_systems needs d = 2".into()));
    }
    let at = Jet::new(m)?.at(x)?;
    let (f, l) = (at.f, at.l(0, 1));
    let (fq1, fq2, fp1, fp2) = (at.df[0], at.df[1], at.df[2], at.df[3]);
    // g_1 = ∂L_12/∂q_2, g_2 = ∂L_21/∂q_1
    let (g1, g2) = (at.dl(0, 1, 1), at.dl(1, 0, 0));
    let (f2, f3) = (f * f, f * f * f);
    Ok([
        -fq2 / f2,
        fq1 / f2,
        (fp2 - g2) / f2 - 2.0 * l * fq1 / f3,
        -(fp1 - g1) / f2 - 2.0 * l * fq2 / f3,
    ])
}

/// Per-system closure verdicts plus the independent Jacobi route.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClosureReport {
    pub q_independence: Worst,
    pub conformity: f64,
    pub gradient: Option<Worst>,
    pub strange: Option<StrangeResiduals>,
    pub jacobi: Worst,
    pub tolerance: f64,
    /// Verdict of the equation systems alone (q-independence, conformity, gradient, strange).
    pub systems_pass: bool,
    pub jacobi_pass: bool,
    pub pass: bool,
    pub checks: CheckReport,
}

pub fn closure_check(m: &GupModel, region: &Region, n: usize, seed: u64) -> Result<ClosureReport> {
    let pts = sampling::sample_points(region, n, seed, m.params());
    closure_check_at(m, &pts, TOLERANCE, Some(SamplingInfo { seed, n, region: region.clone() }))
}

pub fn closure_check_at(m: &GupModel, points: &[PhasePoint], tol: f64, info: Option<SamplingInfo>) -> Result<ClosureReport> {
    let d = m.dim();
    let mut checks = Vec::new();
    let jacobi = jacobi_residual(m, points)?;
    if d == 1 {
        // Every 2-form on a 2-manifold is closed.
        let q = Worst::none();
        checks.push(CheckEntry::new("closure: d = 1", 0.0, tol).with_note("every 2-form is closed in two dimensions"));
        checks.push(CheckEntry::from_worst("jacobi", &jacobi, tol));
        let jacobi_pass = jacobi.value <= tol;
        return Ok(ClosureReport {
            q_independence: q,
            conformity: 0.0,
            gradient: Some(Worst::none()),
            strange: None,
            jacobi,
            tolerance: tol,
            systems_pass: true,
            jacobi_pass,
            pass: jacobi_pass,
            checks: CheckReport::new(checks, info),
        });
    }

    let q_independence = q_independence_residual(m, points)?;
    checks.push(CheckEntry::from_worst("q-independence", &q_independence, tol));
    let dec = decompose_l_at(m, points)?;
    checks.push(CheckEntry::new("L conformity", dec.defect(), EXACT_TOLERANCE));
    let (gradient, strange) = if dec.exact {
        let g = gradient_residual_with(m, &dec, points)?;
        checks.push(CheckEntry::from_worst("gradient", &g, tol));
        let s = strange_residual_with(m, &dec, points)?;
        if d >= 3 {
            checks.push(CheckEntry::from_worst("strange", &s.full, tol));
            checks.push(CheckEntry::from_worst("strange (S form)", &s.s_form, tol));
        }
        (Some(g), Some(s))
    } else {
        checks.push(CheckEntry::failed("gradient", "nonconforming L"));
        if d >= 3 {
            checks.push(CheckEntry::failed("strange", "nonconforming L"));
        }
        (None, None)
    };
    let systems_pass = checks.iter().all(|c| c.pass);
    checks.push(CheckEntry::from_worst("jacobi", &jacobi, tol));
    let jacobi_pass = jacobi.value <= tol;
    Ok(ClosureReport {
        q_independence,
        conformity: dec.defect(),
        gradient,
        strange,
        jacobi,
        tolerance: tol,
        systems_pass,
        jacobi_pass,
        pass: systems_pass && jacobi_pass,
        checks: CheckReport::new(checks, info),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse;

    fn pts(d: usize) -> Vec<PhasePoint> {
        sampling::sample_points(&Region::default_for(d), 50, 11, &BTreeMap::new())
    }

    #[test]
    fn triples_are_increasing() {
        let t: Vec<_> = triples(4).collect();
        assert_eq!(t, vec![(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]);
    }

    #[test]
    fn s_accessor_is_antisymmetric() {
        let m = GupModel::new(3, Expr::one(), vec![parse("p3").unwrap(), Expr::zero(), Expr::zero()], BTreeMap::new()).unwrap();
        let dec = decompose_l_at(&m, &pts(3)).unwrap();
        assert_eq!(dec.s(0, 1), parse("p3").unwrap());
        assert_eq!(dec.s(1, 0).to_string(), "-p3");
    }

    #[test]
    fn spectator_q_dependence_is_nonconforming() {
        let m = GupModel::new(3, Expr::one(), vec![parse("q3").unwrap(), Expr::zero(), Expr::zero()], BTreeMap::new()).unwrap();
        let dec = decompose_l_at(&m, &pts(3)).unwrap();
        assert!(!dec.exact);
        assert!(gradient_residual_with(&m, &dec, &pts(3)).is_err());
    }
}
