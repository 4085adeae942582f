//! Exact normal ordering for the operator algebra
//!
//! ```text
//! [q̂_k, c(p̂)] = iħ f(p̂) ∂c/∂p_k,    [q̂_i, q̂_j] = iħ L̂_ij,    [p̂_i, p̂_j] = 0
//! ```
//!
//! with `L̂_ij = S_ij − g_j q̂_i + g_i q̂_j` written with all momenta on the
//! left (or, in the momenta-right ordering, `S_ij − q̂_i g_j + q̂_j g_i`).
//! `iħ` is a formal symbol tracked by its power, so every result is graded.
//! Coefficients are exact rational polynomials in the momenta.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::BigRational;
use serde::Serialize;

use crate::closure;
use crate::error::{Error, Result};
use crate::expr::Symbol;
use crate::poly::Poly;
use crate::structure::{upper_index, GupModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Ordering {
    /// Momenta to the left of positions.
    Left,
    /// Momenta to the right of positions.
    Right,
}

impl std::str::FromStr for Ordering {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(Ordering::Left),
            "right" => Ok(Ordering::Right),
            other => Err(Error::InvalidArgument(format!("unknown ordering `{other}` (left|right)"))),
        }
    }
}

/// Which redex the rewriter picks first; the result must not depend on it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    Leftmost,
    Rightmost,
}

/// Polynomial operator data: `f`, `g = ∇f` and `S`, all in the momenta.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumModel {
    pub dim: usize,
    pub f: Poly,
    pub g: Vec<Poly>,
    /// Upper-triangular `S_ij`.
    pub s: Vec<Poly>,
    pub ordering: Ordering,
}

fn momenta_only(p: &Poly, dim: usize, what: &str) -> Result<()> {
    for s in p.symbols() {
        match s {
            Symbol::P(i) if i >= 1 && i <= dim => {}
            other => return Err(Error::Model(format!("{what} must be a polynomial in p1..p{dim}, found {other}"))),
        }
    }
    Ok(())
}

fn p_sym(i: usize) -> Symbol {
    Symbol::P(i + 1)
}

impl QuantumModel {
    /// `g` is built as the formal gradient of `f`.
    pub fn new(dim: usize, f: Poly, s: Vec<Poly>, ordering: Ordering) -> Result<Self> {
        momenta_only(&f, dim, "f")?;
        if s.len() != dim * (dim - 1) / 2 {
            return Err(Error::Model(format!("S needs {} upper-triangular entries", dim * (dim - 1) / 2)));
        }
        for e in &s {
            momenta_only(e, dim, "S")?;
        }
        let g = (0..dim).map(|i| f.derivative(&p_sym(i))).collect();
        Ok(QuantumModel { dim, f, g, s, ordering })
    }

    /// Replace `g`, e.g. to study models violating the gradient equation.
    pub fn with_g(mut self, g: Vec<Poly>) -> Result<Self> {
        if g.len() != self.dim {
            return Err(Error::Model("g has the wrong length".into()));
        }
        for e in &g {
            momenta_only(e, self.dim, "g")?;
        }
        self.g = g;
        Ok(self)
    }

    /// `f` and `S = L|_{q=0}` from a conforming classical model, with `g = ∇f`.
    pub fn from_gup(m: &GupModel, ordering: Ordering) -> Result<Self> {
        let (f, s, _) = Self::polys_of(m)?;
        Self::new(m.dim(), f, s, ordering)
    }

    /// Like [`QuantumModel::from_gup`] but with `g` read off the `q`-linear part of `L`.
    pub fn from_gup_literal(m: &GupModel, ordering: Ordering) -> Result<Self> {
        let (f, s, g) = Self::polys_of(m)?;
        Self::new(m.dim(), f, s, ordering)?.with_g(g)
    }

    fn polys_of(m: &GupModel) -> Result<(Poly, Vec<Poly>, Vec<Poly>)> {
        let exact = m.exact_params()?;
        let f = Poly::from_expr_with(m.f(), &exact)?;
        if f.symbols().iter().any(|s| matches!(s, Symbol::Q(_))) {
            return Err(Error::Model(format!("f depends on positions: `{}`", m.f())));
        }
        let dec = closure::decompose_l(m)?;
        if !dec.exact {
            return Err(Error::Model("L is not of the form S_ij − g_j q_i + g_i q_j".into()));
        }
        let s = dec.s.iter().map(|e| Poly::from_expr_with(e, &exact)).collect::<Result<Vec<_>>>()?;
        let g = dec.g.iter().map(|e| Poly::from_expr_with(e, &exact)).collect::<Result<Vec<_>>>()?;
        Ok((f, s, g))
    }

    pub fn s(&self, i: usize, j: usize) -> Poly {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.s[upper_index(i, j, self.dim)].clone(),
            std::cmp::Ordering::Greater => -&self.s[upper_index(j, i, self.dim)],
            std::cmp::Ordering::Equal => Poly::zero(),
        }
    }

    /// Words of `L̂_ij` in this model's ordering.
    fn l_words(&self, i: usize, j: usize) -> Vec<Vec<Letter>> {
        let mut out = Vec::new();
        let s = self.s(i, j);
        if !s.is_zero() {
            out.push(vec![Letter::C(s)]);
        }
        let pieces = [(-&self.g[j], i), (self.g[i].clone(), j)];
        for (c, k) in pieces {
            if c.is_zero() {
                continue;
            }
            out.push(match self.ordering {
                Ordering::Left => vec![Letter::C(c), Letter::Q(k)],
                Ordering::Right => vec![Letter::Q(k), Letter::C(c)],
            });
        }
        out
    }

    fn check_op(&self, a: &NormalOp) -> Result<()> {
        for ((_, mono), c) in &a.terms {
            if mono.iter().any(|&i| i >= self.dim) {
                return Err(Error::InvalidArgument("operator uses a position beyond the model dimension".into()));
            }
            momenta_only(c, self.dim, "coefficient")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Letter {
    /// A momentum polynomial.
    C(Poly),
    /// `q̂_i`, 0-based.
    Q(usize),
}

/// `Σ (iħ)^n c(p̂) q̂_{i1} … q̂_{ik}` with `i1 ≤ … ≤ ik` (momenta-left normal form).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NormalOp {
    terms: BTreeMap<(u32, Vec<usize>), Poly>,
}

impl NormalOp {
    pub fn zero() -> Self {
        Self::default()
    }

    /// `q̂_i`, 0-based.
    pub fn q(i: usize) -> Self {
        let mut o = Self::zero();
        o.add_term(0, vec![i], Poly::one());
        o
    }

    /// `p̂_i`, 0-based.
    pub fn p(i: usize) -> Self {
        Self::coeff(Poly::var(p_sym(i)))
    }

    pub fn coeff(c: Poly) -> Self {
        let mut o = Self::zero();
        o.add_term(0, Vec::new(), c);
        o
    }

    /// `q̂_i` for `i < d`, `p̂_{i−d}` otherwise.
    pub fn generator(index: usize, dim: usize) -> Self {
        if index < dim {
            Self::q(index)
        } else {
            Self::p(index - dim)
        }
    }

    fn add_term(&mut self, n: u32, mono: Vec<usize>, c: Poly) {
        if c.is_zero() {
            return;
        }
        let key = (n, mono);
        let merged = match self.terms.remove(&key) {
            Some(old) => &old + &c,
            None => c,
        };
        if !merged.is_zero() {
            self.terms.insert(key, merged);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, &[usize], &Poly)> {
        self.terms.iter().map(|((n, m), c)| (*n, m.as_slice(), c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms with exactly `n` factors of `iħ`.
    pub fn grade(&self, n: u32) -> NormalOp {
        NormalOp { terms: self.terms.iter().filter(|((k, _), _)| *k == n).map(|(k, c)| (k.clone(), c.clone())).collect() }
    }

    pub fn grades(&self) -> Vec<u32> {
        let mut g: Vec<u32> = self.terms.keys().map(|(n, _)| *n).collect();
        g.dedup();
        g
    }

    /// Read as a commutative phase-space polynomial (`q̂ → q`, `p̂ → p`, `iħ → 1`).
    pub fn symbol(&self) -> Poly {
        let mut out = Poly::zero();
        for ((_, mono), c) in &self.terms {
            let mut t = c.clone();
            for &i in mono {
                t = &t * &Poly::var(Symbol::Q(i + 1));
            }
            out = &out + &t;
        }
        out
    }

    pub fn scale(&self, r: &BigRational) -> NormalOp {
        let mut out = NormalOp::zero();
        for ((n, m), c) in &self.terms {
            out.add_term(*n, m.clone(), c.scale(r));
        }
        out
    }

    fn words(&self) -> Vec<(u32, Vec<Letter>)> {
        self.terms
            .iter()
            .map(|((n, mono), c)| {
                let mut w = vec![Letter::C(c.clone())];
                w.extend(mono.iter().map(|&i| Letter::Q(i)));
                (*n, w)
            })
            .collect()
    }
}

impl std::ops::Add for &NormalOp {
    type Output = NormalOp;
    fn add(self, rhs: &NormalOp) -> NormalOp {
        let mut out = self.clone();
        for ((n, m), c) in &rhs.terms {
            out.add_term(*n, m.clone(), c.clone());
        }
        out
    }
}

impl std::ops::Neg for &NormalOp {
    type Output = NormalOp;
    fn neg(self) -> NormalOp {
        NormalOp { terms: self.terms.iter().map(|(k, c)| (k.clone(), -c)).collect() }
    }
}

impl std::ops::Sub for &NormalOp {
    type Output = NormalOp;
    fn sub(self, rhs: &NormalOp) -> NormalOp {
        self + &(-rhs)
    }
}

fn write_terms<'a>(
    out: &mut fmt::Formatter<'_>,
    terms: impl Iterator<Item = (u32, &'a [usize], &'a Poly)>,
    coeff_left: bool,
) -> fmt::Result {
    let mut first = true;
    for (n, mono, c) in terms {
        if !first {
            write!(out, " + ")?;
        }
        first = false;
        let mut parts = Vec::new();
        if n > 0 {
            parts.push(if n == 1 { "(iħ)".to_string() } else { format!("(iħ)^{n}") });
        }
        let coeff = format!("({c})");
        let qs: Vec<String> = mono.iter().map(|i| format!("q{}", i + 1)).collect();
        if coeff_left {
            parts.push(coeff);
            parts.extend(qs);
        } else {
            parts.extend(qs);
            parts.push(coeff);
        }
        write!(out, "{}", parts.join("*"))?;
    }
    if first {
        write!(out, "0")?;
    }
    Ok(())
}

impl fmt::Display for NormalOp {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_terms(out, self.terms(), true)
    }
}

/// `Σ (iħ)^n q̂_{i1} … q̂_{ik} c(p̂)` (momenta-right form), for display and comparison.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RightOp {
    terms: BTreeMap<(u32, Vec<usize>), Poly>,
}

impl RightOp {
    pub fn terms(&self) -> impl Iterator<Item = (u32, &[usize], &Poly)> {
        self.terms.iter().map(|((n, m), c)| (*n, m.as_slice(), c))
    }

    pub fn term(&self, n: u32, mono: &[usize]) -> Poly {
        self.terms.get(&(n, mono.to_vec())).cloned().unwrap_or_default()
    }
}

impl fmt::Display for RightOp {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_terms(out, self.terms(), false)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Left,
    Right,
}

/// Rewrite words to normal form. Returns `(n, q-monomial) -> coefficient`.
fn rewrite(
    m: &QuantumModel,
    words: Vec<(u32, Vec<Letter>)>,
    side: Side,
    strategy: Strategy,
) -> BTreeMap<(u32, Vec<usize>), Poly> {
    let mut done: BTreeMap<(u32, Vec<usize>), Poly> = BTreeMap::new();
    let mut stack = words;
    while let Some((n, w)) = stack.pop() {
        if w.iter().any(|l| matches!(l, Letter::C(c) if c.is_zero())) {
            continue;
        }
        let is_redex = |k: usize| match (&w[k], &w[k + 1]) {
            (Letter::C(_), Letter::C(_)) => true,
            (Letter::Q(j), Letter::Q(i)) => j > i,
            (Letter::Q(_), Letter::C(_)) => side == Side::Left,
            (Letter::C(_), Letter::Q(_)) => side == Side::Right,
        };
        let pos = if w.len() < 2 {
            None
        } else {
            match strategy {
                Strategy::Leftmost => (0..w.len() - 1).find(|&k| is_redex(k)),
                Strategy::Rightmost => (0..w.len() - 1).rev().find(|&k| is_redex(k)),
            }
        };
        let Some(k) = pos else {
            let mut coeff = Poly::one();
            let mut mono = Vec::new();
            for l in w {
                match l {
                    Letter::C(c) => coeff = &coeff * &c,
                    Letter::Q(i) => mono.push(i),
                }
            }
            let key = (n, mono);
            let merged = match done.remove(&key) {
                Some(old) => &old + &coeff,
                None => coeff,
            };
            if !merged.is_zero() {
                done.insert(key, merged);
            }
            continue;
        };
        let splice = |mid: Vec<Letter>| -> Vec<Letter> {
            let mut out = w[..k].to_vec();
            out.extend(mid);
            out.extend_from_slice(&w[k + 2..]);
            out
        };
        match (&w[k], &w[k + 1]) {
            (Letter::C(a), Letter::C(b)) => stack.push((n, splice(vec![Letter::C(a * b)]))),
            (Letter::Q(j), Letter::Q(i)) => {
                let (i, j) = (*i, *j);
                stack.push((n, splice(vec![Letter::Q(i), Letter::Q(j)])));
                // q_j q_i = q_i q_j + iħ L̂_ji
                for lw in m.l_words(j, i) {
                    stack.push((n + 1, splice(lw)));
                }
            }
            (Letter::Q(i), Letter::C(c)) => {
                // q_i c = c q_i + iħ f ∂_i c
                let (i, c) = (*i, c.clone());
                let dc = c.derivative(&p_sym(i));
                stack.push((n, splice(vec![Letter::C(c), Letter::Q(i)])));
                if !dc.is_zero() {
                    stack.push((n + 1, splice(vec![Letter::C(&m.f * &dc)])));
                }
            }
            (Letter::C(c), Letter::Q(i)) => {
                // c q_i = q_i c − iħ f ∂_i c
                let (i, c) = (*i, c.clone());
                let dc = c.derivative(&p_sym(i));
                stack.push((n, splice(vec![Letter::Q(i), Letter::C(c)])));
                if !dc.is_zero() {
                    stack.push((n + 1, splice(vec![Letter::C(-&(&m.f * &dc))])));
                }
            }
        }
    }
    done
}

/// Normal form of a sum of words `(iħ-power, letters)`.
pub fn normalize_words(m: &QuantumModel, words: Vec<(u32, Vec<Letter>)>, strategy: Strategy) -> NormalOp {
    NormalOp { terms: rewrite(m, words, Side::Left, strategy) }
}

pub fn normalize(m: &QuantumModel, word: &[Letter]) -> NormalOp {
    normalize_words(m, vec![(0, word.to_vec())], Strategy::Leftmost)
}

/// Re-express a normal form with all momenta on the right.
pub fn to_right_form(m: &QuantumModel, a: &NormalOp) -> RightOp {
    RightOp { terms: rewrite(m, a.words(), Side::Right, Strategy::Leftmost) }
}

pub fn product(m: &QuantumModel, a: &NormalOp, b: &NormalOp) -> NormalOp {
    let mut words = Vec::new();
    for (na, wa) in a.words() {
        for (nb, wb) in b.words() {
            let mut w = wa.clone();
            w.extend(wb);
            words.push((na + nb, w));
        }
    }
    normalize_words(m, words, Strategy::Leftmost)
}

/// `normalize(AB − BA)`.
pub fn commutator(m: &QuantumModel, a: &NormalOp, b: &NormalOp) -> Result<NormalOp> {
    m.check_op(a)?;
    m.check_op(b)?;
    Ok(&product(m, a, b) - &product(m, b, a))
}

/// `[A,[B,C]] + [B,[C,A]] + [C,[A,B]]`.
pub fn quantum_jacobi_residual(m: &QuantumModel, a: &NormalOp, b: &NormalOp, c: &NormalOp) -> Result<NormalOp> {
    let t1 = commutator(m, a, &commutator(m, b, c)?)?;
    let t2 = commutator(m, b, &commutator(m, c, a)?)?;
    let t3 = commutator(m, c, &commutator(m, a, b)?)?;
    Ok(&(&t1 + &t2) + &t3)
}

/// Classical Jacobi sum `{x^a,{x^b,x^c}} + cyclic` as an exact polynomial,
/// for the brackets with `π^{q_i q_j} = S_ij − g_j q_i + g_i q_j`, `π^{q_i p_j} = f δ_ij`.
pub fn classical_jacobi_poly(m: &QuantumModel, a: usize, b: usize, c: usize) -> Poly {
    let d = m.dim;
    let coord = |k: usize| if k < d { Symbol::Q(k + 1) } else { Symbol::P(k - d + 1) };
    let pi = |x: usize, y: usize| -> Poly {
        match (x < d, y < d) {
            (true, true) => {
                if x == y {
                    Poly::zero()
                } else {
                    let lin = &(&(-&m.g[y]) * &Poly::var(Symbol::Q(x + 1))) + &(&m.g[x] * &Poly::var(Symbol::Q(y + 1)));
                    &m.s(x, y) + &lin
                }
            }
            (true, false) if y - d == x => m.f.clone(),
            (false, true) if x - d == y => -&m.f,
            _ => Poly::zero(),
        }
    };
    let br = |x: usize, e: &Poly| -> Poly {
        (0..2 * d).fold(Poly::zero(), |acc, k| &acc + &(&pi(x, k) * &e.derivative(&coord(k))))
    };
    &(&br(a, &pi(b, c)) + &br(b, &pi(c, a))) + &br(c, &pi(a, b))
}

/// Which generator triples to test.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Triples {
    All,
    QOnly,
}

impl std::str::FromStr for Triples {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Triples::All),
            "q-only" => Ok(Triples::QOnly),
            other => Err(Error::InvalidArgument(format!("unknown triple set `{other}` (all|q-only)"))),
        }
    }
}

pub fn generator_name(index: usize, dim: usize) -> String {
    if index < dim {
        format!("q{}", index + 1)
    } else {
        format!("p{}", index - dim + 1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TripleResidual {
    pub triple: [String; 3],
    /// Non-zero grades only: `iħ`-power and the coefficient operator.
    pub grades: BTreeMap<u32, String>,
    pub zero: bool,
}

/// Graded residuals for every triple `a < b < c` of generators (in parallel).
pub fn jacobi_all(m: &QuantumModel, which: Triples) -> Result<Vec<TripleResidual>> {
    let n = match which {
        Triples::All => 2 * m.dim,
        Triples::QOnly => m.dim,
    };
    let triples: Vec<(usize, usize, usize)> =
        (0..n).flat_map(|i| (i + 1..n).flat_map(move |j| (j + 1..n).map(move |k| (i, j, k)))).collect();
    crate::sampling::try_map(&triples, |&(a, b, c)| {
        let g = |k| NormalOp::generator(k, m.dim);
        let r = quantum_jacobi_residual(m, &g(a), &g(b), &g(c))?;
        let grades = r.grades().into_iter().map(|n| (n, r.grade(n).to_string())).collect();
        Ok(TripleResidual {
            triple: [generator_name(a, m.dim), generator_name(b, m.dim), generator_name(c, m.dim)],
            grades,
            zero: r.is_zero(),
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn undeformed(d: usize) -> QuantumModel {
        QuantumModel::new(d, Poly::one(), vec![Poly::zero(); d * (d - 1) / 2], Ordering::Left).unwrap()
    }

    #[test]
    fn canonical_commutator() {
        let m = undeformed(1);
        let c = commutator(&m, &NormalOp::q(0), &NormalOp::p(0)).unwrap();
        let mut expect = NormalOp::zero();
        expect.add_term(1, vec![], Poly::one());
        assert_eq!(c, expect);
    }

    #[test]
    fn normal_form_is_idempotent() {
        let m = undeformed(2);
        let w = vec![Letter::Q(1), Letter::C(Poly::var(Symbol::P(2))), Letter::Q(0)];
        let a = normalize(&m, &w);
        assert_eq!(normalize_words(&m, a.words(), Strategy::Rightmost), a);
    }

    #[test]
    fn display_uses_one_based_positions() {
        let m = undeformed(2);
        let a = normalize(&m, &[Letter::Q(1), Letter::Q(0)]);
        assert_eq!(a.to_string(), "(1)*q1*q2");
        assert_eq!(NormalOp::zero().to_string(), "0");
    }

    #[test]
    fn dimension_is_checked() {
        let m = undeformed(1);
        assert!(commutator(&m, &NormalOp::q(3), &NormalOp::p(0)).is_err());
    }

    #[test]
    fn ordering_parses() {
        assert_eq!("left".parse::<Ordering>().unwrap(), Ordering::Left);
        assert!("weyl".parse::<Ordering>().is_err());
    }
}
