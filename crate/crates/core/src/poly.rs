//! Sparse multivariate polynomials with exact rational coefficients.
//!
//! Variables are [`Symbol`]s, so the same type serves momentum polynomials,
//! full phase-space polynomials and polynomials in named parameters.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::expr::{Expr, Symbol};

/// Sorted `(symbol, exponent)` pairs with positive exponents.
pub type Monomial = Vec<(Symbol, u32)>;

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Poly {
    terms: BTreeMap<Monomial, BigRational>,
}

fn mono_mul(a: &Monomial, b: &Monomial) -> Monomial {
    let mut out: BTreeMap<Symbol, u32> = a.iter().cloned().collect();
    for (s, e) in b {
        *out.entry(s.clone()).or_insert(0) += e;
    }
    out.into_iter().collect()
}

impl Poly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        let mut p = Self::zero();
        p.add_term(Vec::new(), c);
        p
    }

    pub fn int(n: i64) -> Self {
        Self::constant(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn var(s: Symbol) -> Self {
        let mut p = Self::zero();
        p.add_term(vec![(s, 1)], BigRational::one());
        p
    }

    pub fn monomial(m: Monomial, c: BigRational) -> Self {
        let mut p = Self::zero();
        p.add_term(m, c);
        p
    }

    /// Add `c * m` in place, dropping the term if it cancels.
    pub fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// The value if the polynomial has no variables.
    pub fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => self.terms.get(&Vec::new()).cloned(),
            _ => None,
        }
    }

    pub fn symbols(&self) -> BTreeSet<Symbol> {
        self.terms.keys().flat_map(|m| m.iter().map(|(s, _)| s.clone())).collect()
    }

    pub fn scale(&self, c: &BigRational) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly { terms: self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect() }
    }

    pub fn pow(&self, n: u32) -> Poly {
        let mut out = Poly::one();
        for _ in 0..n {
            out = &out * self;
        }
        out
    }

    pub fn derivative(&self, s: &Symbol) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            if let Some(pos) = m.iter().position(|(v, _)| v == s) {
                let e = m[pos].1;
                let mut dm = m.clone();
                if e == 1 {
                    dm.remove(pos);
                } else {
                    dm[pos].1 = e - 1;
                }
                out.add_term(dm, c * BigRational::from_integer(BigInt::from(e)));
            }
        }
        out
    }

    pub fn degree_in(&self, s: &Symbol) -> u32 {
        self.terms
            .keys()
            .map(|m| m.iter().find(|(v, _)| v == s).map_or(0, |(_, e)| *e))
            .max()
            .unwrap_or(0)
    }

    /// Replace symbols by polynomials (simultaneously).
    pub fn substitute(&self, bindings: &BTreeMap<Symbol, Poly>) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let mut term = Poly::constant(c.clone());
            let mut kept: Monomial = Vec::new();
            for (s, e) in m {
                match bindings.get(s) {
                    Some(p) => term = &term * &p.pow(*e),
                    None => kept.push((s.clone(), *e)),
                }
            }
            out = &out + &(&term * &Poly::monomial(kept, BigRational::one()));
        }
        out
    }

    /// Group terms by their part in the symbols selected by `pred`.
    ///
    /// Returns `monomial in selected symbols -> coefficient polynomial in the rest`.
    pub fn coefficients_in(&self, pred: impl Fn(&Symbol) -> bool) -> BTreeMap<Monomial, Poly> {
        let mut out: BTreeMap<Monomial, Poly> = BTreeMap::new();
        for (m, c) in &self.terms {
            let (sel, rest): (Monomial, Monomial) = m.iter().cloned().partition(|(s, _)| pred(s));
            out.entry(sel).or_default().add_term(rest, c.clone());
        }
        out
    }

    /// Exact division by `s^k`; `None` if some term has lower degree in `s`.
    pub fn divide_by_power(&self, s: &Symbol, k: u32) -> Option<Poly> {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let mut dm = m.clone();
            if k > 0 {
                let pos = dm.iter().position(|(v, _)| v == s)?;
                let e = dm[pos].1;
                match e.cmp(&k) {
                    std::cmp::Ordering::Less => return None,
                    std::cmp::Ordering::Equal => {
                        dm.remove(pos);
                    }
                    std::cmp::Ordering::Greater => dm[pos].1 = e - k,
                }
            }
            out.add_term(dm, c.clone());
        }
        Some(out)
    }

    pub fn eval(&self, value: impl Fn(&Symbol) -> f64) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                let coeff = c.to_f64().unwrap_or(f64::NAN);
                m.iter().fold(coeff, |acc, (s, e)| acc * value(s).powi(*e as i32))
            })
            .sum()
    }

    pub fn to_expr(&self) -> Expr {
        let mut out: Option<Expr> = None;
        for (m, c) in &self.terms {
            let body = m
                .iter()
                .map(|(s, e)| {
                    let v = Expr::Sym(s.clone());
                    if *e == 1 {
                        v
                    } else {
                        v.powi(*e as i64)
                    }
                })
                .reduce(|a, b| a * b);
            let term = match body {
                None => Expr::Num(c.clone()),
                Some(b) if c.is_one() => b,
                Some(b) => Expr::Num(c.clone()) * b,
            };
            out = Some(match out {
                None => term,
                Some(acc) => acc + term,
            });
        }
        out.unwrap_or_else(Expr::zero).simplify()
    }

    /// Expand an expression into a polynomial.
    pub fn from_expr(e: &Expr) -> Result<Poly> {
        Self::from_expr_with(e, &BTreeMap::new())
    }

    /// Expand with named symbols in `values` replaced by exact constants.
    pub fn from_expr_with(e: &Expr, values: &BTreeMap<String, BigRational>) -> Result<Poly> {
        let nonpoly = || Error::NonPolynomial(e.to_string());
        Ok(match e {
            Expr::Num(r) => Poly::constant(r.clone()),
            Expr::Sym(Symbol::Named(n)) if values.contains_key(n) => Poly::constant(values[n].clone()),
            Expr::Sym(s) => Poly::var(s.clone()),
            Expr::Neg(a) => -&Self::from_expr_with(a, values)?,
            Expr::Add(a, b) => &Self::from_expr_with(a, values)? + &Self::from_expr_with(b, values)?,
            Expr::Sub(a, b) => &Self::from_expr_with(a, values)? - &Self::from_expr_with(b, values)?,
            Expr::Mul(a, b) => &Self::from_expr_with(a, values)? * &Self::from_expr_with(b, values)?,
            Expr::Div(a, b) => {
                let den = Self::from_expr_with(b, values)?.as_constant().ok_or_else(nonpoly)?;
                if den.is_zero() {
                    return Err(nonpoly());
                }
                Self::from_expr_with(a, values)?.scale(&den.recip())
            }
            Expr::Pow(a, n) => {
                let base = Self::from_expr_with(a, values)?;
                if *n >= 0 {
                    base.pow(*n as u32)
                } else {
                    let c = base.as_constant().filter(|c| !c.is_zero()).ok_or_else(nonpoly)?;
                    Poly::constant(num_traits::pow(c.recip(), n.unsigned_abs() as usize))
                }
            }
            Expr::Sqrt(a) => {
                let inner = Self::from_expr_with(a, values)?;
                let c = inner.as_constant().ok_or_else(nonpoly)?;
                Poly::constant(rational_sqrt(&c).ok_or_else(nonpoly)?)
            }
            Expr::Exp(a) => {
                let inner = Self::from_expr_with(a, values)?;
                if inner.is_zero() {
                    Poly::one()
                } else {
                    return Err(nonpoly());
                }
            }
        })
    }
}

pub(crate) fn rational_sqrt(r: &BigRational) -> Option<BigRational> {
    if r.is_negative() {
        return None;
    }
    let (n, d) = (r.numer().sqrt(), r.denom().sqrt());
    (&n * &n == *r.numer() && &d * &d == *r.denom()).then(|| BigRational::new(n, d))
}

impl ops::Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl ops::Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }
}

impl ops::Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(mono_mul(ma, mb), ca * cb);
            }
        }
        out
    }
}

impl ops::Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly { terms: self.terms.iter().map(|(m, c)| (m.clone(), -c.clone())).collect() }
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_expr())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn poly(s: &str) -> Poly {
        Poly::from_expr(&parse(s).unwrap()).unwrap()
    }

    #[test]
    fn expansion_and_equality() {
        assert_eq!(poly("(p1 + p2)^2"), poly("p1^2 + 2*p1*p2 + p2^2"));
        assert_eq!(poly("(1 + beta*rho^2)^2 - 1 - 2*beta*rho^2"), poly("beta^2*rho^4"));
        assert_eq!(poly("p1/2 + 0.5*p1"), poly("p1"));
        assert!(poly("p1 - p1").is_zero());
        assert_eq!(poly("sqrt(9/4)*p1"), poly("3/2*p1"));
    }

    #[test]
    fn non_polynomial_inputs_are_rejected() {
        for s in ["sqrt(1 + p1^2)", "1/p1", "exp(p1)", "p1^-1"] {
            assert!(matches!(Poly::from_expr(&parse(s).unwrap()), Err(Error::NonPolynomial(_))), "{s}");
        }
    }

    #[test]
    fn calculus_and_division() {
        let p = poly("p1^3*p2 + 4*p2 - 7");
        assert_eq!(p.derivative(&Symbol::P(1)), poly("3*p1^2*p2"));
        assert_eq!(p.degree_in(&Symbol::P(1)), 3);
        let r = poly("2*beta*rho + 2*beta^2*rho^3");
        assert_eq!(r.divide_by_power(&Symbol::named("rho"), 1).unwrap(), poly("2*beta + 2*beta^2*rho^2"));
        assert!(poly("1 + rho").divide_by_power(&Symbol::named("rho"), 1).is_none());
    }

    #[test]
    fn coefficient_split_and_substitution() {
        let l = poly("kappa*(q1*p2 - q2*p1) + p1^2");
        let by_q = l.coefficients_in(|s| matches!(s, Symbol::Q(_)));
        assert_eq!(by_q[&vec![(Symbol::Q(1), 1)]], poly("kappa*p2"));
        assert_eq!(by_q[&vec![(Symbol::Q(2), 1)]], poly("-kappa*p1"));
        assert_eq!(by_q[&Vec::new()], poly("p1^2"));
        let sub = l.substitute(&BTreeMap::from([(Symbol::named("kappa"), Poly::int(2))]));
        assert_eq!(sub, poly("2*q1*p2 - 2*q2*p1 + p1^2"));
        let v = sub.eval(|s| match s {
            Symbol::Q(1) => 1.0,
            Symbol::P(2) => 0.5,
            _ => 0.0,
        });
        assert_eq!(v, 1.0);
    }

    #[test]
    fn to_expr_round_trips_through_expansion() {
        let p = poly("3/4*p1^2*p3 - beta*p2 + 5");
        assert_eq!(Poly::from_expr(&p.to_expr()).unwrap(), p);
    }
}
