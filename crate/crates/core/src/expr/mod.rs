//! Expression language for phase-space functions.
//!
//! Grammar (whitespace is insignificant):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' '-'? digits)?
//! primary := number | variable | ident | func '(' expr ')' | '(' expr ')'
//! number  := digits ('.' digits)?          -- read as an exact rational
//! variable:= ('q' | 'p') digits             -- 1-based coordinate index
//! ident   := [a-z][a-z0-9]*                 -- named parameter
//! func    := 'sqrt' | 'exp'
//! ```
//!
//! Precedence from tightest: `^`, unary `-`, `* /`, `+ -`. Exponents are
//! integer literals; `-x^2` is `-(x^2)`.

mod diff;
mod eval;
mod parse;
mod print;
mod simplify;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

pub use eval::Compiled;
pub use parse::{parse, parse_in, rational_from_f64, Scope};

/// A leaf symbol: a canonical coordinate or a named quantity (parameter,
/// or an auxiliary variable such as `rho`).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    /// `q_i`, 1-based.
    Q(usize),
    /// `p_i`, 1-based.
    P(usize),
    Named(String),
}

impl Symbol {
    pub fn named(name: impl Into<String>) -> Self {
        Symbol::Named(name.into())
    }

    /// Index of this symbol in `x = (q_1..q_d, p_1..p_d)`, if it is a coordinate.
    pub fn coordinate_index(&self, dim: usize) -> Option<usize> {
        match *self {
            Symbol::Q(i) if i >= 1 && i <= dim => Some(i - 1),
            Symbol::P(i) if i >= 1 && i <= dim => Some(dim + i - 1),
            _ => None,
        }
    }

    /// Inverse of [`Symbol::coordinate_index`].
    pub fn coordinate(index: usize, dim: usize) -> Self {
        if index < dim {
            Symbol::Q(index + 1)
        } else {
            Symbol::P(index - dim + 1)
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Q(i) => write!(f, "q{i}"),
            Symbol::P(i) => write!(f, "p{i}"),
            Symbol::Named(s) => f.write_str(s),
        }
    }
}

/// Expression tree. Constants are exact rationals; floating point only
/// appears at evaluation time.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Num(BigRational),
    Sym(Symbol),
    Neg(Box<Expr>),
    Sqrt(Box<Expr>),
    Exp(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i64),
}

impl Expr {
    pub fn int(n: i64) -> Self {
        Expr::Num(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn rational(num: i64, den: i64) -> Self {
        Expr::Num(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn zero() -> Self {
        Expr::Num(BigRational::zero())
    }

    pub fn one() -> Self {
        Expr::Num(BigRational::one())
    }

    pub fn q(i: usize) -> Self {
        Expr::Sym(Symbol::Q(i))
    }

    pub fn p(i: usize) -> Self {
        Expr::Sym(Symbol::P(i))
    }

    pub fn named(name: &str) -> Self {
        Expr::Sym(Symbol::named(name))
    }

    pub fn sqrt(self) -> Self {
        Expr::Sqrt(Box::new(self))
    }

    pub fn exp(self) -> Self {
        Expr::Exp(Box::new(self))
    }

    pub fn powi(self, n: i64) -> Self {
        Expr::Pow(Box::new(self), n)
    }

    pub fn as_num(&self) -> Option<&BigRational> {
        match self {
            Expr::Num(r) => Some(r),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(r) if r.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Num(r) if r.is_one())
    }

    /// Sum of squared momenta `p_1^2 + ... + p_d^2`.
    pub fn momentum_squared(dim: usize) -> Self {
        (1..=dim)
            .map(|i| Expr::p(i).powi(2))
            .reduce(|a, b| a + b)
            .unwrap_or_else(Expr::zero)
    }

    /// Exact derivative with respect to `v`, simplified.
    pub fn diff(&self, v: &Symbol) -> Expr {
        diff::diff(self, v).simplify()
    }

    /// Conservative simplification: constant folding, 0/1 identities and
    /// flattening of sum and product chains.
    pub fn simplify(&self) -> Expr {
        simplify::simplify(self)
    }

    /// Simultaneous substitution of symbols. Unaffected nodes are cloned
    /// unchanged; no simplification is performed.
    pub fn substitute(&self, bindings: &BTreeMap<Symbol, Expr>) -> Expr {
        if bindings.is_empty() {
            return self.clone();
        }
        self.map_leaves(&|s| bindings.get(s).cloned())
    }

    pub(crate) fn map_leaves<F: Fn(&Symbol) -> Option<Expr>>(&self, f: &F) -> Expr {
        let un = |e: &Expr| Box::new(e.map_leaves(f));
        match self {
            Expr::Num(_) => self.clone(),
            Expr::Sym(s) => f(s).unwrap_or_else(|| self.clone()),
            Expr::Neg(a) => Expr::Neg(un(a)),
            Expr::Sqrt(a) => Expr::Sqrt(un(a)),
            Expr::Exp(a) => Expr::Exp(un(a)),
            Expr::Pow(a, n) => Expr::Pow(un(a), *n),
            Expr::Add(a, b) => Expr::Add(un(a), un(b)),
            Expr::Sub(a, b) => Expr::Sub(un(a), un(b)),
            Expr::Mul(a, b) => Expr::Mul(un(a), un(b)),
            Expr::Div(a, b) => Expr::Div(un(a), un(b)),
        }
    }

    /// All symbols occurring in the tree.
    pub fn symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Expr::Sym(s) = e {
                out.insert(s.clone());
            }
        });
        out
    }

    pub fn depends_on(&self, pred: impl Fn(&Symbol) -> bool) -> bool {
        self.symbols().iter().any(pred)
    }

    /// True if any `q_i` occurs.
    pub fn has_q(&self) -> bool {
        self.depends_on(|s| matches!(s, Symbol::Q(_)))
    }

    /// True if any `p_i` occurs.
    pub fn has_p(&self) -> bool {
        self.depends_on(|s| matches!(s, Symbol::P(_)))
    }

    /// Largest coordinate index referenced (0 when none).
    pub fn max_coordinate_index(&self) -> usize {
        self.symbols()
            .iter()
            .filter_map(|s| match s {
                Symbol::Q(i) | Symbol::P(i) => Some(*i),
                Symbol::Named(_) => None,
            })
            .max()
            .unwrap_or(0)
    }

    pub(crate) fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Num(_) | Expr::Sym(_) => {}
            Expr::Neg(a) | Expr::Sqrt(a) | Expr::Exp(a) | Expr::Pow(a, _) => a.visit(f),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }

    /// Evaluate with coordinates and parameters from `x`.
    pub fn eval(&self, x: &PhasePoint) -> Result<f64, crate::error::EvalError> {
        eval::eval_tree(self, x)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $variant:ident) => {
        impl ops::$trait for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$variant(Box::new(self), Box::new(rhs))
            }
        }
        impl ops::$trait<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::$variant(Box::new(self.clone()), Box::new(rhs.clone()))
            }
        }
    };
}

binop!(Add, add, Add);
binop!(Sub, sub, Sub);
binop!(Mul, mul, Mul);
binop!(Div, div, Div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

impl ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self.clone()))
    }
}

impl std::str::FromStr for Expr {
    type Err = crate::error::ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

/// A point `(q_1..q_d, p_1..p_d)` together with parameter values.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub params: BTreeMap<String, f64>,
}

impl PhasePoint {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Self {
        assert_eq!(q.len(), p.len(), "q and p must have the same length");
        PhasePoint { q, p, params: BTreeMap::new() }
    }

    pub fn with_params(mut self, params: &BTreeMap<String, f64>) -> Self {
        self.params = params.clone();
        self
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    /// Build from a flat state vector `(q, p)`.
    pub fn from_state(x: &[f64]) -> Self {
        let d = x.len() / 2;
        PhasePoint::new(x[..d].to_vec(), x[d..].to_vec())
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn state(&self) -> Vec<f64> {
        let mut v = self.q.clone();
        v.extend_from_slice(&self.p);
        v
    }

    pub fn rho(&self) -> f64 {
        self.p.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests;
