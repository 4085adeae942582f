use std::collections::BTreeMap;

use num_traits::ToPrimitive;

use super::{Expr, PhasePoint, Symbol};
use crate::error::EvalError;

fn domain(what: &'static str, e: &Expr) -> EvalError {
    EvalError::Domain { what, subexpr: e.to_string() }
}

pub(super) fn eval_tree(e: &Expr, x: &PhasePoint) -> Result<f64, EvalError> {
    Ok(match e {
        Expr::Num(r) => r.to_f64().unwrap_or(f64::NAN),
        Expr::Sym(s) => lookup(s, x)?,
        Expr::Neg(a) => -eval_tree(a, x)?,
        Expr::Add(a, b) => eval_tree(a, x)? + eval_tree(b, x)?,
        Expr::Sub(a, b) => eval_tree(a, x)? - eval_tree(b, x)?,
        Expr::Mul(a, b) => eval_tree(a, x)? * eval_tree(b, x)?,
        Expr::Div(a, b) => {
            let den = eval_tree(b, x)?;
            if den == 0.0 {
                return Err(domain("division by zero", e));
            }
            eval_tree(a, x)? / den
        }
        Expr::Pow(a, n) => {
            let base = eval_tree(a, x)?;
            if base == 0.0 && *n < 0 {
                return Err(domain("negative power of zero", e));
            }
            powi(base, *n)
        }
        Expr::Sqrt(a) => {
            let v = eval_tree(a, x)?;
            if v < 0.0 {
                return Err(domain("square root of a negative number", e));
            }
            v.sqrt()
        }
        Expr::Exp(a) => eval_tree(a, x)?.exp(),
    })
}

fn lookup(s: &Symbol, x: &PhasePoint) -> Result<f64, EvalError> {
    let missing = || EvalError::Unbound(s.to_string());
    match s {
        Symbol::Q(i) => x.q.get(i.wrapping_sub(1)).copied().ok_or_else(missing),
        Symbol::P(i) => x.p.get(i.wrapping_sub(1)).copied().ok_or_else(missing),
        Symbol::Named(n) => x.params.get(n).copied().ok_or_else(missing),
    }
}

fn powi(base: f64, n: i64) -> f64 {
    match i32::try_from(n) {
        Ok(n) => base.powi(n),
        Err(_) => base.powf(n as f64),
    }
}

#[derive(Clone, Debug)]
enum Op {
    Const(f64),
    Q(usize),
    P(usize),
    Var(usize),
    Neg,
    Add,
    Sub,
    Mul,
    // Index into `Compiled::sites` for error reporting.
    Div(usize),
    Pow(i64, usize),
    Sqrt(usize),
    Exp,
}

/// An expression lowered to a stack program with parameters folded in.
///
/// Named symbols are either bound to constants at compile time or declared
/// as runtime variables (e.g. `rho`) passed to [`Compiled::eval_with`].
#[derive(Clone, Debug)]
pub struct Compiled {
    ops: Vec<Op>,
    sites: Vec<Expr>,
    max_stack: usize,
}

impl Compiled {
    pub fn new(e: &Expr, params: &BTreeMap<String, f64>) -> Result<Self, EvalError> {
        Self::with_vars(e, params, &[])
    }

    pub fn with_vars(e: &Expr, params: &BTreeMap<String, f64>, vars: &[&str]) -> Result<Self, EvalError> {
        let mut c = Compiled { ops: Vec::new(), sites: Vec::new(), max_stack: 0 };
        let mut depth = 0;
        c.emit(e, params, vars, &mut depth)?;
        Ok(c)
    }

    fn push(&mut self, op: Op, depth: &mut usize, delta: isize) {
        self.ops.push(op);
        *depth = (*depth as isize + delta) as usize;
        self.max_stack = self.max_stack.max(*depth);
    }

    fn emit(&mut self, e: &Expr, params: &BTreeMap<String, f64>, vars: &[&str], depth: &mut usize) -> Result<(), EvalError> {
        match e {
            Expr::Num(r) => self.push(Op::Const(r.to_f64().unwrap_or(f64::NAN)), depth, 1),
            Expr::Sym(Symbol::Q(i)) => self.push(Op::Q(i - 1), depth, 1),
            Expr::Sym(Symbol::P(i)) => self.push(Op::P(i - 1), depth, 1),
            Expr::Sym(Symbol::Named(n)) => {
                if let Some(k) = vars.iter().position(|v| v == n) {
                    self.push(Op::Var(k), depth, 1)
                } else {
                    let v = params.get(n).ok_or_else(|| EvalError::Unbound(n.clone()))?;
                    self.push(Op::Const(*v), depth, 1)
                }
            }
            Expr::Neg(a) => {
                self.emit(a, params, vars, depth)?;
                self.push(Op::Neg, depth, 0);
            }
            Expr::Exp(a) => {
                self.emit(a, params, vars, depth)?;
                self.push(Op::Exp, depth, 0);
            }
            Expr::Sqrt(a) => {
                self.emit(a, params, vars, depth)?;
                self.sites.push(e.clone());
                self.push(Op::Sqrt(self.sites.len() - 1), depth, 0);
            }
            Expr::Pow(a, n) => {
                self.emit(a, params, vars, depth)?;
                self.sites.push(e.clone());
                self.push(Op::Pow(*n, self.sites.len() - 1), depth, 0);
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                self.emit(a, params, vars, depth)?;
                self.emit(b, params, vars, depth)?;
                let op = match e {
                    Expr::Add(..) => Op::Add,
                    Expr::Sub(..) => Op::Sub,
                    Expr::Mul(..) => Op::Mul,
                    _ => {
                        self.sites.push(e.clone());
                        Op::Div(self.sites.len() - 1)
                    }
                };
                self.push(op, depth, -1);
            }
        }
        Ok(())
    }

    pub fn eval(&self, q: &[f64], p: &[f64]) -> Result<f64, EvalError> {
        self.eval_with(q, p, &[])
    }

    /// Evaluate with values for the runtime variables declared at compile time.
    pub fn eval_with(&self, q: &[f64], p: &[f64], vars: &[f64]) -> Result<f64, EvalError> {
        let mut stack: Vec<f64> = Vec::with_capacity(self.max_stack);
        let coord = |v: &[f64], i: usize, name: char| {
            v.get(i).copied().ok_or_else(|| EvalError::Unbound(format!("{name}{}", i + 1)))
        };
        for op in &self.ops {
            match *op {
                Op::Const(c) => stack.push(c),
                Op::Q(i) => stack.push(coord(q, i, 'q')?),
                Op::P(i) => stack.push(coord(p, i, 'p')?),
                Op::Var(k) => stack.push(
                    *vars.get(k).ok_or_else(|| EvalError::Unbound(format!("runtime variable #{k}")))?,
                ),
                Op::Neg => {
                    let a = stack.last_mut().expect("stack");
                    *a = -*a;
                }
                Op::Exp => {
                    let a = stack.last_mut().expect("stack");
                    *a = a.exp();
                }
                Op::Sqrt(site) => {
                    let a = stack.last_mut().expect("stack");
                    if *a < 0.0 {
                        return Err(domain("square root of a negative number", &self.sites[site]));
                    }
                    *a = a.sqrt();
                }
                Op::Pow(n, site) => {
                    let a = stack.last_mut().expect("stack");
                    if *a == 0.0 && n < 0 {
                        return Err(domain("negative power of zero", &self.sites[site]));
                    }
                    *a = powi(*a, n);
                }
                Op::Add | Op::Sub | Op::Mul | Op::Div(_) => {
                    let b = stack.pop().expect("stack");
                    let a = stack.last_mut().expect("stack");
                    match *op {
                        Op::Add => *a += b,
                        Op::Sub => *a -= b,
                        Op::Mul => *a *= b,
                        Op::Div(site) => {
                            if b == 0.0 {
                                return Err(domain("division by zero", &self.sites[site]));
                            }
                            *a /= b;
                        }
                        _ => unreachable!(),
                    }
                }
            }
        }
        Ok(stack.pop().expect("non-empty program"))
    }

    /// Evaluate at a flat state vector `(q_1..q_d, p_1..p_d)`.
    pub fn eval_state(&self, x: &[f64]) -> Result<f64, EvalError> {
        let d = x.len() / 2;
        self.eval(&x[..d], &x[d..])
    }
}
