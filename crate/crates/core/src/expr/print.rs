use std::fmt;

use num_traits::Signed;

use super::Expr;

// Binding strength of the printed form of a node.
const ADD: u8 = 1;
const MUL: u8 = 2;
const NEG: u8 = 3;
const POW: u8 = 4;
const ATOM: u8 = 5;

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Num(r) if !r.is_integer() => MUL,
        Expr::Num(r) if r.is_negative() => NEG,
        Expr::Num(_) | Expr::Sym(_) | Expr::Sqrt(_) | Expr::Exp(_) => ATOM,
        Expr::Neg(_) => NEG,
        Expr::Pow(..) => POW,
        Expr::Mul(..) | Expr::Div(..) => MUL,
        Expr::Add(..) | Expr::Sub(..) => ADD,
    }
}

fn child(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if prec(e) < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(r) => write!(f, "{r}"),
            Expr::Sym(s) => write!(f, "{s}"),
            Expr::Sqrt(a) => write!(f, "sqrt({a})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
            Expr::Neg(a) => {
                f.write_str("-")?;
                child(f, a, NEG)
            }
            Expr::Pow(a, n) => {
                child(f, a, ATOM)?;
                write!(f, "^{n}")
            }
            // Left-associative binary operators: a right operand of equal
            // precedence needs parentheses to keep the tree shape.
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                child(f, a, ADD)?;
                f.write_str(if matches!(self, Expr::Add(..)) { " + " } else { " - " })?;
                child(f, b, ADD + 1)
            }
            Expr::Mul(a, b) | Expr::Div(a, b) => {
                child(f, a, MUL)?;
                f.write_str(if matches!(self, Expr::Mul(..)) { "*" } else { "/" })?;
                child(f, b, MUL + 1)
            }
        }
    }
}
