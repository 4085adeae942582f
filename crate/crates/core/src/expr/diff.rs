use super::{Expr, Symbol};

// Raw derivative; callers simplify.
pub(super) fn diff(e: &Expr, v: &Symbol) -> Expr {
    match e {
        Expr::Num(_) => Expr::zero(),
        Expr::Sym(s) => {
            if s == v {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Expr::Neg(a) => -diff(a, v),
        Expr::Add(a, b) => diff(a, v) + diff(b, v),
        Expr::Sub(a, b) => diff(a, v) - diff(b, v),
        Expr::Mul(a, b) => diff(a, v) * (**b).clone() + (**a).clone() * diff(b, v),
        Expr::Div(a, b) => {
            (diff(a, v) * (**b).clone() - (**a).clone() * diff(b, v)) / (**b).clone().powi(2)
        }
        Expr::Pow(a, n) => Expr::int(*n) * (**a).clone().powi(n - 1) * diff(a, v),
        Expr::Sqrt(a) => diff(a, v) / (Expr::int(2) * e.clone()),
        Expr::Exp(a) => e.clone() * diff(a, v),
    }
}
