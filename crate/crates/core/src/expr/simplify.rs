use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::Expr;

pub(super) fn simplify(e: &Expr) -> Expr {
    let mut cur = step(e);
    // Each rule shrinks or canonicalises, a couple of passes reach the fixpoint.
    for _ in 0..8 {
        let next = step(&cur);
        if next == cur {
            break;
        }
        cur = next;
    }
    cur
}

fn num(r: BigRational) -> Expr {
    Expr::Num(r)
}

fn step(e: &Expr) -> Expr {
    match e {
        Expr::Num(_) | Expr::Sym(_) => e.clone(),
        Expr::Neg(a) => neg(step(a)),
        Expr::Sqrt(a) => sqrt(step(a)),
        Expr::Exp(a) => {
            let a = step(a);
            if a.is_zero() {
                Expr::one()
            } else {
                a.exp()
            }
        }
        Expr::Pow(a, n) => pow(step(a), *n),
        Expr::Add(..) => {
            let mut terms = Vec::new();
            collect_sum(e, &mut terms);
            sum(terms.iter().map(|t| step(t)).collect())
        }
        Expr::Mul(..) => {
            let mut factors = Vec::new();
            collect_product(e, &mut factors);
            product(factors.iter().map(|f| step(f)).collect())
        }
        Expr::Sub(a, b) => sub(step(a), step(b)),
        Expr::Div(a, b) => div(step(a), step(b)),
    }
}

fn collect_sum<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
    match e {
        Expr::Add(a, b) => {
            collect_sum(a, out);
            collect_sum(b, out);
        }
        _ => out.push(e),
    }
}

fn collect_product<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
    match e {
        Expr::Mul(a, b) => {
            collect_product(a, out);
            collect_product(b, out);
        }
        _ => out.push(e),
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(r) => num(-r),
        Expr::Neg(inner) => *inner,
        Expr::Mul(l, r) => match *l {
            Expr::Num(c) => Expr::Mul(Box::new(num(-c)), r),
            l => Expr::Neg(Box::new(Expr::Mul(Box::new(l), r))),
        },
        other => Expr::Neg(Box::new(other)),
    }
}

fn sum(terms: Vec<Expr>) -> Expr {
    let mut constant = BigRational::zero();
    let mut rest = Vec::new();
    for t in terms {
        match t {
            Expr::Num(r) => constant += r,
            Expr::Add(..) => {
                // A simplified child may itself be a sum.
                let mut inner = Vec::new();
                collect_sum(&t, &mut inner);
                for i in inner {
                    match i {
                        Expr::Num(r) => constant += r.clone(),
                        other => rest.push(other.clone()),
                    }
                }
            }
            other => rest.push(other),
        }
    }
    let mut parts = Vec::with_capacity(rest.len() + 1);
    if !constant.is_zero() {
        parts.push(num(constant));
    }
    parts.extend(rest);
    parts.into_iter().reduce(|a, b| a + b).unwrap_or_else(Expr::zero)
}

fn product(factors: Vec<Expr>) -> Expr {
    let mut coeff = BigRational::one();
    let mut rest = Vec::new();
    let push = |f: Expr, coeff: &mut BigRational, rest: &mut Vec<Expr>| match f {
        Expr::Num(r) => *coeff *= r,
        Expr::Neg(inner) => {
            *coeff = -coeff.clone();
            match *inner {
                Expr::Num(r) => *coeff *= r,
                other => rest.push(other),
            }
        }
        other => rest.push(other),
    };
    for f in factors {
        if let Expr::Mul(..) = f {
            let mut inner = Vec::new();
            collect_product(&f, &mut inner);
            for i in inner {
                push(i.clone(), &mut coeff, &mut rest);
            }
        } else {
            push(f, &mut coeff, &mut rest);
        }
    }
    if coeff.is_zero() {
        return Expr::zero();
    }
    let body = rest.into_iter().reduce(|a, b| a * b);
    match body {
        None => num(coeff),
        Some(b) if coeff.is_one() => b,
        Some(b) if (-coeff.clone()).is_one() => Expr::Neg(Box::new(b)),
        Some(b) => prepend_coeff(coeff, b),
    }
}

// Rebuild `c * (f1*f2*...)` as the left-leaning chain `((c*f1)*f2)*...`.
fn prepend_coeff(c: BigRational, body: Expr) -> Expr {
    match body {
        Expr::Mul(a, b) => Expr::Mul(Box::new(prepend_coeff(c, *a)), b),
        other => Expr::Mul(Box::new(num(c)), Box::new(other)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => num(x - y),
        _ if b.is_zero() => a,
        _ if a.is_zero() => neg(b),
        _ if a == b => Expr::zero(),
        _ => a - b,
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) if !y.is_zero() => num(x / y),
        _ if b.is_one() => a,
        (_, Expr::Num(y)) if (-y.clone()).is_one() => neg(a),
        _ if a.is_zero() && !b.is_zero() => Expr::zero(),
        _ => a / b,
    }
}

fn pow(a: Expr, n: i64) -> Expr {
    if n == 0 {
        return Expr::one();
    }
    if n == 1 {
        return a;
    }
    match a {
        Expr::Num(r) if !(r.is_zero() && n < 0) => {
            let p = num_traits::pow(r.clone(), n.unsigned_abs() as usize);
            num(if n < 0 { p.recip() } else { p })
        }
        Expr::Pow(inner, m) => pow(*inner, m * n),
        Expr::Sqrt(inner) if n % 2 == 0 => pow(*inner, n / 2),
        Expr::Neg(inner) if n % 2 == 0 => pow(*inner, n),
        other => other.powi(n),
    }
}

fn sqrt(a: Expr) -> Expr {
    if let Expr::Num(r) = &a {
        if !r.is_negative() {
            if let (Some(n), Some(d)) = (exact_isqrt(r.numer()), exact_isqrt(r.denom())) {
                return num(BigRational::new(n, d));
            }
        }
    }
    a.sqrt()
}

fn exact_isqrt(n: &BigInt) -> Option<BigInt> {
    if n.is_negative() {
        return None;
    }
    let s = n.sqrt();
    (&s * &s == *n).then_some(s)
}
