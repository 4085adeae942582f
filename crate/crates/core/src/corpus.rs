//! Reference models: a conforming set that closes, and a corrupted set built
//! from it by fixed perturbations of `S`, `g` or `f`.

use std::collections::BTreeMap;

use crate::angular::build_scheme;
use crate::closure::decompose_l;
use crate::error::Result;
use crate::expr::{parse, Expr};
use crate::structure::{upper_pairs, GupModel};

fn p(text: &str) -> Expr {
    parse(text).unwrap_or_else(|e| panic!("corpus expression `{text}`: {e}"))
}

fn params(list: &[(&str, f64)]) -> BTreeMap<String, f64> {
    list.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// `L_ij = S_ij − g_j q_i + g_i q_j` from upper-triangular `S` and `g`.
pub fn assemble_l(dim: usize, s: &[Expr], g: &[Expr]) -> Vec<Expr> {
    upper_pairs(dim)
        .enumerate()
        .map(|(k, (i, j))| {
            (s[k].clone() - g[j].clone() * Expr::q(i + 1) + g[i].clone() * Expr::q(j + 1)).simplify()
        })
        .collect()
}

/// KMM in `d` dimensions with `S_ij` replaced.
pub fn kmm_with_s(dim: usize, beta: f64, s: Vec<Expr>) -> GupModel {
    let f = p(&format!("1 + beta*({})", (1..=dim).map(|i| format!("p{i}^2")).collect::<Vec<_>>().join("+")));
    let g: Vec<Expr> = (1..=dim).map(|i| p(&format!("2*beta*p{i}"))).collect();
    GupModel::new(dim, f, assemble_l(dim, &s, &g), params(&[("beta", beta)])).expect("valid KMM variant")
}

/// `S_ij = f²` for all `i < j` on KMM 3D.
pub fn kmm3d_s_f2(beta: f64) -> GupModel {
    let f2 = p("(1 + beta*(p1^2+p2^2+p3^2))^2");
    kmm_with_s(3, beta, vec![f2.clone(), f2.clone(), f2]).named("kmm3d-s-f2")
}

/// `a = −1`, `f = sqrt(1 + ρ²)`.
pub fn maggiore_sqrt() -> GupModel {
    build_scheme(&p("-1"), &p("sqrt(1 + rho^2)"), None, &BTreeMap::new())
        .expect("maggiore scheme")
        .model
        .named("maggiore-sqrt")
}

/// A degree-3 admissible 2D polynomial model: `f = 1 + p1²/5 − p1 p2/7 + p2³/3`,
/// `l = α(p) − f_2 q1 + f_1 q2`.
pub fn polynomial_2d() -> GupModel {
    let f = p("1 + p1^2/5 - p1*p2/7 + p2^3/3");
    let alpha = p("p1*p2/2 - p2^2/3");
    let g = [f.diff(&crate::Symbol::P(1)), f.diff(&crate::Symbol::P(2))];
    let l = (alpha + g[0].clone() * Expr::q(2) - g[1].clone() * Expr::q(1)).simplify();
    GupModel::new(2, f, vec![l], BTreeMap::new()).expect("polynomial model").named("polynomial-random")
}

/// Models that satisfy every closure equation.
pub fn conforming() -> Vec<GupModel> {
    let mut out = vec![
        GupModel::undeformed(1).named("undeformed-1d"),
        GupModel::undeformed(2).named("undeformed-2d"),
        GupModel::undeformed(3).named("undeformed-3d"),
        GupModel::new(2, Expr::one(), vec![p("l0")], params(&[("l0", 0.5)])).unwrap().named("constant-l"),
        GupModel::kmm(2, 0.1).named("kmm2d"),
        GupModel::kmm(2, 0.5).named("kmm2d-beta-0.5"),
        GupModel::kmm(3, 0.1).named("kmm3d"),
        kmm3d_s_f2(0.1),
        maggiore_sqrt(),
        polynomial_2d(),
        GupModel::new(1, p("1 + p1^2 + q1^2"), vec![], BTreeMap::new()).unwrap().named("deformed-1d"),
    ];
    let f = p("1 + beta*(p1^2+p2^2+p3^2)");
    let f2 = f.clone().powi(2);
    out.push(
        kmm_with_s(
            3,
            0.2,
            vec![
                (f2.clone() * p("exp(p1*p2/2)")).simplify(),
                (-(f2.clone() * p("exp(p1 - p3)"))).simplify(),
                f2,
            ],
        )
        .named("kmm3d-s-exp"),
    );
    let g = [p("exp(p1)"), Expr::zero()];
    out.push(
        GupModel::new(2, p("exp(p1)"), assemble_l(2, &[p("p1*p2")], &g), BTreeMap::new())
            .unwrap()
            .named("exponential-2d"),
    );
    out.push(
        build_scheme(&p("-2*beta*(1+beta*rho^2)"), &p("1+beta*rho^2"), None, &params(&[("beta", 1.0)]))
            .unwrap()
            .model
            .named("kmm3d-scheme"),
    );
    out
}

/// Scale `g_i` by `factor` in `L`, keeping `S` and `f`.
pub fn scale_g(m: &GupModel, i: usize, factor: f64) -> Result<GupModel> {
    let dec = decompose_l(m)?;
    let mut g = dec.g.clone();
    g[i] = (Expr::Num(crate::expr::rational_from_f64(factor).expect("finite factor")) * g[i].clone()).simplify();
    let m2 = GupModel::new(m.dim(), m.f().clone(), assemble_l(m.dim(), &dec.s, &g), m.params().clone())?;
    Ok(m2.named(format!("{} (g{} x {factor})", m.name, i + 1)))
}

/// Add `extra` to `S_ij` (`i < j`, 0-based).
pub fn shift_s(m: &GupModel, i: usize, j: usize, extra: Expr) -> Result<GupModel> {
    let e = (m.l(i, j) + extra.clone()).simplify();
    Ok(m.with_l(i, j, e)?.named(format!("{} (S{}{} + {extra})", m.name, i + 1, j + 1)))
}

/// Models that violate at least one closure equation.
pub fn corrupted() -> Vec<GupModel> {
    let kmm2 = GupModel::kmm(2, 0.1).named("kmm2d");
    let kmm3 = GupModel::kmm(3, 0.1).named("kmm3d");
    let mag = maggiore_sqrt();
    vec![
        scale_g(&kmm3, 0, 1.1).unwrap(),
        scale_g(&kmm3, 1, 0.9).unwrap(),
        scale_g(&kmm2, 1, 1.5).unwrap(),
        kmm2.with_f(p("1 + beta*(p1^2+p2^2) + p1/10")).unwrap().named("kmm2d (f + p1/10)"),
        kmm3.with_f(p("(1 + beta*(p1^2+p2^2+p3^2))*(1 + q1/10)")).unwrap().named("kmm3d (f x (1 + q1/10))"),
        shift_s(&kmm3, 0, 1, Expr::one()).unwrap(),
        shift_s(&kmm3, 0, 1, p("p3")).unwrap(),
        shift_s(&kmm3, 1, 2, p("q1/10")).unwrap(),
        GupModel::new(2, p("1 + p1"), vec![Expr::zero()], BTreeMap::new()).unwrap().named("L = 0, f = 1 + p1"),
        GupModel::new(2, Expr::one(), vec![p("q1")], BTreeMap::new()).unwrap().named("f = 1, L12 = q1"),
        shift_s(&kmm2, 0, 1, p("q1^2/10")).unwrap(),
        GupModel::new(3, Expr::one(), vec![p("p3"), Expr::zero(), Expr::zero()], BTreeMap::new())
            .unwrap()
            .named("f = 1, S12 = p3"),
        mag.with_f(p("sqrt(1 + 2*(p1^2+p2^2+p3^2))")).unwrap().named("maggiore-sqrt (f mismatched)"),
    ]
}
