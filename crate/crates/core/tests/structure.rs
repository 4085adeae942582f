mod common;

use std::collections::BTreeMap;

use gupphase::corpus;
use gupphase::sampling::Region;
use gupphase::structure::{Mat2d, PositivityBound};
use gupphase::{parse, Expr, GupModel, PhasePoint};
use proptest::prelude::*;

fn kmm2_point() -> PhasePoint {
    PhasePoint::new(vec![1.0, 0.0], vec![0.5, 0.5]).with_param("beta", 0.1)
}

fn random_polynomial_model() -> GupModel {
    GupModel::new(
        3,
        parse("1 + p1^2/4 + q2*p3/5 - p2*q1/7").unwrap(),
        vec![parse("q1*p2 - p3^2").unwrap(), parse("q3/2 + p1*p2").unwrap(), parse("1/3 - q2*q1").unwrap()],
        BTreeMap::new(),
    )
    .unwrap()
}

#[test]
fn undeformed_matrices() {
    let m = GupModel::undeformed(1);
    let x = PhasePoint::new(vec![0.2], vec![0.3]);
    let pi = m.poisson_matrix(&x).unwrap();
    let om = m.symplectic_matrix(&x).unwrap();
    assert_eq!(pi.max_abs_diff(&Mat2d::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]])), 0.0);
    assert_eq!(om.max_abs_diff(&Mat2d::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]])), 0.0);
}

#[test]
fn kmm_2d_entries_by_hand() {
    let m = GupModel::kmm(2, 0.1);
    let pi = m.poisson_matrix(&kmm2_point()).unwrap();
    // L_12 = -2*0.1*(1*0.5 - 0*0.5)
    assert!((pi[(0, 1)] + 0.1).abs() < 1e-15);
    // f = 1 + 0.1*(0.25 + 0.25)
    assert!((pi[(0, 2)] - 1.05).abs() < 1e-15);
    assert!((m.bracket(&Expr::q(1), &Expr::p(1), &kmm2_point()).unwrap() - 1.05).abs() < 1e-14);
    assert!((m.bracket(&Expr::q(1), &Expr::q(2), &kmm2_point()).unwrap() + 0.1).abs() < 1e-14);
}

#[test]
fn matrices_are_inverse_and_antisymmetric() {
    let mut models = corpus::conforming();
    models.push(random_polynomial_model());
    for m in &models {
        let d = m.dim();
        for x in common::points(d, 100, 9) {
            let x = x.with_params(m.params());
            let pi = m.poisson_matrix(&x).unwrap();
            let om = m.symplectic_matrix(&x).unwrap();
            assert!(pi.mul(&om).max_abs_diff(&Mat2d::identity(2 * d)) <= 1e-10, "{}", m.name);
            assert!(pi.antisymmetry_defect() <= 1e-12 && om.antisymmetry_defect() <= 1e-12);
            let rows: Vec<Vec<f64>> = (0..2 * d).map(|a| (0..2 * d).map(|b| pi[(a, b)]).collect()).collect();
            let inv = common::invert(rows);
            let diff = (0..2 * d).flat_map(|a| (0..2 * d).map(move |b| (a, b))).map(|(a, b)| (inv[a][b] - om[(a, b)]).abs()).fold(0.0, f64::max);
            assert!(diff <= 1e-9, "{}: {diff}", m.name);
        }
    }
}

#[test]
fn determinants_are_powers_of_f() {
    for m in corpus::conforming() {
        let d = m.dim() as i32;
        for x in common::points(m.dim(), 30, 4) {
            let x = x.with_params(m.params());
            let f = m.f_at(&x).unwrap();
            let det_om = m.symplectic_matrix(&x).unwrap().determinant();
            let det_pi = m.poisson_matrix(&x).unwrap().determinant();
            assert!((det_om - f.powi(-2 * d)).abs() <= 1e-9 * f.powi(-2 * d), "{}", m.name);
            assert!((det_pi - f.powi(2 * d)).abs() <= 1e-9 * f.powi(2 * d), "{}", m.name);
        }
    }
}

#[test]
fn fundamental_brackets() {
    let m = random_polynomial_model();
    for x in common::points(3, 30, 2) {
        for i in 0..3 {
            for j in 0..3 {
                let qq = m.bracket(&Expr::q(i + 1), &Expr::q(j + 1), &x).unwrap();
                let lij = if i == j { 0.0 } else { m.l_at(i, j, &x).unwrap() };
                assert!((qq - lij).abs() <= 1e-10);
                let qp = m.bracket(&Expr::q(i + 1), &Expr::p(j + 1), &x).unwrap();
                let expected = if i == j { m.f_at(&x).unwrap() } else { 0.0 };
                assert!((qp - expected).abs() <= 1e-10);
                assert_eq!(m.bracket(&Expr::p(i + 1), &Expr::p(j + 1), &x).unwrap(), 0.0);
            }
        }
    }
}

fn fd_gradient(e: &Expr, x: &PhasePoint) -> Vec<f64> {
    let s = x.state();
    (0..s.len())
        .map(|k| {
            let (mut a, mut b) = (s.clone(), s.clone());
            a[k] += 1e-5;
            b[k] -= 1e-5;
            let ev = |v: &[f64]| e.eval(&PhasePoint::from_state(v).with_params(&x.params)).unwrap();
            (ev(&a) - ev(&b)) / 2e-5
        })
        .collect()
}

#[test]
fn bracket_matches_finite_difference_oracle() {
    let m = random_polynomial_model();
    let (fa, fb) = (parse("q1*p2^2 + exp(p3)*q3").unwrap(), parse("sqrt(2 + q2^2)*p1").unwrap());
    for x in common::points(3, 20, 6) {
        let (ga, gb) = (fd_gradient(&fa, &x), fd_gradient(&fb, &x));
        let s = x.state();
        let mut oracle = 0.0;
        for a in 0..6 {
            for b in 0..6 {
                oracle += ga[a] * common::pi(&m, &s, a, b) * gb[b];
            }
        }
        let got = m.bracket(&fa, &fb, &x).unwrap();
        assert!((got - oracle).abs() <= 1e-6 * (1.0 + oracle.abs()));
        let sym = m.bracket_expr(&fa, &fb).eval(&x).unwrap();
        assert!((sym - got).abs() <= 1e-10 * (1.0 + got.abs()));
    }
}

#[test]
fn nondegeneracy_examples() {
    let kmm = GupModel::kmm(3, 0.5);
    let r = kmm.nondegeneracy_report(&Region::default_for(3), 100, 1).unwrap();
    assert!(r.pass);
    assert_eq!(kmm.radial_positivity_bound(), Some(PositivityBound::Everywhere));

    // kappa = 2: f = 1 - rho^2, positive on rho^2 < 1
    let ball = GupModel::new(2, parse("1 - (p1^2 + p2^2)").unwrap(), vec![parse("2*(q1*p2 - q2*p1)").unwrap()], BTreeMap::new()).unwrap();
    assert_eq!(ball.radial_positivity_bound(), Some(PositivityBound::Ball(1.0)));
    assert!(ball.nondegeneracy_report(&Region::uniform(2, (-1.0, 1.0), (-0.5, 0.5)), 100, 1).unwrap().pass);
    assert!(!ball.nondegeneracy_report(&Region::uniform(2, (-1.0, 1.0), (-1.5, 1.5)), 200, 1).unwrap().pass);

    let sign = GupModel::new(1, parse("p1").unwrap(), vec![], BTreeMap::new()).unwrap();
    assert!(!sign.nondegeneracy_report(&Region::default_for(1), 100, 1).unwrap().pass);
}

#[test]
fn degenerate_point_is_reported() {
    let m = GupModel::new(1, parse("p1").unwrap(), vec![], BTreeMap::new()).unwrap();
    assert!(m.symplectic_matrix(&PhasePoint::new(vec![0.3], vec![0.0])).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bracket_is_antisymmetric_and_leibniz(seed in 0u64..10_000) {
        let m = random_polynomial_model();
        let x = &common::points(3, 1, seed)[0];
        let (f, g, h) = (parse("q1*p3 + p2^2").unwrap(), parse("exp(q2)*p1").unwrap(), parse("q3*q1 - p1*p2*p3").unwrap());
        prop_assert!(m.bracket(&f, &f, x).unwrap().abs() <= 1e-12);
        let fg = f.clone() * g.clone();
        let lhs = m.bracket(&fg, &h, x).unwrap();
        let rhs = f.eval(x).unwrap() * m.bracket(&g, &h, x).unwrap() + g.eval(x).unwrap() * m.bracket(&f, &h, x).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
    }
}
