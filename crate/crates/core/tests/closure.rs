mod common;

use std::collections::BTreeMap;

use gupphase::closure::{self, closure_check, closure_form_2d, closure_form_2d_from_systems, decompose_l};
use gupphase::corpus;
use gupphase::sampling::{Region, DEFAULT_SEED};
use gupphase::{parse, Expr, GupModel};

fn check(m: &GupModel) -> closure::ClosureReport {
    closure_check(m, &Region::default_for(m.dim()), 60, DEFAULT_SEED).unwrap()
}

#[test]
fn corpus_sizes() {
    assert!(corpus::conforming().len() >= 10);
    assert!(corpus::corrupted().len() >= 10);
}

#[test]
fn conforming_models_close_by_both_routes() {
    for m in corpus::conforming() {
        let r = check(&m);
        assert!(r.systems_pass, "{}: {:?}", m.name, r.checks);
        assert!(r.jacobi_pass, "{}: jacobi {}", m.name, r.jacobi.value);
        let fd = common::max_jacobi_fd(&m, &common::points(m.dim(), 10, 3));
        assert!(fd < 1e-6, "{}: finite-difference jacobi {fd}", m.name);
    }
}

#[test]
fn corrupted_models_fail_both_routes() {
    for m in corpus::corrupted() {
        let r = check(&m);
        assert!(!r.systems_pass, "{} passed the systems", m.name);
        assert!(!r.jacobi_pass, "{} passed jacobi", m.name);
        let fd = common::max_jacobi_fd(&m, &common::points(m.dim(), 10, 3));
        assert!(fd > 1e-4, "{}: finite-difference jacobi {fd}", m.name);
    }
}

#[test]
fn symbolic_jacobi_matches_finite_differences() {
    let mut models = corpus::conforming();
    models.extend(corpus::corrupted());
    let pts = common::points(3, 5, 17);
    for m in models {
        let d = m.dim();
        let n = 2 * d;
        for x in pts.iter().map(|x| gupphase::PhasePoint::new(x.q[..d].to_vec(), x.p[..d].to_vec())) {
            for a in 0..n {
                for b in a + 1..n {
                    for c in b + 1..n {
                        let sym = closure::jacobi_component(&m, a, b, c, &x.clone().with_params(m.params())).unwrap();
                        let fd = common::jacobi_fd(&m, &x.state(), a, b, c);
                        assert!((sym - fd).abs() < 1e-6 * (1.0 + fd.abs()), "{} ({a}{b}{c}): {sym} vs {fd}", m.name);
                    }
                }
            }
        }
    }
}

#[test]
fn kmm_decomposes_into_zero_s_and_linear_g() {
    let m = GupModel::kmm(3, 0.1);
    let dec = decompose_l(&m).unwrap();
    assert!(dec.exact);
    assert!(dec.s.iter().all(Expr::is_zero));
    for (i, g) in dec.g.iter().enumerate() {
        let expected = parse(&format!("2*beta*p{}", i + 1)).unwrap();
        let x = gupphase::PhasePoint::new(vec![0.3, -0.2, 0.1], vec![0.4, -0.1, 0.25]).with_param("beta", 0.1);
        assert!((g.eval(&x).unwrap() - expected.eval(&x).unwrap()).abs() < 1e-14);
    }
}

#[test]
fn unit_f_with_l_equal_q1_has_unit_gradient_defect() {
    let m = GupModel::new(2, Expr::one(), vec![parse("q1").unwrap()], BTreeMap::new()).unwrap();
    let pts = common::points(2, 20, 1);
    let g = closure::gradient_residual(&m, &pts).unwrap();
    assert!((g.value - 1.0).abs() < 1e-12);
    let j = closure::jacobi_residual(&m, &pts).unwrap();
    assert!((j.value - 1.0).abs() < 1e-12);
}

#[test]
fn q1_times_p1_is_conforming_but_not_a_gradient() {
    let m = GupModel::new(2, Expr::one(), vec![parse("p1*q1").unwrap()], BTreeMap::new()).unwrap();
    let dec = decompose_l(&m).unwrap();
    assert!(dec.exact);
    let curl = dec.g[1].diff(&gupphase::Symbol::P(1)) - dec.g[0].diff(&gupphase::Symbol::P(2));
    assert_eq!(curl.simplify(), Expr::int(-1));
    assert!(!check(&m).pass);
}

#[test]
fn two_dimensional_forms_agree() {
    let mut models: Vec<GupModel> = corpus::conforming().into_iter().filter(|m| m.dim() == 2).collect();
    models.extend(corpus::corrupted().into_iter().filter(|m| m.dim() == 2));
    models.push(GupModel::new(2, parse("1 + q2*p1 + p2^2").unwrap(), vec![parse("q1*p2 + p1^2").unwrap()], BTreeMap::new()).unwrap());
    for m in models {
        for x in common::points(2, 10, 5) {
            let x = x.with_params(m.params());
            let a = closure_form_2d(&m, &x).unwrap();
            let b = closure_form_2d_from_systems(&m, &x).unwrap();
            for k in 0..4 {
                assert!((a[k] - b[k]).abs() < 1e-10, "{} component {k}: {} vs {}", m.name, a[k], b[k]);
            }
        }
    }
}

#[test]
fn one_dimensional_models_pass_vacuously() {
    let m = GupModel::new(1, parse("1 + q1^2*p1^2").unwrap(), vec![], BTreeMap::new()).unwrap();
    assert!(check(&m).pass);
}

#[test]
fn strange_equation_separates_s_corruptions() {
    let m = corpus::shift_s(&GupModel::kmm(3, 0.1), 0, 1, Expr::one()).unwrap();
    let r = check(&m);
    assert!(r.gradient.as_ref().unwrap().value < 1e-12);
    assert!(r.strange.as_ref().unwrap().s_form.value > 1e-3);
}
