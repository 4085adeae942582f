mod common;

use std::collections::BTreeMap;

use gupphase::angular::build_scheme;
use gupphase::closure::closure_check;
use gupphase::corpus;
use gupphase::dynamics::*;
use gupphase::sampling::{self, Execution, Region, DEFAULT_SEED};
use gupphase::{parse, Error, Expr, GupModel, PhasePoint};

fn h(text: &str) -> Expr {
    parse(text).unwrap()
}

/// `π ∇H` from the hand-built bivector and central-difference gradients.
fn field_oracle(m: &GupModel, hh: &Expr, x: &PhasePoint) -> Vec<f64> {
    let s = x.state();
    let n = s.len();
    let grad: Vec<f64> = (0..n)
        .map(|k| {
            let (mut a, mut b) = (s.clone(), s.clone());
            a[k] += 1e-6;
            b[k] -= 1e-6;
            let ev = |v: &[f64]| hh.eval(&PhasePoint::from_state(v).with_params(m.params())).unwrap();
            (ev(&a) - ev(&b)) / 2e-6
        })
        .collect();
    (0..n).map(|a| (0..n).map(|b| common::pi(m, &s, a, b) * grad[b]).sum()).collect()
}

#[test]
fn vector_field_examples() {
    let free = GupModel::undeformed(1);
    let v = hamiltonian_vector_field(&free, &h("p1^2/2"), &PhasePoint::new(vec![0.3], vec![0.7])).unwrap();
    assert_eq!(v, vec![0.7, 0.0]);

    let kmm = GupModel::kmm(3, 0.1);
    let x = PhasePoint::new(vec![0.2, -0.4, 0.9], vec![0.3, 0.1, -0.2]).with_params(kmm.params());
    let v = hamiltonian_vector_field(&kmm, &h("(p1^2+p2^2+p3^2)/2"), &x).unwrap();
    let f = 1.0 + 0.1 * (0.09 + 0.01 + 0.04);
    for i in 0..3 {
        assert!((v[i] - f * x.p[i]).abs() < 1e-15);
        assert_eq!(v[3 + i], 0.0);
    }

    let kmm2 = GupModel::kmm(2, 0.1);
    let x = PhasePoint::new(vec![0.5, -0.3], vec![0.2, 0.4]).with_params(kmm2.params());
    let v = hamiltonian_vector_field(&kmm2, &h("q1"), &x).unwrap();
    let f = kmm2.f_at(&x).unwrap();
    assert!((v[2] + f).abs() < 1e-15);
    assert!((v[1] - kmm2.l_at(1, 0, &x).unwrap()).abs() < 1e-15);
    assert_eq!(v[0], 0.0);
    assert_eq!(v[3], 0.0);
}

#[test]
fn vector_field_matches_oracle() {
    let hh = h("(p1^2+p2^2)/2 + q1^2*p2 + exp(q2)/3");
    for m in [GupModel::kmm(2, 0.3), corpus::polynomial_2d(), corpus::shift_s(&GupModel::kmm(2, 0.1), 0, 1, h("q1^2")).unwrap()] {
        for x in common::points(2, 10, 12) {
            let x = x.with_params(m.params());
            let got = hamiltonian_vector_field(&m, &hh, &x).unwrap();
            let want = field_oracle(&m, &hh, &x);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() <= 1e-7 * (1.0 + b.abs()));
            }
        }
    }
}

#[test]
fn oscillator_returns_after_one_period() {
    let m = GupModel::undeformed(1);
    let x0 = PhasePoint::new(vec![0.6], vec![-0.2]);
    for method in [Method::Rk4, Method::Rk45] {
        let tr = integrate(&m, &h("(p1^2+q1^2)/2"), &x0, std::f64::consts::TAU, 1e-3, method).unwrap();
        let end = tr.last();
        let dist = ((end.q[0] - 0.6).powi(2) + (end.p[0] + 0.2).powi(2)).sqrt();
        assert!(dist <= 1e-6, "{method:?}: {dist}");
        assert!(tr.t.windows(2).all(|w| w[1] > w[0]));
        assert!((tr.t.last().unwrap() - std::f64::consts::TAU).abs() < 1e-12);
    }
}

#[test]
fn kmm_free_particle_moves_uniformly() {
    let m = GupModel::kmm(3, 0.1);
    let x0 = PhasePoint::new(vec![0.1, 0.2, -0.3], vec![0.4, -0.3, 0.2]);
    let hh = h("(p1^2+p2^2+p3^2)/2");
    let tr = integrate(&m, &hh, &x0, 10.0, 1e-3, Method::Rk4).unwrap();
    assert_eq!(tr.len(), 10_001);
    let f0 = 1.0 + 0.1 * (0.16 + 0.09 + 0.04);
    for (t, x) in tr.t.iter().zip(&tr.points) {
        assert_eq!(x.p, x0.p);
        for i in 0..3 {
            assert!((x.q[i] - (x0.q[i] + f0 * x0.p[i] * t)).abs() <= 1e-10);
        }
    }
    let c = conservation_report(&tr, &m, &hh, None).unwrap();
    assert!(c.energy_drift <= 1e-8);
}

#[test]
fn energy_drift_is_fourth_order() {
    let m = GupModel::kmm(2, 0.2);
    let hh = h("(p1^2+p2^2)/2 + (q1^2+q2^2)/2 + q1^4/4");
    let x0 = PhasePoint::new(vec![0.8, 0.1], vec![0.0, 0.5]);
    let drifts: Vec<f64> = [0.04, 0.02, 0.01]
        .iter()
        .map(|&dt| conservation_report(&integrate(&m, &hh, &x0, 5.0, dt, Method::Rk4).unwrap(), &m, &hh, None).unwrap().energy_drift)
        .collect();
    let slope = |a: f64, b: f64| (a / b).log2();
    let fit = 0.5 * (slope(drifts[0], drifts[1]) + slope(drifts[1], drifts[2]));
    assert!((fit - 4.0).abs() <= 0.3, "drifts {drifts:?}, exponent {fit}");
}

#[test]
fn angular_momentum_is_conserved_for_rotation_invariant_h() {
    let params = BTreeMap::from([("beta".to_string(), 0.1)]);
    let s = build_scheme(&h("-2*beta*(1+beta*rho^2)"), &h("1+beta*rho^2"), None, &params).unwrap();
    let x0 = PhasePoint::new(vec![0.5, -0.2, 0.3], vec![0.1, 0.4, -0.2]);
    let inv = h("(p1^2+p2^2+p3^2)/2 + (q1^2+q2^2+q3^2)/2");
    let tr = integrate(&s.model, &inv, &x0, 10.0, 1e-3, Method::Rk4).unwrap();
    let c = conservation_report(&tr, &s.model, &inv, Some(&s)).unwrap();
    assert!(c.j_drift.unwrap() <= 1e-7, "{c:?}");
    assert!(c.energy_drift <= 1e-8);

    let broken = h("p1 + q2^2/2");
    let tr = integrate(&s.model, &broken, &x0, 2.0, 1e-3, Method::Rk4).unwrap();
    assert!(conservation_report(&tr, &s.model, &broken, Some(&s)).unwrap().j_drift.unwrap() > 1e-3);
}

#[test]
fn time_derivatives_follow_the_bracket() {
    let m = GupModel::kmm(2, 0.3);
    let hh = h("(p1^2+p2^2)/2 + q1^2/2 + q2*p1");
    let x0 = PhasePoint::new(vec![0.3, -0.5], vec![0.2, 0.1]);
    for fobs in ["q1", "p1", "q1*p2"] {
        let fe = h(fobs);
        let err = |dt: f64| {
            let tr = integrate(&m, &hh, &x0, 1.0, dt, Method::Rk4).unwrap();
            let vals: Vec<f64> = tr.points.iter().map(|x| fe.eval(&x.clone().with_params(m.params())).unwrap()).collect();
            (1..vals.len() - 1)
                .map(|k| {
                    let x = tr.points[k].clone().with_params(m.params());
                    ((vals[k + 1] - vals[k - 1]) / (2.0 * dt) - m.bracket(&fe, &hh, &x).unwrap()).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(0.02), err(0.01));
        assert!(e1 < 1e-3 && (e1 / e2).log2() > 1.7, "{fobs}: {e1} {e2}");
    }
}

#[test]
fn liouville_on_conforming_models() {
    let undeformed = GupModel::undeformed(2);
    assert!(liouville_divergence(&undeformed, &h("q1^3*p2 + exp(p1)*q2")).simplify().is_zero());
    let kmm2 = GupModel::kmm(2, 0.1);
    let pts = common::points(2, 100, 5);
    assert!(liouville_residual(&kmm2, &h("(p1^2+p2^2)/2 + q1^2 + q2^2"), &pts).unwrap().value <= 1e-10);
    for m in corpus::conforming() {
        let d = m.dim();
        let hh = h(&format!("q1*p{d} + p1^2*q{d} + q1^2/2"));
        let pts = sampling::sample_points(&Region::default_for(d), 100, DEFAULT_SEED, m.params());
        assert!(liouville_residual(&m, &hh, &pts).unwrap().value <= 1e-9, "{}", m.name);
    }
}

/// Central-difference divergence of `f^{-d} π ∇H`.
fn liouville_oracle(m: &GupModel, hh: &Expr, x: &PhasePoint) -> f64 {
    let s = x.state();
    let d = m.dim();
    let flux = |v: &[f64], a: usize| {
        let pt = PhasePoint::from_state(v).with_params(m.params());
        m.f_at(&pt).unwrap().powi(-(d as i32)) * field_oracle(m, hh, &pt)[a]
    };
    (0..2 * d)
        .map(|a| {
            let (mut u, mut w) = (s.clone(), s.clone());
            u[a] += 1e-4;
            w[a] -= 1e-4;
            (flux(&u, a) - flux(&w, a)) / 2e-4
        })
        .sum()
}

#[test]
fn liouville_detects_gradient_and_position_defects() {
    let kmm2 = GupModel::kmm(2, 0.1);
    let kmm3 = GupModel::kmm(3, 0.1);
    let detected = [
        corpus::scale_g(&kmm3, 0, 1.1).unwrap(),
        corpus::scale_g(&kmm2, 1, 1.5).unwrap(),
        kmm2.with_f(h("1 + beta*(p1^2+p2^2) + p1/10")).unwrap(),
        kmm3.with_f(h("(1 + beta*(p1^2+p2^2+p3^2))*(1 + q1/10)")).unwrap(),
    ];
    for m in &detected {
        assert!(!closure_check(m, &Region::default_for(m.dim()), 50, DEFAULT_SEED).unwrap().pass);
        let d = m.dim();
        let hh = h(&format!("(q1^2 + p1^2)/2 + q{d}*p1"));
        let pts = common::points(d, 50, 8);
        let w = liouville_residual(m, &hh, &pts).unwrap();
        assert!(w.value > 1e-3, "{}", m.name);
        for x in pts.iter().take(5) {
            let x = x.clone().with_params(m.params());
            let sym = liouville_divergence(m, &hh).eval(&x).unwrap();
            let fd = liouville_oracle(m, &hh, &x);
            assert!((sym - fd).abs() <= 1e-5 * (1.0 + fd.abs()), "{}: {sym} vs {fd}", m.name);
        }
    }
}

#[test]
fn liouville_misses_s_corruptions() {
    let m = corpus::shift_s(&GupModel::kmm(3, 0.1), 0, 1, Expr::one()).unwrap();
    assert!(!closure_check(&m, &Region::default_for(3), 50, DEFAULT_SEED).unwrap().pass);
    let pts = common::points(3, 50, 8);
    assert!(liouville_residual(&m, &h("(q1^2 + p1^2)/2 + q3*p1 + q2^2*p3"), &pts).unwrap().value <= 1e-9);
}

#[test]
fn deformation_effect_is_linear_in_beta() {
    let hh = h("(p1^2+p2^2)/2 + (q1^2+q2^2)/2");
    let x0 = PhasePoint::new(vec![0.7, 0.0], vec![0.0, 0.4]);
    let reference = integrate(&GupModel::undeformed(2), &hh, &x0, 3.0, 1e-2, Method::Rk4).unwrap();
    let betas = [1e-2, 1e-3, 1e-4];
    let gaps: Vec<f64> = betas
        .iter()
        .map(|&b| {
            let tr = integrate(&GupModel::kmm(2, b), &hh, &x0, 3.0, 1e-2, Method::Rk4).unwrap();
            tr.points
                .iter()
                .zip(&reference.points)
                .map(|(a, r)| a.state().iter().zip(r.state()).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max)
        })
        .collect();
    let slope = ((gaps[0] / gaps[2]).ln()) / ((betas[0] / betas[2]).ln());
    assert!((slope - 1.0).abs() <= 0.2, "gaps {gaps:?}, exponent {slope}");
}

#[test]
fn guard_and_argument_errors() {
    let m = GupModel::kmm(1, 0.1);
    let x0 = PhasePoint::new(vec![0.0], vec![0.1]);
    assert!(matches!(integrate(&m, &h("p1^2/2"), &x0, 1.0, 0.0, Method::Rk4), Err(Error::InvalidArgument(_))));
    assert!(matches!(integrate(&m, &h("p1^2/2"), &x0, 1.0, -1e-3, Method::Rk4), Err(Error::InvalidArgument(_))));

    // p1' = f = 1 - p1^2 drives p1 to the degenerate surface
    let ball = GupModel::new(1, h("1 - p1^2"), vec![], BTreeMap::new()).unwrap();
    match integrate(&ball, &h("-q1"), &PhasePoint::new(vec![0.0], vec![0.0]), 20.0, 1e-2, Method::Rk4) {
        Err(Error::DomainExit { t, f }) => assert!(t > 5.0 && f <= DEFAULT_F_MIN),
        other => panic!("expected a domain exit, got {other:?}"),
    }
}

#[test]
fn ensembles_are_schedule_independent() {
    let m = GupModel::kmm(2, 0.1);
    let hh = h("(p1^2+p2^2)/2 + (q1^2+q2^2)/2");
    let x0s = common::points(2, 16, 3);
    sampling::set_execution(Execution::Sequential);
    let seq: Vec<_> = integrate_ensemble(&m, &hh, &x0s, 1.0, 1e-2, Method::Rk45).into_iter().map(|r| r.unwrap().points).collect();
    sampling::set_execution(Execution::Parallel);
    let par: Vec<_> = integrate_ensemble(&m, &hh, &x0s, 1.0, 1e-2, Method::Rk45).into_iter().map(|r| r.unwrap().points).collect();
    assert_eq!(seq, par);
}

#[test]
fn csv_columns() {
    let m = GupModel::kmm(3, 0.1);
    let hh = h("(p1^2+p2^2+p3^2)/2");
    let tr = integrate(&m, &hh, &PhasePoint::new(vec![0.1; 3], vec![0.2; 3]), 0.01, 1e-3, Method::Rk4).unwrap();
    let mut buf = Vec::new();
    write_csv(&mut buf, &tr, &m, &hh, None).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,q1,q2,q3,p1,p2,p3,H,J1,J2,J3");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 11);
    for r in &rows {
        assert_eq!(r.len(), 11);
        assert_eq!(&r[4..7], &rows[0][4..7]);
    }
}
