//! Independent oracles: finite differences on plain numeric evaluations.
#![allow(dead_code)]

use gupphase::{GupModel, PhasePoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn points(dim: usize, n: usize, seed: u64) -> Vec<PhasePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let q = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let p = (0..dim).map(|_| rng.gen_range(-0.5..0.5)).collect();
            PhasePoint::new(q, p)
        })
        .collect()
}

/// Entry `π^{ab}` built from `f` and `L` values only.
pub fn pi(m: &GupModel, x: &[f64], a: usize, b: usize) -> f64 {
    let d = m.dim();
    let pt = PhasePoint::from_state(x).with_params(m.params());
    match (a < d, b < d) {
        (true, true) => {
            if a == b {
                0.0
            } else {
                m.l_at(a, b, &pt).unwrap()
            }
        }
        (true, false) if b - d == a => m.f_at(&pt).unwrap(),
        (false, true) if a - d == b => -m.f_at(&pt).unwrap(),
        _ => 0.0,
    }
}

/// Central difference `∂_e π^{ab}`.
pub fn dpi(m: &GupModel, x: &[f64], a: usize, b: usize, e: usize) -> f64 {
    let h = 1e-5;
    let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
    xp[e] += h;
    xm[e] -= h;
    (pi(m, &xp, a, b) - pi(m, &xm, a, b)) / (2.0 * h)
}

/// `Σ_cyc Σ_e π^{ae} ∂_e π^{bc}`.
pub fn jacobi_fd(m: &GupModel, x: &[f64], a: usize, b: usize, c: usize) -> f64 {
    let n = x.len();
    let term = |a: usize, b: usize, c: usize| (0..n).map(|e| pi(m, x, a, e) * dpi(m, x, b, c, e)).sum::<f64>();
    term(a, b, c) + term(b, c, a) + term(c, a, b)
}

pub fn max_jacobi_fd(m: &GupModel, pts: &[PhasePoint]) -> f64 {
    let n = 2 * m.dim();
    let mut worst: f64 = 0.0;
    for x in pts {
        let s = x.state();
        for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    worst = worst.max(jacobi_fd(m, &s, a, b, c).abs());
                }
            }
        }
    }
    worst
}

/// Hand-rolled Gauss–Jordan inverse.
pub fn invert(mut a: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut inv: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        inv.swap(col, piv);
        let d = a[col][col];
        for k in 0..n {
            a[col][k] /= d;
            inv[col][k] /= d;
        }
        for r in 0..n {
            if r != col {
                let factor = a[r][col];
                for k in 0..n {
                    a[r][k] -= factor * a[col][k];
                    inv[r][k] -= factor * inv[col][k];
                }
            }
        }
    }
    inv
}
