//! Seeded sampling of phase-space points and schedule-independent reductions.
//!
//! Points are always drawn sequentially from a ChaCha stream, so the sample
//! set depends only on `(region, n, seed)`. Per-point work may then run on
//! rayon; results are collected in input order and reduced with `max`/`min`,
//! so reports do not depend on the thread schedule.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU8, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::PhasePoint;

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 20_240_617;
/// Number of sample points used when none is given.
pub const DEFAULT_POINTS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Rayon thread pool; falls back to sequential without the `parallel` feature.
    Parallel,
}

static EXECUTION: AtomicU8 = AtomicU8::new(if cfg!(feature = "parallel") { 1 } else { 0 });

/// Select how per-point work is scheduled for the whole process.
pub fn set_execution(mode: Execution) {
    EXECUTION.store(matches!(mode, Execution::Parallel) as u8, Ordering::Relaxed);
}

pub fn execution() -> Execution {
    if cfg!(feature = "parallel") && EXECUTION.load(Ordering::Relaxed) == 1 {
        Execution::Parallel
    } else {
        Execution::Sequential
    }
}

/// Map `f` over `items`, preserving order. The first error (by index) wins.
pub fn try_map<T, U, F>(items: &[T], f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> Result<U> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if execution() == Execution::Parallel {
        use rayon::prelude::*;
        return items.par_iter().map(&f).collect::<Vec<_>>().into_iter().collect();
    }
    items.iter().map(f).collect()
}

/// Largest value and where it occurred.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Worst {
    pub value: f64,
    pub index: Option<usize>,
}

impl Worst {
    pub fn none() -> Self {
        Worst { value: 0.0, index: None }
    }
}

/// Maximum of `f` over `items`. NaN counts as +inf so it can never pass a check.
pub fn max_over<T, F>(items: &[T], f: F) -> Result<Worst>
where
    T: Sync,
    F: Fn(&T) -> Result<f64> + Sync + Send,
{
    let values = try_map(items, f)?;
    let mut worst = Worst::none();
    for (i, v) in values.into_iter().enumerate() {
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if worst.index.is_none() || v > worst.value {
            worst = Worst { value: v, index: Some(i) };
        }
    }
    Ok(worst)
}

/// Axis-aligned sampling box in phase space.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Region {
    pub q: Vec<(f64, f64)>,
    pub p: Vec<(f64, f64)>,
}

impl Region {
    /// `q ∈ [-1, 1]^d`, `p ∈ [-0.5, 0.5]^d`.
    pub fn default_for(dim: usize) -> Self {
        Region::uniform(dim, (-1.0, 1.0), (-0.5, 0.5))
    }

    pub fn uniform(dim: usize, q: (f64, f64), p: (f64, f64)) -> Self {
        Region { q: vec![q; dim], p: vec![p; dim] }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn contains_p(&self, p: &[f64]) -> bool {
        p.len() == self.p.len() && p.iter().zip(&self.p).all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn validate(&self) -> Result<()> {
        if self.q.len() != self.p.len() {
            return Err(Error::InvalidArgument("region q and p bounds differ in length".into()));
        }
        for (lo, hi) in self.q.iter().chain(&self.p) {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidArgument(format!("bad interval [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

/// How the sample set was produced; embedded in reports.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SamplingInfo {
    pub seed: u64,
    pub n: usize,
    pub region: Region,
}

/// `n` points drawn uniformly from `region` with a ChaCha8 stream seeded by `seed`.
pub fn sample_points(region: &Region, n: usize, seed: u64, params: &BTreeMap<String, f64>) -> Vec<PhasePoint> {
    sample_points_filtered(region, n, seed, params, |_| true)
}

/// Like [`sample_points`], rejecting points for which `accept` is false.
pub fn sample_points_filtered(
    region: &Region,
    n: usize,
    seed: u64,
    params: &BTreeMap<String, f64>,
    accept: impl Fn(&PhasePoint) -> bool,
) -> Vec<PhasePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |(lo, hi): (f64, f64)| if lo == hi { lo } else { rng.gen_range(lo..=hi) };
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n && attempts < 1000 * (n + 1) {
        attempts += 1;
        let q: Vec<f64> = region.q.iter().map(|b| draw(*b)).collect();
        let p: Vec<f64> = region.p.iter().map(|b| draw(*b)).collect();
        let x = PhasePoint { q, p, params: params.clone() };
        if accept(&x) {
            out.push(x);
        }
    }
    out
}

/// Sampling that avoids `|p| = 0`, for radial quantities.
pub fn sample_points_nonzero_rho(region: &Region, n: usize, seed: u64, params: &BTreeMap<String, f64>) -> Vec<PhasePoint> {
    sample_points_filtered(region, n, seed, params, |x| x.rho() > 1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_is_reproducible_and_bounded() {
        let r = Region::default_for(3);
        let a = sample_points(&r, 50, 7, &BTreeMap::new());
        let b = sample_points(&r, 50, 7, &BTreeMap::new());
        assert_eq!(a, b);
        assert_ne!(a, sample_points(&r, 50, 8, &BTreeMap::new()));
        for x in &a {
            assert!(x.q.iter().all(|v| (-1.0..=1.0).contains(v)));
            assert!(r.contains_p(&x.p));
        }
    }

    #[test]
    fn max_is_schedule_independent() {
        let r = Region::default_for(2);
        let pts = sample_points(&r, 200, 3, &BTreeMap::new());
        let f = |x: &PhasePoint| Ok(x.q[0] * x.p[1] + x.q[1]);
        set_execution(Execution::Sequential);
        let s = max_over(&pts, f).unwrap();
        set_execution(Execution::Parallel);
        let p = max_over(&pts, f).unwrap();
        assert_eq!(s, p);
    }

    #[test]
    fn nan_never_passes() {
        let w = max_over(&[1.0, f64::NAN, 3.0], |v| Ok(*v)).unwrap();
        assert_eq!(w.value, f64::INFINITY);
        assert_eq!(w.index, Some(1));
    }

    #[test]
    fn first_error_wins() {
        let r = try_map(&[1, 2, 3, 4], |v| if *v >= 3 { Err(Error::InvalidArgument(v.to_string())) } else { Ok(*v) });
        assert_eq!(r, Err(Error::InvalidArgument("3".into())));
    }
}
