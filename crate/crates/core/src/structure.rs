//! GUP models, their Poisson bivector and symplectic form, and brackets.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::expr::{rational_from_f64, Compiled, Expr, PhasePoint, Symbol};
use crate::poly::Poly;
use crate::report::{CheckEntry, CheckReport};
use crate::sampling::{self, Region, SamplingInfo};

/// Position of `(i, j)`, `i < j`, 0-based, in the flat upper-triangular list
/// `(1,2), (1,3), …, (1,d), (2,3), …`.
pub fn upper_index(i: usize, j: usize, dim: usize) -> usize {
    debug_assert!(i < j && j < dim);
    i * dim - i * (i + 1) / 2 + (j - i - 1)
}

/// Upper-triangular pairs in storage order.
pub fn upper_pairs(dim: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..dim).flat_map(move |i| (i + 1..dim).map(move |j| (i, j)))
}

/// A deformed phase space: `{q_i,q_j} = L_ij`, `{q_i,p_j} = f δ_ij`, `{p_i,p_j} = 0`.
///
/// Only `L_ij` with `i < j` is stored. Parameters are bound at construction;
/// evaluation uses the model's parameters, not those carried by a
/// [`PhasePoint`].
#[derive(Clone, Debug)]
pub struct GupModel {
    pub name: String,
    dim: usize,
    f: Expr,
    l: Vec<Expr>,
    params: BTreeMap<String, f64>,
    domain: Region,
    f_c: Compiled,
    l_c: Vec<Compiled>,
}

impl GupModel {
    pub fn new(dim: usize, f: Expr, l_upper: Vec<Expr>, params: BTreeMap<String, f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Model("dimension must be positive".into()));
        }
        let want = dim * (dim - 1) / 2;
        if l_upper.len() != want {
            return Err(Error::Model(format!("L needs {want} upper-triangular entries for d = {dim}, got {}", l_upper.len())));
        }
        for (k, e) in std::iter::once(&f).chain(&l_upper).enumerate() {
            let what = if k == 0 { "f".to_string() } else { format!("L entry {k}") };
            if e.max_coordinate_index() > dim {
                return Err(Error::Model(format!("{what} references a coordinate beyond d = {dim}")));
            }
            for s in e.symbols() {
                if let Symbol::Named(n) = &s {
                    if !params.contains_key(n) {
                        return Err(Error::Model(format!("{what}: unbound parameter `{n}`")));
                    }
                }
            }
        }
        let f_c = Compiled::new(&f, &params)?;
        let l_c = l_upper.iter().map(|e| Compiled::new(e, &params)).collect::<Result<Vec<_>, _>>()?;
        Ok(GupModel { name: String::new(), dim, f, l: l_upper, params, domain: Region::default_for(dim), f_c, l_c })
    }

    /// Build from a full matrix closure `l(i, j)` evaluated for `i < j` only.
    pub fn from_fn(dim: usize, f: Expr, l: impl Fn(usize, usize) -> Expr, params: BTreeMap<String, f64>) -> Result<Self> {
        let upper = upper_pairs(dim).map(|(i, j)| l(i, j)).collect();
        GupModel::new(dim, f, upper, params)
    }

    /// `f = 1`, `L = 0`.
    pub fn undeformed(dim: usize) -> Self {
        GupModel::new(dim, Expr::one(), vec![Expr::zero(); dim * (dim - 1) / 2], BTreeMap::new())
            .expect("undeformed model is valid")
            .named("undeformed")
    }

    /// `f = 1 + β ρ²`, `L_ij = 2β (q_j p_i − q_i p_j)` with the parameter `beta`.
    pub fn kmm(dim: usize, beta: f64) -> Self {
        let b = Expr::named("beta");
        let f = Expr::one() + b.clone() * Expr::momentum_squared(dim);
        let l = |i: usize, j: usize| {
            Expr::int(2) * b.clone() * (Expr::q(j + 1) * Expr::p(i + 1) - Expr::q(i + 1) * Expr::p(j + 1))
        };
        let params = BTreeMap::from([("beta".to_string(), beta)]);
        GupModel::from_fn(dim, f, l, params).expect("KMM model is valid").named("kmm")
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_domain(mut self, domain: Region) -> Result<Self> {
        domain.validate()?;
        if domain.dim() != self.dim {
            return Err(Error::Model("domain dimension differs from model".into()));
        }
        self.domain = domain;
        Ok(self)
    }

    /// Same model with `f` replaced.
    pub fn with_f(&self, f: Expr) -> Result<Self> {
        let m = GupModel::new(self.dim, f, self.l.clone(), self.params.clone())?;
        Ok(GupModel { name: self.name.clone(), domain: self.domain.clone(), ..m })
    }

    /// Same model with `L_ij` (`i < j`, 0-based) replaced.
    pub fn with_l(&self, i: usize, j: usize, e: Expr) -> Result<Self> {
        let mut l = self.l.clone();
        l[upper_index(i, j, self.dim)] = e;
        let m = GupModel::new(self.dim, self.f.clone(), l, self.params.clone())?;
        Ok(GupModel { name: self.name.clone(), domain: self.domain.clone(), ..m })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn f(&self) -> &Expr {
        &self.f
    }

    /// `L_ij`, 0-based, with antisymmetry applied.
    pub fn l(&self, i: usize, j: usize) -> Expr {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.l[upper_index(i, j, self.dim)].clone(),
            std::cmp::Ordering::Greater => (-self.l[upper_index(j, i, self.dim)].clone()).simplify(),
            std::cmp::Ordering::Equal => Expr::zero(),
        }
    }

    pub fn l_upper(&self) -> &[Expr] {
        &self.l
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    /// Parameters as exact rationals via their shortest decimal form.
    pub fn exact_params(&self) -> Result<BTreeMap<String, num_rational::BigRational>> {
        self.params
            .iter()
            .map(|(k, v)| {
                rational_from_f64(*v)
                    .map(|r| (k.clone(), r))
                    .ok_or_else(|| Error::Model(format!("parameter `{k}` = {v} is not finite")))
            })
            .collect()
    }

    pub fn domain(&self) -> &Region {
        &self.domain
    }

    /// Compile `e` against this model's parameters.
    pub fn compile(&self, e: &Expr) -> Result<Compiled> {
        Ok(Compiled::new(e, &self.params)?)
    }

    pub fn f_at(&self, x: &PhasePoint) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.f_c.eval(&x.q, &x.p)?)
    }

    pub fn l_at(&self, i: usize, j: usize, x: &PhasePoint) -> Result<f64> {
        self.check_dim(x)?;
        Ok(match i.cmp(&j) {
            std::cmp::Ordering::Less => self.l_c[upper_index(i, j, self.dim)].eval(&x.q, &x.p)?,
            std::cmp::Ordering::Greater => -self.l_c[upper_index(j, i, self.dim)].eval(&x.q, &x.p)?,
            std::cmp::Ordering::Equal => 0.0,
        })
    }

    fn check_dim(&self, x: &PhasePoint) -> Result<()> {
        if x.q.len() != self.dim || x.p.len() != self.dim {
            return Err(Error::InvalidArgument(format!("point has dimension {}, model has {}", x.q.len(), self.dim)));
        }
        Ok(())
    }

    /// `π = [[L, f I], [−f I, 0]]`.
    pub fn poisson_matrix(&self, x: &PhasePoint) -> Result<Mat2d> {
        let d = self.dim;
        let f = self.f_at(x)?;
        let mut m = Mat2d::zeros(2 * d);
        for (i, j) in upper_pairs(d) {
            let v = self.l_at(i, j, x)?;
            m[(i, j)] = v;
            m[(j, i)] = -v;
        }
        for i in 0..d {
            m[(i, d + i)] = f;
            m[(d + i, i)] = -f;
        }
        Ok(m)
    }

    /// `ω = [[0, −I/f], [I/f, L/f²]]`, the closed-form inverse of `π`.
    pub fn symplectic_matrix(&self, x: &PhasePoint) -> Result<Mat2d> {
        let d = self.dim;
        let f = self.f_at(x)?;
        if f == 0.0 || !f.is_finite() {
            return Err(Error::Degenerate { value: f, location: format!("q = {:?}, p = {:?}", x.q, x.p) });
        }
        let mut m = Mat2d::zeros(2 * d);
        for i in 0..d {
            m[(i, d + i)] = -1.0 / f;
            m[(d + i, i)] = 1.0 / f;
        }
        for (i, j) in upper_pairs(d) {
            let v = self.l_at(i, j, x)? / (f * f);
            m[(d + i, d + j)] = v;
            m[(d + j, d + i)] = -v;
        }
        Ok(m)
    }

    /// `{F, G}` at `x`, as `∂_a F π^{ab} ∂_b G`.
    pub fn bracket(&self, a: &Expr, b: &Expr, x: &PhasePoint) -> Result<f64> {
        let fa = Observable::new(self, a)?;
        let fb = Observable::new(self, b)?;
        fa.bracket(&fb, self, x)
    }

    /// Symbolic bracket `Σ F_qi L_ij G_qj + f Σ (F_qi G_pi − F_pi G_qi)`.
    pub fn bracket_expr(&self, a: &Expr, b: &Expr) -> Expr {
        let d = self.dim;
        let da: Vec<Expr> = (0..2 * d).map(|k| a.diff(&Symbol::coordinate(k, d))).collect();
        let db: Vec<Expr> = (0..2 * d).map(|k| b.diff(&Symbol::coordinate(k, d))).collect();
        let mut terms = Vec::new();
        for (i, j) in upper_pairs(d) {
            // L_ij (A_i B_j − A_j B_i)
            let cross = &da[i] * &db[j] - &da[j] * &db[i];
            if !cross.simplify().is_zero() {
                terms.push(self.l(i, j) * cross);
            }
        }
        for i in 0..d {
            let c = &da[i] * &db[d + i] - &da[d + i] * &db[i];
            if !c.simplify().is_zero() {
                terms.push(self.f.clone() * c);
            }
        }
        terms.into_iter().reduce(|x, y| x + y).unwrap_or_else(Expr::zero).simplify()
    }

    /// Minimum of `f` over `n` seeded samples; fails if it is not positive.
    /// For `f = c + k ρ²` the exact positivity radius is reported too.
    pub fn nondegeneracy_report(&self, region: &Region, n: usize, seed: u64) -> Result<CheckReport> {
        let pts = sampling::sample_points(region, n, seed, &self.params);
        let values = sampling::try_map(&pts, |x| self.f_at(x))?;
        let (mut min_f, mut at) = (f64::INFINITY, None);
        for (k, v) in values.iter().enumerate() {
            let v = if v.is_nan() { f64::NEG_INFINITY } else { *v };
            if at.is_none() || v < min_f {
                min_f = v;
                at = Some(k);
            }
        }
        let mut checks = vec![CheckEntry {
            name: "nondegeneracy".into(),
            residual: min_f,
            tolerance: 0.0,
            pass: min_f > 0.0,
            worst_point: at,
            note: Some("minimum of f; must be > 0".into()),
        }];
        if let Some(bound) = self.radial_positivity_bound() {
            let corner = region.p.iter().map(|(lo, hi)| lo.abs().max(hi.abs()).powi(2)).sum::<f64>().sqrt();
            let entry = match bound {
                PositivityBound::Everywhere => CheckEntry::new("radial positivity bound", corner, f64::INFINITY)
                    .with_note("f = c + k rho^2 with c > 0, k >= 0: positive for all momenta"),
                PositivityBound::Ball(r) => CheckEntry {
                    pass: corner < r,
                    ..CheckEntry::new("radial positivity bound", corner, r)
                }
                .with_note(format!("f = c + k rho^2 with k < 0: positive only on the ball rho < {r}")),
                PositivityBound::Nowhere => CheckEntry::failed("radial positivity bound", "f = c + k rho^2 with c <= 0, k <= 0"),
            };
            checks.push(entry);
        }
        Ok(CheckReport::new(checks, Some(SamplingInfo { seed, n, region: region.clone() })))
    }

    /// Recognises `f = c + k (p_1² + … + p_d²)` with the model's parameter values.
    pub fn radial_positivity_bound(&self) -> Option<PositivityBound> {
        let poly = Poly::from_expr_with(&self.f, &self.exact_params().ok()?).ok()?;
        let mut c = num_rational::BigRational::zero();
        let mut k: Option<num_rational::BigRational> = None;
        let mut seen = 0;
        for (mono, coeff) in poly.terms() {
            match mono.as_slice() {
                [] => c = coeff.clone(),
                [(Symbol::P(_), 2)] => {
                    if k.as_ref().is_some_and(|k| k != coeff) {
                        return None;
                    }
                    k = Some(coeff.clone());
                    seen += 1;
                }
                _ => return None,
            }
        }
        let k = k?;
        if seen != self.dim {
            return None;
        }
        let (c, k) = (c.to_f64()?, k.to_f64()?);
        Some(if k >= 0.0 && c > 0.0 {
            PositivityBound::Everywhere
        } else if k.is_negative() && c > 0.0 {
            PositivityBound::Ball((c / -k).sqrt())
        } else {
            PositivityBound::Nowhere
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PositivityBound {
    Everywhere,
    /// Positive exactly for `ρ` below the radius.
    Ball(f64),
    Nowhere,
}

/// A phase-space function compiled together with its gradient.
#[derive(Clone, Debug)]
pub struct Observable {
    pub expr: Expr,
    value: Compiled,
    grad: Vec<Option<Compiled>>,
}

impl Observable {
    pub fn new(m: &GupModel, e: &Expr) -> Result<Self> {
        let d = m.dim();
        let value = m.compile(e)?;
        let grad = (0..2 * d)
            .map(|k| {
                let de = e.diff(&Symbol::coordinate(k, d));
                if de.is_zero() {
                    Ok(None)
                } else {
                    m.compile(&de).map(Some)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Observable { expr: e.clone(), value, grad })
    }

    pub fn value(&self, x: &PhasePoint) -> Result<f64> {
        Ok(self.value.eval(&x.q, &x.p)?)
    }

    pub fn gradient(&self, x: &PhasePoint) -> Result<Vec<f64>> {
        self.grad
            .iter()
            .map(|g| match g {
                Some(g) => Ok(g.eval(&x.q, &x.p)?),
                None => Ok(0.0),
            })
            .collect()
    }

    pub fn bracket(&self, other: &Observable, m: &GupModel, x: &PhasePoint) -> Result<f64> {
        let pi = m.poisson_matrix(x)?;
        let (ga, gb) = (self.gradient(x)?, other.gradient(x)?);
        Ok(pi.bilinear(&ga, &gb))
    }
}

/// Dense square matrix in the coordinates `(q_1..q_d, p_1..p_d)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat2d {
    n: usize,
    data: Vec<f64>,
}

impl Mat2d {
    pub fn zeros(n: usize) -> Self {
        Mat2d { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat2d::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        Mat2d { n, data: rows.concat() }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn mul(&self, other: &Mat2d) -> Mat2d {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Mat2d::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| (0..self.n).map(|j| self[(i, j)] * v[j]).sum()).collect()
    }

    /// `uᵀ M v`.
    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(self.mul_vec(v)).map(|(a, b)| a * b).sum()
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn determinant(&self) -> f64 {
        let n = self.n;
        let mut a = self.data.clone();
        let mut det = 1.0;
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&r, &s| a[r * n + col].abs().total_cmp(&a[s * n + col].abs()))
                .unwrap_or(col);
            if a[piv * n + col] == 0.0 {
                return 0.0;
            }
            if piv != col {
                for j in 0..n {
                    a.swap(piv * n + j, col * n + j);
                }
                det = -det;
            }
            let p = a[col * n + col];
            det *= p;
            for r in col + 1..n {
                let factor = a[r * n + col] / p;
                if factor != 0.0 {
                    for j in col..n {
                        a[r * n + j] -= factor * a[col * n + j];
                    }
                }
            }
        }
        det
    }

    pub fn max_abs_diff(&self, other: &Mat2d) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn antisymmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                worst = worst.max((self[(i, j)] + self[(j, i)]).abs());
            }
        }
        worst
    }
}

impl std::ops::Index<(usize, usize)> for Mat2d {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat2d {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

impl fmt::Display for Mat2d {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|j| format!("{:>12.6}", self[(i, j)])).collect();
            writeln!(out, "[{}]", row.join(" "))?;
        }
        Ok(())
    }
}
