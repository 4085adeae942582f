//! Hamiltonian flow `ẋ^a = π^{ab}(x) ∂_b H` of a deformed model.

use std::io::Write;

use serde::Serialize;

use crate::angular::{orbital, AngularScheme};
use crate::error::{Error, Result};
use crate::expr::{Compiled, Expr, PhasePoint, Symbol};
use crate::sampling::{self, Worst};
use crate::structure::{GupModel, Observable};

/// Integration aborts when `f` drops to this value.
pub const DEFAULT_F_MIN: f64 = 1e-6;
pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_T_END: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rk4,
    /// Dormand–Prince 5(4) with error control.
    Rk45,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk4" => Ok(Method::Rk4),
            "rk45" => Ok(Method::Rk45),
            other => Err(Error::InvalidArgument(format!("unknown method `{other}` (rk4|rk45)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegrateOptions {
    pub f_min: f64,
    /// Absolute and relative tolerance of the adaptive method.
    pub atol: f64,
    pub rtol: f64,
    pub max_steps: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions { f_min: DEFAULT_F_MIN, atol: 1e-12, rtol: 1e-10, max_steps: 10_000_000 }
    }
}

/// `H` with the model, ready for repeated vector-field evaluation.
pub struct Flow<'a> {
    pub model: &'a GupModel,
    h: Observable,
}

impl<'a> Flow<'a> {
    pub fn new(model: &'a GupModel, h: &Expr) -> Result<Self> {
        Ok(Flow { model, h: Observable::new(model, h)? })
    }

    pub fn hamiltonian(&self, x: &PhasePoint) -> Result<f64> {
        self.h.value(x)
    }

    pub fn field(&self, x: &PhasePoint) -> Result<Vec<f64>> {
        let pi = self.model.poisson_matrix(x)?;
        Ok(pi.mul_vec(&self.h.gradient(x)?))
    }

    fn field_state(&self, s: &[f64]) -> Result<Vec<f64>> {
        self.field(&PhasePoint::from_state(s))
    }
}

/// `π(x) ∇H(x)`.
pub fn hamiltonian_vector_field(m: &GupModel, h: &Expr, x: &PhasePoint) -> Result<Vec<f64>> {
    Flow::new(m, h)?.field(x)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub method: Method,
    /// Nominal step (initial step for the adaptive method).
    pub dt: f64,
    pub t: Vec<f64>,
    #[serde(skip)]
    pub points: Vec<PhasePoint>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn last(&self) -> &PhasePoint {
        self.points.last().expect("trajectory has the initial point")
    }
}

fn axpy(x: &[f64], a: f64, k: &[f64]) -> Vec<f64> {
    x.iter().zip(k).map(|(x, k)| x + a * k).collect()
}

fn combo(x: &[f64], h: f64, terms: &[(f64, &Vec<f64>)]) -> Vec<f64> {
    let mut out = x.to_vec();
    for (c, k) in terms {
        if *c != 0.0 {
            for (o, v) in out.iter_mut().zip(k.iter()) {
                *o += h * c * v;
            }
        }
    }
    out
}

fn rk4_step(flow: &Flow, s: &[f64], h: f64) -> Result<Vec<f64>> {
    let k1 = flow.field_state(s)?;
    let k2 = flow.field_state(&axpy(s, h / 2.0, &k1))?;
    let k3 = flow.field_state(&axpy(s, h / 2.0, &k2))?;
    let k4 = flow.field_state(&axpy(s, h, &k3))?;
    Ok(s.iter()
        .enumerate()
        .map(|(i, v)| v + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

// Dormand–Prince coefficients.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// One Dormand–Prince step: fifth-order solution and error estimate.
fn dopri_step(flow: &Flow, s: &[f64], h: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    for stage in 0..7 {
        let terms: Vec<(f64, &Vec<f64>)> = (0..stage).map(|j| (A[stage][j], &k[j])).collect();
        let y = combo(s, h, &terms);
        k.push(flow.field_state(&y)?);
    }
    let y5 = combo(s, h, &(0..7).map(|j| (B5[j], &k[j])).collect::<Vec<_>>());
    let err: Vec<f64> = (0..s.len()).map(|i| h * (0..7).map(|j| (B5[j] - B4[j]) * k[j][i]).sum::<f64>()).collect();
    Ok((y5, err))
}

fn guard(m: &GupModel, s: &[f64], t: f64, f_min: f64) -> Result<()> {
    let f = m.f_at(&PhasePoint::from_state(s))?;
    if f.is_nan() || f <= f_min {
        return Err(Error::DomainExit { t, f });
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::StepFailure { t, reason: "state is not finite".into() });
    }
    Ok(())
}

pub fn integrate(m: &GupModel, h: &Expr, x0: &PhasePoint, t_end: f64, dt: f64, method: Method) -> Result<Trajectory> {
    integrate_with(m, h, x0, t_end, dt, method, &IntegrateOptions::default())
}

pub fn integrate_with(
    m: &GupModel,
    h: &Expr,
    x0: &PhasePoint,
    t_end: f64,
    dt: f64,
    method: Method,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_end must be non-negative, got {t_end}")));
    }
    if x0.dim() != m.dim() {
        return Err(Error::InvalidArgument(format!("initial point has dimension {}, model has {}", x0.dim(), m.dim())));
    }
    let flow = Flow::new(m, h)?;
    let mut s = x0.state();
    guard(m, &s, 0.0, opts.f_min)?;
    let mut tr = Trajectory { method, dt, t: vec![0.0], points: vec![PhasePoint::from_state(&s)] };
    let mut t = 0.0;
    match method {
        Method::Rk4 => {
            let n = ((t_end / dt) - 1e-9).ceil().max(0.0) as usize;
            for k in 1..=n {
                let t_next = if k == n { t_end } else { k as f64 * dt };
                s = rk4_step(&flow, &s, t_next - t)?;
                t = t_next;
                guard(m, &s, t, opts.f_min)?;
                tr.t.push(t);
                tr.points.push(PhasePoint::from_state(&s));
            }
        }
        Method::Rk45 => {
            let mut step = dt.min(t_end.max(f64::MIN_POSITIVE));
            let mut steps = 0;
            while t < t_end {
                steps += 1;
                if steps > opts.max_steps {
                    return Err(Error::StepFailure { t, reason: "too many steps".into() });
                }
                step = step.min(t_end - t);
                let (y, err) = dopri_step(&flow, &s, step)?;
                let norm = err
                    .iter()
                    .zip(s.iter().zip(&y))
                    .map(|(e, (a, b))| {
                        let sc = opts.atol + opts.rtol * a.abs().max(b.abs());
                        (e / sc).powi(2)
                    })
                    .sum::<f64>()
                    .sqrt()
                    / (s.len() as f64).sqrt();
                if !norm.is_finite() {
                    return Err(Error::StepFailure { t, reason: "non-finite error estimate".into() });
                }
                if norm <= 1.0 {
                    t = if t_end - t - step <= 1e-15 * t_end.max(1.0) { t_end } else { t + step };
                    s = y;
                    guard(m, &s, t, opts.f_min)?;
                    tr.t.push(t);
                    tr.points.push(PhasePoint::from_state(&s));
                }
                let factor = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
                step *= factor;
                if step < 1e-14 * t_end.max(1.0) {
                    return Err(Error::StepFailure { t, reason: "step size underflow".into() });
                }
            }
        }
    }
    Ok(tr)
}

/// Independent trajectories from many initial points, integrated in parallel.
pub fn integrate_ensemble(
    m: &GupModel,
    h: &Expr,
    x0s: &[PhasePoint],
    t_end: f64,
    dt: f64,
    method: Method,
) -> Vec<Result<Trajectory>> {
    sampling::try_map(x0s, |x| Ok(integrate(m, h, x, t_end, dt, method))).expect("per-trajectory errors are kept")
}

/// Rotation generators used for diagnostics: the scheme's, or `(q × p)/f` in 3D.
pub fn rotation_generators(m: &GupModel, scheme: Option<&AngularScheme>) -> Option<[Expr; 3]> {
    match scheme {
        Some(s) => Some(s.j.clone()),
        None if m.dim() == 3 => Some(std::array::from_fn(|k| (orbital(k) / m.f().clone()).simplify())),
        None => None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Conservation {
    pub energy_drift: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j_drift: Option<f64>,
}

/// `max_t |H(x(t)) − H(x0)|` and, with a scheme, `max_{t,k} |J_k(x(t)) − J_k(x0)|`.
pub fn conservation_report(tr: &Trajectory, m: &GupModel, h: &Expr, scheme: Option<&AngularScheme>) -> Result<Conservation> {
    let hc = m.compile(h)?;
    let first = tr.points.first().ok_or_else(|| Error::InvalidArgument("empty trajectory".into()))?;
    let h0 = hc.eval(&first.q, &first.p)?;
    let mut energy_drift: f64 = 0.0;
    for x in &tr.points {
        energy_drift = energy_drift.max((hc.eval(&x.q, &x.p)? - h0).abs());
    }
    let j_drift = match scheme {
        None => None,
        Some(s) => {
            let js = s.j.iter().map(|e| m.compile(e)).collect::<Result<Vec<_>>>()?;
            let j0 = js.iter().map(|c| c.eval(&first.q, &first.p)).collect::<Result<Vec<_>, _>>()?;
            let mut w: f64 = 0.0;
            for x in &tr.points {
                for (c, v0) in js.iter().zip(&j0) {
                    w = w.max((c.eval(&x.q, &x.p)? - v0).abs());
                }
            }
            Some(w)
        }
    };
    Ok(Conservation { energy_drift, j_drift })
}

/// Symbolic `Σ_a ∂_a (f^{−d} X_H^a)`.
pub fn liouville_divergence(m: &GupModel, h: &Expr) -> Expr {
    let d = m.dim();
    let density = m.f().clone().powi(-(d as i64));
    let dh: Vec<Expr> = (0..2 * d).map(|k| h.diff(&Symbol::coordinate(k, d))).collect();
    let pi = |a: usize, b: usize| -> Expr {
        match (a < d, b < d) {
            (true, true) => m.l(a, b),
            (true, false) if b - d == a => m.f().clone(),
            (false, true) if a - d == b => -m.f().clone(),
            _ => Expr::zero(),
        }
    };
    let mut terms = Vec::new();
    for a in 0..2 * d {
        let xa = (0..2 * d)
            .filter(|&b| !dh[b].is_zero())
            .map(|b| pi(a, b) * dh[b].clone())
            .reduce(|x, y| x + y)
            .unwrap_or_else(Expr::zero)
            .simplify();
        if xa.is_zero() {
            continue;
        }
        terms.push((density.clone() * xa).diff(&Symbol::coordinate(a, d)));
    }
    terms.into_iter().reduce(|x, y| x + y).unwrap_or_else(Expr::zero).simplify()
}

/// `max |Σ_a ∂_a (f^{−d} X_H^a)|` over `points`.
pub fn liouville_residual(m: &GupModel, h: &Expr, points: &[PhasePoint]) -> Result<Worst> {
    let div = liouville_divergence(m, h);
    if div.is_zero() {
        return Ok(Worst::none());
    }
    let c: Compiled = m.compile(&div)?;
    sampling::max_over(points, |x| Ok(c.eval(&x.q, &x.p)?.abs()))
}

/// CSV with header `t,q1..qd,p1..pd,H[,J1,J2,J3]`.
pub fn write_csv(
    out: &mut dyn Write,
    tr: &Trajectory,
    m: &GupModel,
    h: &Expr,
    scheme: Option<&AngularScheme>,
) -> Result<()> {
    let io = |e: std::io::Error| Error::InvalidArgument(format!("write failed: {e}"));
    let d = m.dim();
    let hc = m.compile(h)?;
    let js = match rotation_generators(m, scheme) {
        Some(j) => Some(j.iter().map(|e| m.compile(e)).collect::<Result<Vec<_>>>()?),
        None => None,
    };
    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|i| format!("q{i}")));
    header.extend((1..=d).map(|i| format!("p{i}")));
    header.push("H".into());
    if js.is_some() {
        header.extend(["J1", "J2", "J3"].map(String::from));
    }
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for (t, x) in tr.t.iter().zip(&tr.points) {
        let mut row = vec![format!("{t}")];
        row.extend(x.q.iter().chain(&x.p).map(|v| format!("{v:e}")));
        row.push(format!("{:e}", hc.eval(&x.q, &x.p)?));
        if let Some(js) = &js {
            for c in js {
                row.push(format!("{:e}", c.eval(&x.q, &x.p)?));
            }
        }
        writeln!(out, "{}", row.join(",")).map_err(io)?;
    }
    Ok(())
}
