use std::collections::BTreeMap;
use std::io::Write;

use gupphase::angular::{self, AngularScheme};
use gupphase::closure::{closure_check_at, TOLERANCE};
use gupphase::dynamics::{self, Method};
use gupphase::opalg::{jacobi_all, Ordering, QuantumModel, Triples};
use gupphase::report::{CheckEntry, CheckReport};
use gupphase::sampling::{self, SamplingInfo};
use gupphase::solver::{self, PathShape, PathSpec, Poly2D, RHO};
use gupphase::{parse_in, Error, Expr, PhasePoint, Scope};
use serde::Serialize;

use crate::model::{load, Loaded};
use crate::*;

#[derive(Serialize)]
struct ModelInfo {
    name: String,
    dimension: usize,
    sha256: String,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    tool: &'static str,
    tool_version: &'static str,
    command: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<ModelInfo>,
    #[serde(flatten)]
    body: T,
}

fn model_info(l: &Loaded) -> ModelInfo {
    ModelInfo { name: l.model.name.clone(), dimension: l.model.dim(), sha256: l.sha256.clone() }
}

fn render<T: Serialize>(command: &str, model: Option<ModelInfo>, body: T) -> Result<String, Failure> {
    let env = Envelope { schema_version: SCHEMA_VERSION, tool: "gup", tool_version: TOOL_VERSION, command, model, body };
    let mut s = serde_json::to_string_pretty(&env).map_err(|e| Failure::check(format!("serialisation failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Printed form with `+ -` folded into `-`.
fn tidy(e: &Expr) -> String {
    e.to_string().replace("+ -", "- ")
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    out.write_all(text.as_bytes()).map_err(|e| Failure::check(format!("write failed: {e}")))
}

fn exit_for(pass: bool) -> i32 {
    if pass {
        EXIT_OK
    } else {
        EXIT_FAIL
    }
}

/// `GUP_SEED` wins over `--seed`.
fn effective_seed(flag: u64) -> Result<u64, Failure> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| Failure::usage(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
        Err(_) => Ok(flag),
    }
}

fn parse_params(list: &[String]) -> Result<BTreeMap<String, f64>, Failure> {
    let mut out = BTreeMap::new();
    for item in list {
        let (k, v) = item.split_once('=').ok_or_else(|| Failure::usage(format!("--param expects NAME=VALUE, got `{item}`")))?;
        let v: f64 = v.trim().parse().map_err(|_| Failure::usage(format!("parameter `{k}`: `{v}` is not a number")))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Failure::usage(format!("{what}: `{t}` is not a number"))))
        .collect()
}

fn parse_expr(text: &str, scope: &Scope, what: &str) -> Result<Expr, Failure> {
    parse_in(text, scope).map_err(|e| Failure::usage(format!("{what}: {e} in `{text}`")))
}

pub fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<i32, Failure> {
    match cmd {
        Command::Check(a) => check(a, out),
        Command::SolveF(a) => solve_f(a, out),
        Command::SolveA(a) => solve_a(a, out),
        Command::Simulate(a) => simulate(a, out),
        Command::Quantum(a) => quantum(a, out),
        Command::AngularCheck(a) => angular_check(a, out),
    }
}

fn angular_report(s: &AngularScheme, points: &[PhasePoint], h: Option<&Expr>) -> Result<CheckReport, Failure> {
    let mut r = angular::check_angular_algebra(s, points)?;
    let mut pj: f64 = 0.0;
    for x in points {
        pj = pj.max(angular::p_dot_j(s, x)?.abs());
    }
    let mut extra = vec![
        CheckEntry::new("p.J", pj, angular::SCALAR_TOLERANCE),
        CheckEntry::from_worst("p.J da/drho", &angular::p_dot_j_da_residual(s, points)?, angular::SCALAR_TOLERANCE),
        CheckEntry::from_worst("f system", &angular::f_system_residual(s, points)?, angular::TOLERANCE),
        CheckEntry::from_worst("qPB system", &angular::qpb_system_residual(s, points)?, angular::SCALAR_TOLERANCE),
    ];
    let mut min_det = f64::INFINITY;
    let mut at = None;
    for (k, x) in points.iter().enumerate() {
        let d = angular::s_system_determinant(s, x)?.value.abs();
        if d < min_det {
            min_det = d;
            at = Some(k);
        }
    }
    extra.push(CheckEntry {
        pass: min_det > angular::SCALAR_TOLERANCE,
        worst_point: at,
        note: Some("min |f^-2 (f^2 + a rho^2)|; must stay away from 0".into()),
        ..CheckEntry::new("s determinant", min_det, angular::SCALAR_TOLERANCE)
    });
    if let Some(h) = h {
        extra.push(CheckEntry::from_worst("rotation invariance", &angular::rotation_invariance_residual(s, h, points)?, angular::TOLERANCE));
    }
    r.extend(CheckReport::new(extra, None));
    Ok(r)
}

/// Full check of a model: the report and its verdict.
pub fn check_report(loaded: &Loaded, n: usize, seed: u64, tol: f64) -> Result<CheckReport, Failure> {
    let m = &loaded.model;
    let region = m.domain().clone();
    let mut report = m.nondegeneracy_report(&region, n, seed)?;
    if !report.pass {
        return Ok(report);
    }
    let pts = sampling::sample_points(&region, n, seed, m.params());
    let closure = closure_check_at(m, &pts, tol, None)?;
    report.extend(closure.checks);
    if let Some(s) = &loaded.scheme {
        let pts = sampling::sample_points_nonzero_rho(&region, n, seed, m.params());
        let mut ang = angular_report(s, &pts, None)?;
        for c in &mut ang.checks {
            c.name = format!("angular: {}", c.name);
        }
        report.extend(ang);
    }
    report.sampling = Some(SamplingInfo { seed, n, region });
    Ok(report)
}

fn check(a: CheckArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let loaded = load(&a.model)?;
    let seed = effective_seed(a.sampling.seed)?;
    let report = check_report(&loaded, a.sampling.points, seed, a.tol)?;
    let pass = report.pass;
    let text = render("check", Some(model_info(&loaded)), report)?;
    match &a.out {
        Some(path) => {
            std::fs::write(path, &text).map_err(|e| Failure::check(format!("cannot write {}: {e}", path.display())))?;
            emit(out, &format!("{}: {}\n", loaded.model.name, if pass { "pass" } else { "FAIL" }))?;
        }
        None => emit(out, &text)?,
    }
    Ok(exit_for(pass))
}

#[derive(Serialize)]
struct SolveFOutput {
    mode: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    target: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    closed_form: Option<String>,
}

fn path_spec(name: &str) -> Result<PathSpec, Failure> {
    let shape = match name {
        "axis" => PathShape::AxisAligned,
        "reversed" => PathShape::AxisAlignedReversed,
        "straight" => PathShape::Straight,
        other => return Err(Failure::usage(format!("unknown path `{other}` (axis|reversed|straight)"))),
    };
    Ok(PathSpec::new(shape))
}

fn solve_failure(e: Error) -> Failure {
    match e {
        Error::NotIntegrable(_) | Error::NegativeRadicand { .. } | Error::PathOutsideDomain(_) => Failure::check(e.to_string()),
        other => other.into(),
    }
}

fn numeric_c(c: &Expr, params: &BTreeMap<String, f64>) -> Result<f64, Failure> {
    c.eval(&PhasePoint::new(vec![], vec![]).with_params(params))
        .map_err(|_| Failure::usage(format!("--c `{c}` must be numeric to evaluate f")))
}

fn solve_f(a: SolveFArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let mut params = parse_params(&a.params)?;
    let path = path_spec(&a.path)?;
    let target = a.target.as_deref().map(|t| parse_list(t, "--target")).transpose()?;
    let free = Scope::new();
    let c = parse_expr(&a.c, &free, "--c")?;
    let mut info = None;

    let output = if let Some(a_text) = &a.a {
        let names: Vec<String> = params.keys().cloned().chain([RHO.to_string()]).collect();
        let a_expr = parse_expr(a_text, &Scope::new().names(names), "--a")?;
        let sol = solver::solve_f_radial(&a_expr, &params, numeric_c(&c, &params)?).map_err(solve_failure)?;
        let value = a.target_rho.map(|r| sol.eval(r)).transpose().map_err(solve_failure)?;
        if value.is_none() && !a.closed_form {
            return Err(Failure::usage("--a needs --target-rho or --closed-form"));
        }
        SolveFOutput {
            mode: "radial",
            target: a.target_rho.map(|r| vec![r]),
            value,
            closed_form: a.closed_form.then(|| sol.closed_form.as_ref().map(tidy)).flatten(),
        }
    } else if let Some(l_text) = &a.l {
        let l = parse_expr(l_text, &Scope::new().dim(2), "--l")?;
        let poly = Poly2D::from_l(&l).map_err(solve_failure)?;
        let f = solver::solve_f_polynomial_2d(&poly, &c).map_err(solve_failure)?;
        let value = match &target {
            None => None,
            Some(t) if t.len() == 2 => {
                let x = PhasePoint::new(vec![0.0, 0.0], t.clone()).with_params(&params);
                Some(f.eval(&x).map_err(|e| Failure::usage(format!("cannot evaluate f at the target: {e}")))?)
            }
            Some(_) => return Err(Failure::usage("--target needs two components with --l")),
        };
        SolveFOutput { mode: "polynomial", target, value, closed_form: Some(tidy(&f)) }
    } else {
        let (g, closed) = if let Some(g_text) = &a.g {
            let g = g_text.split(',').map(|t| parse_expr(t, &free, "--g")).collect::<Result<Vec<_>, _>>()?;
            (g, None)
        } else if let Some(path) = &a.model {
            let loaded = load(path)?;
            let m = &loaded.model;
            params = m.params().clone();
            let dec = gupphase::closure::decompose_l(m)?;
            if !dec.exact {
                return Err(Failure::check("nonconforming L: no g to integrate"));
            }
            let closed = if a.closed_form && m.dim() == 2 {
                Poly2D::from_l(&m.l(0, 1)).and_then(|p| solver::solve_f_polynomial_2d(&p, &c)).ok().map(|e| tidy(&e))
            } else {
                None
            };
            info = Some(model_info(&loaded));
            (dec.g, closed)
        } else {
            return Err(Failure::usage("solve-f needs a model, --g, --l or --a"));
        };
        let t = target.clone().ok_or_else(|| Failure::usage("--target is required"))?;
        let value = solver::solve_f_line_integral(&g, &params, &t, numeric_c(&c, &params)?, &path).map_err(solve_failure)?;
        SolveFOutput { mode: "line-integral", target, value: Some(value), closed_form: closed }
    };
    emit(out, &render("solve-f", info, output)?)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SolveAOutput {
    a: String,
    at_zero: String,
    exact: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    values: Vec<[f64; 2]>,
}

fn solve_a(a: SolveAArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let params = parse_params(&a.params)?;
    let names: Vec<String> = params.keys().cloned().chain([RHO.to_string()]).collect();
    let f = parse_expr(&a.f, &Scope::new().names(names), "--f")?;
    let d = solver::solve_a_from_f(&f, &params)?;
    let mut values = Vec::new();
    if let Some(list) = &a.rho {
        for r in parse_list(list, "--rho")? {
            values.push([r, d.eval(&params, r)?]);
        }
    }
    let body = SolveAOutput { a: tidy(&d.a), at_zero: tidy(&d.at_zero), exact: d.exact, values };
    emit(out, &render("solve-a", None, body)?)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SimulateOutput {
    method: Method,
    dt: f64,
    steps: usize,
    t_final: f64,
    initial: Vec<f64>,
    r#final: Vec<f64>,
    energy_drift: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    j_drift: Option<f64>,
    liouville_residual: f64,
}

fn hamiltonian(flag: &Option<String>, loaded: &Loaded) -> Result<Option<Expr>, Failure> {
    match flag {
        Some(t) => {
            let m = &loaded.model;
            let scope = Scope::new().names(m.params().keys().cloned()).dim(m.dim());
            Ok(Some(parse_expr(t, &scope, "--h")?))
        }
        None => Ok(loaded.hamiltonian.clone()),
    }
}

fn simulate(a: SimulateArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    if !(a.dt > 0.0 && a.dt.is_finite()) {
        return Err(Failure::usage(format!("--dt must be positive, got {}", a.dt)));
    }
    if !(a.t_end >= 0.0 && a.t_end.is_finite()) {
        return Err(Failure::usage(format!("--t-end must be non-negative, got {}", a.t_end)));
    }
    let method: Method = a.method.parse().map_err(Failure::usage_from)?;
    let loaded = load(&a.model)?;
    let m = &loaded.model;
    let d = m.dim();
    let h = hamiltonian(&a.h, &loaded)?.ok_or_else(|| Failure::usage("no Hamiltonian: pass --h or set `hamiltonian`"))?;
    let seed = effective_seed(a.sampling.seed)?;
    if !a.force {
        let report = check_report(&loaded, a.sampling.points, seed, TOLERANCE)?;
        if !report.pass {
            let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
            return Err(Failure::check(format!("model fails its checks ({}); use --force to integrate anyway", failed.join(", "))));
        }
    }
    let x0 = match &a.x0 {
        Some(t) => {
            let v = parse_list(t, "--x0")?;
            if v.len() != 2 * d {
                return Err(Failure::usage(format!("--x0 needs {} values", 2 * d)));
            }
            PhasePoint::from_state(&v)
        }
        None => {
            let p = sampling::sample_points(m.domain(), 1, seed, m.params()).remove(0);
            PhasePoint::new(p.q, p.p)
        }
    };
    let tr = dynamics::integrate(m, &h, &x0, a.t_end, a.dt, method).map_err(|e| match e {
        Error::DomainExit { .. } | Error::StepFailure { .. } => Failure::check(e.to_string()),
        other => other.into(),
    })?;
    let cons = dynamics::conservation_report(&tr, m, &h, loaded.scheme.as_ref())?;
    let pts = sampling::sample_points(m.domain(), a.sampling.points, seed, m.params());
    let liouville = dynamics::liouville_residual(m, &h, &pts)?.value;
    if let Some(path) = &a.csv {
        let mut buf = Vec::new();
        dynamics::write_csv(&mut buf, &tr, m, &h, loaded.scheme.as_ref())?;
        std::fs::write(path, buf).map_err(|e| Failure::check(format!("cannot write {}: {e}", path.display())))?;
    }
    let body = SimulateOutput {
        method,
        dt: a.dt,
        steps: tr.len() - 1,
        t_final: *tr.t.last().expect("trajectory has its initial point"),
        initial: x0.state(),
        r#final: tr.last().state(),
        energy_drift: cons.energy_drift,
        j_drift: cons.j_drift,
        liouville_residual: liouville,
    };
    emit(out, &render("simulate", Some(model_info(&loaded)), body)?)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct QuantumOutput {
    ordering: Ordering,
    triples: Vec<gupphase::opalg::TripleResidual>,
    pass: bool,
}

fn quantum(a: QuantumArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let loaded = load(&a.model)?;
    let ordering = match &a.ordering {
        Some(o) => o.parse().map_err(Failure::usage_from)?,
        None => loaded.ordering.unwrap_or(Ordering::Left),
    };
    let which: Triples = a.triples.parse().map_err(Failure::usage_from)?;
    let qm = QuantumModel::from_gup_literal(&loaded.model, ordering)
        .map_err(|e| Failure { code: EXIT_SCOPE, message: format!("outside the polynomial operator algebra: {e}") })?;
    let triples = jacobi_all(&qm, which)?;
    let pass = triples.iter().all(|t| t.zero);
    emit(out, &render("quantum", Some(model_info(&loaded)), QuantumOutput { ordering, triples, pass })?)?;
    Ok(exit_for(pass))
}

fn angular_check(a: AngularArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let loaded = load(&a.model)?;
    let s = loaded.scheme.as_ref().ok_or_else(|| Failure::usage(format!("{} has no scheme block", a.model.display())))?;
    let seed = effective_seed(a.sampling.seed)?;
    let m = &loaded.model;
    let h = hamiltonian(&a.h, &loaded)?;
    let region = m.domain().clone();
    let pts = sampling::sample_points_nonzero_rho(&region, a.sampling.points, seed, m.params());
    let mut report = angular_report(s, &pts, h.as_ref())?;
    report.sampling = Some(SamplingInfo { seed, n: a.sampling.points, region });
    let pass = report.pass;
    emit(out, &render("angular-check", Some(model_info(&loaded)), report)?)?;
    Ok(exit_for(pass))
}
