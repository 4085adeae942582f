//! JSON model files.

use std::collections::BTreeMap;
use std::path::Path;

use gupphase::angular::{build_scheme, AngularScheme};
use gupphase::opalg::Ordering;
use gupphase::sampling::Region;
use gupphase::solver::RHO;
use gupphase::{parse_in, Expr, GupModel, Scope};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::Failure;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(default)]
    pub name: Option<String>,
    pub dimension: usize,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    /// Written in `rho` when a scheme is present.
    pub f: String,
    /// Upper-triangular `L_12, L_13, …, L_23, …`; derived from the scheme when omitted.
    #[serde(rename = "L", default)]
    pub l: Option<Vec<String>>,
    #[serde(default)]
    pub scheme: Option<SchemeBlock>,
    #[serde(default)]
    pub hamiltonian: Option<String>,
    #[serde(default)]
    pub domain: Option<DomainBlock>,
    #[serde(default)]
    pub quantum: Option<QuantumBlock>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeBlock {
    /// `a(rho)`.
    pub a: String,
    #[serde(default)]
    pub s: Option<[String; 3]>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainBlock {
    pub q: Vec<[f64; 2]>,
    pub p: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumBlock {
    #[serde(default)]
    pub ordering: Option<String>,
}

/// A model file resolved into library objects.
pub struct Loaded {
    pub model: GupModel,
    pub scheme: Option<AngularScheme>,
    pub hamiltonian: Option<Expr>,
    pub ordering: Option<Ordering>,
    /// Lower-case hex SHA-256 of the file bytes.
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn load(path: &Path) -> Result<Loaded, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    let file: ModelFile =
        serde_json::from_slice(&bytes).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let mut loaded = resolve(&file)?;
    loaded.sha256 = sha256_hex(&bytes);
    if loaded.model.name.is_empty() {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        loaded.model.name = stem;
    }
    Ok(loaded)
}

fn expr(text: &str, what: &str, scope: &Scope) -> Result<Expr, Failure> {
    parse_in(text, scope).map_err(|e| Failure::usage(format!("{what}: {e} in `{text}`")))
}

pub fn resolve(file: &ModelFile) -> Result<Loaded, Failure> {
    let d = file.dimension;
    if d == 0 {
        return Err(Failure::usage("dimension must be positive"));
    }
    let names: Vec<String> = file.parameters.keys().cloned().collect();
    let scope = Scope::new().names(names.clone()).dim(d);
    let rho_scope = Scope::new().names(names.iter().cloned().chain([RHO.to_string()])).dim(d);

    let (mut model, scheme) = match &file.scheme {
        None => {
            let f = expr(&file.f, "f", &scope)?;
            let l = file.l.clone().unwrap_or_else(|| vec!["0".into(); d * (d - 1) / 2]);
            let l = l.iter().enumerate().map(|(k, t)| expr(t, &format!("L[{k}]"), &scope)).collect::<Result<Vec<_>, _>>()?;
            (GupModel::new(d, f, l, file.parameters.clone()).map_err(Failure::usage_from)?, None)
        }
        Some(block) => {
            if d != 3 {
                return Err(Failure::usage("a scheme block needs dimension 3"));
            }
            let f = expr(&file.f, "f", &rho_scope)?;
            let a = expr(&block.a, "scheme.a", &rho_scope)?;
            let s = match &block.s {
                None => None,
                Some(s) => {
                    let v = s.iter().map(|t| expr(t, "scheme.s", &scope)).collect::<Result<Vec<_>, _>>()?;
                    Some([v[0].clone(), v[1].clone(), v[2].clone()])
                }
            };
            let sch = build_scheme(&a, &f, s, &file.parameters).map_err(Failure::usage_from)?;
            let model = match &file.l {
                None => sch.model.clone(),
                Some(l) => {
                    let l = l.iter().enumerate().map(|(k, t)| expr(t, &format!("L[{k}]"), &scope)).collect::<Result<Vec<_>, _>>()?;
                    GupModel::new(d, sch.f.clone(), l, file.parameters.clone()).map_err(Failure::usage_from)?
                }
            };
            (model, Some(sch))
        }
    };
    if let Some(dom) = &file.domain {
        let region = Region {
            q: dom.q.iter().map(|[a, b]| (*a, *b)).collect(),
            p: dom.p.iter().map(|[a, b]| (*a, *b)).collect(),
        };
        model = model.with_domain(region).map_err(Failure::usage_from)?;
    }
    model.name = file.name.clone().unwrap_or_default();
    let hamiltonian = file.hamiltonian.as_ref().map(|h| expr(h, "hamiltonian", &scope)).transpose()?;
    let ordering = match file.quantum.as_ref().and_then(|q| q.ordering.as_ref()) {
        None => None,
        Some(o) => Some(o.parse().map_err(Failure::usage_from)?),
    };
    Ok(Loaded { model, scheme, hamiltonian, ordering, sha256: String::new() })
}
