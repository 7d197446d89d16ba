//! The JSON model file.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "system": { "dim": 2, "H_S": [[0, 0], [0, 1]] },
//!   "omega": ["R1", "R2"],
//!   "probes": {
//!     "R1": { "H_E": [[0, 0], [0, 1]], "beta": 1.0, "tau": 1.0, "V": [[...]] },
//!     "R2": { ... }
//!   },
//!   "chain": { "pi": [0.5, 0.5], "P": [[0.7, 0.3], [0.4, 0.6]] },
//!   "initial_states": { "R1": [[0.5, 0], [0, 0.5]], "R2": [[0.5, 0], [0, 0.5]] },
//!   "tri": { "W_S": [[1, 0], [0, 1]], "W_E": { "R1": [[1, 0], [0, 1]], "R2": [[1, 0], [0, 1]] } },
//!   "tolerances": { "psd": 1e-10 }
//! }
//! ```
//!
//! Matrix entries are real numbers or `[re, im]` pairs. `tri` and
//! `tolerances` are optional. Every rejection names the offending location
//! as a JSON pointer.

use mris_chain::{MarkovChain, STOCHASTIC_TOL};
use mris_probes::{ModelSpec, MrisModel, ProbeSpec, TimeReversalData};
use nalgebra::DMatrix;
use qm_core::{ComplexMatrix, DensityMatrix, Observable, Tolerances, C64};
use serde_json::{Map, Value};
use thiserror::Error;

pub const SCHEMA_VERSION: u64 = 1;

/// A rejected model file, located by a JSON pointer (empty for the whole document).
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}: {message}", if pointer.is_empty() { "/" } else { pointer.as_str() })]
pub struct SchemaError {
    pub pointer: String,
    pub message: String,
}

type Result<T> = std::result::Result<T, SchemaError>;

fn fail<T>(pointer: &str, message: impl Into<String>) -> Result<T> {
    Err(SchemaError {
        pointer: pointer.to_string(),
        message: message.into(),
    })
}

/// Appends one reference token, escaped as JSON pointers require.
pub fn child(pointer: &str, token: impl std::fmt::Display) -> String {
    let t = token.to_string().replace('~', "~0").replace('/', "~1");
    format!("{pointer}/{t}")
}

fn object<'a>(v: &'a Value, ptr: &str) -> Result<&'a Map<String, Value>> {
    v.as_object()
        .map_or_else(|| fail(ptr, "expected an object"), Ok)
}

fn array<'a>(v: &'a Value, ptr: &str) -> Result<&'a Vec<Value>> {
    v.as_array()
        .map_or_else(|| fail(ptr, "expected an array"), Ok)
}

fn field<'a>(obj: &'a Map<String, Value>, ptr: &str, key: &str) -> Result<&'a Value> {
    obj.get(key)
        .map_or_else(|| fail(&child(ptr, key), "required field is missing"), Ok)
}

fn number(v: &Value, ptr: &str) -> Result<f64> {
    match v.as_f64() {
        Some(x) if x.is_finite() => Ok(x),
        _ => fail(ptr, "expected a finite number"),
    }
}

fn complex(v: &Value, ptr: &str) -> Result<C64> {
    if let Some(pair) = v.as_array() {
        if pair.len() != 2 {
            return fail(ptr, "complex entries are [re, im]");
        }
        return Ok(C64::new(
            number(&pair[0], &child(ptr, 0))?,
            number(&pair[1], &child(ptr, 1))?,
        ));
    }
    Ok(C64::new(number(v, ptr)?, 0.0))
}

/// Square complex matrix, optionally of a prescribed size.
pub fn matrix(v: &Value, ptr: &str, dim: Option<usize>) -> Result<ComplexMatrix> {
    let rows = array(v, ptr)?;
    let n = rows.len();
    if n == 0 {
        return fail(ptr, "matrix is empty");
    }
    if let Some(d) = dim {
        if n != d {
            return fail(ptr, format!("matrix has {n} rows, expected {d}"));
        }
    }
    let mut m = ComplexMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        let rp = child(ptr, i);
        let entries = array(row, &rp)?;
        if entries.len() != n {
            return fail(
                &rp,
                format!("row has {} entries, expected {n}", entries.len()),
            );
        }
        for (j, e) in entries.iter().enumerate() {
            m[(i, j)] = complex(e, &child(&rp, j))?;
        }
    }
    Ok(m)
}

fn observable(v: &Value, ptr: &str, dim: Option<usize>, tol: &Tolerances) -> Result<Observable> {
    let m = matrix(v, ptr, dim)?;
    Observable::new(m, tol).or_else(|e| fail(ptr, e.to_string()))
}

fn density(v: &Value, ptr: &str, dim: usize, tol: &Tolerances) -> Result<DensityMatrix> {
    let m = matrix(v, ptr, Some(dim))?;
    DensityMatrix::new(m, tol).or_else(|e| fail(ptr, e.to_string()))
}

/// Sets one named field of `tol`.
pub fn set_tolerance(
    tol: &mut Tolerances,
    key: &str,
    value: f64,
) -> std::result::Result<(), String> {
    if !(value.is_finite() && value >= 0.0) {
        return Err(format!("tolerance {key} must be finite and non-negative"));
    }
    let slot = match key {
        "herm" => &mut tol.herm,
        "trace" => &mut tol.trace,
        "psd" => &mut tol.psd,
        "tp" => &mut tol.tp,
        "unit" => &mut tol.unit,
        "degeneracy" => &mut tol.degeneracy,
        "consistency" => &mut tol.consistency,
        _ => return Err(format!("unknown tolerance {key:?}")),
    };
    *slot = value;
    Ok(())
}

fn tolerances(root: &Map<String, Value>, overrides: &[(String, f64)]) -> Result<Tolerances> {
    let mut tol = Tolerances::default();
    if let Some(v) = root.get("tolerances") {
        for (key, x) in object(v, "/tolerances")? {
            let ptr = child("/tolerances", key);
            set_tolerance(&mut tol, key, number(x, &ptr)?).or_else(|m| fail(&ptr, m))?;
        }
    }
    for (key, x) in overrides {
        set_tolerance(&mut tol, key, *x).or_else(|m| fail("", format!("--tol: {m}")))?;
    }
    Ok(tol)
}

fn labels(root: &Map<String, Value>) -> Result<Vec<String>> {
    let list = array(field(root, "", "omega")?, "/omega")?;
    if list.is_empty() {
        return fail("/omega", "at least one probe label is required");
    }
    let mut out: Vec<String> = Vec::with_capacity(list.len());
    for (k, v) in list.iter().enumerate() {
        let ptr = child("/omega", k);
        let s = v
            .as_str()
            .map_or_else(|| fail(&ptr, "labels are strings"), Ok)?;
        if out.iter().any(|l| l == s) {
            return fail(&ptr, format!("duplicate label {s:?}"));
        }
        out.push(s.to_string());
    }
    Ok(out)
}

/// The member of `obj` for every label, rejecting missing and unknown keys.
fn per_label<'a>(
    obj: &'a Map<String, Value>,
    ptr: &str,
    labels: &[String],
) -> Result<Vec<&'a Value>> {
    if let Some(extra) = obj.keys().find(|k| !labels.contains(k)) {
        return fail(&child(ptr, extra), "not a label listed in /omega");
    }
    labels.iter().map(|l| field(obj, ptr, l)).collect()
}

fn chain(root: &Map<String, Value>, labels: &[String]) -> Result<MarkovChain> {
    let n = labels.len();
    let c = object(field(root, "", "chain")?, "/chain")?;
    let pi_v = array(field(c, "/chain", "pi")?, "/chain/pi")?;
    if pi_v.len() != n {
        return fail(
            "/chain/pi",
            format!("has {} entries, expected {n}", pi_v.len()),
        );
    }
    let mut pi = Vec::with_capacity(n);
    for (k, v) in pi_v.iter().enumerate() {
        let ptr = child("/chain/pi", k);
        let x = number(v, &ptr)?;
        if x < 0.0 {
            return fail(&ptr, "probabilities are non-negative");
        }
        pi.push(x);
    }
    let sum: f64 = pi.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return fail("/chain/pi", format!("sums to {sum}, expected 1"));
    }
    let rows = array(field(c, "/chain", "P")?, "/chain/P")?;
    if rows.len() != n {
        return fail("/chain/P", format!("has {} rows, expected {n}", rows.len()));
    }
    let mut p = DMatrix::zeros(n, n);
    for (r, row) in rows.iter().enumerate() {
        let rp = child("/chain/P", r);
        let entries = array(row, &rp)?;
        if entries.len() != n {
            return fail(
                &rp,
                format!("row has {} entries, expected {n}", entries.len()),
            );
        }
        for (col, v) in entries.iter().enumerate() {
            let ptr = child(&rp, col);
            let x = number(v, &ptr)?;
            if x < 0.0 {
                return fail(&ptr, "transition probabilities are non-negative");
            }
            p[(r, col)] = x;
        }
        let sum: f64 = p.row(r).sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return fail(&rp, format!("row sums to {sum}, expected 1"));
        }
    }
    MarkovChain::new(labels.to_vec(), pi, p).or_else(|e| fail("/chain", e.to_string()))
}

fn probes(
    root: &Map<String, Value>,
    labels: &[String],
    ds: usize,
    tol: &Tolerances,
) -> Result<Vec<ProbeSpec>> {
    let obj = object(field(root, "", "probes")?, "/probes")?;
    let mut out = Vec::with_capacity(labels.len());
    for (label, v) in labels.iter().zip(per_label(obj, "/probes", labels)?) {
        let ptr = child("/probes", label);
        let p = object(v, &ptr)?;
        let h_env = observable(field(p, &ptr, "H_E")?, &child(&ptr, "H_E"), None, tol)?;
        let de = h_env.dim();
        let beta = number(field(p, &ptr, "beta")?, &child(&ptr, "beta"))?;
        if beta < 0.0 {
            return fail(
                &child(&ptr, "beta"),
                "inverse temperature must be non-negative",
            );
        }
        let tau = number(field(p, &ptr, "tau")?, &child(&ptr, "tau"))?;
        if tau <= 0.0 {
            return fail(&child(&ptr, "tau"), "interaction time must be positive");
        }
        let coupling = observable(field(p, &ptr, "V")?, &child(&ptr, "V"), Some(ds * de), tol)?;
        out.push(ProbeSpec::thermal(h_env, beta, tau, coupling));
    }
    Ok(out)
}

fn time_reversal(
    root: &Map<String, Value>,
    labels: &[String],
    ds: usize,
    env_dims: &[usize],
) -> Result<Option<TimeReversalData>> {
    let Some(v) = root.get("tri") else {
        return Ok(None);
    };
    let t = object(v, "/tri")?;
    let w_sys = matrix(field(t, "/tri", "W_S")?, "/tri/W_S", Some(ds))?;
    let w_obj = object(field(t, "/tri", "W_E")?, "/tri/W_E")?;
    let w_env = labels
        .iter()
        .zip(per_label(w_obj, "/tri/W_E", labels)?)
        .zip(env_dims)
        .map(|((l, w), &de)| matrix(w, &child("/tri/W_E", l), Some(de)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Some(TimeReversalData { w_sys, w_env }))
}

/// Parses and validates a model file. `overrides` replace tolerances after
/// those given in the file.
pub fn parse_spec(text: &str, overrides: &[(String, f64)]) -> Result<ModelSpec> {
    let value: Value =
        serde_json::from_str(text).or_else(|e| fail("", format!("invalid JSON: {e}")))?;
    let root = object(&value, "")?;
    let version = field(root, "", "schema_version")?.as_u64().map_or_else(
        || fail("/schema_version", "expected a non-negative integer"),
        Ok,
    )?;
    if version != SCHEMA_VERSION {
        return fail(
            "/schema_version",
            format!("unsupported version {version}, expected {SCHEMA_VERSION}"),
        );
    }
    let tol = tolerances(root, overrides)?;
    let system = object(field(root, "", "system")?, "/system")?;
    let ds = field(system, "/system", "dim")?
        .as_u64()
        .filter(|&d| d > 0)
        .map_or_else(
            || fail("/system/dim", "expected a positive integer"),
            |d| Ok(d as usize),
        )?;
    let h_sys = observable(
        field(system, "/system", "H_S")?,
        "/system/H_S",
        Some(ds),
        &tol,
    )?;
    let labels = labels(root)?;
    let chain = chain(root, &labels)?;
    let probes = probes(root, &labels, ds, &tol)?;
    let init = object(field(root, "", "initial_states")?, "/initial_states")?;
    let rho_init = labels
        .iter()
        .zip(per_label(init, "/initial_states", &labels)?)
        .map(|(l, v)| density(v, &child("/initial_states", l), ds, &tol))
        .collect::<Result<Vec<_>>>()?;
    let env_dims: Vec<usize> = probes.iter().map(|p| p.h_env.dim()).collect();
    let tri = time_reversal(root, &labels, ds, &env_dims)?;
    Ok(ModelSpec {
        h_sys,
        chain,
        probes,
        rho_init,
        tri,
        tol,
    })
}

/// Parses a model file and builds the model.
pub fn load_model(text: &str, overrides: &[(String, f64)]) -> Result<MrisModel> {
    let spec = parse_spec(text, overrides)?;
    MrisModel::build(spec).or_else(|e| fail("", format!("model construction failed: {e}")))
}
