//! Field-by-field comparison of a report against a golden file.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    pub abs: f64,
    pub rel: f64,
    /// Absolute tolerance per field, keyed by full path or by the final field name.
    pub fields: BTreeMap<String, f64>,
    /// Compare the manifest too (versions, hashes, config).
    pub include_manifest: bool,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { abs: 1e-12, rel: 1e-9, fields: BTreeMap::new(), include_manifest: false }
    }
}

impl Tolerances {
    fn for_field(&self, path: &str) -> (f64, f64) {
        if let Some(&t) = self.fields.get(path) {
            return (t, 0.0);
        }
        let last = path.rsplit('.').next().unwrap_or(path);
        let last = last.split('[').next().unwrap_or(last);
        match self.fields.get(last) {
            Some(&t) => (t, 0.0),
            None => (self.abs, self.rel),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldDiff {
    pub field: String,
    pub report: Value,
    pub golden: Value,
    pub abs_err: Option<f64>,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffSummary {
    pub compared: usize,
    pub failures: Vec<FieldDiff>,
}

pub fn compare(report: &Value, golden: &Value, tol: &Tolerances) -> Result<DiffSummary> {
    let (rs, gs) = (report.get("schema"), golden.get("schema"));
    if rs.is_none() || rs != gs {
        return Err(CliError::Schema(format!("report schema {rs:?} vs golden schema {gs:?}")));
    }
    let mut out = DiffSummary { compared: 0, failures: Vec::new() };
    let obj = golden.as_object().ok_or_else(|| CliError::Schema("golden file is not an object".into()))?;
    for (k, g) in obj {
        if k == "manifest" && !tol.include_manifest {
            continue;
        }
        let r = report.get(k).ok_or_else(|| CliError::Schema(format!("report has no field '{k}'")))?;
        walk(k, r, g, tol, &mut out)?;
    }
    Ok(out)
}

fn walk(path: &str, r: &Value, g: &Value, tol: &Tolerances, out: &mut DiffSummary) -> Result<()> {
    match (r, g) {
        (Value::Object(ro), Value::Object(go)) => {
            for k in ro.keys().chain(go.keys()) {
                if !(ro.contains_key(k) && go.contains_key(k)) {
                    return Err(CliError::Schema(format!("field '{path}.{k}' present in only one file")));
                }
            }
            for (k, gv) in go {
                walk(&format!("{path}.{k}"), &ro[k], gv, tol, out)?;
            }
        }
        (Value::Array(ra), Value::Array(ga)) => {
            if ra.len() != ga.len() {
                out.compared += 1;
                out.failures.push(FieldDiff {
                    field: format!("{path}.len"),
                    report: ra.len().into(),
                    golden: ga.len().into(),
                    abs_err: None,
                    tol: None,
                });
                return Ok(());
            }
            for (i, (a, b)) in ra.iter().zip(ga).enumerate() {
                walk(&format!("{path}[{i}]"), a, b, tol, out)?;
            }
        }
        (Value::Number(a), Value::Number(b)) => {
            out.compared += 1;
            let (a, b) = (a.as_f64().unwrap_or(f64::NAN), b.as_f64().unwrap_or(f64::NAN));
            let (abs, rel) = tol.for_field(path);
            let t = abs + rel * b.abs();
            let err = (a - b).abs();
            // NaN on either side fails.
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            let failed = !(err <= t);
            if failed {
                out.failures.push(FieldDiff { field: path.into(), report: r.clone(), golden: g.clone(), abs_err: Some(err), tol: Some(t) });
            }
        }
        (Value::Object(_), _) | (_, Value::Object(_)) | (Value::Array(_), _) | (_, Value::Array(_)) => {
            return Err(CliError::Schema(format!("field '{path}' has different types")));
        }
        _ => {
            out.compared += 1;
            if r != g {
                out.failures.push(FieldDiff { field: path.into(), report: r.clone(), golden: g.clone(), abs_err: None, tol: None });
            }
        }
    }
    Ok(())
}
