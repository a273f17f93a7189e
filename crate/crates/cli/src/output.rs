//! Deterministic report emission.
//!
//! Floats are written with 17 significant digits and object keys in sorted
//! order, so identical runs give byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cone_core::conesolve::{ModelSpec, OuterBc};
use cone_core::meshnorm::Cutoff;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{io_err, CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub fn schema(kind: &str) -> String {
    format!("conetool.{kind}/{SCHEMA_VERSION}")
}

pub fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Pretty JSON with fixed float formatting.
pub fn render(v: &Value) -> String {
    let mut s = String::new();
    write_value(&mut s, v, 0);
    s.push('\n');
    s
}

fn write_value(s: &mut String, v: &Value, depth: usize) {
    let pad = |s: &mut String, d: usize| s.extend(std::iter::repeat_n("  ", d));
    match v {
        Value::Null | Value::Bool(_) | Value::String(_) => s.push_str(&v.to_string()),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) if !n.is_f64() => {
                let _ = write!(s, "{u}");
            }
            (_, Some(i)) if !n.is_f64() => {
                let _ = write!(s, "{i}");
            }
            _ => s.push_str(&format_float(n.as_f64().expect("finite number"))),
        },
        Value::Array(a) if a.is_empty() => s.push_str("[]"),
        Value::Array(a) => {
            s.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                pad(s, depth + 1);
                write_value(s, x, depth + 1);
                s.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
            }
            pad(s, depth);
            s.push(']');
        }
        Value::Object(o) if o.is_empty() => s.push_str("{}"),
        Value::Object(o) => {
            s.push_str("{\n");
            for (i, (k, x)) in o.iter().enumerate() {
                pad(s, depth + 1);
                s.push_str(&Value::String(k.clone()).to_string());
                s.push_str(": ");
                write_value(s, x, depth + 1);
                s.push_str(if i + 1 < o.len() { ",\n" } else { "\n" });
            }
            pad(s, depth);
            s.push('}');
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Deliberate deviations from the compact-manifold setting, carried by every report.
pub fn deviations(model: Option<&ModelSpec>) -> Vec<String> {
    let cut = Cutoff::default();
    let mut out = vec![
        "model cone: the manifold is replaced by the straight cone (0,1] x cross section; only the tip structure is modeled"
            .to_string(),
        format!("cut-off omega: equal to 1 on (0, {}], smooth step to 0 at x = {}", cut.inner, cut.outer),
        "R-sectoriality is not probed; only the scalar sectorial bound (1+|lambda|)|(A+c+lambda)^-1| is estimated".to_string(),
    ];
    if let Some(m) = model {
        out.push(match m.outer_bc {
            OuterBc::Dirichlet { value } => format!("outer closure at x = 1: dirichlet, constant mode held at {value}, other modes 0"),
            OuterBc::Neumann => "outer closure at x = 1: neumann (zero radial flux)".to_string(),
        });
        if let Ok(mesh) = m.mesh.build() {
            out.push(format!("no condition at the innermost node x0 = {:e}; zero inner flux", mesh.x0()));
        }
    }
    out
}

/// Header shared by every report.
pub fn manifest(config: &Value, model: Option<&ModelSpec>, seed: u64) -> Value {
    let model_value = model.map(to_value);
    json!({
        "tool": env!("CARGO_PKG_NAME"),
        "tool_version": env!("CARGO_PKG_VERSION"),
        "core_version": cone_core::VERSION,
        "config": config,
        "config_sha256": sha256_hex(render(config).as_bytes()),
        "model_sha256": model_value.as_ref().map(|m| sha256_hex(render(m).as_bytes())),
        "seed": seed,
        "deviations": deviations(model),
    })
}

pub fn report(kind: &str, manifest: Value, result: Value) -> Value {
    json!({ "schema": schema(kind), "manifest": manifest, "result": result })
}

/// Resolves `--out`: a `.json` path is used as is, anything else is a directory.
pub fn target(out: Option<&Path>, default_name: &str) -> Option<PathBuf> {
    out.map(|p| if p.extension().is_some_and(|e| e == "json") { p.to_path_buf() } else { p.join(default_name) })
}

/// Writes to `path` (creating parents) or to stdout.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| format!("bad number '{t}': {e}"))).collect()
}

pub fn require<T>(v: Option<T>, what: &str) -> Result<T> {
    v.ok_or_else(|| CliError::Usage(format!("missing {what}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_fixed_width_and_keys_sort() {
        let v = json!({"b": 0.1, "a": [1, -2, 2.5e-300], "c": null});
        assert_eq!(
            render(&v),
            "{\n  \"a\": [\n    1,\n    -2,\n    2.5000000000000000e-300\n  ],\n  \"b\": 1.0000000000000001e-1,\n  \"c\": null\n}\n"
        );
    }

    #[test]
    fn rendered_floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 6.02e23, -1e-310, std::f64::consts::PI] {
            assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn out_targets() {
        assert_eq!(target(Some(Path::new("r.json")), "x.json"), Some(PathBuf::from("r.json")));
        assert_eq!(target(Some(Path::new("dir")), "x.json"), Some(PathBuf::from("dir/x.json")));
        assert_eq!(target(None, "x.json"), None);
    }
}
