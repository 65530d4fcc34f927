//! JSON report envelope and CSV series.

use std::fs;
use std::io::Write;
use std::path::Path;

use berkline_core::field::{Rational, Valuation};
use berkline_core::tree::{DiscreteMeasure, TreePoint};
use num_traits::ToPrimitive;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const TOOL: &str = "berkline";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `"num/den"`; the denominator is always written.
pub fn exact_string(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// An exact rational with a display-only decimal.
pub fn exact(r: &Rational) -> Value {
    json!({ "exact": exact_string(r), "decimal": r.to_f64() })
}

pub fn valuation(v: &Valuation) -> Value {
    match v {
        Valuation::Finite(r) => exact(r),
        Valuation::Infinite => json!({ "exact": "inf", "decimal": null }),
    }
}

pub fn point(x: &TreePoint) -> Value {
    json!({ "center": x.center().to_string(), "exponent": exact_string(x.exponent()) })
}

pub fn measure(mu: &DiscreteMeasure) -> Value {
    Value::Array(mu.atoms().iter().map(|(x, m)| json!({ "point": point(x), "mass": exact(m) })).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Assertion { name: name.into(), passed, detail: detail.into() }
    }

    /// `value ≤ limit`, both exact.
    pub fn at_most(name: impl Into<String>, value: &Rational, limit: &Rational) -> Self {
        Assertion::new(name, value <= limit, format!("{} <= {}", exact_string(value), exact_string(limit)))
    }
}

/// One CSV row; `t` is empty for series without a step.
#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub m: u32,
    pub t: String,
    pub value_num: String,
    pub value_den: String,
    pub normalized: f64,
}

impl Row {
    pub fn new(m: u32, t: Option<&Rational>, value: &Rational, normalized: &Rational) -> Self {
        Row {
            m,
            t: t.map(exact_string).unwrap_or_default(),
            value_num: value.numer().to_string(),
            value_den: value.denom().to_string(),
            normalized: normalized.to_f64().unwrap_or(f64::NAN),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Envelope {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_sha256: String,
    pub kind: String,
    pub seed: Option<u64>,
    pub p: u64,
    pub ramification: Option<u32>,
    pub levels: Vec<u32>,
    pub results: Value,
    pub assertions: Vec<Assertion>,
    pub passed: bool,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn csv_bytes(rows: &[Row]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| CliError::Io { path: "csv".into(), source: e.into() })?;
    }
    w.into_inner().map_err(|e| CliError::Io { path: "csv".into(), source: e.into_error() })
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |source| CliError::Io { path: path.display().to_string(), source };
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let mut file = fs::File::create(&tmp).map_err(io)?;
    file.write_all(bytes).map_err(io)?;
    file.sync_all().map_err(io)?;
    drop(file);
    fs::rename(&tmp, path).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use berkline_core::field::{int, rat};

    #[test]
    fn exact_fields_round_trip() {
        for r in [rat(-3, 8), int(0), int(5), rat(1, 3)] {
            let s = exact_string(&r);
            let (n, d) = s.split_once('/').unwrap();
            assert_eq!(Rational::new(n.parse().unwrap(), d.parse().unwrap()), r);
        }
        assert_eq!(exact(&int(0))["exact"], "0/1");
        assert_eq!(exact(&rat(1, 2))["decimal"], 0.5);
    }

    #[test]
    fn csv_header_and_rows() {
        let rows = vec![Row::new(3, Some(&rat(-1, 8)), &rat(9, 2), &rat(1, 2)), Row::new(4, None, &int(2), &rat(1, 8))];
        let text = String::from_utf8(csv_bytes(&rows).unwrap()).unwrap();
        assert_eq!(text, "m,t,value_num,value_den,normalized\n3,-1/8,9,2,0.5\n4,,2,1,0.125\n");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/out.json");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"two");
        assert_eq!(fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }
}
