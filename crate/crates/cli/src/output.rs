//! Output directory, CSV tables and append-only run manifests.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const OUT_DIR_ENV: &str = "TFE_OUT_DIR";

/// `--out`, then `$TFE_OUT_DIR`, then the working directory.
pub fn resolve_out_dir(flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from("."),
    }
}

/// Shortest round-trip decimal, switching to exponent form for very small
/// or very large magnitudes. Identical inputs always give identical text.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// A CSV table with a fixed column set.
#[derive(Debug, Clone)]
pub struct OutputTable {
    pub schema: &'static str,
    pub columns: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl OutputTable {
    pub fn new(schema: &'static str, columns: &[&'static str]) -> Self {
        Self {
            schema,
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    /// Appends a row of reals; NaN and infinities are rejected.
    pub fn push(&mut self, row: &[f64]) -> Result<(), CliError> {
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(CliError::Numerical(format!("non-finite value {v} in {} table", self.schema)));
        }
        self.push_text(row.iter().map(|&v| fmt_num(v)).collect())
    }

    pub fn push_text(&mut self, row: Vec<String>) -> Result<(), CliError> {
        if row.len() != self.columns.len() {
            return Err(CliError::Numerical(format!(
                "{} table has {} columns, row has {}",
                self.schema,
                self.columns.len(),
                row.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))
    }
}

/// Writes `bytes` to a temporary sibling and renames it into place; fails if
/// `path` already exists.
pub fn write_new_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if path.exists() {
        return Err(CliError::Io(std::io::Error::new(
            std::io::ErrorKind::AlreadyExists,
            format!("{} exists", path.display()),
        )));
    }
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = OpenOptions::new().write(true).create_new(true).open(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

/// SHA-256 of the canonical JSON of `{command, params, tolerances}`.
pub fn config_hash(command: &str, params: &Value, tolerances: &Value) -> String {
    let block = json!({ "command": command, "params": params, "tolerances": tolerances });
    let digest = Sha256::digest(serde_json::to_string(&block).expect("json values serialise").as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub id: String,
    pub command: String,
    pub params: Value,
    pub tolerances: Value,
    pub version: String,
    pub timestamp: String,
    pub config_hash: String,
    pub outcome: String,
    pub results: Value,
    pub warnings: Vec<String>,
    pub outputs: Vec<String>,
}

/// One invocation: owns the output directory and the manifest id.
#[derive(Debug)]
pub struct Run {
    pub command: String,
    pub params: Value,
    pub tolerances: Value,
    pub dir: PathBuf,
    pub id: String,
    pub timestamp: String,
    pub config_hash: String,
    pub warnings: Vec<String>,
    outputs: Vec<String>,
}

impl Run {
    pub fn start(command: &str, params: Value, tolerances: Value, out: Option<&Path>) -> Result<Self, CliError> {
        let dir = resolve_out_dir(out);
        fs::create_dir_all(&dir)?;
        let now = chrono::Utc::now();
        let hash = config_hash(command, &params, &tolerances);
        let id = format!("{}-{}", now.format("%Y%m%dT%H%M%S%9fZ"), &hash[..12]);
        Ok(Self {
            command: command.into(),
            params,
            tolerances,
            dir,
            id,
            timestamp: now.to_rfc3339(),
            config_hash: hash,
            warnings: Vec::new(),
            outputs: Vec::new(),
        })
    }

    /// `<kind>-<id>.<ext>` inside the output directory.
    pub fn path_for(&self, kind: &str, ext: &str) -> PathBuf {
        self.dir.join(format!("{kind}-{}.{ext}", self.id))
    }

    pub fn write_table(&mut self, kind: &str, table: &OutputTable) -> Result<PathBuf, CliError> {
        let path = self.path_for(kind, "csv");
        write_new_atomic(&path, &table.to_bytes()?)?;
        self.record(&path);
        Ok(path)
    }

    pub fn write_svg(&mut self, kind: &str, svg: &str) -> Result<PathBuf, CliError> {
        let path = self.path_for(kind, "svg");
        write_new_atomic(&path, svg.as_bytes())?;
        self.record(&path);
        Ok(path)
    }

    fn record(&mut self, path: &Path) {
        let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        self.outputs.push(name);
    }

    pub fn warn(&mut self, w: impl Into<String>) {
        self.warnings.push(w.into());
    }

    /// Writes `manifest-<id>.json` and returns its path.
    pub fn finish(self, outcome: &str, results: Value) -> Result<PathBuf, CliError> {
        let path = self.path_for("manifest", "json");
        let m = RunManifest {
            id: self.id,
            command: self.command,
            params: self.params,
            tolerances: self.tolerances,
            version: env!("CARGO_PKG_VERSION").into(),
            timestamp: self.timestamp,
            config_hash: self.config_hash,
            outcome: outcome.into(),
            results,
            warnings: self.warnings,
            outputs: self.outputs,
        };
        let mut bytes = serde_json::to_vec_pretty(&m)?;
        bytes.push(b'\n');
        write_new_atomic(&path, &bytes)?;
        println!("manifest {}", path.display());
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_round_trips() {
        for v in [0.0, 1.0, 0.1, 0.3, -2.5e-7, 1.0 / 3.0, 6.02e23, 1e-176, 123456.789, f64::MIN_POSITIVE] {
            let s = fmt_num(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(0.3), "0.3");
        assert_eq!(fmt_num(1e-21), "1e-21");
    }

    #[test]
    fn table_rejects_ragged_and_nan_rows() {
        let mut t = OutputTable::new("profile", &["y", "f"]);
        t.push(&[0.0, 1.0]).unwrap();
        assert!(t.push(&[1.0]).is_err());
        assert!(t.push(&[1.0, f64::NAN]).is_err());
        assert_eq!(String::from_utf8(t.to_bytes().unwrap()).unwrap(), "y,f\n0,1\n");
    }

    #[test]
    fn hash_ignores_key_order() {
        let a = json!({"n": 0.5, "k": 0});
        let b: Value = serde_json::from_str(r#"{"k": 0, "n": 0.5}"#).unwrap();
        let t = json!({"tol": 1e-8});
        assert_eq!(config_hash("x", &a, &t), config_hash("x", &b, &t));
        assert_ne!(config_hash("x", &a, &t), config_hash("y", &a, &t));
    }

    #[test]
    fn atomic_write_refuses_to_clobber() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_new_atomic(&p, b"1").unwrap();
        assert!(write_new_atomic(&p, b"2").is_err());
        assert_eq!(fs::read(&p).unwrap(), b"1");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
