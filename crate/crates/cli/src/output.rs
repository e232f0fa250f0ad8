//! CSV/JSON emission and the metadata sidecar.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::CliResult;
use crate::spec::OutputFormat;

/// Default output directory when `--out` is not given.
pub const OUT_DIR_ENV: &str = "RINGWALK_OUT_DIR";

/// `{:.16e}`: 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Column-oriented table of already formatted cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> CliResult<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(w.into_inner().map_err(|e| e.into_error())?)
    }
}

/// Where a command's primary output goes.
#[derive(Debug, Clone, PartialEq)]
pub enum Destination {
    Stdout,
    File(PathBuf),
}

/// `--out` if given, else `$RINGWALK_OUT_DIR/<stem>.<ext>`, else stdout.
pub fn destination(out: Option<&Path>, stem: &str, format: OutputFormat) -> Destination {
    if let Some(p) = out {
        return Destination::File(p.to_path_buf());
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => {
            Destination::File(Path::new(&dir).join(format!("{stem}.{}", format.extension())))
        }
        _ => Destination::Stdout,
    }
}

/// Sidecar path: `run.csv` → `run.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

pub fn metadata(command: &str, spec: &impl Serialize, derived: Value) -> CliResult<Value> {
    Ok(json!({
        "artifact": "ringwalk",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "spec": serde_json::to_value(spec)?,
        "derived": derived,
    }))
}

/// Writes the payload and, for file destinations, the metadata sidecar.
pub fn emit(dest: &Destination, payload: &[u8], meta: &Value) -> CliResult<()> {
    match dest {
        Destination::Stdout => {
            let mut out = std::io::stdout().lock();
            out.write_all(payload)?;
            out.flush()?;
        }
        Destination::File(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, payload)?;
            let mut side = serde_json::to_vec_pretty(meta)?;
            side.push(b'\n');
            fs::write(sidecar_path(path), side)?;
        }
    }
    Ok(())
}

pub fn json_bytes(v: &Value) -> CliResult<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v)?;
    b.push(b'\n');
    Ok(b)
}
