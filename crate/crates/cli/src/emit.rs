//! Output emission: config hashing, JSON documents, curve CSVs.
//!
//! Every emitted file embeds the resolved configuration and its SHA-256
//! hash. Nothing time- or host-dependent is ever written, so re-running a
//! command with the same configuration reproduces every byte.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use hsn_core::experiments::{DiagnosticReport, RunRecord};
use hsn_core::Result;

/// Canonical JSON for a resolved config (compact, field order fixed by
/// struct declaration).
pub fn config_json<C: Serialize>(config: &C) -> String {
    serde_json::to_string(config).expect("resolved configs serialize")
}

pub fn config_hash(config_json: &str) -> String {
    let digest = Sha256::digest(config_json.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Top-level JSON document for a command run.
#[derive(Serialize)]
pub struct OutputDocument<C: Serialize> {
    pub command: String,
    pub config_hash: String,
    pub config: C,
    pub pass: bool,
    pub reports: Vec<DiagnosticReport>,
}

pub fn write_json<C: Serialize>(path: &Path, doc: &OutputDocument<C>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(doc).expect("documents serialize");
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    // 17 significant digits round-trips every f64 exactly
    v.map(|x| format!("{x:.17e}")).unwrap_or_default()
}

/// Write curve rows in the shared run-record schema. Leading `#` comment
/// lines carry the config and its hash; readers should skip them.
pub fn write_records(
    path: &Path,
    config_json: &str,
    hash: &str,
    rows: &[(String, RunRecord)],
) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("# config_hash={hash}\n"));
    out.push_str(&format!("# config={config_json}\n"));
    out.push_str("algo,iteration,sq_error,excess_risk,sbar_dist,sbar_inv_dist,hbar_dist,sigbar_dist\n");
    for (algo, r) in rows {
        out.push_str(&format!(
            "{algo},{},{},{},{},{},{},{}\n",
            r.iteration,
            fmt_opt(r.sq_error),
            fmt_opt(r.excess_risk),
            fmt_opt(r.sbar_dist),
            fmt_opt(r.sbar_inv_dist),
            fmt_opt(r.hbar_dist),
            fmt_opt(r.sigbar_dist),
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Write generic checkpoint rows (label, n, value triples grouped by
/// column name).
pub fn write_columns(
    path: &Path,
    config_json: &str,
    hash: &str,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("# config_hash={hash}\n"));
    out.push_str(&format!("# config={config_json}\n"));
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Ensure the output directory exists and return the path of a file in it.
pub fn out_file(dir: &Path, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    Ok(dir.join(name))
}

/// Format an f64 for CSV with full round-trip precision.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.17e}")
}
