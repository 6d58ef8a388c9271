//! Report layout, hashing and atomic file output.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const SCHEMA_VERSION: u32 = 1;

/// Outcome of one check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub check: String,
    pub verdict: bool,
    /// Tolerances the numbers in `result` were tested against.
    pub tolerances: BTreeMap<String, f64>,
    /// Error message when the check could not complete.
    pub error: Option<String>,
    pub result: serde_json::Value,
}

/// Eigenvalues of the discretized operator on one grid.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumLevel {
    pub domain_tag: String,
    pub n_points: usize,
    pub dimension: usize,
    /// The 40 eigenvalues of smallest modulus, ascending.
    pub central: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSection {
    pub operator: String,
    pub discretization: String,
    pub levels: Vec<SpectrumLevel>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: u64,
    pub grid: Option<crate::scenario::config::GridSpec>,
    pub tolerances: BTreeMap<String, f64>,
    pub version: String,
    /// Excluded from determinism comparisons.
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub scenario: String,
    pub verdict: bool,
    pub checks: Vec<CheckResult>,
    pub spectrum: Option<SpectrumSection>,
    pub provenance: Provenance,
}

/// Row of `spectra.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub index: usize,
    pub eigenvalue: f64,
    pub domain_tag: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Pretty JSON with a trailing newline.
pub fn to_json(report: &Report) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

/// `index,eigenvalue,domain_tag` lines with a header.
pub fn to_csv(rows: &[SpectrumRow]) -> String {
    let mut s = String::from("index,eigenvalue,domain_tag\n");
    for r in rows {
        s.push_str(&format!("{},{:e},{}\n", r.index, r.eigenvalue, r.domain_tag));
    }
    s
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_and_csv() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        let rows = vec![SpectrumRow {
            index: 0,
            eigenvalue: -1.5,
            domain_tag: "n=11".into(),
        }];
        assert_eq!(to_csv(&rows), "index,eigenvalue,domain_tag\n0,-1.5e0,n=11\n");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("r.json");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
