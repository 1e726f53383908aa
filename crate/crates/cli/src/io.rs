//! File formats: numeric CSV, cumulant JSON, manifests, atomic writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use oica::tensors::{pairs, quads};
use oica::{CumulantPair, Provenance, SymMat, SymTen4};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

/// Shortest decimal that reads back to the same `f64`; `nan`, `inf`, `-inf`
/// for the non-finite values.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:?}")
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub fn read_json<D: for<'de> Deserialize<'de>>(path: &Path) -> Result<D, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Numeric CSV to bytes, optionally with a header row.
pub fn matrix_csv(m: &DMatrix<f64>, header: Option<&[String]>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if let Some(h) = header {
        w.write_record(h).expect("in-memory write");
    }
    for i in 0..m.nrows() {
        w.write_record((0..m.ncols()).map(|j| fmt_f64(m[(i, j)]))).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Reads a numeric CSV. A first row that does not parse as numbers is taken
/// as a header.
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>, CliError> {
    let bad = |msg: String| CliError::Usage(format!("{}: {msg}", path.display()));
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => CliError::Usage(format!("cannot read {}: {e}", path.display())),
            _ => bad(e.to_string()),
        })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let parsed: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) => rows.push(v),
            Err(_) if k == 0 => continue,
            Err(e) => return Err(bad(format!("row {}: {e}", k + 1))),
        }
    }
    let cols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// `dir/stem.suffix` next to `out`, where `stem` drops the last extension.
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    out.with_file_name(format!("{stem}.{suffix}"))
}

/// Packed entries with explicit 1-based index lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexedValues {
    pub index: Vec<Vec<usize>>,
    pub values: Vec<f64>,
}

/// Cumulant file: `k2` entries `(i, j)` with `i <= j`, `k4` entries
/// `(i, j, k, l)` sorted; missing entries are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulantsDoc {
    pub dim: usize,
    pub provenance: Provenance,
    pub k2: IndexedValues,
    pub k4: IndexedValues,
}

impl CumulantsDoc {
    pub fn from_pair(cp: &CumulantPair<f64>) -> Self {
        let dim = cp.dim();
        let k2 = IndexedValues {
            index: pairs(dim).map(|(i, j)| vec![i + 1, j + 1]).collect(),
            values: cp.k2.packed().to_vec(),
        };
        let k4 = IndexedValues {
            index: quads(dim).map(|q| q.iter().map(|x| x + 1).collect()).collect(),
            values: cp.k4.packed().to_vec(),
        };
        Self { dim, provenance: cp.provenance, k2, k4 }
    }

    pub fn to_pair(&self) -> Result<CumulantPair<f64>, CliError> {
        let dim = self.dim;
        let check = |idx: &[usize], order: usize| -> Result<Vec<usize>, CliError> {
            if idx.len() != order || idx.iter().any(|&i| i == 0 || i > dim) {
                return Err(CliError::Usage(format!("bad cumulant index {idx:?} for dimension {dim}")));
            }
            let mut s: Vec<usize> = idx.iter().map(|i| i - 1).collect();
            s.sort_unstable();
            Ok(s)
        };
        for part in [&self.k2, &self.k4] {
            if part.index.len() != part.values.len() {
                return Err(CliError::Usage("cumulant index and value lists differ in length".into()));
            }
        }
        let mut k2 = SymMat::zeros(dim);
        for (idx, &v) in self.k2.index.iter().zip(&self.k2.values) {
            let s = check(idx, 2)?;
            k2.set(s[0], s[1], v);
        }
        let mut k4 = SymTen4::zeros(dim);
        for (idx, &v) in self.k4.index.iter().zip(&self.k4.values) {
            let s = check(idx, 4)?;
            k4.set(s[0], s[1], s[2], s[3], v);
        }
        Ok(CumulantPair::new(k2, k4, self.provenance)?)
    }
}

/// Reproduction record written next to every output.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config: Value,
    pub seed: Option<u64>,
    pub threads: usize,
    pub library_version: &'static str,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<Value>,
    pub wall_time_s: f64,
}

pub fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}
