//! Datasets of `(q, f, u)` triples: a `manifest.json` plus one
//! `rec_<index>.hfd` file per record.
//!
//! Record `i` draws `q` from seed `derive_seed(master, i, 0)` and `f` from
//! `derive_seed(master, i, 1)`, so any record can be regenerated alone.
//! Labels `u` come from the direct solver. The manifest is written after all
//! records and acts as the commit point.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use helmholtz_core::field::pde_residual;
use helmholtz_core::helmholtz::{solve_direct, HelmholtzProblem};
use helmholtz_core::scene::{derive_seed, sample_q_circles, ScattererKind, ScattererSpec, SourceSpec};
use helmholtz_core::{ComplexField, Grid2D, RealField};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::hfd::{self, HfdError, HfdRecord};

pub const FORMAT_VERSION: u32 = 1;
pub const LABEL_SOLVER: &str = "fdm-direct";
pub const MANIFEST: &str = "manifest.json";
/// Labels must satisfy `pde_residual(u) < LABEL_TOL · ‖f‖₂`.
pub const LABEL_TOL: f64 = 1e-8;

const Q_LANE: u64 = 0;
const F_LANE: u64 = 1;

/// One Helmholtz problem family: grid, wavenumber and the two samplers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub grid: Grid2D,
    pub k: f64,
    pub q_spec: ScattererSpec,
    pub f_spec: SourceSpec,
}

impl ProblemConfig {
    pub fn validate(&self) -> helmholtz_core::Result<()> {
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(helmholtz_core::Error::Domain(format!(
                "wavenumber must be positive, got {}",
                self.k
            )));
        }
        self.q_spec.validate()?;
        self.f_spec.validate()
    }

    pub fn from_json_file(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Samples `(q, f)` for record `index`; also returns the seed that
    /// produced `q`, which differs from the derived one only after a
    /// degenerate circle draw.
    pub fn sample(&self, master_seed: u64, index: u64) -> helmholtz_core::Result<(RealField, ComplexField, u64)> {
        let q_seed = derive_seed(master_seed, index, Q_LANE);
        let (q, q_seed_used) = match self.q_spec.kind {
            ScattererKind::Circles | ScattererKind::SmoothedCircles => {
                let smoothed = self.q_spec.kind == ScattererKind::SmoothedCircles;
                let s = sample_q_circles(q_seed, self.q_spec.amplitude, smoothed, &self.grid)?;
                (s.field, s.seed_used)
            }
            ScattererKind::TShape => (self.q_spec.sample(q_seed, &self.grid)?, q_seed),
        };
        let f = self
            .f_spec
            .sample(derive_seed(master_seed, index, F_LANE), &self.grid)?;
        Ok((q, f, q_seed_used))
    }

    pub fn problem(&self, master_seed: u64, index: u64) -> helmholtz_core::Result<HelmholtzProblem> {
        let (q, f, _) = self.sample(master_seed, index)?;
        HelmholtzProblem::new(self.k, q, f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub index: u64,
    pub q: RealField,
    pub f: ComplexField,
    pub u: ComplexField,
    pub q_seed: u64,
    pub f_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordEntry {
    pub index: u64,
    pub file: String,
    pub sha256: String,
    pub q_seed: u64,
    pub f_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub grid: Grid2D,
    pub k: f64,
    pub count: usize,
    pub q_spec: ScattererSpec,
    pub f_spec: SourceSpec,
    pub master_seed: u64,
    pub label_solver: String,
    /// Seconds since the Unix epoch.
    pub created_unix: u64,
    pub records: Vec<RecordEntry>,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error(transparent)]
    Record(#[from] HfdError),
    #[error("{path}: {reason}")]
    Manifest { path: String, reason: String },
    #[error("record {index}: {source}")]
    Numerical { index: u64, source: helmholtz_core::Error },
    #[error("record {index}: label residual {residual:e} exceeds {limit:e}")]
    Label { index: u64, residual: f64, limit: f64 },
}

pub fn record_file_name(index: u64) -> String {
    format!("rec_{index}.hfd")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Samples and labels one record, checking the label residual.
pub fn generate_record(cfg: &ProblemConfig, master_seed: u64, index: u64) -> Result<DatasetRecord, DatasetError> {
    let numerical = |source| DatasetError::Numerical { index, source };
    let (q, f, q_seed) = cfg.sample(master_seed, index).map_err(numerical)?;
    let p = HelmholtzProblem::new(cfg.k, q, f).map_err(numerical)?;
    let u = solve_direct(&p).map_err(numerical)?;
    check_label(index, cfg.k, &p.q, &p.f, &u)?;
    Ok(DatasetRecord {
        index,
        q: p.q,
        f: p.f,
        u,
        q_seed,
        f_seed: derive_seed(master_seed, index, F_LANE),
    })
}

fn check_label(index: u64, k: f64, q: &RealField, f: &ComplexField, u: &ComplexField) -> Result<(), DatasetError> {
    let residual = pde_residual(u, k, q, f).map_err(|source| DatasetError::Numerical { index, source })?;
    let limit = LABEL_TOL * f.l2_norm();
    if residual < limit {
        Ok(())
    } else {
        Err(DatasetError::Label { index, residual, limit })
    }
}

/// Generates `count` records in parallel.
pub fn generate(cfg: &ProblemConfig, master_seed: u64, count: usize) -> Result<Vec<DatasetRecord>, DatasetError> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| generate_record(cfg, master_seed, i))
        .collect()
}

/// Writes records in parallel, then the manifest.
pub fn write_dataset(
    dir: &Path,
    cfg: &ProblemConfig,
    master_seed: u64,
    records: &[DatasetRecord],
) -> Result<DatasetManifest, DatasetError> {
    let io = |source| HfdError::Io {
        record: dir.display().to_string(),
        source,
    };
    fs::create_dir_all(dir).map_err(io)?;
    let entries = records
        .par_iter()
        .map(|r| {
            check_label(r.index, cfg.k, &r.q, &r.f, &r.u)?;
            let file = record_file_name(r.index);
            let rec = HfdRecord::full(r.q.clone(), r.f.clone(), r.u.clone());
            let bytes = hfd::write_file(&dir.join(&file), &rec)?;
            Ok(RecordEntry {
                index: r.index,
                file,
                sha256: sha256_hex(&bytes),
                q_seed: r.q_seed,
                f_seed: r.f_seed,
            })
        })
        .collect::<Result<Vec<_>, DatasetError>>()?;
    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        grid: cfg.grid,
        k: cfg.k,
        count: records.len(),
        q_spec: cfg.q_spec,
        f_spec: cfg.f_spec,
        master_seed,
        label_solver: LABEL_SOLVER.to_string(),
        created_unix: now_unix(),
        records: entries,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(dir.join(MANIFEST), text + "\n").map_err(io)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest, DatasetError> {
    let path = dir.join(MANIFEST);
    let err = |reason: String| DatasetError::Manifest {
        path: path.display().to_string(),
        reason,
    };
    let text = fs::read_to_string(&path).map_err(|e| err(e.to_string()))?;
    let m: DatasetManifest = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
    if m.format_version != FORMAT_VERSION {
        return Err(err(format!("unsupported format_version {}", m.format_version)));
    }
    if m.count == 0 || m.records.len() != m.count {
        return Err(err(format!(
            "count {} does not match {} record entries",
            m.count,
            m.records.len()
        )));
    }
    Ok(m)
}

fn record_path(dir: &Path, entry: &RecordEntry) -> PathBuf {
    dir.join(&entry.file)
}

/// Reads and validates one record listed in the manifest. Header and size
/// are checked before the checksum.
pub fn read_record(dir: &Path, m: &DatasetManifest, entry: &RecordEntry) -> Result<DatasetRecord, DatasetError> {
    let path = record_path(dir, entry);
    let bytes = fs::read(&path).map_err(|source| HfdError::Io {
        record: entry.file.clone(),
        source,
    })?;
    let rec = hfd::decode(&bytes, &entry.file);
    let found = sha256_hex(&bytes);
    let rec = match rec {
        Ok(rec) if found == entry.sha256 => rec,
        Ok(_) | Err(HfdError::Invalid { .. }) => {
            return Err(HfdError::Checksum {
                record: entry.file.clone(),
                expected: entry.sha256.clone(),
                found,
            }
            .into())
        }
        Err(e) => return Err(e.into()),
    };
    let Some((f, u)) = rec.fu else {
        return Err(HfdError::Invalid {
            record: entry.file.clone(),
            reason: "dataset records need q, f and u".into(),
        }
        .into());
    };
    if *rec.q.grid() != m.grid {
        return Err(HfdError::Invalid {
            record: entry.file.clone(),
            reason: "grid differs from manifest".into(),
        }
        .into());
    }
    Ok(DatasetRecord {
        index: entry.index,
        q: rec.q,
        f,
        u,
        q_seed: entry.q_seed,
        f_seed: entry.f_seed,
    })
}

pub fn read_dataset(dir: &Path) -> Result<(DatasetManifest, Vec<DatasetRecord>), DatasetError> {
    let m = read_manifest(dir)?;
    let records = m
        .records
        .par_iter()
        .map(|e| read_record(dir, &m, e))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((m, records))
}
