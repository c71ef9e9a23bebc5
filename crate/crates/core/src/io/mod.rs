//! Event ingestion, synthetic events and file formats.
//!
//! Every writer goes through a temporary file in the destination directory
//! followed by a rename, so a failed run never leaves a partial output.

mod synth;
mod trackml;

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ising::QuboProblem;
use crate::solvers::SolveRun;

pub use synth::{generate_synthetic_event, Geometry, SynthConfig, SynthEvent, SynthParticle};
pub use trackml::{load_trackml_event, write_trackml_event, BarrelLayout, EventBundle, EventMeta, RawHit};

/// Writes `bytes` to `path` atomically.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn save_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::format(path, e))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e))
}

/// On-disk QUBO document.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuboDoc {
    n: usize,
    bias: Vec<f64>,
    pairs: Vec<(usize, usize, f64)>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    meta: serde_json::Value,
}

pub fn qubo_to_json(p: &QuboProblem, meta: serde_json::Value) -> String {
    let doc = QuboDoc {
        n: p.n(),
        bias: p.bias().to_vec(),
        pairs: p.pairs().iter().map(|q| (q.i, q.j, q.weight)).collect(),
        meta,
    };
    serde_json::to_string(&doc).expect("QUBO documents always serialize")
}

pub fn qubo_from_json(text: &str, origin: &str) -> Result<(QuboProblem, serde_json::Value)> {
    let doc: QuboDoc = serde_json::from_str(text).map_err(|e| Error::format(origin, e))?;
    if doc.bias.len() != doc.n {
        return Err(Error::format(
            origin,
            format!("n is {} but bias has {} entries", doc.n, doc.bias.len()),
        ));
    }
    let p = QuboProblem::new(doc.bias, doc.pairs).map_err(|e| Error::format(origin, e))?;
    Ok((p, doc.meta))
}

/// Saves a QUBO with optional free-form metadata.
pub fn save_qubo(path: &Path, p: &QuboProblem, meta: serde_json::Value) -> Result<()> {
    let mut text = qubo_to_json(p, meta);
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn load_qubo(path: &Path) -> Result<(QuboProblem, serde_json::Value)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    qubo_from_json(&text, &path.display().to_string())
}

/// Per-step trace of every shot: `shot,step,elapsed_seconds,best_energy`.
pub fn write_trace_csv(path: &Path, run: &SolveRun) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["shot", "step", "elapsed_seconds", "best_energy"])
        .map_err(|e| Error::format(path, e))?;
    for (k, shot) in run.shots.iter().enumerate() {
        for row in &shot.trace {
            w.serialize((k, row.step, row.elapsed_seconds, row.best_energy))
                .map_err(|e| Error::format(path, e))?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::format(path, e.to_string()))?;
    write_atomic(path, &bytes)
}
