//! Doublet-level efficiency and purity, and the time-to-target statistic.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solvers::SolveRun;
use crate::tracking::{Hit, TrackCandidate};

/// Unordered hit-id pair, stored smaller id first.
pub type DoubletKey = (u64, u64);

fn key(a: u64, b: u64) -> DoubletKey {
    (a.min(b), a.max(b))
}

/// Radius-consecutive hit pairs of every particle with at least
/// `min_track_hits` hits. Noise contributes nothing.
pub fn truth_doublets(hits: &[Hit], min_track_hits: usize) -> BTreeSet<DoubletKey> {
    let mut by_particle: BTreeMap<u64, Vec<&Hit>> = BTreeMap::new();
    for h in hits {
        if let Some(p) = h.truth_particle_id {
            by_particle.entry(p).or_default().push(h);
        }
    }
    let mut out = BTreeSet::new();
    for mut hs in by_particle.into_values() {
        if hs.len() < min_track_hits {
            continue;
        }
        hs.sort_by(|a, b| a.r().total_cmp(&b.r()).then(a.hit_id.cmp(&b.hit_id)));
        out.extend(hs.windows(2).map(|w| key(w[0].hit_id, w[1].hit_id)));
    }
    out
}

pub fn candidate_doublets(candidates: &[TrackCandidate]) -> BTreeSet<DoubletKey> {
    candidates
        .iter()
        .flat_map(|c| c.hits.windows(2).map(|w| key(w[0], w[1])))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventCounts {
    pub event_id: String,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// `tp / (tp + fn)`; `None` when there are no truth doublets.
    pub efficiency: Option<f64>,
    /// `tp / (tp + fp)`; `None` when nothing was reconstructed.
    pub purity: Option<f64>,
    pub events: Vec<EventCounts>,
}

impl EvalReport {
    pub fn from_events(events: Vec<EventCounts>) -> Self {
        let tp = events.iter().map(|e| e.tp).sum();
        let fp = events.iter().map(|e| e.fp).sum();
        let fn_ = events.iter().map(|e| e.fn_).sum();
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        Self {
            tp,
            fp,
            fn_,
            efficiency: ratio(tp, tp + fn_),
            purity: ratio(tp, tp + fp),
            events,
        }
    }
}

/// Scores reconstructed doublets against the truth set.
pub fn evaluate(candidates: &[TrackCandidate], truth: &BTreeSet<DoubletKey>) -> EvalReport {
    evaluate_event("", candidates, truth)
}

pub fn evaluate_event(event_id: &str, candidates: &[TrackCandidate], truth: &BTreeSet<DoubletKey>) -> EvalReport {
    let reco = candidate_doublets(candidates);
    let tp = reco.intersection(truth).count();
    EvalReport::from_events(vec![EventCounts {
        event_id: event_id.to_string(),
        tp,
        fp: reco.len() - tp,
        fn_: truth.len() - tp,
    }])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TttReport {
    /// Energy the target is a fraction of.
    pub reference_energy: f64,
    pub target_fraction: f64,
    pub target_energy: f64,
    pub confidence: f64,
    pub ttt_seconds: Option<f64>,
    /// Per shot, seconds until its best energy reached the target.
    pub first_hits: Vec<Option<f64>>,
    pub success_fraction: f64,
}

/// Restart estimate of the time to reach the target with probability
/// `confidence`: the minimum over observed first-hit times `t` of
/// `t · ln(1 − c) / ln(1 − p̂(t))`, or `t` itself once `p̂(t) ≥ c`, where
/// `p̂(t)` is the fraction of shots that hit by `t`.
pub fn ttt_from_first_hits(first_hits: &[Option<f64>], confidence: f64) -> Result<Option<f64>> {
    check_confidence(confidence)?;
    let shots = first_hits.len() as f64;
    let mut times: Vec<f64> = first_hits.iter().flatten().copied().collect();
    times.sort_by(f64::total_cmp);
    let mut best: Option<f64> = None;
    for (k, &t) in times.iter().enumerate() {
        // ties: use the last index sharing this time
        if times.get(k + 1) == Some(&t) {
            continue;
        }
        let p = (k + 1) as f64 / shots;
        let estimate = if p >= confidence {
            t
        } else {
            t * (1.0 - confidence).ln() / (1.0 - p).ln()
        };
        best = Some(best.map_or(estimate, |b| b.min(estimate)));
    }
    Ok(best)
}

fn check_confidence(confidence: f64) -> Result<()> {
    if confidence > 0.0 && confidence < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("confidence must lie in (0, 1), got {confidence}")))
    }
}

/// TTT against this run's own best energy.
pub fn compute_ttt(run: &SolveRun, target_fraction: f64, confidence: f64) -> Result<TttReport> {
    let reference = run
        .best_energy()
        .ok_or_else(|| Error::InvalidState("every shot aborted; no reference energy".into()))?;
    compute_ttt_against(run, reference, target_fraction, confidence)
}

/// TTT against a reference energy shared between runs. The fraction scales
/// the signed energy, so `0.999 × (negative best)` is a slightly easier
/// target.
pub fn compute_ttt_against(
    run: &SolveRun,
    reference_energy: f64,
    target_fraction: f64,
    confidence: f64,
) -> Result<TttReport> {
    check_confidence(confidence)?;
    if !(target_fraction.is_finite() && reference_energy.is_finite()) {
        return Err(Error::InvalidConfig("target fraction and reference must be finite".into()));
    }
    let target_energy = target_fraction * reference_energy;
    let first_hits: Vec<Option<f64>> = run
        .shots
        .iter()
        .map(|s| if s.aborted { None } else { s.first_hit_time(target_energy) })
        .collect();
    let hits = first_hits.iter().flatten().count();
    Ok(TttReport {
        reference_energy,
        target_fraction,
        target_energy,
        confidence,
        ttt_seconds: ttt_from_first_hits(&first_hits, confidence)?,
        success_fraction: if first_hits.is_empty() { 0.0 } else { hits as f64 / first_hits.len() as f64 },
        first_hits,
    })
}

/// One row of a benchmark table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub particles: Option<usize>,
    pub qubo_size: usize,
    pub solver: String,
    pub ttt_seconds: Option<f64>,
    pub best_energy: Option<f64>,
    pub target_energy: f64,
}

/// `particles,qubo_size,solver,ttt_seconds`; unreached targets print "–".
pub fn benchmark_csv(rows: &[BenchmarkRow]) -> String {
    let mut out = String::from("particles,qubo_size,solver,ttt_seconds\n");
    for r in rows {
        let particles = r.particles.map_or_else(|| "–".to_string(), |p| p.to_string());
        let ttt = r.ttt_seconds.map_or_else(|| "–".to_string(), |t| t.to_string());
        out.push_str(&format!("{particles},{},{},{ttt}\n", r.qubo_size, r.solver));
    }
    out
}
