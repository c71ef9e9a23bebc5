//! Multi-shot heuristic minimizers over [`IsingProblem`].
//!
//! Every solver returns a [`SolveRun`]: one [`ShotResult`] per independent
//! restart, each carrying its final spins, their energy and a
//! best-energy-so-far trace stamped with a monotonic clock.

mod sa;
mod sb;

use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ising::{binary_from_spin, spin_from_binary, BinaryState, IsingProblem, SpinState};

pub use sa::{default_beta_range, metropolis_accept, solve_sa, BetaSchedule, SaConfig};
pub use sb::{
    anneal_schedule_a, auto_c0, solve_asb, solve_bsb, solve_dsb, solve_sb, C0Mode, SbConfig,
    SbIntegrator, SbState, SbVariant,
};

/// Solver family selector used by the CLI and benchmark tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Bsb,
    Dsb,
    Asb,
    Sa,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Bsb => "bsb",
            SolverKind::Dsb => "dsb",
            SolverKind::Asb => "asb",
            SolverKind::Sa => "sa",
        }
    }

    pub fn sb_variant(self) -> Option<SbVariant> {
        match self {
            SolverKind::Bsb => Some(SbVariant::Ballistic),
            SolverKind::Dsb => Some(SbVariant::Discrete),
            SolverKind::Asb => Some(SbVariant::Adiabatic),
            SolverKind::Sa => None,
        }
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bsb" => Ok(SolverKind::Bsb),
            "dsb" => Ok(SolverKind::Dsb),
            "asb" => Ok(SolverKind::Asb),
            "sa" => Ok(SolverKind::Sa),
            other => Err(Error::InvalidConfig(format!("unknown solver '{other}'"))),
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Configuration echo stored with every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum SolverConfig {
    Sb(SbConfig),
    Sa(SaConfig),
}

impl SolverConfig {
    pub fn kind(&self) -> SolverKind {
        match self {
            SolverConfig::Sb(c) => match c.variant {
                SbVariant::Ballistic => SolverKind::Bsb,
                SbVariant::Discrete => SolverKind::Dsb,
                SbVariant::Adiabatic => SolverKind::Asb,
            },
            SolverConfig::Sa(_) => SolverKind::Sa,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    /// Seconds since the shot started.
    pub elapsed_seconds: f64,
    /// Integration step (SB) or sweep (SA).
    pub step: usize,
    pub best_energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstHit {
    pub target: f64,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotResult {
    #[serde(with = "spins_as_bits")]
    pub spins: SpinState,
    /// Ising energy of `spins`, offset included.
    pub energy: f64,
    /// Set when the state overflowed and the shot was cut short.
    #[serde(default)]
    pub aborted: bool,
    pub trace: Vec<TraceRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub first_hit: Vec<FirstHit>,
}

impl ShotResult {
    /// Earliest trace time at which the best energy was at or below `target`.
    pub fn first_hit_time(&self, target: f64) -> Option<f64> {
        self.trace
            .iter()
            .find(|row| row.best_energy <= target)
            .map(|row| row.elapsed_seconds)
    }

    pub fn bits(&self) -> BinaryState {
        binary_from_spin(&self.spins)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRun {
    pub config: SolverConfig,
    /// Coupling strength actually used (SB only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    pub shots: Vec<ShotResult>,
    /// Index of the lowest-energy completed shot; `None` if every shot aborted.
    pub best_shot: Option<usize>,
    pub wall_clock_seconds: f64,
}

impl SolveRun {
    pub fn best(&self) -> Option<&ShotResult> {
        self.best_shot.map(|k| &self.shots[k])
    }

    pub fn best_energy(&self) -> Option<f64> {
        self.best().map(|s| s.energy)
    }

    /// Best energy seen anywhere in the traces of completed shots.
    pub fn lowest_traced_energy(&self) -> Option<f64> {
        self.shots
            .iter()
            .filter(|s| !s.aborted)
            .flat_map(|s| s.trace.iter().map(|r| r.best_energy).chain([s.energy]))
            .min_by(f64::total_cmp)
    }

    /// Fills each shot's `first_hit` list for the given target energies.
    pub fn annotate_first_hits(&mut self, targets: &[f64]) {
        for shot in &mut self.shots {
            shot.first_hit = targets
                .iter()
                .filter_map(|&target| {
                    shot.first_hit_time(target).map(|elapsed_seconds| FirstHit {
                        target,
                        elapsed_seconds,
                    })
                })
                .collect();
        }
    }

    /// Assembles a run, picking the best completed shot (ties → lowest index).
    pub fn from_shots(
        config: SolverConfig,
        c0: Option<f64>,
        shots: Vec<ShotResult>,
        wall_clock_seconds: f64,
    ) -> Self {
        let best_shot = shots
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.aborted)
            .fold(None::<(usize, f64)>, |best, (k, s)| match best {
                Some((_, e)) if e <= s.energy => best,
                _ => Some((k, s.energy)),
            })
            .map(|(k, _)| k);
        Self {
            config,
            c0,
            shots,
            best_shot,
            wall_clock_seconds,
        }
    }
}

/// Independent RNG stream for one shot, reproducible regardless of which
/// thread runs it or in which order.
pub(crate) fn shot_rng(seed: u64, shot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shot as u64);
    rng
}

/// Runs `shots` independent shots in parallel and collects them in index order.
pub(crate) fn run_shots<F>(shots: usize, shot: F) -> (Vec<ShotResult>, f64)
where
    F: Fn(usize) -> ShotResult + Send + Sync,
{
    let start = Instant::now();
    let results: Vec<ShotResult> = (0..shots).into_par_iter().map(shot).collect();
    (results, start.elapsed().as_secs_f64())
}

/// Records best-energy-so-far rows for one shot.
pub(crate) struct TraceRecorder {
    start: Instant,
    best: f64,
    rows: Vec<TraceRow>,
}

impl TraceRecorder {
    pub(crate) fn start() -> Self {
        Self {
            start: Instant::now(),
            best: f64::INFINITY,
            rows: Vec::new(),
        }
    }

    pub(crate) fn record(&mut self, step: usize, energy: f64) {
        if energy < self.best {
            self.best = energy;
        }
        self.rows.push(TraceRow {
            elapsed_seconds: self.start.elapsed().as_secs_f64(),
            step,
            best_energy: self.best,
        });
    }

    pub(crate) fn finish(self) -> Vec<TraceRow> {
        self.rows
    }
}

pub(crate) fn check_problem_fits(p: &IsingProblem, shots: usize) -> Result<()> {
    if shots == 0 {
        return Err(Error::InvalidConfig("shots must be at least 1".into()));
    }
    if p.n() == 0 {
        return Err(Error::InvalidProblem("problem has no variables".into()));
    }
    Ok(())
}

mod spins_as_bits {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(spins: &SpinState, ser: S) -> std::result::Result<S::Ok, S::Error> {
        binary_from_spin(spins).serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<SpinState, D::Error> {
        let bits = BinaryState::deserialize(de)?;
        Ok(spin_from_binary(&bits))
    }
}
