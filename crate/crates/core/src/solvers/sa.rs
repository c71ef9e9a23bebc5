//! Metropolis simulated annealing with single-spin flips.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_problem_fits, run_shots, shot_rng, ShotResult, SolveRun, SolverConfig, TraceRecorder};
use crate::error::{Error, Result};
use crate::ising::{ising_energy_unchecked, IsingProblem, SpinState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BetaSchedule {
    /// Geometric ramp over the range from [`default_beta_range`].
    Auto,
    Geometric { beta_min: f64, beta_max: f64 },
    /// One inverse temperature per sweep.
    Explicit { betas: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaConfig {
    pub sweeps: usize,
    pub schedule: BetaSchedule,
    pub shots: usize,
    pub seed: u64,
    pub trace_stride: usize,
}

impl Default for SaConfig {
    fn default() -> Self {
        Self {
            sweeps: 1000,
            schedule: BetaSchedule::Auto,
            shots: 50,
            seed: 0,
            trace_stride: 10,
        }
    }
}

impl SaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.sweeps == 0 {
            return bad("sweeps must be at least 1".into());
        }
        if self.shots == 0 {
            return bad("shots must be at least 1".into());
        }
        if self.trace_stride == 0 {
            return bad("trace_stride must be at least 1".into());
        }
        match &self.schedule {
            BetaSchedule::Auto => {}
            BetaSchedule::Geometric { beta_min, beta_max } => {
                if !(*beta_min > 0.0 && beta_min < beta_max && beta_max.is_finite()) {
                    return bad(format!(
                        "need 0 < beta_min < beta_max, got {beta_min} and {beta_max}"
                    ));
                }
            }
            BetaSchedule::Explicit { betas } => {
                if betas.len() != self.sweeps {
                    return bad(format!(
                        "explicit schedule has {} entries for {} sweeps",
                        betas.len(),
                        self.sweeps
                    ));
                }
                if betas.iter().any(|b| !(*b >= 0.0 && b.is_finite())) {
                    return bad("explicit betas must be finite and non-negative".into());
                }
            }
        }
        Ok(())
    }

    fn betas(&self, p: &IsingProblem) -> Vec<f64> {
        let (lo, hi) = match &self.schedule {
            BetaSchedule::Explicit { betas } => return betas.clone(),
            BetaSchedule::Geometric { beta_min, beta_max } => (*beta_min, *beta_max),
            BetaSchedule::Auto => default_beta_range(p),
        };
        if self.sweeps == 1 {
            return vec![hi];
        }
        let ratio = hi / lo;
        (0..self.sweeps)
            .map(|k| lo * ratio.powf(k as f64 / (self.sweeps - 1) as f64))
            .collect()
    }
}

/// `(ln 2 / ΔE_max, ln 100 / ΔE_min)` from single-flip energy bounds.
///
/// `ΔE_max = 2 max_i (|h_i| + Σ_j |J_ij|)` and `ΔE_min` is twice the
/// smallest nonzero coefficient magnitude, so the hottest sweep accepts the
/// worst uphill move half the time and the coldest accepts the gentlest one
/// with probability 1%.
pub fn default_beta_range(p: &IsingProblem) -> (f64, f64) {
    let mut max_flip: f64 = 0.0;
    let mut min_coeff = f64::INFINITY;
    for i in 0..p.n() {
        let (_, vals) = p.row(i);
        let h = p.field()[i].abs();
        let row: f64 = vals.iter().map(|w| w.abs()).sum();
        max_flip = max_flip.max(2.0 * (h + row));
        for c in vals.iter().map(|w| w.abs()).chain([h]) {
            if c > 0.0 {
                min_coeff = min_coeff.min(c);
            }
        }
    }
    if max_flip == 0.0 || !min_coeff.is_finite() {
        return (std::f64::consts::LN_2, 100f64.ln());
    }
    (std::f64::consts::LN_2 / max_flip, 100f64.ln() / (2.0 * min_coeff))
}

/// Metropolis rule: downhill and level moves always pass, uphill moves pass
/// with probability `exp(−β ΔE)`.
#[inline]
pub fn metropolis_accept<R: Rng>(delta_e: f64, beta: f64, rng: &mut R) -> bool {
    delta_e <= 0.0 || rng.gen::<f64>() < (-beta * delta_e).exp()
}

pub fn solve_sa(p: &IsingProblem, cfg: &SaConfig) -> Result<SolveRun> {
    cfg.validate()?;
    check_problem_fits(p, cfg.shots)?;
    let betas = cfg.betas(p);
    let (shots, wall) = run_shots(cfg.shots, |k| run_shot(p, cfg, &betas, k));
    Ok(SolveRun::from_shots(SolverConfig::Sa(cfg.clone()), None, shots, wall))
}

fn run_shot(p: &IsingProblem, cfg: &SaConfig, betas: &[f64], shot: usize) -> ShotResult {
    let n = p.n();
    let mut rng = shot_rng(cfg.seed, shot);
    let mut spins: Vec<i8> = (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
    // local[i] = Σ_j J_ij s_j
    let mut local: Vec<f64> = (0..n)
        .map(|i| {
            let (cols, vals) = p.row(i);
            cols.iter().zip(vals).map(|(&j, &w)| w * f64::from(spins[j])).sum()
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = TraceRecorder::start();
    trace.record(0, ising_energy_unchecked(p, &spins));

    for (sweep, &beta) in betas.iter().enumerate() {
        order.shuffle(&mut rng);
        for &i in &order {
            let si = f64::from(spins[i]);
            let delta = 2.0 * si * (local[i] - p.field()[i]);
            if metropolis_accept(delta, beta, &mut rng) {
                spins[i] = -spins[i];
                let change = -2.0 * si;
                let (cols, vals) = p.row(i);
                for (&j, &w) in cols.iter().zip(vals) {
                    local[j] += w * change;
                }
            }
        }
        let k = sweep + 1;
        if k % cfg.trace_stride == 0 || k == cfg.sweeps {
            trace.record(k, ising_energy_unchecked(p, &spins));
        }
    }
    let energy = ising_energy_unchecked(p, &spins);
    ShotResult {
        spins: SpinState::new(spins).expect("flips preserve ±1"),
        energy,
        aborted: false,
        trace: trace.finish(),
        first_hit: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ising::ising_energy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_spin_follows_field() {
        let p = IsingProblem::new(vec![1.0], 0.0, []).unwrap();
        let cfg = SaConfig {
            sweeps: 50,
            shots: 4,
            schedule: BetaSchedule::Geometric { beta_min: 0.1, beta_max: 50.0 },
            ..SaConfig::default()
        };
        let run = solve_sa(&p, &cfg).unwrap();
        for shot in &run.shots {
            assert_eq!(shot.spins.as_slice(), &[-1]);
            assert_eq!(shot.energy, -1.0);
        }
    }

    #[test]
    fn level_moves_always_accepted() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((0..10_000).all(|_| metropolis_accept(0.0, 1e6, &mut rng)));
        assert!((0..10_000).all(|_| metropolis_accept(-3.0, 1e6, &mut rng)));
    }

    #[test]
    fn default_range_is_ordered() {
        let p = IsingProblem::new(vec![0.5, 0.0, 0.0], 0.0, [(0, 1, 2.0), (1, 2, -0.25)]).unwrap();
        let (lo, hi) = default_beta_range(&p);
        // ΔE_max = 2 (0.5 + 2), ΔE_min = 2 · 0.25
        assert!((lo - std::f64::consts::LN_2 / 5.0).abs() < 1e-15);
        assert!((hi - 100f64.ln() / 0.5).abs() < 1e-15);
    }

    #[test]
    fn schedule_validation() {
        let mut cfg = SaConfig::default();
        cfg.schedule = BetaSchedule::Geometric { beta_min: 2.0, beta_max: 1.0 };
        assert!(cfg.validate().is_err());
        cfg.schedule = BetaSchedule::Explicit { betas: vec![1.0; 3] };
        assert!(cfg.validate().is_err());
        cfg.sweeps = 3;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn geometric_schedule_endpoints() {
        let p = IsingProblem::new(vec![1.0], 0.0, []).unwrap();
        let cfg = SaConfig {
            sweeps: 5,
            schedule: BetaSchedule::Geometric { beta_min: 0.5, beta_max: 8.0 },
            ..SaConfig::default()
        };
        let b = cfg.betas(&p);
        assert_eq!(b.len(), 5);
        assert!((b[0] - 0.5).abs() < 1e-15 && (b[4] - 8.0).abs() < 1e-12);
        assert!((b[2] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn energies_consistent_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 40;
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen::<f64>() < 0.1 {
                    edges.push((i, j, rng.gen_range(-1.0..1.0)));
                }
            }
        }
        let p = IsingProblem::new(vec![0.1; n], 0.0, edges).unwrap();
        let cfg = SaConfig { sweeps: 100, shots: 6, seed: 3, ..SaConfig::default() };
        let a = solve_sa(&p, &cfg).unwrap();
        let b = solve_sa(&p, &cfg).unwrap();
        for (x, y) in a.shots.iter().zip(&b.shots) {
            assert_eq!(x.spins, y.spins);
            assert!((ising_energy(&p, &x.spins).unwrap() - x.energy).abs() < 1e-9);
            assert!(x.trace.windows(2).all(|w| w[1].best_energy <= w[0].best_energy));
        }
    }
}
