//! Simulated bifurcation: adiabatic, ballistic and discrete variants.
//!
//! Each spin is a particle with position `x_i` and momentum `y_i`. One step of
//! symplectic Euler first updates every momentum from the pre-step positions,
//!
//! ```text
//! y_i += dt · ( −[a0 − a(t)] x_i  [− x_i³ for aSB]  + c0 (Σ_j J_ij g(x_j) − h_i) )
//! ```
//!
//! with `g(x) = x` (aSB, bSB) or `g(x) = sign(x)` (dSB), then every position
//! from the updated momenta, `x_i += dt · a0 · y_i`. bSB and dSB add perfectly
//! inelastic walls: any `|x_i| > 1` is reset to `sign(x_i)` with `y_i = 0`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_problem_fits, run_shots, shot_rng, ShotResult, SolveRun, SolverConfig, TraceRecorder};
use crate::error::{Error, Result};
use crate::ising::{ising_energy_unchecked, sign, IsingProblem, SpinState};

/// Problems at least this large compute forces with rayon inside a shot.
const PARALLEL_FORCE_MIN_N: usize = 4096;

/// Half-width of the uniform initial distribution for `x` and `y`.
const INIT_AMPLITUDE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SbVariant {
    Adiabatic,
    Ballistic,
    Discrete,
}

impl SbVariant {
    fn has_walls(self) -> bool {
        !matches!(self, SbVariant::Adiabatic)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "lowercase")]
pub enum C0Mode {
    Auto,
    /// A fixed coupling strength; `None` means "evaluate the auto rule once".
    Fixed(Option<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbConfig {
    pub variant: SbVariant,
    pub a0: f64,
    pub dt: f64,
    pub steps: usize,
    pub c0: C0Mode,
    pub shots: usize,
    pub seed: u64,
    pub trace_stride: usize,
}

impl SbConfig {
    /// Defaults: `a0 = dt = 1`, 1000 steps, 50 shots, auto `c0`. The
    /// adiabatic variant uses `dt = 0.5`; its cubic force is unstable under
    /// symplectic Euler at unit step once `|x|` exceeds about 1.15.
    pub fn new(variant: SbVariant) -> Self {
        Self {
            variant,
            a0: 1.0,
            dt: if variant == SbVariant::Adiabatic { 0.5 } else { 1.0 },
            steps: 1000,
            c0: C0Mode::Auto,
            shots: 50,
            seed: 0,
            trace_stride: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.a0 > 0.0 && self.a0.is_finite()) {
            return bad("a0 must be positive");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if self.steps == 0 {
            return bad("steps must be at least 1");
        }
        if self.shots == 0 {
            return bad("shots must be at least 1");
        }
        if self.trace_stride == 0 {
            return bad("trace_stride must be at least 1");
        }
        if let C0Mode::Fixed(Some(c0)) = self.c0 {
            if !(c0 > 0.0 && c0.is_finite()) {
                return bad("fixed c0 must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SbState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub step: usize,
}

impl SbState {
    pub fn spins(&self) -> SpinState {
        SpinState::from_signs(&self.x)
    }

    fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.y).all(|v| v.is_finite())
    }
}

/// Linear pump ramp `a(t) = a0 · t / steps`.
pub fn anneal_schedule_a(t_step: usize, cfg: &SbConfig) -> Result<f64> {
    if t_step > cfg.steps {
        return Err(Error::InvalidConfig(format!(
            "step {t_step} outside schedule of {} steps",
            cfg.steps
        )));
    }
    Ok(cfg.a0 * t_step as f64 / cfg.steps as f64)
}

/// `0.5 / (σ_J √n)` with `σ_J` the RMS of the nonzero couplings.
pub fn auto_c0(p: &IsingProblem) -> Result<f64> {
    let (count, sum_sq) = p
        .nonzero_entries()
        .fold((0usize, 0.0), |(c, s), w| (c + 1, s + w * w));
    if count == 0 {
        return Err(Error::InvalidConfig(
            "auto c0 needs at least one nonzero coupling; supply a fixed c0".into(),
        ));
    }
    let rms = (sum_sq / count as f64).sqrt();
    Ok(0.5 / (rms * (p.n() as f64).sqrt()))
}

/// Resolves the coupling strength for a run.
///
/// Field-only problems have no couplings for the auto rule to measure; the
/// RMS of the nonzero fields stands in for `σ_J` there.
fn resolve_c0(p: &IsingProblem, mode: C0Mode) -> Result<f64> {
    match mode {
        C0Mode::Fixed(Some(c0)) => Ok(c0),
        C0Mode::Auto | C0Mode::Fixed(None) => {
            if p.nonzero_entries().next().is_some() {
                return auto_c0(p);
            }
            let nonzero: Vec<f64> = p.field().iter().copied().filter(|h| *h != 0.0).collect();
            if nonzero.is_empty() {
                return Ok(1.0);
            }
            let rms = (nonzero.iter().map(|h| h * h).sum::<f64>() / nonzero.len() as f64).sqrt();
            Ok(0.5 / (rms * (p.n() as f64).sqrt()))
        }
    }
}

/// Symplectic Euler integrator for one problem and parameter set.
pub struct SbIntegrator<'a> {
    problem: &'a IsingProblem,
    variant: SbVariant,
    a0: f64,
    dt: f64,
    c0: f64,
    steps: usize,
    force: Vec<f64>,
    signs: Vec<f64>,
}

impl<'a> SbIntegrator<'a> {
    pub fn new(problem: &'a IsingProblem, cfg: &SbConfig) -> Result<Self> {
        cfg.validate()?;
        let c0 = resolve_c0(problem, cfg.c0)?;
        Ok(Self::with_c0(problem, cfg, c0))
    }

    pub fn with_c0(problem: &'a IsingProblem, cfg: &SbConfig, c0: f64) -> Self {
        let n = problem.n();
        Self {
            problem,
            variant: cfg.variant,
            a0: cfg.a0,
            dt: cfg.dt,
            c0,
            steps: cfg.steps,
            force: vec![0.0; n],
            signs: vec![0.0; n],
        }
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn initial_state<R: Rng>(&self, rng: &mut R) -> SbState {
        let n = self.problem.n();
        let mut draw = || rng.gen_range(-INIT_AMPLITUDE..=INIT_AMPLITUDE);
        let x = (0..n).map(|_| draw()).collect();
        let y = (0..n).map(|_| draw()).collect();
        SbState { x, y, step: 0 }
    }

    /// Advances one step; the pump value is `a(step + 1)`, so the final step
    /// runs at `a = a0`. Returns `false` if the state is no longer finite.
    pub fn step(&mut self, state: &mut SbState) -> bool {
        let next = (state.step + 1).min(self.steps);
        let a_t = self.a0 * next as f64 / self.steps as f64;
        let detune = self.a0 - a_t;
        let c0 = self.c0;
        let problem = self.problem;
        let variant = self.variant;

        let source: &[f64] = if variant == SbVariant::Discrete {
            for (s, &x) in self.signs.iter_mut().zip(&state.x) {
                *s = sign(x);
            }
            &self.signs
        } else {
            &state.x
        };
        let x = &state.x;
        let field = problem.field();
        let force_at = |i: usize| {
            let xi = x[i];
            let onsite = match variant {
                SbVariant::Adiabatic => -(xi * xi + detune) * xi,
                _ => -detune * xi,
            };
            onsite + c0 * (problem.row_dot(i, source) - field[i])
        };
        if x.len() >= PARALLEL_FORCE_MIN_N {
            self.force
                .par_iter_mut()
                .enumerate()
                .for_each(|(i, f)| *f = force_at(i));
        } else {
            for (i, f) in self.force.iter_mut().enumerate() {
                *f = force_at(i);
            }
        }

        let walls = variant.has_walls();
        let drift = self.dt * self.a0;
        for ((xi, yi), &f) in state.x.iter_mut().zip(state.y.iter_mut()).zip(&self.force) {
            *yi += self.dt * f;
            *xi += drift * *yi;
            if walls && xi.abs() > 1.0 {
                *xi = sign(*xi);
                *yi = 0.0;
            }
        }
        state.step += 1;
        state.is_finite()
    }
}

/// Runs every shot of an SB configuration.
pub fn solve_sb(p: &IsingProblem, cfg: &SbConfig) -> Result<SolveRun> {
    cfg.validate()?;
    check_problem_fits(p, cfg.shots)?;
    let c0 = resolve_c0(p, cfg.c0)?;
    let (shots, wall) = run_shots(cfg.shots, |k| run_shot(p, cfg, c0, k));
    Ok(SolveRun::from_shots(SolverConfig::Sb(cfg.clone()), Some(c0), shots, wall))
}

fn require_variant(cfg: &SbConfig, want: SbVariant) -> Result<()> {
    if cfg.variant != want {
        return Err(Error::InvalidConfig(format!(
            "expected {want:?} configuration, got {:?}",
            cfg.variant
        )));
    }
    Ok(())
}

pub fn solve_bsb(p: &IsingProblem, cfg: &SbConfig) -> Result<SolveRun> {
    require_variant(cfg, SbVariant::Ballistic)?;
    solve_sb(p, cfg)
}

pub fn solve_dsb(p: &IsingProblem, cfg: &SbConfig) -> Result<SolveRun> {
    require_variant(cfg, SbVariant::Discrete)?;
    solve_sb(p, cfg)
}

pub fn solve_asb(p: &IsingProblem, cfg: &SbConfig) -> Result<SolveRun> {
    require_variant(cfg, SbVariant::Adiabatic)?;
    solve_sb(p, cfg)
}

fn run_shot(p: &IsingProblem, cfg: &SbConfig, c0: f64, shot: usize) -> ShotResult {
    let mut rng = shot_rng(cfg.seed, shot);
    let mut integrator = SbIntegrator::with_c0(p, cfg, c0);
    let mut state = integrator.initial_state(&mut rng);
    let mut trace = TraceRecorder::start();
    let mut spins = vec![0i8; p.n()];
    let mut energy_of = |x: &[f64]| {
        for (s, &v) in spins.iter_mut().zip(x) {
            *s = sign(v) as i8;
        }
        ising_energy_unchecked(p, &spins)
    };

    trace.record(0, energy_of(&state.x));
    let mut aborted = false;
    for k in 1..=cfg.steps {
        if !integrator.step(&mut state) {
            aborted = true;
            break;
        }
        if k % cfg.trace_stride == 0 || k == cfg.steps {
            trace.record(k, energy_of(&state.x));
        }
    }
    let spins = state.spins();
    let energy = ising_energy_unchecked(p, spins.as_slice());
    ShotResult {
        spins,
        energy,
        aborted,
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

    fn ferromagnet() -> IsingProblem {
        IsingProblem::new(vec![0.0, 0.0], 0.0, [(0, 1, 1.0)]).unwrap()
    }

    fn cfg(variant: SbVariant) -> SbConfig {
        SbConfig {
            shots: 8,
            steps: 200,
            seed: 1,
            ..SbConfig::new(variant)
        }
    }

    fn random_problem(seed: u64, n: usize, density: f64) -> IsingProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen::<f64>() < density {
                    edges.push((i, j, rng.gen_range(-1.0..1.0)));
                }
            }
        }
        let h = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
        IsingProblem::new(h, 0.25, edges).unwrap()
    }

    #[test]
    fn schedule_endpoints_and_linearity() {
        let c = SbConfig { steps: 100, a0: 1.0, ..SbConfig::new(SbVariant::Ballistic) };
        assert_eq!(anneal_schedule_a(0, &c).unwrap(), 0.0);
        assert_eq!(anneal_schedule_a(100, &c).unwrap(), 1.0);
        assert_eq!(anneal_schedule_a(50, &c).unwrap(), 0.5);
        assert!(anneal_schedule_a(101, &c).is_err());
    }

    #[test]
    fn auto_c0_hand_value_and_homogeneity() {
        let edges: Vec<_> = (0..4)
            .flat_map(|i| (i + 1..4).map(move |j| (i, j, 1.0)))
            .collect();
        let p = IsingProblem::new(vec![0.0; 4], 0.0, edges.clone()).unwrap();
        assert_eq!(auto_c0(&p).unwrap(), 0.25);
        let scaled = IsingProblem::new(
            vec![0.0; 4],
            0.0,
            edges.iter().map(|&(i, j, w)| (i, j, 3.0 * w)),
        )
        .unwrap();
        assert!((auto_c0(&scaled).unwrap() - 0.25 / 3.0).abs() < 1e-15);
        let empty = IsingProblem::new(vec![1.0; 3], 0.0, []).unwrap();
        assert!(auto_c0(&empty).is_err());
    }

    #[test]
    fn single_spin_follows_field() {
        let p = IsingProblem::new(vec![1.0], 0.5, []).unwrap();
        for variant in [SbVariant::Ballistic, SbVariant::Discrete, SbVariant::Adiabatic] {
            let run = solve_sb(&p, &cfg(variant)).unwrap();
            let best = run.best().unwrap();
            assert_eq!(best.spins.as_slice(), &[-1], "{variant:?}");
            assert_eq!(best.energy, -1.0 + 0.5);
        }
    }

    #[test]
    fn ferromagnet_aligns() {
        for variant in [SbVariant::Ballistic, SbVariant::Discrete, SbVariant::Adiabatic] {
            let run = solve_sb(&ferromagnet(), &cfg(variant)).unwrap();
            let best = run.best().unwrap();
            assert_eq!(best.spins.as_slice()[0], best.spins.as_slice()[1], "{variant:?}");
            assert_eq!(best.energy, -1.0);
            if variant != SbVariant::Discrete {
                // The anti-aligned subspace is stable only under sign() coupling.
                assert!(run.shots.iter().all(|s| s.energy == -1.0), "{variant:?}");
            }
        }
    }

    #[test]
    fn variant_guard() {
        let c = cfg(SbVariant::Discrete);
        assert!(solve_bsb(&ferromagnet(), &c).is_err());
        assert!(solve_dsb(&ferromagnet(), &c).is_ok());
    }

    #[test]
    fn config_validation() {
        let mut c = SbConfig::new(SbVariant::Ballistic);
        c.dt = 0.0;
        assert!(c.validate().is_err());
        let mut c = SbConfig::new(SbVariant::Ballistic);
        c.c0 = C0Mode::Fixed(Some(-1.0));
        assert!(c.validate().is_err());
        let mut c = SbConfig::new(SbVariant::Ballistic);
        c.shots = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn fixed_c0_without_value_uses_auto_rule() {
        let p = random_problem(4, 12, 0.5);
        let mut c = cfg(SbVariant::Ballistic);
        c.c0 = C0Mode::Fixed(None);
        let run = solve_sb(&p, &c).unwrap();
        assert_eq!(run.c0, Some(auto_c0(&p).unwrap()));
    }

    /// Two-phase reference written without the integrator's buffers.
    fn reference_step(
        p: &IsingProblem,
        variant: SbVariant,
        (c0, dt, a_t): (f64, f64, f64),
        x: &mut [f64],
        y: &mut [f64],
    ) {
        let n = x.len();
        let x_old = x.to_vec();
        for i in 0..n {
            let mut coupling = 0.0;
            for (j, xj) in x_old.iter().enumerate() {
                let (cols, vals) = p.row(i);
                if let Some(k) = cols.iter().position(|&c| c == j) {
                    let g = if variant == SbVariant::Discrete { sign(*xj) } else { *xj };
                    coupling += vals[k] * g;
                }
            }
            let quartic = if variant == SbVariant::Adiabatic { x_old[i].powi(3) } else { 0.0 };
            y[i] += dt * (-(1.0 - a_t) * x_old[i] - quartic + c0 * (coupling - p.field()[i]));
        }
        for i in 0..n {
            x[i] += dt * y[i];
            if variant != SbVariant::Adiabatic && x[i].abs() > 1.0 {
                x[i] = sign(x[i]);
                y[i] = 0.0;
            }
        }
    }

    #[test]
    fn step_matches_two_phase_reference() {
        let p = random_problem(8, 20, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for variant in [SbVariant::Ballistic, SbVariant::Discrete, SbVariant::Adiabatic] {
            let c = SbConfig { steps: 50, ..SbConfig::new(variant) };
            let mut integ = SbIntegrator::with_c0(&p, &c, 0.3);
            let mut state = SbState {
                x: (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                y: (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                step: 0,
            };
            let (mut rx, mut ry) = (state.x.clone(), state.y.clone());
            for k in 1..=50 {
                integ.step(&mut state);
                reference_step(&p, variant, (0.3, c.dt, k as f64 / 50.0), &mut rx, &mut ry);
                for i in 0..20 {
                    assert!((state.x[i] - rx[i]).abs() < 1e-12, "{variant:?} step {k}");
                    assert!((state.y[i] - ry[i]).abs() < 1e-12, "{variant:?} step {k}");
                }
            }
        }
    }

    #[test]
    fn overflow_aborts_shot_but_not_run() {
        let p = IsingProblem::new(vec![1e308, -1e308], 0.0, [(0, 1, 1e308)]).unwrap();
        let mut c = cfg(SbVariant::Adiabatic);
        c.c0 = C0Mode::Fixed(Some(1e10));
        let run = solve_sb(&p, &c).unwrap();
        assert_eq!(run.shots.len(), 8);
        assert!(run.shots.iter().all(|s| s.aborted));
        assert_eq!(run.best_shot, None);
    }

    #[test]
    fn reported_energy_matches_spins_and_trace_is_monotone() {
        let p = random_problem(5, 30, 0.2);
        for variant in [SbVariant::Ballistic, SbVariant::Discrete] {
            let run = solve_sb(&p, &cfg(variant)).unwrap();
            for shot in &run.shots {
                let e = ising_energy(&p, &shot.spins).unwrap();
                assert!((e - shot.energy).abs() < 1e-9);
                assert!(shot.trace.windows(2).all(|w| w[1].best_energy <= w[0].best_energy));
                assert!(shot.trace.windows(2).all(|w| w[1].step > w[0].step));
                assert_eq!(shot.trace.last().unwrap().step, 200);
            }
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let p = random_problem(6, 25, 0.3);
        let a = solve_sb(&p, &cfg(SbVariant::Discrete)).unwrap();
        let b = solve_sb(&p, &cfg(SbVariant::Discrete)).unwrap();
        for (x, y) in a.shots.iter().zip(&b.shots) {
            assert_eq!(x.spins, y.spins);
            assert_eq!(x.energy.to_bits(), y.energy.to_bits());
        }
    }
}
