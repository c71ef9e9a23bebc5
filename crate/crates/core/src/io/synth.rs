use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::EventBundle;
use crate::error::{Error, Result};
use crate::tracking::Hit;

/// Cylindrical barrel layers, innermost first (mm).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub radii: Vec<f64>,
    pub half_lengths: Vec<f64>,
}

impl Default for Geometry {
    /// Approximate TrackML barrel: four pixel layers, four short-strip and
    /// two long-strip layers.
    fn default() -> Self {
        Self {
            radii: vec![32.0, 72.0, 116.0, 172.0, 260.0, 360.0, 500.0, 660.0, 820.0, 1020.0],
            half_lengths: vec![490.0, 490.0, 490.0, 490.0, 1080.0, 1080.0, 1080.0, 1080.0, 1080.0, 1080.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_tracks: usize,
    /// Noise hits as a fraction of track hits.
    pub noise_fraction: f64,
    pub seed: u64,
    pub geometry: Geometry,
    /// Tesla.
    pub b_field: f64,
    /// Largest `|q/pT|`, GeV⁻¹.
    pub qpt_max: f64,
    pub d0_sigma: f64,
    pub z0_sigma: f64,
    pub cot_theta_max: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_tracks: 25,
            noise_fraction: 0.0,
            seed: 0,
            geometry: Geometry::default(),
            b_field: 2.0,
            qpt_max: 6e-4,
            d0_sigma: 0.02,
            z0_sigma: 5.0,
            cot_theta_max: 1.0,
        }
    }
}

/// Generated helix parameters of one particle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParticle {
    pub particle_id: u64,
    pub qpt: f64,
    /// Azimuth of the direction at closest approach.
    pub phi0: f64,
    /// Signed transverse impact parameter, positive to the left of travel.
    pub d0: f64,
    pub z0: f64,
    pub cot_theta: f64,
}

impl SynthParticle {
    /// Transverse radius of curvature, mm.
    pub fn radius(&self, b_field: f64) -> f64 {
        1000.0 / (0.3 * b_field * self.qpt.abs())
    }

    /// Position after turning through `psi` from closest approach.
    pub fn point(&self, psi: f64, b_field: f64) -> [f64; 3] {
        let r = self.radius(b_field);
        let (s, c) = self.phi0.sin_cos();
        let left = [-s, c];
        // negative charges turn counter-clockwise (towards the left)
        let turn = -self.qpt.signum();
        let along = r * psi.sin();
        let across = self.d0 + turn * 2.0 * r * (psi / 2.0).sin().powi(2);
        [
            along * c + across * left[0],
            along * s + across * left[1],
            self.z0 + r * psi * self.cot_theta,
        ]
    }

    /// First crossing of the cylinder at transverse radius `rho`.
    pub fn crossing(&self, rho: f64, b_field: f64) -> Option<[f64; 3]> {
        let f = |psi: f64| {
            let p = self.point(psi, b_field);
            p[0].hypot(p[1]) - rho
        };
        let (mut lo, mut hi) = (0.0_f64, std::f64::consts::PI);
        if f(lo) >= 0.0 || f(hi) <= 0.0 {
            return None;
        }
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(self.point(hi, b_field))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthEvent {
    pub event: EventBundle,
    pub particles: Vec<SynthParticle>,
}

/// Helical tracks from near the origin crossing every barrel layer, plus
/// uniformly scattered noise. Hit ids are `1..=N` in shuffled order;
/// particle ids are `1..=n_tracks`.
pub fn generate_synthetic_event(cfg: &SynthConfig) -> Result<SynthEvent> {
    let g = &cfg.geometry;
    if cfg.n_tracks == 0 {
        return Err(Error::InvalidConfig("n_tracks must be at least 1".into()));
    }
    if g.radii.is_empty() || g.radii.len() != g.half_lengths.len() || g.radii.len() > u8::MAX as usize {
        return Err(Error::InvalidConfig("geometry needs matching radii and half-lengths".into()));
    }
    if !(cfg.noise_fraction >= 0.0 && cfg.noise_fraction.is_finite()) {
        return Err(Error::InvalidConfig("noise_fraction must be non-negative".into()));
    }
    if !(cfg.qpt_max > 0.0 && cfg.b_field > 0.0 && cfg.cot_theta_max > 0.0) {
        return Err(Error::InvalidConfig("qpt_max, b_field and cot_theta_max must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d0_dist = Normal::new(0.0, cfg.d0_sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let z0_dist = Normal::new(0.0, cfg.z0_sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;

    let mut particles = Vec::with_capacity(cfg.n_tracks);
    let mut hits: Vec<Hit> = Vec::new();
    let mut attempts = 0usize;
    while particles.len() < cfg.n_tracks {
        attempts += 1;
        if attempts > 1000 * cfg.n_tracks {
            return Err(Error::InvalidConfig("geometry rejects almost every track".into()));
        }
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let p = SynthParticle {
            particle_id: particles.len() as u64 + 1,
            qpt: sign * rng.gen_range(0.01 * cfg.qpt_max..=cfg.qpt_max),
            phi0: rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
            d0: d0_dist.sample(&mut rng),
            z0: z0_dist.sample(&mut rng),
            cot_theta: rng.gen_range(-cfg.cot_theta_max..=cfg.cot_theta_max),
        };
        let crossings: Option<Vec<[f64; 3]>> = g
            .radii
            .iter()
            .zip(&g.half_lengths)
            .map(|(&rho, &half)| p.crossing(rho, cfg.b_field).filter(|q| q[2].abs() <= half))
            .collect();
        let Some(crossings) = crossings else { continue };
        for (layer, [x, y, z]) in crossings.into_iter().enumerate() {
            hits.push(Hit {
                hit_id: 0,
                x,
                y,
                z,
                layer_index: layer as u8,
                truth_particle_id: Some(p.particle_id),
            });
        }
        particles.push(p);
    }

    let n_noise = (cfg.noise_fraction * hits.len() as f64).round() as usize;
    for _ in 0..n_noise {
        let layer = rng.gen_range(0..g.radii.len());
        let phi: f64 = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let half = g.half_lengths[layer];
        hits.push(Hit {
            hit_id: 0,
            x: g.radii[layer] * phi.cos(),
            y: g.radii[layer] * phi.sin(),
            z: rng.gen_range(-half..=half),
            layer_index: layer as u8,
            truth_particle_id: None,
        });
    }
    hits.shuffle(&mut rng);
    for (k, h) in hits.iter_mut().enumerate() {
        h.hit_id = k as u64 + 1;
    }
    let rows = hits.len();
    Ok(SynthEvent {
        event: EventBundle::new(format!("synth-{}", cfg.seed), hits, None, rows),
        particles,
    })
}
