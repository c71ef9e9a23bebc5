//! Track finding as a QUBO over triplets of silicon hits.
//!
//! Hits on nearby barrel layers are paired into doublets, doublets sharing a
//! hit are joined into triplets, and each triplet becomes one binary
//! variable. Consecutive triplets that agree in curvature and direction
//! attract (`b_ij = −S_ij`), triplets that cannot belong to one track repel
//! (`b_ij = 1`), and each triplet pays a bias for how far it points away from
//! the beam origin.

mod extract;
mod kinematics;
mod qubo;
mod seeding;
mod triplets;

use serde::{Deserialize, Serialize};

pub use extract::{extract_tracks, TrackCandidate};
pub use kinematics::{triplet_kinematics, Kinematics};
pub use qubo::{assemble_qubo, bias_weight, pair_relation, pair_strength, PairRelation, TrackingQubo, VariableMap};
pub use seeding::{generate_doublets, Doublet};
pub use triplets::{build_triplets, triplets_from_map, Triplet};

/// Number of barrel layers.
pub const NUM_LAYERS: u8 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub hit_id: u64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Global barrel layer, innermost 0.
    pub layer_index: u8,
    /// Generating particle; `None` for noise.
    pub truth_particle_id: Option<u64>,
}

impl Hit {
    /// Transverse radius.
    pub fn r(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn phi(&self) -> f64 {
        self.y.atan2(self.x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackingConfig {
    /// Bias weight scale for `|d0|`.
    pub alpha: f64,
    /// Bias weight scale for `|z0|`.
    pub beta: f64,
    /// `|d0|` length scale, detector units.
    pub gamma: f64,
    /// `|z0|` length scale, detector units.
    pub lambda: f64,
    /// Largest accepted `|q/pT|` of a triplet, GeV⁻¹.
    pub qpt_max: f64,
    /// Largest polar-angle difference between a triplet's two doublets, rad.
    pub dtheta_max: f64,
    pub max_holes: u32,
    /// Largest `|Δ(q/pT)|` of a kept quadruplet, GeV⁻¹.
    pub dqpt_pair_max: f64,
    /// Quadruplets need `S_ij` strictly above this.
    pub s_min: f64,
    /// Shortest track candidate kept after solving.
    pub min_track_hits: usize,
    /// Quadruplets must extend to a chain with at least this many hits.
    pub min_seed_track_hits: usize,
    /// Solenoid field, tesla.
    pub b_field: f64,
    /// Largest layer-index gap within one doublet.
    pub max_layer_gap: u8,
    /// Largest `|dz / dr|` of a doublet.
    pub dz_dr_max: f64,
    /// Largest `|z|` of a doublet extrapolated to `r = 0`, detector units.
    pub z_origin_max: f64,
    /// Largest azimuthal opening of a doublet, rad.
    pub doublet_dphi_max: f64,
    /// Millimetres per detector length unit.
    pub mm_per_unit: f64,
}

impl Default for TrackingConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.2,
            gamma: 1.0,
            lambda: 0.5,
            qpt_max: 8e-4,
            dtheta_max: 0.1,
            max_holes: 1,
            dqpt_pair_max: 1e-4,
            s_min: 0.2,
            min_track_hits: 4,
            min_seed_track_hits: 5,
            b_field: 2.0,
            max_layer_gap: 2,
            dz_dr_max: 7.5,
            z_origin_max: 200.0,
            doublet_dphi_max: 0.1,
            mm_per_unit: 1.0,
        }
    }
}

impl TrackingConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let positive = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("lambda", self.lambda),
            ("qpt_max", self.qpt_max),
            ("dtheta_max", self.dtheta_max),
            ("dqpt_pair_max", self.dqpt_pair_max),
            ("s_min", self.s_min),
            ("b_field", self.b_field),
            ("dz_dr_max", self.dz_dr_max),
            ("z_origin_max", self.z_origin_max),
            ("doublet_dphi_max", self.doublet_dphi_max),
            ("mm_per_unit", self.mm_per_unit),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(crate::Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_layer_gap == 0 || self.min_track_hits == 0 || self.min_seed_track_hits == 0 {
            return Err(crate::Error::InvalidConfig(
                "max_layer_gap, min_track_hits and min_seed_track_hits must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::Hit;

    pub fn hit(hit_id: u64, x: f64, y: f64, z: f64, layer: u8) -> Hit {
        Hit {
            hit_id,
            x,
            y,
            z,
            layer_index: layer,
            truth_particle_id: None,
        }
    }

    /// Hits of a straight radial track at azimuth `phi` through the origin.
    pub fn radial_track(first_id: u64, phi: f64, cot_theta: f64, radii: &[f64]) -> Vec<Hit> {
        radii
            .iter()
            .enumerate()
            .map(|(k, &r)| Hit {
                hit_id: first_id + k as u64,
                x: r * phi.cos(),
                y: r * phi.sin(),
                z: r * cot_theta,
                layer_index: k as u8,
                truth_particle_id: Some(first_id),
            })
            .collect()
    }
}
