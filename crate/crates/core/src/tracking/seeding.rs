use std::collections::HashSet;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Hit, TrackingConfig, NUM_LAYERS};
use crate::error::{Error, Result};

/// Two-hit segment, inner hit first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Doublet {
    pub inner: u64,
    pub outer: u64,
    pub dz: f64,
    /// Transverse-radius difference, always positive.
    pub dr: f64,
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a < -PI {
        a += 2.0 * PI;
    }
    a
}

/// Pairs hits on layers up to `max_layer_gap` apart that pass the seeding
/// cuts: strictly increasing radius, `|dz| ≤ dz_dr_max · dr`, the segment's
/// line meeting the beam axis within `z_origin_max`, and an azimuthal
/// opening within `doublet_dphi_max`. Output is sorted by `(inner, outer)`.
pub fn generate_doublets(hits: &[Hit], cfg: &TrackingConfig) -> Result<Vec<Doublet>> {
    let mut ids = HashSet::with_capacity(hits.len());
    for h in hits {
        if !ids.insert(h.hit_id) {
            return Err(Error::InvalidProblem(format!("duplicate hit id {}", h.hit_id)));
        }
    }

    // Per layer: (phi, hit) sorted by phi.
    let mut layers: Vec<Vec<(f64, &Hit)>> = vec![Vec::new(); NUM_LAYERS as usize];
    for h in hits {
        if h.layer_index < NUM_LAYERS {
            layers[h.layer_index as usize].push((h.phi(), h));
        }
    }
    for layer in &mut layers {
        layer.sort_by(|a, b| a.0.total_cmp(&b.0));
    }

    let dphi = cfg.doublet_dphi_max.min(PI);
    let mut out = Vec::new();
    for inner_layer in 0..NUM_LAYERS as usize {
        let last = (inner_layer + cfg.max_layer_gap as usize).min(NUM_LAYERS as usize - 1);
        for outer_layer in inner_layer + 1..=last {
            let outer = &layers[outer_layer];
            for &(phi, inner_hit) in &layers[inner_layer] {
                for &(_, outer_hit) in phi_window(outer, phi, dphi) {
                    if let Some(d) = make_doublet(inner_hit, outer_hit, cfg) {
                        out.push(d);
                    }
                }
            }
        }
    }
    out.sort_by_key(|d| (d.inner, d.outer));
    Ok(out)
}

/// Entries of a phi-sorted layer within `half_width` of `phi`, wrapping at ±π.
fn phi_window<'a, 'h>(
    layer: &'a [(f64, &'h Hit)],
    phi: f64,
    half_width: f64,
) -> impl Iterator<Item = &'a (f64, &'h Hit)> {
    let lo = phi - half_width;
    let hi = phi + half_width;
    let range = |a: f64, b: f64| {
        let start = layer.partition_point(|e| e.0 < a);
        let end = layer.partition_point(|e| e.0 <= b);
        start..end.max(start)
    };
    let main = range(lo.max(-PI), hi.min(PI));
    let wrapped = if lo < -PI {
        range(lo + 2.0 * PI, PI)
    } else if hi > PI {
        range(-PI, hi - 2.0 * PI)
    } else {
        0..0
    };
    // The wrapped slice never overlaps the main one since half_width ≤ π.
    layer[main].iter().chain(layer[wrapped].iter())
}

fn make_doublet(inner: &Hit, outer: &Hit, cfg: &TrackingConfig) -> Option<Doublet> {
    let (r_in, r_out) = (inner.r(), outer.r());
    let dr = r_out - r_in;
    if dr <= 0.0 || inner.hit_id == outer.hit_id {
        return None;
    }
    let dz = outer.z - inner.z;
    if dz.abs() > cfg.dz_dr_max * dr {
        return None;
    }
    let z_at_origin = inner.z - r_in * dz / dr;
    if z_at_origin.abs() > cfg.z_origin_max {
        return None;
    }
    if wrap_angle(outer.phi() - inner.phi()).abs() > cfg.doublet_dphi_max {
        return None;
    }
    Some(Doublet {
        inner: inner.hit_id,
        outer: outer.hit_id,
        dz,
        dr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracking::test_support::{hit, radial_track};

    #[test]
    fn same_layer_hits_do_not_pair() {
        let hits = [hit(1, 30.0, 0.0, 0.0, 0), hit(2, 31.0, 0.0, 0.0, 0)];
        assert!(generate_doublets(&hits, &TrackingConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn straight_through_pair() {
        let hits = [hit(1, 30.0, 0.0, 0.0, 0), hit(2, 70.0, 0.0, 0.0, 1)];
        let d = generate_doublets(&hits, &TrackingConfig::default()).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!((d[0].inner, d[0].outer, d[0].dz, d[0].dr), (1, 2, 0.0, 40.0));
    }

    #[test]
    fn empty_and_duplicate_inputs() {
        assert!(generate_doublets(&[], &TrackingConfig::default()).unwrap().is_empty());
        let hits = [hit(1, 30.0, 0.0, 0.0, 0), hit(1, 70.0, 0.0, 0.0, 1)];
        assert!(generate_doublets(&hits, &TrackingConfig::default()).is_err());
    }

    #[test]
    fn cuts_reject_steep_displaced_and_wide_pairs() {
        let cfg = TrackingConfig::default();
        // dz/dr = 10 > 7.5
        let steep = [hit(1, 30.0, 0.0, 0.0, 0), hit(2, 70.0, 0.0, 400.0, 1)];
        assert!(generate_doublets(&steep, &cfg).unwrap().is_empty());
        // Points back to z = 300 mm at r = 0.
        let displaced = [hit(1, 30.0, 0.0, 330.0, 0), hit(2, 70.0, 0.0, 370.0, 1)];
        assert!(generate_doublets(&displaced, &cfg).unwrap().is_empty());
        // 90° apart in azimuth.
        let wide = [hit(1, 30.0, 0.0, 0.0, 0), hit(2, 0.0, 70.0, 0.0, 1)];
        assert!(generate_doublets(&wide, &cfg).unwrap().is_empty());
        // Layer gap of 3.
        let far = [hit(1, 30.0, 0.0, 0.0, 0), hit(2, 150.0, 0.0, 0.0, 3)];
        assert!(generate_doublets(&far, &cfg).unwrap().is_empty());
    }

    #[test]
    fn window_wraps_across_pi() {
        let a = 179.99f64.to_radians();
        let b = (-179.99f64).to_radians();
        let hits = [
            hit(1, 30.0 * a.cos(), 30.0 * a.sin(), 0.0, 0),
            hit(2, 70.0 * b.cos(), 70.0 * b.sin(), 0.0, 1),
        ];
        assert_eq!(generate_doublets(&hits, &TrackingConfig::default()).unwrap().len(), 1);
    }

    #[test]
    fn radial_track_gives_consecutive_and_skip_doublets() {
        let radii = [32.0, 72.0, 116.0, 172.0, 260.0, 360.0, 500.0, 660.0, 820.0, 1020.0];
        let hits = radial_track(100, 0.3, 0.2, &radii);
        let d = generate_doublets(&hits, &TrackingConfig::default()).unwrap();
        for k in 0..9u64 {
            assert!(d.iter().any(|x| (x.inner, x.outer) == (100 + k, 101 + k)));
        }
        // nine gap-1 plus eight gap-2
        assert_eq!(d.len(), 17);
    }
}
