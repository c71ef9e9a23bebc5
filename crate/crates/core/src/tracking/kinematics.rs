use serde::{Deserialize, Serialize};

use super::{Hit, TrackingConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kinematics {
    /// Signed inverse transverse momentum, GeV⁻¹.
    pub qpt: f64,
    /// Polar angle of the first-to-last hit displacement.
    pub theta: f64,
    /// Transverse distance of closest approach to the beam axis.
    pub d0: f64,
    /// `z` at the point of closest approach.
    pub z0: f64,
    pub holes: u32,
}

/// Helix parameters of the circle through three hits.
///
/// The transverse circumcircle gives the radius and centre; curvature is the
/// Menger curvature `2·(a × b) / (|a||b||c|)`. A counter-clockwise turn
/// (positive cross product) is a negative charge for a field along `+z`.
/// `z0` is the intercept of a least-squares line `z(s)` in arc length `s`
/// measured from the point of closest approach.
pub fn triplet_kinematics(h1: &Hit, h2: &Hit, h3: &Hit, cfg: &TrackingConfig) -> Result<Kinematics> {
    if h1.hit_id == h2.hit_id || h2.hit_id == h3.hit_id || h1.hit_id == h3.hit_id {
        return Err(Error::InvalidProblem(format!(
            "triplet hits must be distinct, got {} {} {}",
            h1.hit_id, h2.hit_id, h3.hit_id
        )));
    }
    let p = [[h1.x, h1.y], [h2.x, h2.y], [h3.x, h3.y]];
    let a = sub(p[1], p[0]);
    let b = sub(p[2], p[1]);
    let c = sub(p[2], p[0]);
    let (la, lb, lc) = (norm(a), norm(b), norm(c));
    if la == 0.0 || lb == 0.0 || lc == 0.0 {
        return Err(Error::InvalidProblem(format!(
            "triplet {} {} {} has coincident transverse points",
            h1.hit_id, h2.hit_id, h3.hit_id
        )));
    }
    let turn = cross2(a, b);
    let theta = lc.atan2(h3.z - h1.z);
    let holes = holes(h1.layer_index, h2.layer_index, h3.layer_index);
    let z = [h1.z, h2.z, h3.z];

    if turn.abs() <= 1e-12 * la * lb {
        // Straight line: closest approach is the foot of the perpendicular
        // from the origin, and arc length is the projection on the direction.
        let u = [c[0] / lc, c[1] / lc];
        let d0 = cross2(p[0], u).abs();
        let s = p.map(|q| dot(q, u));
        return Ok(Kinematics {
            qpt: 0.0,
            theta,
            d0,
            z0: line_intercept(s, z),
            holes,
        });
    }

    let kappa = 2.0 * turn / (la * lb * lc);
    // Centre relative to p1.
    let denom = 2.0 * cross2(a, c);
    let rel = [
        (c[1] * la * la - a[1] * lc * lc) / denom,
        (a[0] * lc * lc - c[0] * la * la) / denom,
    ];
    let center = [p[0][0] + rel[0], p[0][1] + rel[1]];
    let radius = norm(rel);
    let dist = norm(center);
    let d0 = (dist - radius).abs();

    let radius_m = cfg.mm_per_unit * 1e-3 / kappa.abs();
    let pt = 0.3 * cfg.b_field * radius_m;
    let q = -turn.signum();
    let qpt = q / pt;

    // Point of closest approach to the origin.
    let pca = if dist > 0.0 {
        [center[0] - radius * center[0] / dist, center[1] - radius * center[1] / dist]
    } else {
        p[0]
    };
    let u = sub(pca, center);
    let orient = turn.signum();
    let s = p.map(|q| {
        let v = sub(q, center);
        radius * orient * cross2(u, v).atan2(dot(u, v))
    });
    Ok(Kinematics {
        qpt,
        theta,
        d0,
        z0: line_intercept(s, z),
        holes,
    })
}

/// Layers strictly between the outer hits that the middle hit does not occupy.
fn holes(l1: u8, l2: u8, l3: u8) -> u32 {
    let between = u32::from(l3.saturating_sub(l1)).saturating_sub(1);
    let filled = u32::from(l1 < l2 && l2 < l3);
    between - filled
}

fn line_intercept(s: [f64; 3], z: [f64; 3]) -> f64 {
    let sm = s.iter().sum::<f64>() / 3.0;
    let zm = z.iter().sum::<f64>() / 3.0;
    let sxx: f64 = s.iter().map(|v| (v - sm) * (v - sm)).sum();
    if sxx == 0.0 {
        return zm;
    }
    let sxz: f64 = s.iter().zip(&z).map(|(v, w)| (v - sm) * (w - zm)).sum();
    zm - sxz / sxx * sm
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn cross2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}
