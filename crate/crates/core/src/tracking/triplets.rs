use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{triplet_kinematics, Doublet, Hit, TrackingConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    /// Hit ids in increasing transverse radius.
    pub hits: [u64; 3],
    pub qpt: f64,
    pub theta: f64,
    pub d0: f64,
    pub z0: f64,
    pub holes: u32,
    /// Polar-angle difference between the two doublets.
    pub dtheta: f64,
}

fn segment_theta(a: &Hit, b: &Hit) -> f64 {
    (b.x - a.x).hypot(b.y - a.y).atan2(b.z - a.z)
}

impl Triplet {
    /// Triplet through three hits, with no selection cuts applied.
    pub fn from_hits(a: &Hit, b: &Hit, c: &Hit, cfg: &TrackingConfig) -> Result<Self> {
        let k = triplet_kinematics(a, b, c, cfg)?;
        Ok(Triplet {
            hits: [a.hit_id, b.hit_id, c.hit_id],
            qpt: k.qpt,
            theta: k.theta,
            d0: k.d0,
            z0: k.z0,
            holes: k.holes,
            dtheta: (segment_theta(a, b) - segment_theta(b, c)).abs(),
        })
    }
}

/// Joins doublets `(A, B)` and `(B, C)` into triplets `(A, B, C)` that pass
/// the hole, curvature and angle-consistency cuts. Output is sorted by hit
/// ids.
pub fn build_triplets(doublets: &[Doublet], hits: &[Hit], cfg: &TrackingConfig) -> Result<Vec<Triplet>> {
    let by_id: HashMap<u64, &Hit> = hits.iter().map(|h| (h.hit_id, h)).collect();
    for d in doublets {
        for id in [d.inner, d.outer] {
            if !by_id.contains_key(&id) {
                return Err(Error::InvalidProblem(format!("doublet references unknown hit {id}")));
            }
        }
    }
    let mut starting_at: HashMap<u64, Vec<&Doublet>> = HashMap::new();
    for d in doublets {
        starting_at.entry(d.inner).or_default().push(d);
    }

    let mut out: Vec<Triplet> = doublets
        .par_iter()
        .flat_map_iter(|first| {
            let by_id = &by_id;
            starting_at
                .get(&first.outer)
                .into_iter()
                .flatten()
                .filter_map(move |second| join(first, second, by_id, cfg))
        })
        .collect();
    out.sort_by_key(|t| t.hits);
    out.dedup_by_key(|t| t.hits);
    Ok(out)
}

fn join(first: &Doublet, second: &Doublet, hits: &HashMap<u64, &Hit>, cfg: &TrackingConfig) -> Option<Triplet> {
    let [a, b, c] = [first.inner, first.outer, second.outer].map(|id| hits[&id]);
    let t = Triplet::from_hits(a, b, c, cfg).ok()?;
    (t.dtheta <= cfg.dtheta_max && t.holes <= cfg.max_holes && t.qpt.abs() <= cfg.qpt_max).then_some(t)
}

/// Rebuilds the triplets behind each variable of a saved index map.
pub fn triplets_from_map(variables: &[[u64; 3]], hits: &[Hit], cfg: &TrackingConfig) -> Result<Vec<Triplet>> {
    let by_id: HashMap<u64, &Hit> = hits.iter().map(|h| (h.hit_id, h)).collect();
    variables
        .iter()
        .map(|ids| {
            let [a, b, c] = ids.map(|id| by_id.get(&id).copied());
            match (a, b, c) {
                (Some(a), Some(b), Some(c)) => Triplet::from_hits(a, b, c, cfg),
                _ => Err(Error::InvalidProblem(format!("index map references hits {ids:?} missing from the event"))),
            }
        })
        .collect()
}
