use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::qubo::quadruplet_strength;
use super::{TrackingConfig, Triplet};
use crate::error::{Error, Result};
use crate::ising::BinaryState;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackCandidate {
    /// Hit ids from the innermost outward.
    pub hits: Vec<u64>,
    /// Variables whose doublets make up this candidate.
    pub triplets: Vec<usize>,
}

/// Turns a selection of triplet variables into track candidates.
///
/// Selected triplets are split into doublets and duplicates merged. Where
/// two doublets would leave or enter the same hit, the one from the triplet
/// with the larger summed quadruplet strength among the selected triplets
/// wins (ties to the lower variable index). Surviving doublets are chained
/// and chains shorter than `min_track_hits` dropped.
pub fn extract_tracks(
    selected: &BinaryState,
    triplets: &[Triplet],
    cfg: &TrackingConfig,
) -> Result<Vec<TrackCandidate>> {
    if selected.len() != triplets.len() {
        return Err(Error::DimensionMismatch {
            expected: triplets.len(),
            actual: selected.len(),
        });
    }
    let chosen: Vec<usize> = selected.ones().collect();

    let mut by_prefix: HashMap<[u64; 2], Vec<usize>> = HashMap::new();
    for &k in &chosen {
        let h = triplets[k].hits;
        by_prefix.entry([h[0], h[1]]).or_default().push(k);
    }
    let score = |k: usize| -> f64 {
        let t = &triplets[k];
        let mut s = 0.0;
        for &m in by_prefix.get(&[t.hits[1], t.hits[2]]).into_iter().flatten() {
            s += quadruplet_strength(t, &triplets[m], cfg).unwrap_or(0.0);
        }
        for &m in &chosen {
            let u = &triplets[m];
            if u.hits[1..] == t.hits[..2] {
                s += quadruplet_strength(u, t, cfg).unwrap_or(0.0);
            }
        }
        s
    };
    let mut ranked: Vec<(f64, usize)> = chosen.iter().map(|&k| (score(k), k)).collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    // inner hit → (outer hit, source triplet)
    let mut next: BTreeMap<u64, (u64, usize)> = BTreeMap::new();
    let mut entered: HashSet<u64> = HashSet::new();
    for &(_, k) in &ranked {
        let h = triplets[k].hits;
        for (inner, outer) in [(h[0], h[1]), (h[1], h[2])] {
            if next.get(&inner).is_some_and(|&(o, _)| o == outer) {
                continue; // duplicate doublet
            }
            if next.contains_key(&inner) || entered.contains(&outer) {
                continue; // conflict with a stronger triplet
            }
            next.insert(inner, (outer, k));
            entered.insert(outer);
        }
    }

    let mut out = Vec::new();
    for (&start, _) in next.iter().filter(|(h, _)| !entered.contains(h)) {
        let mut hits = vec![start];
        let mut sources = Vec::new();
        let mut cur = start;
        while let Some(&(outer, k)) = next.get(&cur) {
            if hits.contains(&outer) {
                break;
            }
            hits.push(outer);
            sources.push(k);
            cur = outer;
        }
        if hits.len() >= cfg.min_track_hits {
            sources.sort_unstable();
            sources.dedup();
            out.push(TrackCandidate { hits, triplets: sources });
        }
    }
    Ok(out)
}
