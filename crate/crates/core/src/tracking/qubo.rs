use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{TrackingConfig, Triplet};
use crate::error::Result;
use crate::ising::QuboProblem;

/// How two triplets overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairRelation {
    Disjoint,
    /// `first.hits[1..] == second.hits[..2]`: together they form a quadruplet.
    Consecutive { first: usize, second: usize },
    /// The last hit of one is the first hit of the other and nothing else is
    /// shared — two stretches of the same track, not competing for a hit.
    Continuation,
    /// Any other overlap: both cannot belong to the solution.
    Conflict,
}

/// Classifies the overlap of triplets `a` (index 0) and `b` (index 1).
pub fn pair_relation(a: &Triplet, b: &Triplet) -> PairRelation {
    let shared = a.hits.iter().filter(|h| b.hits.contains(h)).count();
    if shared == 0 {
        return PairRelation::Disjoint;
    }
    if a.hits[1..] == b.hits[..2] {
        return PairRelation::Consecutive { first: 0, second: 1 };
    }
    if b.hits[1..] == a.hits[..2] {
        return PairRelation::Consecutive { first: 1, second: 0 };
    }
    if shared == 1 && (a.hits[2] == b.hits[0] || b.hits[2] == a.hits[0]) {
        return PairRelation::Continuation;
    }
    PairRelation::Conflict
}

/// Compatibility of two consecutive triplets, penalised by their holes.
pub fn pair_strength(ti: &Triplet, tj: &Triplet) -> f64 {
    let numerator = 1.0 - 0.5 * ((ti.qpt - tj.qpt).abs() + ti.dtheta.max(tj.dtheta));
    let holes = 1.0 + f64::from(ti.holes) + f64::from(tj.holes);
    numerator / (holes * holes)
}

/// Penalty for a triplet that does not point back to the beam origin.
pub fn bias_weight(t: &Triplet, cfg: &TrackingConfig) -> f64 {
    cfg.alpha * (1.0 - (-t.d0.abs() / cfg.gamma).exp()) + cfg.beta * (1.0 - (-t.z0.abs() / cfg.lambda).exp())
}

/// Whether a consecutive pair is close enough in curvature and strong enough
/// to be rewarded; returns its strength if so.
pub(crate) fn quadruplet_strength(ti: &Triplet, tj: &Triplet, cfg: &TrackingConfig) -> Option<f64> {
    let s = pair_strength(ti, tj);
    ((ti.qpt - tj.qpt).abs() <= cfg.dqpt_pair_max && s > cfg.s_min).then_some(s)
}

/// Hit ids behind each QUBO variable, in variable order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableMap {
    pub variables: Vec<[u64; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingQubo {
    pub problem: QuboProblem,
    /// Surviving triplets; index `k` is variable `k`.
    pub triplets: Vec<Triplet>,
    /// Triplets offered before pruning.
    pub candidates: usize,
}

impl TrackingQubo {
    pub fn variable_map(&self) -> VariableMap {
        VariableMap {
            variables: self.triplets.iter().map(|t| t.hits).collect(),
        }
    }
}

/// Builds the triplet QUBO.
///
/// Quadruplets (consecutive triplets passing the curvature and strength
/// cuts) get `−S`; consecutive triplets failing the cuts and every other
/// overlap except a chain continuation get `+1`. Quadruplets are then kept
/// only if the longest chain of quadruplets through them spans at least
/// `min_seed_track_hits` hits, and only triplets in a kept quadruplet become
/// variables.
pub fn assemble_qubo(triplets: &[Triplet], cfg: &TrackingConfig) -> Result<TrackingQubo> {
    cfg.validate()?;
    let n = triplets.len();

    let mut by_hit: HashMap<u64, Vec<usize>> = HashMap::new();
    for (k, t) in triplets.iter().enumerate() {
        for h in t.hits {
            by_hit.entry(h).or_default().push(k);
        }
    }
    let mut overlapping: Vec<(usize, usize)> = by_hit
        .values()
        .flat_map(|ks| {
            ks.iter()
                .enumerate()
                .flat_map(move |(a, &i)| ks[a + 1..].iter().map(move |&j| (i.min(j), i.max(j))))
        })
        .collect();
    overlapping.par_sort_unstable();
    overlapping.dedup();

    enum Coupling {
        Quad { inner: usize, outer: usize, strength: f64 },
        Conflict,
    }
    let couplings: Vec<(usize, usize, Coupling)> = overlapping
        .par_iter()
        .filter_map(|&(i, j)| {
            let (a, b) = (&triplets[i], &triplets[j]);
            let coupling = match pair_relation(a, b) {
                PairRelation::Disjoint | PairRelation::Continuation => return None,
                PairRelation::Conflict => Coupling::Conflict,
                PairRelation::Consecutive { first, .. } => {
                    let (inner, outer) = if first == 0 { (i, j) } else { (j, i) };
                    match quadruplet_strength(a, b, cfg) {
                        Some(strength) => Coupling::Quad { inner, outer, strength },
                        None => Coupling::Conflict,
                    }
                }
            };
            Some((i, j, coupling))
        })
        .collect();

    // Longest quadruplet chain ending at / starting from each triplet,
    // counted in triplets.
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut succs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (_, _, c) in &couplings {
        if let Coupling::Quad { inner, outer, .. } = *c {
            succs[inner].push(outer);
            preds[outer].push(inner);
        }
    }
    let in_len = longest_chains(&preds);
    let out_len = longest_chains(&succs);
    let keeps = |inner: usize, outer: usize| in_len[inner] + out_len[outer] + 2 >= cfg.min_seed_track_hits;

    let mut survives = vec![false; n];
    for (_, _, c) in &couplings {
        if let Coupling::Quad { inner, outer, .. } = *c {
            if keeps(inner, outer) {
                survives[inner] = true;
                survives[outer] = true;
            }
        }
    }
    let mut index = vec![usize::MAX; n];
    let mut kept = Vec::new();
    for k in 0..n {
        if survives[k] {
            index[k] = kept.len();
            kept.push(triplets[k].clone());
        }
    }

    let pairs = couplings.iter().filter_map(|(i, j, c)| {
        if !(survives[*i] && survives[*j]) {
            return None;
        }
        let w = match *c {
            Coupling::Conflict => 1.0,
            Coupling::Quad { inner, outer, strength } => {
                if !keeps(inner, outer) {
                    return None;
                }
                -strength
            }
        };
        Some((index[*i], index[*j], w))
    });
    let pairs: Vec<(usize, usize, f64)> = pairs.collect();
    let bias = kept.iter().map(|t| bias_weight(t, cfg)).collect();
    Ok(TrackingQubo {
        problem: QuboProblem::new(bias, pairs)?,
        triplets: kept,
        candidates: n,
    })
}

/// `len[k] = 1 + max len[m]` over `m ∈ next[k]`; the graph is acyclic because
/// hits along a chain move strictly outward.
fn longest_chains(next: &[Vec<usize>]) -> Vec<usize> {
    let n = next.len();
    let mut len = vec![0usize; n];
    let mut stack = Vec::new();
    for root in 0..n {
        if len[root] != 0 {
            continue;
        }
        stack.push((root, 0usize));
        while let Some(&mut (k, ref mut child)) = stack.last_mut() {
            if *child < next[k].len() {
                let m = next[k][*child];
                *child += 1;
                if len[m] == 0 {
                    stack.push((m, 0));
                }
            } else {
                len[k] = 1 + next[k].iter().map(|&m| len[m]).max().unwrap_or(0);
                stack.pop();
            }
        }
    }
    len
}
