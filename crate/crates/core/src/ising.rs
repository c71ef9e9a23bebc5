//! Problem representations and energy evaluation.
//!
//! A [`QuboProblem`] minimizes `Σ a_i t_i + Σ_{i<j} b_ij t_i t_j` over
//! `t ∈ {0,1}^n`. An [`IsingProblem`] minimizes
//! `E(s) = −½ Σ_{i,j} J_ij s_i s_j + Σ h_i s_i + offset` over `s ∈ {−1,+1}^n`,
//! which is the sign convention the bifurcation dynamics consume directly.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest problem [`brute_force_minimum`] accepts.
pub const MAX_BRUTE_FORCE_VARS: usize = 24;

/// One off-diagonal QUBO coefficient `b_ij`, stored with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuboProblem {
    bias: Vec<f64>,
    pairs: Vec<Pair>,
}

impl QuboProblem {
    /// Builds a problem from its bias vector and pair coefficients.
    ///
    /// Pairs may be given in any order and either orientation; they are
    /// stored canonically with `i < j`, sorted by `(i, j)`. Self-pairs,
    /// out-of-range indices, duplicate keys and non-finite values are
    /// rejected.
    pub fn new<I>(bias: Vec<f64>, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let n = bias.len();
        if let Some(k) = bias.iter().position(|a| !a.is_finite()) {
            return Err(Error::InvalidProblem(format!("bias[{k}] is not finite")));
        }
        let mut stored = Vec::new();
        for (i, j, weight) in pairs {
            if i == j {
                return Err(Error::InvalidProblem(format!("self-pair ({i}, {i})")));
            }
            if i >= n || j >= n {
                return Err(Error::InvalidProblem(format!(
                    "pair ({i}, {j}) out of range for n = {n}"
                )));
            }
            if !weight.is_finite() {
                return Err(Error::InvalidProblem(format!(
                    "pair ({i}, {j}) weight is not finite"
                )));
            }
            let (i, j) = if i < j { (i, j) } else { (j, i) };
            stored.push(Pair { i, j, weight });
        }
        stored.sort_by_key(|p| (p.i, p.j));
        if let Some(w) = stored.windows(2).find(|w| (w[0].i, w[0].j) == (w[1].i, w[1].j)) {
            return Err(Error::InvalidProblem(format!(
                "duplicate pair ({}, {})",
                w[0].i, w[0].j
            )));
        }
        Ok(Self { bias, pairs: stored })
    }

    pub fn empty() -> Self {
        Self {
            bias: Vec::new(),
            pairs: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.bias.len()
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Pair coefficients sorted by `(i, j)`.
    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    pub fn is_empty(&self) -> bool {
        self.bias.is_empty()
    }

    /// Adjacency lists `(neighbour, b_ij)` for every variable.
    fn neighbours(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n()];
        for p in &self.pairs {
            adj[p.i].push((p.j, p.weight));
            adj[p.j].push((p.i, p.weight));
        }
        adj
    }
}

/// Ising problem with a symmetric sparse coupling matrix in CSR layout.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingProblem {
    field: Vec<f64>,
    offset: f64,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl IsingProblem {
    /// Builds a problem from upper- or lower-triangle couplings `(i, j, J_ij)`.
    ///
    /// Each unordered pair may appear once; the symmetric partner is filled
    /// in. The diagonal must stay empty.
    pub fn new<I>(field: Vec<f64>, offset: f64, couplings: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let n = field.len();
        if let Some(k) = field.iter().position(|h| !h.is_finite()) {
            return Err(Error::InvalidProblem(format!("field[{k}] is not finite")));
        }
        if !offset.is_finite() {
            return Err(Error::InvalidProblem("offset is not finite".into()));
        }
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        let mut seen = HashSet::new();
        for (i, j, w) in couplings {
            if i == j {
                return Err(Error::InvalidProblem(format!("diagonal coupling J[{i}][{i}]")));
            }
            if i >= n || j >= n {
                return Err(Error::InvalidProblem(format!(
                    "coupling ({i}, {j}) out of range for n = {n}"
                )));
            }
            if !w.is_finite() {
                return Err(Error::InvalidProblem(format!("coupling ({i}, {j}) is not finite")));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(Error::InvalidProblem(format!("duplicate coupling ({i}, {j})")));
            }
            entries.push((i, j, w));
            entries.push((j, i, w));
        }
        entries.sort_by_key(|&(i, j, _)| (i, j));

        let mut row_start = vec![0usize; n + 1];
        for &(i, _, _) in &entries {
            row_start[i + 1] += 1;
        }
        for k in 0..n {
            row_start[k + 1] += row_start[k];
        }
        let cols = entries.iter().map(|e| e.1).collect();
        let vals = entries.iter().map(|e| e.2).collect();
        Ok(Self {
            field,
            offset,
            row_start,
            cols,
            vals,
        })
    }

    pub fn n(&self) -> usize {
        self.field.len()
    }

    pub fn field(&self) -> &[f64] {
        &self.field
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Column indices and values of row `i` of `J`, sorted by column.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.row_start[i]..self.row_start[i + 1];
        (&self.cols[range.clone()], &self.vals[range])
    }

    /// `Σ_j J_ij v_j`.
    #[inline]
    pub fn row_dot(&self, i: usize, v: &[f64]) -> f64 {
        let (cols, vals) = self.row(i);
        cols.iter().zip(vals).map(|(&j, &w)| w * v[j]).sum()
    }

    /// Upper-triangle couplings `(i, j, J_ij)` with `i < j`.
    pub fn couplings(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n()).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter()
                .zip(vals)
                .filter(move |(&j, _)| j > i)
                .map(move |(&j, &w)| (i, j, w))
        })
    }

    /// Number of stored entries in the full symmetric matrix.
    pub fn stored_entries(&self) -> usize {
        self.vals.len()
    }

    /// Nonzero entries of the full symmetric matrix.
    pub fn nonzero_entries(&self) -> impl Iterator<Item = f64> + '_ {
        self.vals.iter().copied().filter(|w| *w != 0.0)
    }
}

/// A configuration of ±1 spins.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct SpinState(Vec<i8>);

impl SpinState {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if let Some(k) = spins.iter().position(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidState(format!(
                "spin {k} is {}, expected ±1",
                spins[k]
            )));
        }
        Ok(Self(spins))
    }

    /// Binarizes continuous positions with `sign(0) = +1`.
    pub fn from_signs(x: &[f64]) -> Self {
        Self(x.iter().map(|&v| sign(v) as i8).collect())
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<i8>> for SpinState {
    type Error = Error;

    fn try_from(v: Vec<i8>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SpinState> for Vec<i8> {
    fn from(s: SpinState) -> Self {
        s.0
    }
}

/// A configuration of 0/1 variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct BinaryState(Vec<u8>);

impl BinaryState {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(k) = bits.iter().position(|&b| b > 1) {
            return Err(Error::InvalidState(format!("bit {k} is {}, expected 0 or 1", bits[k])));
        }
        Ok(Self(bits))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b == 1).map(|(k, _)| k)
    }
}

impl TryFrom<Vec<u8>> for BinaryState {
    type Error = Error;

    fn try_from(v: Vec<u8>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<BinaryState> for Vec<u8> {
    fn from(b: BinaryState) -> Self {
        b.0
    }
}

/// `sign` with `sign(0) = +1`. NaN maps to +1 as well.
#[inline]
pub fn sign(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

pub fn qubo_energy(p: &QuboProblem, t: &BinaryState) -> Result<f64> {
    check_len(p.n(), t.len())?;
    let bits = t.as_slice();
    let linear: f64 = p
        .bias
        .iter()
        .zip(bits)
        .filter(|(_, &b)| b == 1)
        .map(|(a, _)| a)
        .sum();
    let quadratic: f64 = p
        .pairs
        .iter()
        .filter(|pair| bits[pair.i] == 1 && bits[pair.j] == 1)
        .map(|pair| pair.weight)
        .sum();
    Ok(linear + quadratic)
}

pub fn ising_energy(p: &IsingProblem, s: &SpinState) -> Result<f64> {
    check_len(p.n(), s.len())?;
    Ok(ising_energy_unchecked(p, s.as_slice()))
}

/// Energy of an already-validated spin slice.
pub(crate) fn ising_energy_unchecked(p: &IsingProblem, s: &[i8]) -> f64 {
    let mut coupling = 0.0;
    let mut linear = 0.0;
    for i in 0..p.n() {
        let si = f64::from(s[i]);
        let (cols, vals) = p.row(i);
        let local: f64 = cols
            .iter()
            .zip(vals)
            .map(|(&j, &w)| w * f64::from(s[j]))
            .sum();
        coupling += si * local;
        linear += p.field[i] * si;
    }
    -0.5 * coupling + linear + p.offset
}

/// Rewrites a QUBO over `t` as an Ising problem over `s` with `t = (1 + s) / 2`.
pub fn qubo_to_ising(p: &QuboProblem) -> IsingProblem {
    let mut field: Vec<f64> = p.bias.iter().map(|a| a / 2.0).collect();
    let mut offset: f64 = p.bias.iter().sum::<f64>() / 2.0;
    for pair in &p.pairs {
        field[pair.i] += pair.weight / 4.0;
        field[pair.j] += pair.weight / 4.0;
        offset += pair.weight / 4.0;
    }
    let couplings = p.pairs.iter().map(|pair| (pair.i, pair.j, -pair.weight / 4.0));
    IsingProblem::new(field, offset, couplings)
        .expect("a valid QUBO always converts to a valid Ising problem")
}

pub fn binary_from_spin(s: &SpinState) -> BinaryState {
    BinaryState(s.0.iter().map(|&v| ((1 + v) / 2) as u8).collect())
}

pub fn spin_from_binary(t: &BinaryState) -> SpinState {
    SpinState(t.0.iter().map(|&b| 2 * b as i8 - 1).collect())
}

/// Exhaustive minimum of a QUBO with at most [`MAX_BRUTE_FORCE_VARS`] variables.
///
/// Enumerates assignments in Gray-code order with incremental energy updates,
/// then re-evaluates every near-optimal candidate exactly. Ties go to the
/// lexicographically smallest bit vector (`t_0` most significant).
pub fn brute_force_minimum(p: &QuboProblem) -> Result<(BinaryState, f64)> {
    let n = p.n();
    if n > MAX_BRUTE_FORCE_VARS {
        return Err(Error::TooLarge {
            n,
            max: MAX_BRUTE_FORCE_VARS,
        });
    }
    let adj = p.neighbours();
    let scale = 1.0
        + p.bias.iter().map(|a| a.abs()).sum::<f64>()
        + p.pairs.iter().map(|q| q.weight.abs()).sum::<f64>();
    let tol = 1e-9 * scale;

    // local[k] = Σ_j b_kj t_j for the current assignment.
    let mut local = vec![0.0; n];
    let mut mask: u32 = 0;
    let mut energy = 0.0;
    let mut best = 0.0;
    let mut candidates: Vec<u32> = vec![0];

    for g in 1u64..(1u64 << n) {
        let k = g.trailing_zeros() as usize;
        let on = mask & (1 << k) == 0;
        let delta = p.bias[k] + local[k];
        let sgn = if on { 1.0 } else { -1.0 };
        energy += sgn * delta;
        mask ^= 1 << k;
        for &(j, w) in &adj[k] {
            local[j] += sgn * w;
        }
        if energy < best - tol {
            best = energy;
            candidates.clear();
            candidates.push(mask);
        } else if energy <= best + tol {
            if energy < best {
                best = energy;
            }
            candidates.push(mask);
        }
    }

    let to_state = |m: u32| BinaryState((0..n).map(|k| ((m >> k) & 1) as u8).collect());
    let mut winner: Option<(BinaryState, f64)> = None;
    for m in candidates {
        let state = to_state(m);
        let e = qubo_energy(p, &state)?;
        let better = match &winner {
            None => true,
            Some((ws, we)) => e < *we || (e == *we && state.0 < ws.0),
        };
        if better {
            winner = Some((state, e));
        }
    }
    Ok(winner.expect("at least the all-zero assignment is a candidate"))
}
