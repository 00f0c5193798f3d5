//! The spin model itself: Hamiltonian, exact enumeration on tiny tori, and
//! Monte Carlo sampling on moderate tori. Everything here speaks spins only,
//! so it serves as a model-level oracle independent of all fermionic
//! machinery.

use crate::rng::CounterRng;
use rayon::prelude::*;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LatticeError {
    #[error("side length M = {0} too large for exhaustive enumeration (max {1})")]
    TooLargeForEnumeration(usize, usize),
    #[error("side length M = {0} outside supported range")]
    BadSide(usize),
    #[error("interaction table violates {0}")]
    BadInteraction(String),
    #[error("bonds must be distinct (bond {0:?} repeated)")]
    RepeatedBond(BondIndex),
    #[error("cumulant order {0} exceeds supported maximum {1}")]
    CumulantOrderTooLarge(usize, usize),
    #[error("Monte Carlo parameters invalid: {0}")]
    BadMcParams(String),
}

/// Largest M for which 2^(M^2) enumeration is attempted.
pub const MAX_ENUM_SIDE: usize = 5;
/// Largest joint-cumulant order (m! growth beyond this is pointless).
pub const MAX_CUMULANT_ORDER: usize = 6;

/// Interaction table v on lattice offsets (units of the spacing a).
///
/// Invariants: finite range (max offset norm <= range_m0), invariance under
/// the eight lattice rotations/reflections, v(unit vectors) = 0, and the
/// normalization (1/2) sum |v| = 1.
#[derive(Debug, Clone)]
pub struct VTable {
    entries: BTreeMap<(i32, i32), f64>,
    pub range_m0: i32,
}

impl VTable {
    pub fn new(entries: Vec<((i32, i32), f64)>) -> Result<Self, LatticeError> {
        let map: BTreeMap<(i32, i32), f64> =
            entries.into_iter().filter(|(_, v)| *v != 0.0).collect();
        let mut m0 = 0i32;
        for (&(dx, dy), _) in &map {
            if (dx, dy) == (0, 0) {
                return Err(LatticeError::BadInteraction("nonzero v at the origin".into()));
            }
            m0 = m0.max(dx.abs()).max(dy.abs());
        }
        if m0 > 3 {
            return Err(LatticeError::BadInteraction(format!(
                "range M0 = {m0} exceeds the supported maximum 3"
            )));
        }
        for (&(dx, dy), &v) in &map {
            if (dx.abs(), dy.abs()) == (1, 0) || (dx.abs(), dy.abs()) == (0, 1) {
                return Err(LatticeError::BadInteraction(
                    "v must vanish on nearest-neighbor offsets".into(),
                ));
            }
            // D4 invariance
            for &(tx, ty) in &[
                (-dx, -dy),
                (dy, dx),
                (-dy, -dx),
                (dx, -dy),
                (-dx, dy),
                (dy, -dx),
                (-dy, dx),
            ] {
                let w = map.get(&(tx, ty)).copied().unwrap_or(0.0);
                if (w - v).abs() > 1e-12 {
                    return Err(LatticeError::BadInteraction(
                        "v is not invariant under lattice rotations/reflections".into(),
                    ));
                }
            }
        }
        let norm: f64 = 0.5 * map.values().map(|v| v.abs()).sum::<f64>();
        if !map.is_empty() && (norm - 1.0).abs() > 1e-12 {
            return Err(LatticeError::BadInteraction(format!(
                "normalization (1/2) sum |v| = {norm} differs from 1"
            )));
        }
        Ok(VTable { entries: map, range_m0: m0 })
    }

    /// Diagonal-neighbor interaction: v(±1, ±1) = 1/2.
    pub fn diagonal() -> Self {
        VTable::new(vec![
            ((1, 1), 0.5),
            ((1, -1), 0.5),
            ((-1, 1), 0.5),
            ((-1, -1), 0.5),
        ])
        .unwrap()
    }

    /// Diagonal plus next-nearest axis neighbors, equally weighted:
    /// v(±1, ±1) = v(±2, 0) = v(0, ±2) = 1/4.
    pub fn diagonal_axis() -> Self {
        VTable::new(vec![
            ((1, 1), 0.25),
            ((1, -1), 0.25),
            ((-1, 1), 0.25),
            ((-1, -1), 0.25),
            ((2, 0), 0.25),
            ((-2, 0), 0.25),
            ((0, 2), 0.25),
            ((0, -2), 0.25),
        ])
        .unwrap()
    }

    pub fn empty() -> Self {
        VTable { entries: BTreeMap::new(), range_m0: 0 }
    }

    pub fn get(&self, d: (i32, i32)) -> f64 {
        self.entries.get(&d).copied().unwrap_or(0.0)
    }

    pub fn offsets(&self) -> impl Iterator<Item = (&(i32, i32), &f64)> {
        self.entries.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A bond of the torus: base site plus direction (1 = horizontal, 2 = vertical).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BondIndex {
    pub x: (i32, i32),
    pub j: u8,
}

impl BondIndex {
    pub fn new(x: (i32, i32), j: u8) -> Self {
        assert!(j == 1 || j == 2);
        BondIndex { x, j }
    }
}

/// Single source of truth for all modules: spacing, side, couplings and the
/// finite-range interaction table. Units are fixed by the macroscopic length
/// (a = 2^-N) and by J; all module formulas read these fields.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    /// Lattice spacing a (dimensionless, unit macroscopic length).
    pub a: f64,
    /// Sites per side.
    pub m: usize,
    /// Nearest-neighbor coupling.
    pub j: f64,
    /// Inverse temperature.
    pub beta: f64,
    /// Perturbation strength.
    pub lambda: f64,
    /// Finite-range interaction table in lattice units.
    pub v: VTable,
}

impl ModelSpec {
    pub fn new(a: f64, m: usize, j: f64, beta: f64, lambda: f64, v: VTable) -> Result<Self, LatticeError> {
        if m < 2 {
            return Err(LatticeError::BadSide(m));
        }
        assert!(a > 0.0, "lattice spacing must be positive");
        Ok(ModelSpec { a, m, j, beta, lambda, v })
    }

    /// Spec with a = 2^-n_scale.
    pub fn with_scale_exponent(n_scale: i32, m: usize, j: f64, beta: f64, lambda: f64, v: VTable) -> Result<Self, LatticeError> {
        Self::new((2.0f64).powi(-n_scale), m, j, beta, lambda, v)
    }

    pub fn sites(&self) -> usize {
        self.m * self.m
    }

    pub fn torus_len(&self) -> f64 {
        self.a * self.m as f64
    }

    pub fn t(&self) -> f64 {
        (self.beta * self.j).tanh()
    }

    pub fn site_index(&self, x: (i32, i32)) -> usize {
        let m = self.m as i32;
        let ix = x.0.rem_euclid(m);
        let iy = x.1.rem_euclid(m);
        (ix + m * iy) as usize
    }

    pub fn site_at(&self, idx: usize) -> (i32, i32) {
        let m = self.m as i32;
        ((idx as i32) % m, (idx as i32) / m)
    }

    /// Minimal-image representative of an offset; components in (-M/2, M/2].
    pub fn min_image(&self, d: (i32, i32)) -> (i32, i32) {
        let m = self.m as i32;
        let f = |c: i32| {
            let mut c = c.rem_euclid(m);
            if 2 * c > m {
                c -= m;
            }
            c
        };
        (f(d.0), f(d.1))
    }

    /// All torus bonds in a fixed order.
    pub fn bonds(&self) -> Vec<BondIndex> {
        let mut out = Vec::with_capacity(2 * self.sites());
        for idx in 0..self.sites() {
            let x = self.site_at(idx);
            out.push(BondIndex::new(x, 1));
            out.push(BondIndex::new(x, 2));
        }
        out
    }

    pub fn bond_sites(&self, b: BondIndex) -> (usize, usize) {
        let x = self.site_index(b.x);
        let y = match b.j {
            1 => self.site_index((b.x.0 + 1, b.x.1)),
            _ => self.site_index((b.x.0, b.x.1 + 1)),
        };
        (x, y)
    }

    /// Unordered interacting pairs {x, y} on the torus, each exactly once,
    /// with v evaluated on the minimal-image offset. Pairs that wrap onto
    /// themselves on degenerate tori are dropped (they only shift H by a
    /// constant). The `wrapped` flag reports whether 2 R0 >= L, i.e. whether
    /// the minimal-image convention is doing real work.
    pub fn interaction_pairs(&self) -> (Vec<InteractionPair>, bool) {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let wrapped = 2 * self.v.range_m0 >= self.m as i32;
        if self.lambda == 0.0 || self.v.is_empty() {
            return (out, wrapped);
        }
        for idx in 0..self.sites() {
            let x = self.site_at(idx);
            for (&d, _) in self.v.offsets() {
                let y = ((x.0 + d.0).rem_euclid(self.m as i32), (x.1 + d.1).rem_euclid(self.m as i32));
                let yi = self.site_index(y);
                if yi == idx {
                    continue; // degenerate self-pair on a tiny torus
                }
                let key = (idx.min(yi), idx.max(yi));
                if !seen.insert(key) {
                    continue;
                }
                let dmin = self.min_image((y.0 - x.0, y.1 - x.1));
                out.push(InteractionPair {
                    x,
                    y,
                    v: self.v.get(dmin),
                    offset: dmin,
                });
            }
        }
        (out, wrapped)
    }
}

/// One unordered interacting pair with its minimal-image offset and weight.
#[derive(Debug, Clone, Copy)]
pub struct InteractionPair {
    pub x: (i32, i32),
    pub y: (i32, i32),
    pub v: f64,
    pub offset: (i32, i32),
}

/// Spin configuration as a bitmask over M^2 sites (bit set = spin up).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpinConfiguration(pub u64);

impl SpinConfiguration {
    #[inline]
    pub fn spin(&self, idx: usize) -> f64 {
        if self.0 >> idx & 1 == 1 {
            1.0
        } else {
            -1.0
        }
    }
}

/// H = -J sum_bonds sigma sigma' - lambda sum_pairs sigma v sigma'.
pub fn hamiltonian(spec: &ModelSpec, cfg: SpinConfiguration) -> f64 {
    let mut e = 0.0;
    for b in spec.bonds() {
        let (x, y) = spec.bond_sites(b);
        e -= spec.j * cfg.spin(x) * cfg.spin(y);
    }
    let (pairs, _) = spec.interaction_pairs();
    for p in &pairs {
        e -= spec.lambda * p.v * cfg.spin(spec.site_index(p.x)) * cfg.spin(spec.site_index(p.y));
    }
    e
}

/// Kahan-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
    pub fn value(&self) -> f64 {
        self.sum
    }
    pub fn merge(&mut self, other: Kahan) {
        self.add(other.sum);
        self.add(-other.c);
    }
}

fn check_enum_side(spec: &ModelSpec) -> Result<(), LatticeError> {
    if spec.m > MAX_ENUM_SIDE {
        return Err(LatticeError::TooLargeForEnumeration(spec.m, MAX_ENUM_SIDE));
    }
    Ok(())
}

/// Exact Z by exhaustive enumeration (M <= 5), compensated summation,
/// parallel over configuration blocks with a deterministic merge order.
pub fn exact_partition_function(spec: &ModelSpec) -> Result<f64, LatticeError> {
    Ok(exact_weighted_sums(spec, &[])?[0])
}

/// Exhaustively computes `Z * E[prod_{b in S} (a eps_b)]` for every subset S
/// of the given bonds (indexed by bitmask), in one sweep over configurations.
/// Subset 0 is Z itself. These are exactly the mixed first derivatives of the
/// generating function Z(A) at A = 0.
pub fn exact_weighted_sums(
    spec: &ModelSpec,
    bonds: &[BondIndex],
) -> Result<Vec<f64>, LatticeError> {
    check_enum_side(spec)?;
    for (i, b) in bonds.iter().enumerate() {
        if bonds[i + 1..].contains(b) {
            return Err(LatticeError::RepeatedBond(*b));
        }
    }
    let nsites = spec.sites();
    let total: u64 = 1u64 << nsites;
    let nsub = 1usize << bonds.len();
    let bond_sites: Vec<(usize, usize)> = bonds.iter().map(|&b| spec.bond_sites(b)).collect();

    // precompute bond site lists once
    let nn: Vec<(usize, usize)> = spec.bonds().iter().map(|&b| spec.bond_sites(b)).collect();
    let (pairs, _) = spec.interaction_pairs();
    let pair_sites: Vec<(usize, usize, f64)> = pairs
        .iter()
        .map(|p| (spec.site_index(p.x), spec.site_index(p.y), p.v))
        .collect();

    let nblocks = 64usize.min(total as usize);
    let block = total / nblocks as u64;
    let partials: Vec<Vec<Kahan>> = (0..nblocks)
        .into_par_iter()
        .map(|bi| {
            let lo = bi as u64 * block;
            let hi = if bi == nblocks - 1 { total } else { lo + block };
            let mut acc = vec![Kahan::default(); nsub];
            for cfg in lo..hi {
                let s = SpinConfiguration(cfg);
                let mut e = 0.0;
                for &(x, y) in &nn {
                    e -= spec.j * s.spin(x) * s.spin(y);
                }
                for &(x, y, v) in &pair_sites {
                    e -= spec.lambda * v * s.spin(x) * s.spin(y);
                }
                let w = (-spec.beta * e).exp();
                acc[0].add(w);
                for sub in 1..nsub {
                    let mut prod = w;
                    let mut ss = sub;
                    while ss != 0 {
                        let i = ss.trailing_zeros() as usize;
                        let (x, y) = bond_sites[i];
                        prod *= s.spin(x) * s.spin(y); // a * eps_b = sigma sigma'
                        ss &= ss - 1;
                    }
                    acc[sub].add(prod);
                }
            }
            acc
        })
        .collect();
    let mut out = vec![Kahan::default(); nsub];
    for p in partials {
        for (o, k) in out.iter_mut().zip(p) {
            o.merge(k);
        }
    }
    Ok(out.into_iter().map(|k| k.value()).collect())
}

/// Exact Gibbs moments E[prod_{b in S} eps_b] for all subsets of `bonds`.
pub fn exact_energy_moments(
    spec: &ModelSpec,
    bonds: &[BondIndex],
) -> Result<Vec<f64>, LatticeError> {
    let sums = exact_weighted_sums(spec, bonds)?;
    let z = sums[0];
    Ok(sums
        .iter()
        .enumerate()
        .map(|(s, v)| v / z / spec.a.powi(s.count_ones() as i32))
        .collect())
}

/// Joint cumulant of {eps_b} from exhaustively enumerated moments via the
/// moments-to-cumulants sum over set partitions.
pub fn exact_truncated_energy_correlation(
    spec: &ModelSpec,
    bonds: &[BondIndex],
) -> Result<f64, LatticeError> {
    let m = bonds.len();
    if m > MAX_CUMULANT_ORDER {
        return Err(LatticeError::CumulantOrderTooLarge(m, MAX_CUMULANT_ORDER));
    }
    let moments = exact_energy_moments(spec, bonds)?;
    Ok(cumulant_from_subset_moments(m, &moments))
}

/// Moments-to-cumulants over set partitions; `moments[s]` is the moment of
/// the subset with bitmask s.
pub fn cumulant_from_subset_moments(m: usize, moments: &[f64]) -> f64 {
    let mut acc = 0.0;
    for partition in crate::grassmann::set_partitions(m) {
        let nb = partition.len();
        let mut weight = 1.0f64;
        for k in 1..nb {
            weight *= -(k as f64);
        }
        let mut prod = weight;
        for block in &partition {
            let mut mask = 0usize;
            for &i in block {
                mask |= 1 << i;
            }
            prod *= moments[mask];
        }
        acc += prod;
    }
    acc
}

/// Metropolis single-flip acceptance probability for flipping site `idx`.
pub fn metropolis_acceptance(spec: &ModelSpec, cfg: SpinConfiguration, idx: usize) -> f64 {
    let flipped = SpinConfiguration(cfg.0 ^ (1u64 << idx));
    let de = hamiltonian(spec, flipped) - hamiltonian(spec, cfg);
    (-spec.beta * de).exp().min(1.0)
}

// ---------------------------------------------------------------------------
// Monte Carlo
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McAlgorithm {
    Wolff,
    Metropolis,
}

#[derive(Debug, Clone)]
pub struct McParams {
    pub sweeps: usize,
    pub thermalization: usize,
    pub seed: u64,
    pub algorithm: McAlgorithm,
    /// Number of jackknife bins.
    pub bins: usize,
}

impl Default for McParams {
    fn default() -> Self {
        McParams {
            sweeps: 20_000,
            thermalization: 2_000,
            seed: 1,
            algorithm: McAlgorithm::Wolff,
            bins: 32,
        }
    }
}

#[derive(Debug, Clone)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub sweeps: usize,
    /// Set when Wolff was requested but the couplings force Metropolis.
    pub fell_back_to_metropolis: bool,
}

struct McState<'a> {
    spec: &'a ModelSpec,
    spins: Vec<i8>,
    nn: Vec<[usize; 4]>,
    pairs_by_site: Vec<Vec<(usize, f64)>>,
    bond_prob: f64,
}

impl<'a> McState<'a> {
    fn new(spec: &'a ModelSpec) -> Self {
        let n = spec.sites();
        let m = spec.m as i32;
        let mut nn = Vec::with_capacity(n);
        for idx in 0..n {
            let (x, y) = spec.site_at(idx);
            nn.push([
                spec.site_index(((x + 1).rem_euclid(m), y)),
                spec.site_index(((x - 1).rem_euclid(m), y)),
                spec.site_index((x, (y + 1).rem_euclid(m))),
                spec.site_index((x, (y - 1).rem_euclid(m))),
            ]);
        }
        let mut pairs_by_site = vec![Vec::new(); n];
        let (pairs, _) = spec.interaction_pairs();
        for p in &pairs {
            let xi = spec.site_index(p.x);
            let yi = spec.site_index(p.y);
            pairs_by_site[xi].push((yi, p.v));
            pairs_by_site[yi].push((xi, p.v));
        }
        McState {
            spec,
            spins: vec![1i8; n],
            nn,
            pairs_by_site,
            bond_prob: 1.0 - (-2.0 * spec.beta * spec.j).exp(),
        }
    }

    fn metropolis_sweep(&mut self, rng: &mut CounterRng) {
        let n = self.spec.sites();
        for _ in 0..n {
            let idx = rng.next_below(n as u64) as usize;
            let s = self.spins[idx] as f64;
            let mut field = 0.0;
            for &nb in &self.nn[idx] {
                field += self.spec.j * self.spins[nb] as f64;
            }
            for &(nb, v) in &self.pairs_by_site[idx] {
                field += self.spec.lambda * v * self.spins[nb] as f64;
            }
            let de = 2.0 * s * field;
            if de <= 0.0 || rng.next_f64() < (-self.spec.beta * de).exp() {
                self.spins[idx] = -self.spins[idx];
            }
        }
    }

    fn wolff_step(&mut self, rng: &mut CounterRng, stack: &mut Vec<usize>) {
        let n = self.spec.sites();
        let seed = rng.next_below(n as u64) as usize;
        let target = self.spins[seed];
        self.spins[seed] = -target;
        stack.clear();
        stack.push(seed);
        while let Some(site) = stack.pop() {
            for &nb in &self.nn[site] {
                if self.spins[nb] == target && rng.next_f64() < self.bond_prob {
                    self.spins[nb] = -target;
                    stack.push(nb);
                }
            }
        }
    }
}

/// Connected-correlation estimate for a list of distinct bonds via Wolff
/// clusters (lambda = 0) or Metropolis (lambda != 0), with jackknife error
/// bars. Deterministic given the seed: the RNG stream for sweep `s` is keyed
/// by (seed, chain, s).
pub fn mc_estimate_energy_correlation(
    spec: &ModelSpec,
    bonds: &[BondIndex],
    params: &McParams,
) -> Result<McEstimate, LatticeError> {
    if spec.m > 128 {
        return Err(LatticeError::BadMcParams(format!("M = {} exceeds 128", spec.m)));
    }
    if params.sweeps < 1_000 {
        return Err(LatticeError::BadMcParams("need at least 1000 sweeps".into()));
    }
    for (i, b) in bonds.iter().enumerate() {
        if bonds[i + 1..].contains(b) {
            return Err(LatticeError::RepeatedBond(*b));
        }
    }
    let m = bonds.len();
    if m > MAX_CUMULANT_ORDER {
        return Err(LatticeError::CumulantOrderTooLarge(m, MAX_CUMULANT_ORDER));
    }
    // Wolff requires a pure ferromagnetic nearest-neighbor model.
    let mut algorithm = params.algorithm;
    let mut fell_back = false;
    if algorithm == McAlgorithm::Wolff && (spec.lambda != 0.0 && !spec.v.is_empty()) {
        algorithm = McAlgorithm::Metropolis;
        fell_back = true;
    }

    let bond_sites: Vec<(usize, usize)> = bonds.iter().map(|&b| spec.bond_sites(b)).collect();
    let nsub = 1usize << m;
    let mut state = McState::new(spec);
    let base = CounterRng::new(params.seed, 0);
    let mut stack = Vec::new();

    for sweep in 0..params.thermalization {
        let mut rng = base.substream(sweep as u64);
        match algorithm {
            McAlgorithm::Wolff => {
                for _ in 0..4 {
                    state.wolff_step(&mut rng, &mut stack);
                }
            }
            McAlgorithm::Metropolis => state.metropolis_sweep(&mut rng),
        }
    }

    let bins = params.bins.max(4);
    let per_bin = params.sweeps / bins;
    let used_sweeps = per_bin * bins;
    let mut bin_moments = vec![vec![0.0f64; nsub]; bins];
    for bin in 0..bins {
        let mut acc = vec![Kahan::default(); nsub];
        for s in 0..per_bin {
            let sweep = params.thermalization + bin * per_bin + s;
            let mut rng = base.substream(sweep as u64);
            match algorithm {
                McAlgorithm::Wolff => {
                    for _ in 0..4 {
                        state.wolff_step(&mut rng, &mut stack);
                    }
                }
                McAlgorithm::Metropolis => state.metropolis_sweep(&mut rng),
            }
            for sub in 0..nsub {
                let mut prod = 1.0;
                let mut ss = sub;
                while ss != 0 {
                    let i = ss.trailing_zeros() as usize;
                    let (x, y) = bond_sites[i];
                    prod *= (state.spins[x] * state.spins[y]) as f64 / spec.a;
                    ss &= ss - 1;
                }
                acc[sub].add(prod);
            }
        }
        for (b, k) in bin_moments[bin].iter_mut().zip(acc) {
            *b = k.value() / per_bin as f64;
        }
    }

    // plug-in cumulant on full data, jackknife over bins for the error
    let full: Vec<f64> = (0..nsub)
        .map(|s| bin_moments.iter().map(|b| b[s]).sum::<f64>() / bins as f64)
        .collect();
    let estimate = cumulant_from_subset_moments(m, &full);
    let mut jack = Vec::with_capacity(bins);
    for drop in 0..bins {
        let reduced: Vec<f64> = (0..nsub)
            .map(|s| {
                bin_moments
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != drop)
                    .map(|(_, b)| b[s])
                    .sum::<f64>()
                    / (bins - 1) as f64
            })
            .collect();
        jack.push(cumulant_from_subset_moments(m, &reduced));
    }
    let jmean = jack.iter().sum::<f64>() / bins as f64;
    let var = jack.iter().map(|v| (v - jmean).powi(2)).sum::<f64>() * (bins - 1) as f64
        / bins as f64;
    Ok(McEstimate {
        estimate,
        std_error: var.sqrt(),
        sweeps: used_sweeps,
        fell_back_to_metropolis: fell_back,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_nn(m: usize, beta: f64) -> ModelSpec {
        ModelSpec::new(1.0, m, 1.0, beta, 0.0, VTable::empty()).unwrap()
    }

    #[test]
    fn hamiltonian_2x2_all_up_and_checkerboard() {
        let spec = spec_nn(2, 0.3);
        // all spins up: 2 M^2 = 8 bonds, all satisfied
        assert_eq!(hamiltonian(&spec, SpinConfiguration(0b1111)), -8.0);
        // checkerboard on 2x2: sites (0,0),(1,1) up -> all bonds violated
        let cb = SpinConfiguration(0b1001);
        assert_eq!(hamiltonian(&spec, cb), 8.0);
    }

    #[test]
    fn hamiltonian_matches_independent_double_loop() {
        // independent re-implementation of the double sum, 3x3 with diagonal v
        let spec = ModelSpec::new(1.0, 3, 1.0, 0.37, 0.1, VTable::diagonal()).unwrap();
        let cfg = SpinConfiguration(0b101_110_010);
        let mut e = 0.0;
        let m = 3i32;
        for ix in 0..m {
            for iy in 0..m {
                let s = cfg.spin(spec.site_index((ix, iy)));
                for (dx, dy) in [(1, 0), (0, 1)] {
                    e -= spec.j * s * cfg.spin(spec.site_index((ix + dx, iy + dy)));
                }
            }
        }
        // unordered pair double loop: half of the ordered sum
        let mut epair = 0.0;
        for ix in 0..m {
            for iy in 0..m {
                let s = cfg.spin(spec.site_index((ix, iy)));
                for jx in 0..m {
                    for jy in 0..m {
                        if (ix, iy) == (jx, jy) {
                            continue;
                        }
                        let d = spec.min_image((jx - ix, jy - iy));
                        let v = spec.v.get(d);
                        if v != 0.0 {
                            epair -= 0.5 * spec.lambda * v * s * cfg.spin(spec.site_index((jx, jy)));
                        }
                    }
                }
            }
        }
        e += epair;
        let got = hamiltonian(&spec, cfg);
        assert!((got - e).abs() < 1e-12, "{got} vs {e}");
    }

    #[test]
    fn partition_function_2x2_closed_form() {
        // 2x2, lambda = 0: Z = 2 e^{8K} + 12 + 2 e^{-8K}, K = beta J
        for &beta in &[0.1, 0.4406867935097715, 0.7] {
            let spec = spec_nn(2, beta);
            let z = exact_partition_function(&spec).unwrap();
            let k = beta;
            let expect = 2.0 * (8.0 * k).exp() + 12.0 + 2.0 * (-8.0 * k).exp();
            assert!((z - expect).abs() / expect < 1e-13);
        }
    }

    #[test]
    fn partition_function_infinite_temperature() {
        let spec = spec_nn(3, 0.0);
        let z = exact_partition_function(&spec).unwrap();
        assert_eq!(z, 512.0); // 2^(M^2)
        let too_big = spec_nn(6, 0.0);
        assert!(matches!(
            exact_partition_function(&ModelSpec::new(1.0, 6, 1.0, 0.0, 0.0, VTable::empty()).unwrap()),
            Err(LatticeError::TooLargeForEnumeration(6, _))
        ));
        let _ = too_big;
    }

    #[test]
    fn partition_function_3x3_kahan_reference() {
        // 512-configuration enumeration with explicit Kahan summation as an
        // independently coded accumulator
        let spec = ModelSpec::new(1.0, 3, 1.0, 0.41, 0.05, VTable::diagonal()).unwrap();
        let z = exact_partition_function(&spec).unwrap();
        let mut kah = Kahan::default();
        for cfg in 0..512u64 {
            kah.add((-spec.beta * hamiltonian(&spec, SpinConfiguration(cfg))).exp());
        }
        assert!((z - kah.value()).abs() / kah.value() < 1e-14);
    }

    #[test]
    fn beta_zero_correlations_vanish() {
        let spec = spec_nn(3, 0.0);
        let b1 = BondIndex::new((0, 0), 1);
        let b2 = BondIndex::new((1, 1), 2);
        let c = exact_truncated_energy_correlation(&spec, &[b1, b2]).unwrap();
        assert!(c.abs() < 1e-14);
    }

    #[test]
    fn translation_covariance_exact() {
        let spec = ModelSpec::new(1.0, 4, 1.0, 0.35, 0.0, VTable::empty()).unwrap();
        let b1 = BondIndex::new((0, 0), 1);
        let b2 = BondIndex::new((1, 2), 2);
        let c0 = exact_truncated_energy_correlation(&spec, &[b1, b2]).unwrap();
        let shift = (3, 1);
        let b1s = BondIndex::new((b1.x.0 + shift.0, b1.x.1 + shift.1), 1);
        let b2s = BondIndex::new((b2.x.0 + shift.0, b2.x.1 + shift.1), 2);
        let cs = exact_truncated_energy_correlation(&spec, &[b1s, b2s]).unwrap();
        assert!((c0 - cs).abs() < 1e-12);
    }

    #[test]
    fn repeated_bonds_rejected() {
        let spec = spec_nn(3, 0.3);
        let b = BondIndex::new((0, 0), 1);
        assert!(matches!(
            exact_truncated_energy_correlation(&spec, &[b, b]),
            Err(LatticeError::RepeatedBond(_))
        ));
    }

    #[test]
    fn odd_spin_correlations_vanish_at_zero_field() {
        // spin-flip symmetry: <sigma sigma sigma> = 0 exactly
        let spec = ModelSpec::new(1.0, 3, 1.0, 0.3, 0.07, VTable::diagonal()).unwrap();
        let mut num = Kahan::default();
        for cfg in 0..512u64 {
            let s = SpinConfiguration(cfg);
            let w = (-spec.beta * hamiltonian(&spec, s)).exp();
            num.add(w * s.spin(0) * s.spin(4) * s.spin(7));
        }
        assert!(num.value().abs() < 1e-10);
    }

    #[test]
    fn detailed_balance_metropolis_2x2() {
        let spec = ModelSpec::new(1.0, 2, 1.0, 0.55, 0.0, VTable::empty()).unwrap();
        for cfg in 0..16u64 {
            let s = SpinConfiguration(cfg);
            let pi_s = (-spec.beta * hamiltonian(&spec, s)).exp();
            for idx in 0..4 {
                let sp = SpinConfiguration(cfg ^ (1 << idx));
                let pi_sp = (-spec.beta * hamiltonian(&spec, sp)).exp();
                // proposal is symmetric (uniform site choice)
                let lhs = pi_s * metropolis_acceptance(&spec, s, idx);
                let rhs = pi_sp * metropolis_acceptance(&spec, sp, idx);
                assert!(
                    (lhs - rhs).abs() <= 1e-12 * lhs.max(rhs),
                    "detailed balance violated at cfg {cfg} site {idx}"
                );
            }
        }
    }

    #[test]
    fn mc_beta_zero_consistent_with_zero() {
        let spec = spec_nn(8, 0.0);
        let b1 = BondIndex::new((0, 0), 1);
        let b2 = BondIndex::new((3, 3), 2);
        let params = McParams { sweeps: 4_000, thermalization: 200, seed: 9, ..Default::default() };
        let est = mc_estimate_energy_correlation(&spec, &[b1, b2], &params).unwrap();
        assert!(est.estimate.abs() <= 3.0 * est.std_error.max(1e-4));
    }

    #[test]
    fn mc_deterministic_given_seed() {
        let spec = spec_nn(8, 0.35);
        let b1 = BondIndex::new((0, 0), 1);
        let b2 = BondIndex::new((2, 1), 1);
        let params = McParams { sweeps: 2_000, thermalization: 100, seed: 4, ..Default::default() };
        let e1 = mc_estimate_energy_correlation(&spec, &[b1, b2], &params).unwrap();
        let e2 = mc_estimate_energy_correlation(&spec, &[b1, b2], &params).unwrap();
        assert_eq!(e1.estimate.to_bits(), e2.estimate.to_bits());
        assert_eq!(e1.std_error.to_bits(), e2.std_error.to_bits());
    }

    #[test]
    fn mc_wolff_falls_back_for_interacting_model() {
        let spec = ModelSpec::new(1.0, 4, 1.0, 0.3, 0.05, VTable::diagonal()).unwrap();
        let b1 = BondIndex::new((0, 0), 1);
        let b2 = BondIndex::new((2, 2), 1);
        let params = McParams { sweeps: 1_000, thermalization: 100, seed: 2, ..Default::default() };
        let est = mc_estimate_energy_correlation(&spec, &[b1, b2], &params).unwrap();
        assert!(est.fell_back_to_metropolis);
    }

    #[test]
    fn mc_matches_enumeration_on_small_torus() {
        // 3x3 at moderate beta: Metropolis estimate vs exact cumulant
        let spec = ModelSpec::new(1.0, 3, 1.0, 0.3, 0.0, VTable::empty()).unwrap();
        let b1 = BondIndex::new((0, 0), 1);
        let b2 = BondIndex::new((1, 1), 2);
        let exact = exact_truncated_energy_correlation(&spec, &[b1, b2]).unwrap();
        let params = McParams {
            sweeps: 60_000,
            thermalization: 2_000,
            seed: 11,
            algorithm: McAlgorithm::Metropolis,
            bins: 40,
        };
        let est = mc_estimate_energy_correlation(&spec, &[b1, b2], &params).unwrap();
        assert!(
            (est.estimate - exact).abs() <= 4.0 * est.std_error,
            "exact {exact}, mc {} +- {}",
            est.estimate,
            est.std_error
        );
    }

    #[test]
    fn vtable_validation() {
        assert!(VTable::new(vec![((1, 0), 1.0)]).is_err());
        assert!(VTable::new(vec![((1, 1), 1.0)]).is_err()); // not D4-complete
        assert!(VTable::new(vec![
            ((1, 1), 0.4),
            ((1, -1), 0.4),
            ((-1, 1), 0.4),
            ((-1, -1), 0.4),
        ])
        .is_err()); // wrong normalization
        assert!(VTable::diagonal().get((1, 1)) == 0.5);
        assert!(VTable::new(vec![((4, 0), 1.0)]).is_err()); // range
    }

    #[test]
    fn degenerate_torus_pairs_counted_once() {
        // M = 2 with diagonal v: only two distinct unordered pairs survive
        let spec = ModelSpec::new(1.0, 2, 1.0, 0.3, 0.1, VTable::diagonal()).unwrap();
        let (pairs, wrapped) = spec.interaction_pairs();
        assert!(wrapped);
        assert_eq!(pairs.len(), 2);
    }
}
