//! Truncated occupation-number bases and second-quantized operators over them.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlations::CorrelationProfile;
use crate::error::{invalid, Error, Result};
use crate::model::{LatticeVector, ModeSet, RadialPotential, TWO_PI};
use crate::sparse::SparseOperator;

pub const DEFAULT_DIMENSION_LIMIT: usize = 200_000;

/// Which occupation vectors belong to a basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Truncation {
    /// Exactly `n` particles over a mode set containing p = 0, at most
    /// `max_excited` of them outside the zero mode.
    Total { n: u32, max_excited: u32 },
    /// Excitation space over nonzero modes with at most `max` particles.
    Excitations { max: u32 },
}

impl Truncation {
    pub fn total(n: u32) -> Self {
        Truncation::Total { n, max_excited: n }
    }

    pub fn excitation_cap(&self) -> u32 {
        match *self {
            Truncation::Total { n, max_excited } => n.min(max_excited),
            Truncation::Excitations { max } => max,
        }
    }
}

/// Occupation counts with cached totals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OccupationState {
    pub counts: Vec<u16>,
    pub particles: u64,
    pub momentum: [i64; 3],
    /// Σ |n_p|² n_p; the kinetic energy is (2π)² times this.
    pub kinetic_n2: u64,
}

impl OccupationState {
    pub fn new(modes: &ModeSet, counts: Vec<u16>) -> Result<Self> {
        if counts.len() != modes.len() {
            return Err(invalid(format!("{} occupation counts for {} modes", counts.len(), modes.len())));
        }
        let mut particles = 0u64;
        let mut momentum = [0i64; 3];
        let mut kinetic_n2 = 0u64;
        for (m, &c) in modes.iter().zip(&counts) {
            let c64 = c as u64;
            particles += c64;
            for (acc, x) in momentum.iter_mut().zip(m.0) {
                *acc += x as i64 * c as i64;
            }
            kinetic_n2 += m.norm2() * c64;
        }
        Ok(Self { counts, particles, momentum, kinetic_n2 })
    }

    pub fn kinetic(&self) -> f64 {
        TWO_PI * TWO_PI * self.kinetic_n2 as f64
    }

    /// Recomputes the totals from the counts.
    pub fn is_consistent(&self, modes: &ModeSet) -> bool {
        OccupationState::new(modes, self.counts.clone()).is_ok_and(|s| s == *self)
    }
}

/// Ordered list of occupation vectors under a truncation rule and optional momentum sector.
#[derive(Clone, Debug)]
pub struct FockBasis {
    modes: ModeSet,
    rule: Truncation,
    sector: Option<LatticeVector>,
    width: usize,
    zero_slot: Option<usize>,
    states: Vec<u16>,
}

fn binomial_sat(n: u128, k: u128) -> u128 {
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Builds a basis with the default dimension limit.
pub fn build_basis(modes: &ModeSet, rule: Truncation, sector: Option<LatticeVector>) -> Result<FockBasis> {
    build_basis_with_limit(modes, rule, sector, DEFAULT_DIMENSION_LIMIT)
}

pub fn build_basis_with_limit(
    modes: &ModeSet,
    rule: Truncation,
    sector: Option<LatticeVector>,
    limit: usize,
) -> Result<FockBasis> {
    let zero_slot = modes.zero_index();
    match rule {
        Truncation::Total { n, .. } => {
            if zero_slot.is_none() {
                return Err(invalid("a fixed-particle-number basis needs the zero mode"));
            }
            if n > u16::MAX as u32 {
                return Err(invalid(format!("particle number {n} exceeds the supported maximum {}", u16::MAX)));
            }
        }
        Truncation::Excitations { max } => {
            if zero_slot.is_some() {
                return Err(invalid("an excitation basis must not contain the zero mode"));
            }
            if max > u16::MAX as u32 {
                return Err(invalid(format!("excitation cap {max} exceeds the supported maximum {}", u16::MAX)));
            }
        }
    }
    let cap = rule.excitation_cap();
    let free: Vec<usize> = (0..modes.len()).filter(|&i| Some(i) != zero_slot).collect();
    let unrestricted = binomial_sat(free.len() as u128 + cap as u128, cap as u128);
    let budget = if sector.is_some() { limit.saturating_mul(64) } else { limit };
    if unrestricted > budget as u128 {
        return Err(Error::DimensionLimit { count: unrestricted, limit });
    }

    let width = modes.len();
    let vecs: Vec<[i64; 3]> = modes.iter().map(|m| m.0.map(|x| x as i64)).collect();
    let target = sector.map(|s| s.0.map(|x| x as i64));
    let mut states: Vec<Vec<u16>> = Vec::new();
    let mut cur = vec![0u16; width];
    fn rec(
        k: usize,
        left: u32,
        mom: [i64; 3],
        free: &[usize],
        vecs: &[[i64; 3]],
        cur: &mut Vec<u16>,
        out: &mut Vec<Vec<u16>>,
        finish: &dyn Fn(&mut Vec<u16>, u32, [i64; 3]) -> bool,
    ) {
        if k == free.len() {
            if finish(cur, left, mom) {
                out.push(cur.clone());
            }
            return;
        }
        let slot = free[k];
        for c in 0..=left {
            cur[slot] = c as u16;
            let v = vecs[slot];
            let m = [mom[0] + v[0] * c as i64, mom[1] + v[1] * c as i64, mom[2] + v[2] * c as i64];
            rec(k + 1, left - c, m, free, vecs, cur, out, finish);
        }
        cur[slot] = 0;
    }
    let finish = |cur: &mut Vec<u16>, left: u32, mom: [i64; 3]| -> bool {
        if let Some(t) = target {
            if mom != t {
                return false;
            }
        }
        if let (Truncation::Total { n, .. }, Some(z)) = (rule, zero_slot) {
            let used = cap - left;
            cur[z] = (n - used) as u16;
        }
        true
    };
    rec(0, cap, [0; 3], &free, &vecs, &mut cur, &mut states, &finish);
    if states.len() > limit {
        return Err(Error::DimensionLimit { count: states.len() as u128, limit });
    }
    states.sort();
    let flat = states.concat();
    Ok(FockBasis { modes: modes.clone(), rule, sector, width, zero_slot, states: flat })
}

impl FockBasis {
    pub fn modes(&self) -> &ModeSet {
        &self.modes
    }

    pub fn rule(&self) -> Truncation {
        self.rule
    }

    pub fn sector(&self) -> Option<LatticeVector> {
        self.sector
    }

    pub fn dim(&self) -> usize {
        if self.width == 0 {
            // Only the empty configuration.
            1
        } else {
            self.states.len() / self.width
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn zero_slot(&self) -> Option<usize> {
        self.zero_slot
    }

    pub fn is_excitation_basis(&self) -> bool {
        matches!(self.rule, Truncation::Excitations { .. })
    }

    pub fn state(&self, i: usize) -> &[u16] {
        &self.states[i * self.width..(i + 1) * self.width]
    }

    pub fn occupation(&self, i: usize) -> OccupationState {
        OccupationState::new(&self.modes, self.state(i).to_vec()).expect("basis states match their modes")
    }

    pub fn index_of(&self, s: &[u16]) -> Option<usize> {
        if s.len() != self.width {
            return None;
        }
        if self.width == 0 {
            return Some(0);
        }
        let (mut lo, mut hi) = (0usize, self.dim());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.state(mid).cmp(s) {
                Ordering::Less => lo = mid + 1,
                Ordering::Greater => hi = mid,
                Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    /// Number of particles outside the zero mode.
    pub fn n_plus_of(&self, s: &[u16]) -> u32 {
        s.iter()
            .enumerate()
            .filter(|&(i, _)| Some(i) != self.zero_slot)
            .map(|(_, &c)| c as u32)
            .sum()
    }

    pub fn n_plus(&self, i: usize) -> u32 {
        self.n_plus_of(self.state(i))
    }

    /// Index of the vacuum Ω (excitation basis) or of φ₀^{⊗N} (fixed-N basis).
    pub fn condensate_index(&self) -> Option<usize> {
        let mut s = vec![0u16; self.width];
        if let (Truncation::Total { n, .. }, Some(z)) = (self.rule, self.zero_slot) {
            s[z] = n as u16;
        }
        self.index_of(&s)
    }

    pub fn states(&self) -> impl Iterator<Item = &[u16]> {
        (0..self.dim()).map(move |i| self.state(i))
    }
}

/// Coefficient vector over a basis.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub coeffs: Vec<f64>,
}

impl StateVector {
    pub fn zeros(dim: usize) -> Self {
        Self { coeffs: vec![0.0; dim] }
    }

    pub fn unit(dim: usize, i: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.coeffs[i] = 1.0;
        v
    }

    /// Ω or φ₀^{⊗N}, whichever the basis describes.
    pub fn condensate(basis: &FockBasis) -> Result<Self> {
        let i = basis.condensate_index().ok_or_else(|| invalid("basis does not contain the condensate state"))?;
        Ok(Self::unit(basis.dim(), i))
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            self.coeffs.iter_mut().for_each(|c| *c /= n);
        }
        self
    }

    pub fn dot(&self, other: &StateVector) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum()
    }
}

/// Functions of 𝒩₊ that appear under square roots.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Radical {
    /// (N − 𝒩₊)/N
    Condensate,
    /// (N − 1 − 𝒩₊)(N − 𝒩₊)/N²
    CondensatePair,
}

/// One factor of an operator string, indexed by mode slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    A(usize),
    Ad(usize),
    /// b = √((N−𝒩₊)/N) a
    B(usize),
    /// b* = a* √((N−𝒩₊)/N)
    Bd(usize),
    Root(Radical),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LadderKind {
    A,
    ADag,
    B,
    BDag,
}

/// Applies an operator string (leftmost factor acts last) to occupation counts in place.
/// Returns the accumulated factor, 0 when the state is annihilated.
fn apply_ops(s: &mut [u16], n_plus: &mut i64, zero: Option<usize>, n: f64, ops: &[Op]) -> f64 {
    let mut f = 1.0;
    let root = |rad: Radical, np: i64| -> f64 {
        let np = np as f64;
        let x = match rad {
            Radical::Condensate => (n - np) / n,
            Radical::CondensatePair => (n - 1.0 - np) * (n - np) / (n * n),
        };
        if x > 0.0 {
            x.sqrt()
        } else {
            0.0
        }
    };
    let shift = |slot: usize| if Some(slot) == zero { 0 } else { 1 };
    for op in ops.iter().rev() {
        match *op {
            Op::A(m) => {
                let c = s[m];
                if c == 0 {
                    return 0.0;
                }
                f *= (c as f64).sqrt();
                s[m] = c - 1;
                *n_plus -= shift(m);
            }
            Op::Ad(m) => {
                let c = s[m];
                if c == u16::MAX {
                    return 0.0;
                }
                f *= (c as f64 + 1.0).sqrt();
                s[m] = c + 1;
                *n_plus += shift(m);
            }
            Op::B(m) => {
                let c = s[m];
                if c == 0 {
                    return 0.0;
                }
                f *= (c as f64).sqrt();
                s[m] = c - 1;
                *n_plus -= shift(m);
                f *= root(Radical::Condensate, *n_plus);
            }
            Op::Bd(m) => {
                f *= root(Radical::Condensate, *n_plus);
                let c = s[m];
                if c == u16::MAX {
                    return 0.0;
                }
                f *= (c as f64 + 1.0).sqrt();
                s[m] = c + 1;
                *n_plus += shift(m);
            }
            Op::Root(r) => f *= root(r, *n_plus),
        }
        if f == 0.0 {
            return 0.0;
        }
    }
    f
}

/// Applies one ladder operator to a basis state.
pub fn ladder_apply(
    basis: &FockBasis,
    p: LatticeVector,
    kind: LadderKind,
    s: &OccupationState,
    n: u64,
) -> Result<Option<(OccupationState, f64)>> {
    let slot = basis.modes().index_of(p).ok_or_else(|| invalid(format!("momentum {p} is not in the mode set")))?;
    if matches!(kind, LadderKind::B | LadderKind::BDag) && !basis.is_excitation_basis() {
        return Err(invalid("b and b* act on excitation bases only"));
    }
    let op = match kind {
        LadderKind::A => Op::A(slot),
        LadderKind::ADag => Op::Ad(slot),
        LadderKind::B => Op::B(slot),
        LadderKind::BDag => Op::Bd(slot),
    };
    let mut counts = s.counts.clone();
    let mut np = basis.n_plus_of(&counts) as i64;
    let f = apply_ops(&mut counts, &mut np, basis.zero_slot(), n as f64, &[op]);
    if f == 0.0 || basis.index_of(&counts).is_none() {
        return Ok(None);
    }
    Ok(Some((OccupationState::new(basis.modes(), counts)?, f)))
}

/// Per-thread helper handed to operator builders.
pub struct Emitter<'a> {
    basis: &'a FockBasis,
    n: f64,
    scratch: Vec<u16>,
    out: Vec<(usize, f64)>,
}

impl<'a> Emitter<'a> {
    /// Adds coeff · ops |s⟩ if the image lies in the basis.
    pub fn emit(&mut self, s: &[u16], n_plus: u32, ops: &[Op], coeff: f64) {
        if coeff == 0.0 {
            return;
        }
        self.scratch.clear();
        self.scratch.extend_from_slice(s);
        let mut np = n_plus as i64;
        let f = apply_ops(&mut self.scratch, &mut np, self.basis.zero_slot, self.n, ops);
        if f == 0.0 {
            return;
        }
        if let Some(i) = self.basis.index_of(&self.scratch) {
            self.out.push((i, coeff * f));
        }
    }

    pub fn diagonal(&mut self, col: usize, value: f64) {
        if value != 0.0 {
            self.out.push((col, value));
        }
    }
}

/// Assembles an operator column by column: `f(j, state_j, n₊, emitter)` emits O|s_j⟩.
pub fn assemble<F>(basis: &FockBasis, n: u64, label: &str, hermitian: bool, f: F) -> SparseOperator
where
    F: Fn(usize, &[u16], u32, &mut Emitter) + Sync,
{
    let dim = basis.dim();
    let cols: Vec<Vec<(usize, usize, f64)>> = (0..dim)
        .into_par_iter()
        .map(|j| {
            let s = basis.state(j);
            let mut e = Emitter { basis, n: n as f64, scratch: Vec::with_capacity(basis.width()), out: Vec::new() };
            f(j, s, basis.n_plus_of(s), &mut e);
            e.out.into_iter().map(|(i, v)| (i, j, v)).collect()
        })
        .collect();
    SparseOperator::from_triplets(label, dim, hermitian, cols.concat())
}

/// Σ coeff · (product of ops) as a matrix on the basis.
pub fn operator_from_strings(basis: &FockBasis, n: u64, label: &str, hermitian: bool, terms: &[(f64, Vec<Op>)]) -> SparseOperator {
    assemble(basis, n, label, hermitian, |_, s, np, e| {
        for (c, ops) in terms {
            e.emit(s, np, ops, *c);
        }
    })
}

/// Interaction data: κ V̂(r/N^β) with a per-shell cache.
#[derive(Clone, Debug)]
pub struct Interaction {
    pub potential: RadialPotential,
    pub kappa: f64,
    pub n: u64,
    pub beta: f64,
    table: Vec<f64>,
}

impl Interaction {
    /// Tabulates V̂(r/N^β) for every |r|² the mode set can produce as a difference or sum.
    pub fn new(potential: &RadialPotential, kappa: f64, n: u64, beta: f64, modes: &ModeSet) -> Result<Self> {
        if n == 0 {
            return Err(invalid("particle number must be positive"));
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(invalid(format!("beta must lie in [0, 1], got {beta}")));
        }
        let max = modes.iter().map(|m| m.norm2()).max().unwrap_or(0);
        let top = 4 * max;
        let scale = (n as f64).powf(beta);
        let table = (0..=top)
            .into_par_iter()
            .map(|n2| potential.fourier(TWO_PI * (n2 as f64).sqrt() / scale))
            .collect();
        Ok(Self { potential: potential.clone(), kappa, n, beta, table })
    }

    /// V̂(r/N^β) without the coupling.
    pub fn vhat(&self, r: LatticeVector) -> f64 {
        let n2 = r.norm2();
        match self.table.get(n2 as usize) {
            Some(&v) => v,
            None => self.potential.fourier(TWO_PI * (n2 as f64).sqrt() / (self.n as f64).powf(self.beta)),
        }
    }

    pub fn vhat0(&self) -> f64 {
        self.table[0]
    }
}

fn check_n(inter: &Interaction, basis: &FockBasis) -> Result<()> {
    match basis.rule() {
        Truncation::Total { n, .. } if n as u64 != inter.n => {
            Err(invalid(format!("basis holds {n} particles but the interaction is built for N = {}", inter.n)))
        }
        Truncation::Excitations { max } if max as u64 > inter.n => {
            Err(invalid(format!("excitation cap {max} exceeds N = {}", inter.n)))
        }
        _ => Ok(()),
    }
}

/// 𝒩₊ (counts outside the zero mode).
pub fn number_plus(basis: &FockBasis) -> SparseOperator {
    SparseOperator::diagonal("N+", (0..basis.dim()).map(|i| basis.n_plus(i) as f64).collect())
}

/// Σ p² a*_p a_p.
pub fn kinetic(basis: &FockBasis) -> SparseOperator {
    SparseOperator::diagonal("K", (0..basis.dim()).map(|i| basis.occupation(i).kinetic()).collect())
}

/// (κ/2N) Σ V̂(r/N^β) a*_{p+r} a*_q a_p a_{q+r} over all slots of the basis.
fn quartic(basis: &FockBasis, inter: &Interaction, label: &str) -> SparseOperator {
    let modes = basis.modes().modes().to_vec();
    let c = inter.kappa / (2.0 * inter.n as f64);
    assemble(basis, inter.n, label, true, |_, s, np, e| {
        if c == 0.0 {
            return;
        }
        let occ: Vec<usize> = (0..s.len()).filter(|&i| s[i] > 0).collect();
        for &i in &occ {
            for &j in &occ {
                if i == j && s[i] < 2 {
                    continue;
                }
                // a_p a_{q+r} with q+r = modes[i], p = modes[j].
                for (t, &pr) in modes.iter().enumerate() {
                    let r = pr - modes[j];
                    let q = modes[i] - r;
                    let Some(qs) = basis.modes().index_of(q) else { continue };
                    e.emit(s, np, &[Op::Ad(t), Op::Ad(qs), Op::A(j), Op::A(i)], c * inter.vhat(r));
                }
            }
        }
    })
}

/// H_N^β on a fixed-N basis.
pub fn build_hamiltonian_full(basis: &FockBasis, inter: &Interaction) -> Result<SparseOperator> {
    if !matches!(basis.rule(), Truncation::Total { .. }) {
        return Err(invalid("the full Hamiltonian needs a fixed-N basis with the zero mode"));
    }
    check_n(inter, basis)?;
    let k = kinetic(basis);
    let v = quartic(basis, inter, "V");
    Ok(SparseOperator::linear_combination("H_N", &[(1.0, &k), (1.0, &v)]))
}

/// ℒ_N and its parts on an excitation basis.
#[derive(Clone, Debug)]
pub struct ExcitationHamiltonian {
    pub l0: SparseOperator,
    pub l2: SparseOperator,
    pub l3: SparseOperator,
    pub l4: SparseOperator,
    pub total: SparseOperator,
}

fn require_excitation(basis: &FockBasis) -> Result<()> {
    if !basis.is_excitation_basis() {
        return Err(invalid("operator needs an excitation basis without the zero mode"));
    }
    Ok(())
}

pub fn build_excitation_hamiltonian(basis: &FockBasis, inter: &Interaction) -> Result<ExcitationHamiltonian> {
    require_excitation(basis)?;
    check_n(inter, basis)?;
    let nf = inter.n as f64;
    let kv0 = inter.kappa * inter.vhat0();
    let modes = basis.modes().modes().to_vec();
    let neg: Vec<usize> = modes.iter().map(|&m| basis.modes().index_of(-m).expect("negation closed")).collect();

    let l0 = SparseOperator::diagonal(
        "L0",
        (0..basis.dim())
            .map(|i| {
                let np = basis.n_plus(i) as f64;
                (nf - 1.0) / (2.0 * nf) * kv0 * (nf - np) + kv0 / (2.0 * nf) * np * (nf - np)
            })
            .collect(),
    );

    let kappa = inter.kappa;
    let vh: Vec<f64> = modes.iter().map(|&m| inter.vhat(m)).collect();
    let l2 = assemble(basis, inter.n, "L2", true, |j, s, np, e| {
        let mut d = 0.0;
        for (k, &m) in modes.iter().enumerate() {
            d += (m.p2() + kappa * vh[k] * (nf - np as f64) / nf) * s[k] as f64;
        }
        e.diagonal(j, d);
        for k in 0..modes.len() {
            let c = 0.5 * kappa * vh[k];
            e.emit(s, np, &[Op::Ad(k), Op::Ad(neg[k]), Op::Root(Radical::CondensatePair)], c);
            e.emit(s, np, &[Op::Root(Radical::CondensatePair), Op::A(neg[k]), Op::A(k)], c);
        }
    });

    let c3 = kappa / nf.sqrt();
    let l3 = assemble(basis, inter.n, "L3", true, |_, s, np, e| {
        for (pi, &p) in modes.iter().enumerate() {
            let c = c3 * vh[pi];
            for (qi, &q) in modes.iter().enumerate() {
                let Some(pq) = basis.modes().index_of(p + q) else { continue };
                e.emit(s, np, &[Op::Ad(pq), Op::Ad(neg[pi]), Op::A(qi), Op::Root(Radical::Condensate)], c);
                e.emit(s, np, &[Op::Root(Radical::Condensate), Op::Ad(qi), Op::A(neg[pi]), Op::A(pq)], c);
            }
        }
    });

    let l4 = quartic(basis, inter, "L4");
    let total = SparseOperator::linear_combination("L_N", &[(1.0, &l0), (1.0, &l2), (1.0, &l3), (1.0, &l4)]);
    Ok(ExcitationHamiltonian { l0, l2, l3, l4, total })
}

/// U_N as a permutation between a fixed-N basis and an excitation basis.
#[derive(Clone, Debug)]
pub struct UnitaryMap {
    /// full index → excitation index
    pub forward: Vec<usize>,
}

pub fn build_u_n(full: &FockBasis, exc: &FockBasis) -> Result<UnitaryMap> {
    let (n, cap) = match full.rule() {
        Truncation::Total { n, max_excited } => (n, max_excited.min(n)),
        _ => return Err(invalid("U_N maps from a fixed-N basis")),
    };
    require_excitation(exc)?;
    if full.modes().without_zero().modes() != exc.modes().modes() {
        return Err(invalid("U_N needs the same nonzero modes on both sides"));
    }
    if exc.rule().excitation_cap() != cap || full.sector() != exc.sector() {
        return Err(invalid(format!(
            "incompatible truncations: {} excitations at N = {n} versus cap {}",
            cap,
            exc.rule().excitation_cap()
        )));
    }
    let z = full.zero_slot().expect("fixed-N bases carry the zero mode");
    let mut forward = Vec::with_capacity(full.dim());
    let mut seen = vec![false; exc.dim()];
    for s in full.states() {
        let t: Vec<u16> = s.iter().enumerate().filter(|&(i, _)| i != z).map(|(_, &c)| c).collect();
        let j = exc.index_of(&t).ok_or_else(|| invalid("state without an excitation image"))?;
        seen[j] = true;
        forward.push(j);
    }
    if full.dim() != exc.dim() || seen.iter().any(|s| !s) {
        return Err(invalid("U_N is not a bijection between these bases"));
    }
    Ok(UnitaryMap { forward })
}

impl UnitaryMap {
    pub fn dim(&self) -> usize {
        self.forward.len()
    }

    /// U ψ
    pub fn apply(&self, psi: &StateVector) -> StateVector {
        let mut out = StateVector::zeros(self.dim());
        for (i, &j) in self.forward.iter().enumerate() {
            out.coeffs[j] = psi.coeffs[i];
        }
        out
    }

    /// U A U*
    pub fn conjugate(&self, a: &SparseOperator) -> SparseOperator {
        let t = a.triplets().into_iter().map(|(r, c, v)| (self.forward[r], self.forward[c], v)).collect();
        SparseOperator::from_triplets(format!("U {} U*", a.label), a.dim(), a.hermitian, t)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.dim(), self.dim());
        for (i, &j) in self.forward.iter().enumerate() {
            m[(j, i)] = 1.0;
        }
        m
    }
}

/// Named observables on an excitation basis.
#[derive(Clone, Debug)]
pub struct Observables {
    pub number: SparseOperator,
    pub kinetic: SparseOperator,
    pub potential: SparseOperator,
    pub cubic: SparseOperator,
    pub h: SparseOperator,
}

pub fn build_observables(basis: &FockBasis, profile: &CorrelationProfile, inter: &Interaction) -> Result<Observables> {
    require_excitation(basis)?;
    check_n(inter, basis)?;
    let number = number_plus(basis);
    let kin = kinetic(basis);
    let potential = quartic(basis, inter, "V_N");
    let cubic = cubic_operator(basis, profile, inter);
    let h = SparseOperator::linear_combination("H_N", &[(1.0, &kin), (1.0, &potential)]);
    Ok(Observables { number, kinetic: kin, potential, cubic, h })
}

/// 𝒞_N = κ/√N Σ V̂(p) [b*_{p+q} b*_{-p} (γ_q b_q + σ_q b*_{-q}) + h.c.].
pub fn cubic_operator(basis: &FockBasis, profile: &CorrelationProfile, inter: &Interaction) -> SparseOperator {
    let modes = basis.modes().modes().to_vec();
    let neg: Vec<usize> = modes.iter().map(|&m| basis.modes().index_of(-m).expect("negation closed")).collect();
    let c0 = inter.kappa / (inter.n as f64).sqrt();
    let vh: Vec<f64> = modes.iter().map(|&m| inter.vhat(m)).collect();
    let sg: Vec<(f64, f64)> = modes.iter().map(|&m| (profile.sigma(m), profile.gamma(m))).collect();
    assemble(basis, inter.n, "C_N", true, |_, s, np, e| {
        for (pi, &p) in modes.iter().enumerate() {
            for (qi, &q) in modes.iter().enumerate() {
                let Some(pq) = basis.modes().index_of(p + q) else { continue };
                let (sq, gq) = sg[qi];
                let c = c0 * vh[pi];
                e.emit(s, np, &[Op::Bd(pq), Op::Bd(neg[pi]), Op::B(qi)], c * gq);
                e.emit(s, np, &[Op::Bd(pq), Op::Bd(neg[pi]), Op::Bd(neg[qi])], c * sq);
                e.emit(s, np, &[Op::Bd(qi), Op::B(neg[pi]), Op::B(pq)], c * gq);
                e.emit(s, np, &[Op::B(neg[qi]), Op::B(neg[pi]), Op::B(pq)], c * sq);
            }
        }
    })
}

/// Block label of every basis state by total momentum.
pub fn momentum_sectors(basis: &FockBasis) -> Vec<[i64; 3]> {
    (0..basis.dim()).map(|i| basis.occupation(i).momentum).collect()
}
