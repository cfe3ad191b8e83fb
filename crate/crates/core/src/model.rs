//! Momentum lattice, mode sets and radial potentials.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::quad::{integrate_adaptive, sinc};

pub const TWO_PI: f64 = 2.0 * PI;

/// A point n of ℤ³, standing for the momentum p = 2πn of the unit torus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeVector(pub [i32; 3]);

impl LatticeVector {
    pub const ZERO: Self = Self([0, 0, 0]);

    pub fn new(x: i32, y: i32, z: i32) -> Self {
        Self([x, y, z])
    }

    pub fn n(&self) -> [i32; 3] {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0, 0, 0]
    }

    /// |n|².
    pub fn norm2(&self) -> u64 {
        self.0.iter().map(|&c| (c as i64 * c as i64) as u64).sum()
    }

    pub fn sup_norm(&self) -> u32 {
        self.0.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }

    /// |p|² = 4π²|n|².
    pub fn p2(&self) -> f64 {
        TWO_PI * TWO_PI * self.norm2() as f64
    }

    /// |p|.
    pub fn p_abs(&self) -> f64 {
        TWO_PI * (self.norm2() as f64).sqrt()
    }

    pub fn p(&self) -> [f64; 3] {
        self.0.map(|c| TWO_PI * c as f64)
    }
}

impl std::ops::Neg for LatticeVector {
    type Output = Self;
    fn neg(self) -> Self {
        Self(self.0.map(|c| -c))
    }
}

impl std::ops::Add for LatticeVector {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl std::ops::Sub for LatticeVector {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl fmt::Display for LatticeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.0[0], self.0[1], self.0[2])
    }
}

/// How a mode set is cut off.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Cutoff {
    /// max_i |n_i| ≤ radius.
    SupNorm { radius: u32 },
    /// |p| ≤ radius (physical momentum units).
    Euclidean { radius: f64 },
    /// Explicit list supplied by the caller.
    Explicit,
}

impl Cutoff {
    /// Radius of the largest origin-centred ball of momenta fully inside the cutoff.
    pub fn complete_ball(&self) -> f64 {
        match *self {
            Cutoff::SupNorm { radius } => TWO_PI * radius as f64,
            Cutoff::Euclidean { radius } => radius,
            Cutoff::Explicit => 0.0,
        }
    }
}

/// Ordered, negation-closed set of lattice momenta.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeSet {
    modes: Vec<LatticeVector>,
    cutoff: Cutoff,
    include_zero: bool,
    index: HashMap<LatticeVector, usize>,
}

impl ModeSet {
    fn from_sorted(mut modes: Vec<LatticeVector>, cutoff: Cutoff, include_zero: bool) -> Self {
        modes.sort();
        modes.dedup();
        let index = modes.iter().enumerate().map(|(i, &m)| (m, i)).collect();
        Self { modes, cutoff, include_zero, index }
    }

    /// Builds a set from an explicit list; fails unless it is closed under negation.
    pub fn from_vectors(modes: Vec<LatticeVector>, include_zero: bool) -> Result<Self> {
        let mut modes: Vec<_> = modes.into_iter().filter(|m| !m.is_zero()).collect();
        if include_zero {
            modes.push(LatticeVector::ZERO);
        }
        let set = Self::from_sorted(modes, Cutoff::Explicit, include_zero);
        for m in &set.modes {
            if !set.contains(-*m) {
                return Err(invalid(format!("mode set not closed under negation: {m} present, {} missing", -*m)));
            }
        }
        Ok(set)
    }

    pub fn modes(&self) -> &[LatticeVector] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn cutoff(&self) -> Cutoff {
        self.cutoff
    }

    pub fn include_zero(&self) -> bool {
        self.include_zero
    }

    pub fn index_of(&self, v: LatticeVector) -> Option<usize> {
        self.index.get(&v).copied()
    }

    pub fn contains(&self, v: LatticeVector) -> bool {
        self.index.contains_key(&v)
    }

    pub fn zero_index(&self) -> Option<usize> {
        self.index_of(LatticeVector::ZERO)
    }

    /// Same momenta without the zero mode.
    pub fn without_zero(&self) -> Self {
        let modes = self.modes.iter().copied().filter(|m| !m.is_zero()).collect();
        Self::from_sorted(modes, self.cutoff, false)
    }

    /// Same momenta with the zero mode added.
    pub fn with_zero(&self) -> Self {
        let mut modes = self.modes.clone();
        modes.push(LatticeVector::ZERO);
        Self::from_sorted(modes, self.cutoff, true)
    }

    pub fn iter(&self) -> impl Iterator<Item = &LatticeVector> {
        self.modes.iter()
    }
}

/// Enumerates all lattice momenta within the cutoff in lexicographic order.
pub fn build_mode_set(cutoff: Cutoff, include_zero: bool) -> Result<ModeSet> {
    let bound: i32 = match cutoff {
        Cutoff::SupNorm { radius } => radius as i32,
        Cutoff::Euclidean { radius } => {
            if !(radius >= 0.0) || !radius.is_finite() {
                return Err(invalid(format!("cutoff radius must be finite and non-negative, got {radius}")));
            }
            (radius / TWO_PI).floor() as i32
        }
        Cutoff::Explicit => return Err(invalid("explicit mode sets are built with ModeSet::from_vectors")),
    };
    let r2max = match cutoff {
        Cutoff::Euclidean { radius } => {
            let r = radius / TWO_PI;
            // Tolerate rounding at exact shell radii such as |p| = 2π.
            r * r * (1.0 + 1e-12)
        }
        _ => f64::INFINITY,
    };
    let mut modes = Vec::new();
    for x in -bound..=bound {
        for y in -bound..=bound {
            for z in -bound..=bound {
                let v = LatticeVector::new(x, y, z);
                if v.is_zero() {
                    continue;
                }
                if (v.norm2() as f64) <= r2max {
                    modes.push(v);
                }
            }
        }
    }
    if include_zero {
        modes.push(LatticeVector::ZERO);
    }
    Ok(ModeSet::from_sorted(modes, cutoff, include_zero))
}

/// Serialized form of a potential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    SoftSphere { v0: f64, r: f64 },
    Tabulated { grid: Vec<f64>, values: Vec<f64> },
}

/// A non-negative, spherically symmetric, compactly supported potential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PotentialSpec", into = "PotentialSpec")]
pub struct RadialPotential {
    spec: PotentialSpec,
}

impl TryFrom<PotentialSpec> for RadialPotential {
    type Error = crate::error::Error;

    fn try_from(spec: PotentialSpec) -> Result<Self> {
        match &spec {
            PotentialSpec::SoftSphere { v0, r } => {
                if !(v0.is_finite() && *v0 >= 0.0) {
                    return Err(invalid(format!("soft sphere height must be finite and >= 0, got {v0}")));
                }
                if !(r.is_finite() && *r > 0.0) {
                    return Err(invalid(format!("soft sphere radius must be finite and > 0, got {r}")));
                }
            }
            PotentialSpec::Tabulated { grid, values } => {
                if grid.len() < 2 || grid.len() != values.len() {
                    return Err(invalid("tabulated potential needs matching grid and values of length >= 2"));
                }
                if grid[0] < 0.0 || !grid.iter().all(|g| g.is_finite()) {
                    return Err(invalid("tabulated grid must be finite and start at r >= 0"));
                }
                if !grid.windows(2).all(|w| w[1] > w[0]) {
                    return Err(invalid("tabulated grid is not strictly increasing"));
                }
                if !values.iter().all(|v| v.is_finite() && *v >= 0.0) {
                    return Err(invalid("tabulated values must be finite and >= 0"));
                }
            }
        }
        Ok(Self { spec })
    }
}

impl From<RadialPotential> for PotentialSpec {
    fn from(p: RadialPotential) -> Self {
        p.spec
    }
}

impl RadialPotential {
    pub fn soft_sphere(v0: f64, r: f64) -> Result<Self> {
        Self::try_from(PotentialSpec::SoftSphere { v0, r })
    }

    pub fn tabulated(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::try_from(PotentialSpec::Tabulated { grid, values })
    }

    pub fn spec(&self) -> &PotentialSpec {
        &self.spec
    }

    /// Radius beyond which V vanishes.
    pub fn support(&self) -> f64 {
        match &self.spec {
            PotentialSpec::SoftSphere { r, .. } => *r,
            PotentialSpec::Tabulated { grid, .. } => *grid.last().unwrap(),
        }
    }

    /// True when V vanishes identically.
    pub fn is_zero(&self) -> bool {
        match &self.spec {
            PotentialSpec::SoftSphere { v0, .. } => *v0 == 0.0,
            PotentialSpec::Tabulated { values, .. } => values.iter().all(|&v| v == 0.0),
        }
    }

    /// Points inside the support where V or its derivative may jump.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.spec {
            PotentialSpec::SoftSphere { r, .. } => vec![*r],
            PotentialSpec::Tabulated { grid, .. } => grid.clone(),
        }
    }

    /// V(r). At the support edge the interior value is returned.
    pub fn value(&self, r: f64) -> f64 {
        match &self.spec {
            PotentialSpec::SoftSphere { v0, r: rs } => {
                if r <= *rs {
                    *v0
                } else {
                    0.0
                }
            }
            PotentialSpec::Tabulated { grid, values } => {
                if r > *grid.last().unwrap() {
                    return 0.0;
                }
                if r <= grid[0] {
                    return values[0];
                }
                let i = grid.partition_point(|&g| g < r).max(1);
                let t = (r - grid[i - 1]) / (grid[i] - grid[i - 1]);
                values[i - 1] + t * (values[i] - values[i - 1])
            }
        }
    }

    /// V̂(k) through the closed form when one exists, else by quadrature.
    pub fn fourier(&self, k: f64) -> f64 {
        match &self.spec {
            PotentialSpec::SoftSphere { v0, r } => soft_sphere_fourier(*v0, *r, k),
            PotentialSpec::Tabulated { .. } => {
                potential_fourier(self, k).expect("quadrature of a validated tabulated potential")
            }
        }
    }

    /// Stable text digest input.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(&self.spec).expect("potential serializes")
    }
}

/// 4πV₀(sin kR − kR cos kR)/k³ with a series near k = 0.
pub fn soft_sphere_fourier(v0: f64, r: f64, k: f64) -> f64 {
    let x = k.abs() * r;
    let vol = 4.0 * PI * v0 * r.powi(3);
    if x < 1e-2 {
        let x2 = x * x;
        vol * (1.0 / 3.0 - x2 / 30.0 + x2 * x2 / 840.0 - x2 * x2 * x2 / 45360.0)
    } else {
        vol * (x.sin() - x * x.cos()) / (x * x * x)
    }
}

/// V̂(k) = 4π∫ V(r) r² sinc(kr) dr by adaptive quadrature.
pub fn potential_fourier(v: &RadialPotential, k: f64) -> Result<f64> {
    if !k.is_finite() {
        return Err(invalid(format!("momentum must be finite, got {k}")));
    }
    let k = k.abs();
    let r_supp = v.support();
    let bps = v.breakpoints();
    // Split oscillatory integrands so each piece holds a few periods.
    let mut cuts = bps.clone();
    let periods = (k * r_supp / PI).ceil() as usize;
    for i in 1..periods.min(4000) {
        cuts.push(r_supp * i as f64 / periods as f64);
    }
    let res = integrate_adaptive(
        |r| 4.0 * PI * v.value(r) * r * r * sinc(k * r),
        0.0,
        r_supp,
        &cuts,
        1e-13,
        1e-13,
    )?;
    Ok(res.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_set_sizes() {
        assert_eq!(build_mode_set(Cutoff::SupNorm { radius: 1 }, false).unwrap().len(), 26);
        assert_eq!(build_mode_set(Cutoff::SupNorm { radius: 0 }, false).unwrap().len(), 0);
        let axes = build_mode_set(Cutoff::Euclidean { radius: TWO_PI }, false).unwrap();
        assert_eq!(axes.len(), 6);
        assert!(axes.iter().all(|m| m.norm2() == 1));
        assert_eq!(build_mode_set(Cutoff::SupNorm { radius: 1 }, true).unwrap().len(), 27);
    }

    #[test]
    fn modes_are_sorted_and_indexed() {
        let set = build_mode_set(Cutoff::SupNorm { radius: 2 }, true).unwrap();
        assert!(set.modes().windows(2).all(|w| w[0] < w[1]));
        for (i, m) in set.iter().enumerate() {
            assert_eq!(set.index_of(*m), Some(i));
        }
        assert!(set.zero_index().is_some());
        assert!(set.without_zero().zero_index().is_none());
    }

    #[test]
    fn explicit_sets_require_negation_closure() {
        let e1 = LatticeVector::new(1, 0, 0);
        assert!(ModeSet::from_vectors(vec![e1], false).is_err());
        assert_eq!(ModeSet::from_vectors(vec![e1, -e1], true).unwrap().len(), 3);
    }

    #[test]
    fn soft_sphere_transform_at_zero() {
        let v = RadialPotential::soft_sphere(1.0, 0.5).unwrap();
        assert!((v.fourier(0.0) - PI / 6.0).abs() < 1e-15);
        assert!((potential_fourier(&v, 0.0).unwrap() - PI / 6.0).abs() < 1e-13);
    }

    #[test]
    fn zero_potential_transform() {
        let v = RadialPotential::soft_sphere(0.0, 0.5).unwrap();
        for k in [0.0, 1.0, 17.0] {
            assert_eq!(potential_fourier(&v, k).unwrap(), 0.0);
        }
    }

    #[test]
    fn tabulated_matches_soft_sphere_profile() {
        // A linear ramp V(r) = 1 - r on [0, 1]: V̂(0) = 4π∫(1-r)r² = π/3.
        let v = RadialPotential::tabulated(vec![0.0, 1.0], vec![1.0, 0.0]).unwrap();
        assert!((v.fourier(0.0) - PI / 3.0).abs() < 1e-12);
        assert!(RadialPotential::tabulated(vec![0.0, 0.5, 0.4], vec![1.0, 1.0, 0.0]).is_err());
        assert!(RadialPotential::tabulated(vec![0.0, 1.0], vec![1.0, -0.1]).is_err());
    }

    #[test]
    fn potential_json_round_trip() {
        let v: RadialPotential = serde_json::from_str(r#"{"kind":"soft_sphere","v0":1.0,"r":0.5}"#).unwrap();
        assert_eq!(v, RadialPotential::soft_sphere(1.0, 0.5).unwrap());
        let bad = serde_json::from_str::<RadialPotential>(r#"{"kind":"soft_sphere","v0":1.0,"r":0.5,"x":1}"#);
        assert!(bad.is_err());
        let neg = serde_json::from_str::<RadialPotential>(r#"{"kind":"soft_sphere","v0":-1.0,"r":0.5}"#);
        assert!(neg.is_err());
    }
}
