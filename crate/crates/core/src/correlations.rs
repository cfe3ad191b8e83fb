//! Correlation coefficients η_p = -N^{1-3β} ŵ(|p|/N^β) and their norms.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::{max_n2_for_radius, shell_counts};
use crate::model::{LatticeVector, ModeSet, TWO_PI};
use crate::quad::integrate_adaptive;
use crate::scattering::ScatteringSolution;

/// η on one lattice shell |n|² = n2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shell {
    pub n2: u64,
    /// Number of lattice vectors of the profile on this shell.
    pub multiplicity: u64,
    pub eta: f64,
}

/// η_p over a set of momenta, with σ = sinh η and γ = cosh η derived on demand.
#[derive(Clone, Debug)]
pub struct CorrelationProfile {
    n: u64,
    beta: f64,
    coupling: f64,
    modes: Option<ModeSet>,
    shells: Vec<Shell>,
    complete_n2: u64,
    solution: Option<Arc<ScatteringSolution>>,
}

fn eta_value(sol: &ScatteringSolution, n2: u64) -> Result<f64> {
    let nf = sol.n as f64;
    let p = TWO_PI * (n2 as f64).sqrt();
    let k = p / nf.powf(sol.beta);
    Ok(-nf.powf(1.0 - 3.0 * sol.beta) * sol.w_hat(k)?)
}

impl CorrelationProfile {
    /// η ≡ 0 on the given modes.
    pub fn zero(modes: &ModeSet, n: u64) -> Self {
        let modes = modes.without_zero();
        let shells = group_shells(&modes).into_iter().map(|(n2, m)| Shell { n2, multiplicity: m, eta: 0.0 }).collect();
        let complete_n2 = max_n2_for_radius(modes.cutoff().complete_ball());
        Self { n, beta: 1.0, coupling: 0.0, modes: Some(modes), shells, complete_n2, solution: None }
    }

    /// All lattice shells with |n|² ≤ max_n2, without an explicit mode list.
    pub fn for_shells(sol: Arc<ScatteringSolution>, max_n2: u64) -> Result<Self> {
        let counts = shell_counts(max_n2);
        let n2s: Vec<u64> = (1..=max_n2).filter(|&m| counts[m as usize] > 0).collect();
        let etas: Result<Vec<f64>> = n2s.par_iter().map(|&m| eta_value(&sol, m)).collect();
        let shells = n2s
            .iter()
            .zip(etas?)
            .map(|(&n2, eta)| Shell { n2, multiplicity: counts[n2 as usize], eta })
            .collect();
        Ok(Self {
            n: sol.n,
            beta: sol.beta,
            coupling: sol.coupling,
            modes: None,
            shells,
            complete_n2: max_n2,
            solution: Some(sol),
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn modes(&self) -> Option<&ModeSet> {
        self.modes.as_ref()
    }

    pub fn shells(&self) -> &[Shell] {
        &self.shells
    }

    pub fn solution(&self) -> Option<&Arc<ScatteringSolution>> {
        self.solution.as_ref()
    }

    pub fn is_zero(&self) -> bool {
        self.solution.is_none()
    }

    /// η_p for a momentum of the profile (η_0 for p = 0).
    pub fn eta(&self, p: LatticeVector) -> f64 {
        self.eta_n2(p.norm2())
    }

    /// η on shell n2; evaluates the transform when the shell is not stored.
    pub fn eta_n2(&self, n2: u64) -> f64 {
        match self.shells.binary_search_by_key(&n2, |s| s.n2) {
            Ok(i) => self.shells[i].eta,
            Err(_) => match &self.solution {
                Some(sol) => eta_value(sol, n2).unwrap_or(f64::NAN),
                None => 0.0,
            },
        }
    }

    pub fn sigma(&self, p: LatticeVector) -> f64 {
        self.eta(p).sinh()
    }

    pub fn gamma(&self, p: LatticeVector) -> f64 {
        self.eta(p).cosh()
    }

    /// Fourier coefficient of f_ℓ(N^β x): δ_{p,0} + η_p/N.
    pub fn fhat(&self, p: LatticeVector) -> f64 {
        let delta = if p.is_zero() { 1.0 } else { 0.0 };
        delta + self.eta(p) / self.n as f64
    }

    /// max over stored shells of |η_p| p² / coupling.
    pub fn decay_constant(&self) -> f64 {
        if self.coupling == 0.0 {
            return 0.0;
        }
        self.shells
            .iter()
            .map(|s| s.eta.abs() * TWO_PI * TWO_PI * s.n2 as f64 / self.coupling)
            .fold(0.0, f64::max)
    }
}

fn group_shells(modes: &ModeSet) -> Vec<(u64, u64)> {
    let mut n2s: Vec<u64> = modes.iter().map(|m| m.norm2()).collect();
    n2s.sort_unstable();
    let mut out: Vec<(u64, u64)> = Vec::new();
    for n2 in n2s {
        match out.last_mut() {
            Some((m, c)) if *m == n2 => *c += 1,
            _ => out.push((n2, 1)),
        }
    }
    out
}

/// η on every mode of `modes` (the zero mode, if present, is skipped).
pub fn build_eta(sol: Arc<ScatteringSolution>, modes: &ModeSet, n: u64) -> Result<CorrelationProfile> {
    if sol.n != n {
        return Err(invalid(format!("scattering solution was computed for N = {}, not {n}", sol.n)));
    }
    let modes = modes.without_zero();
    let grouped = group_shells(&modes);
    let etas: Result<Vec<f64>> = grouped.par_iter().map(|&(n2, _)| eta_value(&sol, n2)).collect();
    let shells = grouped
        .iter()
        .zip(etas?)
        .map(|(&(n2, multiplicity), eta)| Shell { n2, multiplicity, eta })
        .collect();
    let complete_n2 = max_n2_for_radius(modes.cutoff().complete_ball());
    Ok(CorrelationProfile {
        n,
        beta: sol.beta,
        coupling: sol.coupling,
        modes: Some(modes),
        shells,
        complete_n2,
        solution: Some(sol),
    })
}

/// ℓ² and H¹ norms of η, each split into a lattice sum and a tail.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaNorms {
    pub l2: f64,
    /// ‖η‖²_{H¹}.
    pub h1_sq: f64,
    pub l2_sq_sum: f64,
    pub l2_sq_tail: f64,
    pub h1_sq_sum: f64,
    pub h1_sq_tail: f64,
    /// (Cκ)²/(2π²P): tail of ‖η‖² under the envelope |η_p| ≤ Cκ/p².
    pub l2_sq_envelope_tail: f64,
    /// Radius P of the summed ball.
    pub cutoff: f64,
}

impl EtaNorms {
    pub fn h1(&self) -> f64 {
        self.h1_sq.sqrt()
    }
}

/// Norms over the complete ball |p| ≤ P of the profile plus radial-integral tails.
pub fn eta_norms(profile: &CorrelationProfile) -> Result<EtaNorms> {
    let p_cut = TWO_PI * (profile.complete_n2 as f64).sqrt();
    let Some(sol) = profile.solution.as_ref() else {
        return Ok(EtaNorms {
            l2: 0.0,
            h1_sq: 0.0,
            l2_sq_sum: 0.0,
            l2_sq_tail: 0.0,
            h1_sq_sum: 0.0,
            h1_sq_tail: 0.0,
            l2_sq_envelope_tail: 0.0,
            cutoff: p_cut,
        });
    };
    if profile.complete_n2 == 0 {
        return Err(invalid("profile holds no complete momentum shell; cutoff too small for a tail estimate"));
    }
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for s in profile.shells.iter().filter(|s| s.n2 <= profile.complete_n2) {
        let p2 = TWO_PI * TWO_PI * s.n2 as f64;
        let e2 = s.multiplicity as f64 * s.eta * s.eta;
        l2 += e2;
        h1 += (1.0 + p2) * e2;
    }
    // Tail beyond the ball: Σ → ∫ d³p/(2π)³ on a radial line.
    let nb = (profile.n as f64).powf(profile.beta);
    let pref = (profile.n as f64).powf(1.0 - 3.0 * profile.beta);
    let k_hi = sol.max_reliable_k().min(60.0 / sol.support());
    let p_hi = k_hi * nb;
    let eta_p = |p: f64| -pref * sol.w_hat(p / nb).unwrap_or(0.0);
    let measure = 4.0 * PI / (TWO_PI * TWO_PI * TWO_PI);
    // Shell radius halfway to the next shell, matching the lattice point count.
    let p_start = TWO_PI * (profile.complete_n2 as f64 + 0.5).sqrt();
    let (l2_tail, h1_tail) = if p_hi > p_start {
        let periods = ((p_hi - p_start) * sol.radius / nb / PI).ceil().min(2000.0) as usize;
        let cuts: Vec<f64> = (1..periods.max(1)).map(|i| p_start + (p_hi - p_start) * i as f64 / periods as f64).collect();
        let l2t = integrate_adaptive(|p| measure * p * p * eta_p(p).powi(2), p_start, p_hi, &cuts, 1e-16, 1e-9)?.value;
        let h1t =
            integrate_adaptive(|p| measure * p * p * (1.0 + p * p) * eta_p(p).powi(2), p_start, p_hi, &cuts, 1e-14, 1e-9)?.value;
        (l2t, h1t)
    } else {
        (0.0, 0.0)
    };
    let c = profile.decay_constant() * profile.coupling;
    let envelope = c * c / (2.0 * PI * PI * p_cut);
    let l2_sq = l2 + l2_tail;
    Ok(EtaNorms {
        l2: l2_sq.sqrt(),
        h1_sq: h1 + h1_tail,
        l2_sq_sum: l2,
        l2_sq_tail: l2_tail,
        h1_sq_sum: h1,
        h1_sq_tail: h1_tail,
        l2_sq_envelope_tail: envelope,
        cutoff: p_cut,
    })
}

/// Splits the profile's modes at |p| = √N; ties go to the low set.
pub fn split_high_low(modes: &ModeSet, n: u64) -> (Vec<LatticeVector>, Vec<LatticeVector>) {
    let threshold = n as f64;
    let mut high = Vec::new();
    let mut low = Vec::new();
    for &m in modes.iter().filter(|m| !m.is_zero()) {
        if m.p2() > threshold {
            high.push(m);
        } else {
            low.push(m);
        }
    }
    (high, low)
}
