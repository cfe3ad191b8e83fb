//! Quadratic coefficients of the renormalized Hamiltonians, their
//! diagonalization, the ground state energy expansion and the predicted
//! excitation spectrum.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlations::CorrelationProfile;
use crate::error::{invalid, Error, NumericalError, Result};
use crate::fock::Interaction;
use crate::lattice::shell_counts;
use crate::model::{LatticeVector, ModeSet, RadialPotential, TWO_PI};
use crate::scattering::{box_scattering_series_an, scattering_length_ode, BoxSeriesOptions};

/// Which renormalized Hamiltonian a quadratic form belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    G,
    J,
    GpLimit,
}

/// Where the lattice sums entering the coefficients run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SumDomain {
    /// Over the modes of the profile plus p = 0, as on a truncated basis.
    Modes,
    /// Over all of Λ*; remainders are summed on shells |n|² ≤ max_n2.
    Lattice { max_n2: u64 },
}

/// Σ Φ_p b*_p b_p + ½ Σ Γ_p (b*_p b*_{-p} + b_p b_{-p}) + constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticForm {
    pub stage: Stage,
    pub modes: Vec<LatticeVector>,
    pub diagonal: Vec<f64>,
    pub pairing: Vec<f64>,
    pub constant: f64,
    /// Envelope estimate of the part of the constant beyond the summed shells.
    pub tail: f64,
    /// η_0, entering the sums indexed by Λ*.
    pub eta0: f64,
    /// Part of the constant coming from p = 0 or q = 0 entries of those sums.
    pub zero_index_share: f64,
}

/// Sums entering the constants, all over Λ*₊ unless marked.
#[derive(Clone, Copy, Debug, Default)]
struct Sums {
    /// Σ p² σ²
    a: f64,
    /// Σ V̂ σγ
    b: f64,
    /// Σ V̂ σ²
    c: f64,
    /// Σ_{p,q} V̂(p-q) σ_pγ_p σ_qγ_q
    d: f64,
    /// Σ_{Λ*} p² η²
    e: f64,
    /// Σ_{p,q ∈ Λ*} V̂(p-q) η_p η_q
    f: f64,
    /// Σ_{Λ*} V̂ η
    g: f64,
    /// Σ σ²
    h: f64,
    /// Σ (V̂∗η)_p σ²_p with the convolution over Λ*
    k: f64,
    tail: f64,
}

/// Per-mode data: V̂(p), the convolution S1(p) = Σ_{q∈Λ*} V̂(p-q) η_q, and η_p.
struct ModeData {
    vhat: f64,
    s1: f64,
    eta: f64,
}

fn remainder_sq(eta: f64) -> f64 {
    // sinh²η - η² without cancellation.
    if eta.abs() < 1e-3 {
        let e2 = eta * eta;
        e2 * e2 * (1.0 / 3.0 + 2.0 * e2 / 45.0)
    } else {
        eta.sinh().powi(2) - eta * eta
    }
}

fn remainder_sg(eta: f64) -> f64 {
    // sinh η cosh η - η
    if eta.abs() < 1e-3 {
        let e2 = eta * eta;
        eta * e2 * (2.0 / 3.0 + 2.0 * e2 / 15.0)
    } else {
        0.5 * (2.0 * eta).sinh() - eta
    }
}

/// Σ_{|p|>P} |p|^{-k} over Λ*, by its radial integral.
fn envelope_tail(p_cut: f64, k: i32) -> f64 {
    p_cut.powi(3 - k) / (2.0 * PI * PI * (k - 3) as f64)
}

fn mode_sums(profile: &CorrelationProfile, inter: &Interaction, modes: &[LatticeVector]) -> (Sums, Vec<ModeData>, f64) {
    let eta0 = if profile.is_zero() { 0.0 } else { profile.eta(LatticeVector::new(0, 0, 0)) };
    let vh0 = inter.vhat0();
    let eta: Vec<f64> = modes.iter().map(|&m| profile.eta(m)).collect();
    let data: Vec<ModeData> = modes
        .par_iter()
        .map(|&p| {
            let s1 = modes.iter().zip(&eta).map(|(&q, &e)| inter.vhat(p - q) * e).sum::<f64>() + inter.vhat(p) * eta0;
            ModeData { vhat: inter.vhat(p), s1, eta: profile.eta(p) }
        })
        .collect();
    let g = data.iter().map(|m| m.vhat * m.eta).sum::<f64>() + vh0 * eta0;
    let mut s = Sums { g, ..Sums::default() };
    for (p, m) in modes.iter().zip(&data) {
        let (sg, gm) = (m.eta.sinh(), m.eta.cosh());
        s.a += p.p2() * sg * sg;
        s.b += m.vhat * sg * gm;
        s.c += m.vhat * sg * sg;
        s.e += p.p2() * m.eta * m.eta;
        s.f += m.s1 * m.eta;
        s.h += sg * sg;
        s.k += m.s1 * sg * sg;
    }
    s.f += g * eta0;
    let chi: Vec<f64> = eta.iter().map(|e| e.sinh() * e.cosh()).collect();
    s.d = modes
        .par_iter()
        .zip(&chi)
        .map(|(&p, &cp)| modes.iter().zip(&chi).map(|(&q, &cq)| inter.vhat(p - q) * cp * cq).sum::<f64>())
        .sum();
    (s, data, eta0)
}

fn lattice_sums(
    profile: &CorrelationProfile,
    inter: &Interaction,
    modes: &[LatticeVector],
    max_n2: u64,
) -> Result<(Sums, Vec<ModeData>, f64)> {
    let sol = profile.solution().expect("lattice sums need a scattering solution");
    let nf = inter.n as f64;
    let scale = nf.powf(inter.beta);
    let vh = |n2: f64| inter.potential.fourier(TWO_PI * n2.sqrt() / scale);
    let s1_of = |n2: f64| -nf * sol.vw_hat(TWO_PI * n2.sqrt() / scale);
    let eta0 = profile.eta(LatticeVector::new(0, 0, 0));
    let vh0 = inter.vhat0();

    let int_vw = sol.int_vw();
    let int_vw2 = sol.int_vw2();
    let int_w2 = sol.int_w2();
    let int_grad = sol.int_grad_w2();
    let int_v_ww = sol.int_v_conv_ww()?;
    let int_vw_ww = sol.int_vw_conv_ww()?;
    let g = -nf * int_vw;
    let f = nf * nf * int_vw2;
    let e = nf.powf(2.0 - inter.beta) * int_grad;
    let pw = nf.powf(2.0 - 3.0 * inter.beta);

    let counts = shell_counts(max_n2);
    let shells: Vec<u64> = (1..=max_n2).filter(|&m| counts[m as usize] > 0).collect();
    // (p² r_σσ, V̂ r_σγ, V̂ r_σσ, r_σσ, S1 r_σσ, r_σγ (S1 - V̂ η0), |η| p²)
    let per_shell: Vec<[f64; 7]> = shells
        .par_iter()
        .map(|&m| {
            let n2 = m as f64;
            let p2 = TWO_PI * TWO_PI * n2;
            let eta = profile.eta_n2(m);
            let (rs, rg) = (remainder_sq(eta), remainder_sg(eta));
            let (v, s1) = (vh(n2), s1_of(n2));
            let w = counts[m as usize] as f64;
            [w * p2 * rs, w * v * rg, w * v * rs, w * rs, w * s1 * rs, w * rg * (s1 - v * eta0), eta.abs() * p2]
        })
        .collect();
    let col = |i: usize| per_shell.iter().map(|r| r[i]).sum::<f64>();
    if per_shell.iter().any(|r| r.iter().any(|x| !x.is_finite())) {
        return Err(NumericalError::Other("non-finite correlation coefficient in the lattice sums".into()).into());
    }

    // Double sum of the cubic remainders, vector by vector on a small ball.
    let inner_n2 = max_n2.min(12);
    let bound = (inner_n2 as f64).sqrt().ceil() as i32;
    let mut vecs = Vec::new();
    for x in -bound..=bound {
        for y in -bound..=bound {
            for z in -bound..=bound {
                let v = LatticeVector::new(x, y, z);
                if !v.is_zero() && v.norm2() <= inner_n2 {
                    vecs.push((v, remainder_sg(profile.eta_n2(v.norm2()))));
                }
            }
        }
    }
    let rr: f64 = vecs
        .par_iter()
        .map(|&(p, rp)| vecs.iter().map(|&(q, rq)| vh((p - q).norm2() as f64) * rp * rq).sum::<f64>())
        .sum();

    let mut s = Sums {
        a: e + col(0),
        b: g - vh0 * eta0 + col(1),
        c: pw * int_v_ww - vh0 * eta0 * eta0 + col(2),
        d: 0.0,
        e,
        f,
        g,
        h: pw * int_w2 - eta0 * eta0 + col(3),
        k: -nf * pw * int_vw_ww - g * eta0 * eta0 + col(4),
        tail: 0.0,
    };
    s.d = f - 2.0 * eta0 * g + vh0 * eta0 * eta0 + 2.0 * col(5) + rr;

    // Envelope |η_p| ≤ C/p² for the shells beyond the cutoff.
    let c_env = per_shell.iter().map(|r| r[6]).fold(0.0, f64::max);
    let p_cut = TWO_PI * (max_n2 as f64).sqrt();
    let vmax = vh0.abs();
    let (c3, c4) = (c_env.powi(3), c_env.powi(4));
    let t_a = 0.34 * c4 * envelope_tail(p_cut, 6);
    let t_b = vmax * 0.67 * c3 * envelope_tail(p_cut, 6);
    let t_c = vmax * 0.34 * c4 * envelope_tail(p_cut, 8);
    let t_h = 0.34 * c4 * envelope_tail(p_cut, 8);
    let t_k = g.abs() * t_h;
    let sum_rg: f64 = vecs.iter().map(|v| v.1.abs()).sum();
    let p_inner = TWO_PI * (inner_n2 as f64).sqrt();
    let t_d = 2.0 * 0.67 * c3 * envelope_tail(p_cut, 6) * (g.abs() + vmax * eta0.abs())
        + 2.0 * vmax * sum_rg * 0.67 * c3 * envelope_tail(p_inner, 6);
    let kappa = inter.kappa;
    s.tail = t_a + kappa * (t_b + t_c) + kappa / (2.0 * nf) * t_d + kappa / nf * (g.abs() * t_h + t_k);

    let data = modes
        .iter()
        .map(|&p| ModeData { vhat: inter.vhat(p), s1: s1_of(p.norm2() as f64), eta: profile.eta(p) })
        .collect();
    Ok((s, data, eta0))
}

/// Coefficients Φ_p, Γ_p, C_𝒢 (stage G) or F_p, G_p, C_𝒥 (stage J).
///
/// Index sets follow the displayed formulas literally: p = 0 enters every
/// sum over Λ* with η_0 = -N^{1-3β} ŵ(0), and its share of the constant is
/// reported separately.
pub fn quadratic_coefficients(
    stage: Stage,
    profile: &CorrelationProfile,
    inter: &Interaction,
    domain: SumDomain,
    modes: &ModeSet,
    tolerance: f64,
) -> Result<QuadraticForm> {
    if stage == Stage::GpLimit {
        return Err(invalid("the GP-limit form has no finite-N coefficients; use gp_limit_form"));
    }
    if profile.n() != inter.n {
        return Err(invalid(format!("profile built for N = {}, interaction for N = {}", profile.n(), inter.n)));
    }
    let modes: Vec<LatticeVector> = modes.without_zero().modes().to_vec();
    let (s, data, eta0) = match domain {
        SumDomain::Lattice { max_n2 } if !profile.is_zero() => {
            if max_n2 == 0 {
                return Err(invalid("lattice sums need max_n2 ≥ 1"));
            }
            lattice_sums(profile, inter, &modes, max_n2)?
        }
        _ => mode_sums(profile, inter, &modes),
    };
    if s.tail > tolerance {
        return Err(NumericalError::TailTooLarge { tail: s.tail, tolerance }.into());
    }
    let nf = inter.n as f64;
    let kappa = inter.kappa;
    let vh0 = inter.vhat0();
    let mut diagonal = Vec::with_capacity(modes.len());
    let mut pairing = Vec::with_capacity(modes.len());
    for (p, m) in modes.iter().zip(&data) {
        let (sg, gm) = (m.eta.sinh(), m.eta.cosh());
        let p2 = p.p2();
        let sum2 = sg * sg + gm * gm;
        let plus2 = (gm + sg).powi(2);
        let (d, o) = match stage {
            Stage::G => (
                sum2 * p2 + kappa * m.vhat * plus2 + 2.0 * kappa / nf * gm * sg * m.s1 - sum2 * kappa / nf * s.g,
                2.0 * p2 * sg * gm + kappa * m.vhat * plus2 + sum2 * kappa / nf * m.s1 - 2.0 * gm * sg * kappa / nf * s.g,
            ),
            _ => {
                let vf = m.vhat + m.s1 / nf;
                (p2 * sum2 + kappa * vf * plus2, 2.0 * p2 * sg * gm + kappa * vf * plus2)
            }
        };
        diagonal.push(d);
        pairing.push(o);
    }
    let base = (nf - 1.0) / 2.0 * kappa * vh0 + s.a + kappa * s.b + kappa / (2.0 * nf) * s.d + s.e / nf
        + kappa / (2.0 * nf * nf) * s.f;
    let f_zero = 2.0 * eta0 * s.g - vh0 * eta0 * eta0;
    let (constant, zero_index_share) = match stage {
        Stage::G => (
            base + kappa * s.c - kappa / nf * s.g * s.h,
            kappa / (2.0 * nf * nf) * f_zero - kappa / nf * vh0 * eta0 * s.h,
        ),
        _ => (
            base + kappa * (s.c + s.k / nf),
            kappa / (2.0 * nf * nf) * f_zero + kappa / nf * eta0 * s.c,
        ),
    };
    Ok(QuadraticForm { stage, modes, diagonal, pairing, constant, tail: s.tail, eta0, zero_index_share })
}

/// Limit form with F = p² + 8π𝔞₀ and G = 8π𝔞₀.
pub fn gp_limit_form(a0: f64, modes: &ModeSet) -> QuadraticForm {
    let modes: Vec<LatticeVector> = modes.without_zero().modes().to_vec();
    let g = 8.0 * PI * a0;
    QuadraticForm {
        stage: Stage::GpLimit,
        diagonal: modes.iter().map(|p| p.p2() + g).collect(),
        pairing: vec![g; modes.len()],
        modes,
        constant: 0.0,
        tail: 0.0,
        eta0: 0.0,
        zero_index_share: 0.0,
    }
}

/// Guard on |G_p/F_p| below which a form is diagonalized.
pub const PAIRING_RATIO_LIMIT: f64 = 0.95;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagonalization {
    pub modes: Vec<LatticeVector>,
    pub tau: Vec<f64>,
    pub eps: Vec<f64>,
    /// Σ_p ½(ε_p - F_p), each p of the form counted once.
    pub shift: f64,
}

/// τ_p with tanh 2τ_p = -G_p/F_p and ε_p = √(F_p² - G_p²).
pub fn diagonalize_quadratic(form: &QuadraticForm) -> Result<Diagonalization> {
    let mut tau = Vec::with_capacity(form.modes.len());
    let mut eps = Vec::with_capacity(form.modes.len());
    let mut shift = 0.0;
    for ((p, &f), &g) in form.modes.iter().zip(&form.diagonal).zip(&form.pairing) {
        let ratio = if f > 0.0 { (g / f).abs() } else { f64::INFINITY };
        if !(ratio < PAIRING_RATIO_LIMIT) {
            return Err(NumericalError::NotDiagonalizable { mode: p.n(), ratio, limit: PAIRING_RATIO_LIMIT }.into());
        }
        let e = f * ((1.0 - g / f) * (1.0 + g / f)).sqrt();
        tau.push(-0.5 * (g / f).atanh());
        shift += 0.5 * (e - f);
        eps.push(e);
    }
    Ok(Diagonalization { modes: form.modes.clone(), tau, eps, shift })
}

/// √(|p|⁴ + 16π a0 p²).
pub fn gp_dispersion(a0: f64, p: LatticeVector) -> f64 {
    let p2 = p.p2();
    (p2 * p2 + 16.0 * PI * a0 * p2).sqrt()
}

/// p² + 8πa0 - √(p⁴+16πa0 p²) - (8πa0)²/(2p²), written without cancellation.
pub fn energy_summand(a0: f64, p2: f64) -> f64 {
    let x = 16.0 * PI * a0 / p2;
    let r = (1.0 + x).sqrt();
    let d = 1.0 + 0.5 * x + r;
    -p2 * x * x * x * (0.5 + 1.0 / (1.0 + r)) / (8.0 * d)
}

/// Σ_{Λ*₊, |n|² ≤ max_n2} of the summand, and the envelope tail beyond it.
pub fn energy_lattice_sum(a0: f64, max_n2: u64) -> (f64, f64) {
    if a0 == 0.0 {
        return (0.0, 0.0);
    }
    let counts = shell_counts(max_n2);
    let sum = counts
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, &c)| c > 0)
        .map(|(m, &c)| c as f64 * energy_summand(a0, TWO_PI * TWO_PI * m as f64))
        .sum::<f64>();
    // Summand → -(16πa0)³/(16 p⁴); shell radius halfway to the next one.
    let p_cut = TWO_PI * (max_n2 as f64 + 0.5).sqrt();
    let tail = -(16.0 * PI * a0).powi(3) / 16.0 * envelope_tail(p_cut, 4);
    (sum, tail)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundEnergyOptions {
    pub k_max: usize,
    pub max_n2: u64,
    /// Limit on |tail| of the lattice sum.
    pub tolerance: f64,
    pub box_series: BoxSeriesOptions,
}

impl Default for GroundEnergyOptions {
    fn default() -> Self {
        Self { k_max: 3, max_n2: 10_000, tolerance: 1e-8, box_series: BoxSeriesOptions::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundEnergy {
    pub energy: f64,
    pub a_n: f64,
    pub a0: f64,
    /// 4π(N-1)𝔞_N
    pub leading: f64,
    /// -½ Σ of the summand, tail included.
    pub correction: f64,
    pub tail: f64,
    /// 4π(N-1)(𝔞_N - 𝔞₀)
    pub box_shift: f64,
}

/// 4π(N-1)𝔞_N - ½ Σ_{Λ*₊} [p² + 8π𝔞₀ - √(p⁴+16π𝔞₀p²) - (8π𝔞₀)²/(2p²)].
pub fn ground_energy_prediction(v: &RadialPotential, kappa: f64, n: u64, opts: GroundEnergyOptions) -> Result<GroundEnergy> {
    if v.is_zero() || kappa == 0.0 {
        return Ok(GroundEnergy { energy: 0.0, a_n: 0.0, a0: 0.0, leading: 0.0, correction: 0.0, tail: 0.0, box_shift: 0.0 });
    }
    let a0 = scattering_length_ode(v, kappa)?.a0;
    let a_n = box_scattering_series_an(v, kappa, n, opts.k_max, opts.box_series)?.a;
    let (sum, tail) = energy_lattice_sum(a0, opts.max_n2);
    if tail.abs() > opts.tolerance {
        return Err(NumericalError::TailTooLarge { tail: tail.abs(), tolerance: opts.tolerance }.into());
    }
    let nf = n as f64;
    let leading = 4.0 * PI * (nf - 1.0) * a_n;
    let correction = -0.5 * (sum + tail);
    Ok(GroundEnergy {
        energy: leading + correction,
        a_n,
        a0,
        leading,
        correction,
        tail,
        box_shift: 4.0 * PI * (nf - 1.0) * (a_n - a0),
    })
}

/// One excited configuration {n_p}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub energy: f64,
    /// Occupations in the order of the dispersion table.
    pub occupations: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPrediction {
    pub ground_energy: f64,
    pub dispersion: Vec<(LatticeVector, f64)>,
    pub levels: Vec<Level>,
    pub zeta: f64,
}

/// Σ n_p ε_p summed in table order.
fn config_energy(eps: &[f64], occ: &[u32]) -> f64 {
    eps.iter().zip(occ).map(|(e, &n)| e * n as f64).sum()
}

/// All configurations with Σ n_p ε_p ≤ ζ, ascending in energy; ties are
/// ordered lexicographically by the occupation vector.
pub fn enumerate_levels(dispersion: &[(LatticeVector, f64)], zeta: f64, limit: usize) -> Result<Vec<Level>> {
    if !zeta.is_finite() {
        return Err(invalid("threshold must be finite"));
    }
    let eps: Vec<f64> = dispersion.iter().map(|d| d.1).collect();
    if let Some(bad) = dispersion.iter().find(|d| !(d.1 > 0.0 && d.1.is_finite())) {
        return Err(invalid(format!("dispersion must be positive, got ε = {} at {:?}", bad.1, bad.0.n())));
    }
    let mut order: Vec<usize> = (0..eps.len()).collect();
    order.sort_by(|&i, &j| eps[i].total_cmp(&eps[j]).then(i.cmp(&j)));
    let slack = 1e-12 * zeta.abs().max(1.0);
    let mut out = Vec::new();
    let mut occ = vec![0u32; eps.len()];

    fn walk(
        k: usize,
        budget: f64,
        order: &[usize],
        eps: &[f64],
        occ: &mut Vec<u32>,
        out: &mut Vec<Level>,
        zeta: f64,
        slack: f64,
        limit: usize,
    ) -> Result<()> {
        if k == order.len() || eps[order[k]] > budget + slack {
            let energy = config_energy(eps, occ);
            if energy <= zeta {
                if out.len() == limit {
                    return Err(Error::Guard { guard: "level_limit", detail: format!("more than {limit} levels below ζ = {zeta}") });
                }
                out.push(Level { energy, occupations: occ.clone() });
            }
            return Ok(());
        }
        let i = order[k];
        let mut n = 0u32;
        loop {
            let rest = budget - n as f64 * eps[i];
            if rest < -slack {
                break;
            }
            occ[i] = n;
            walk(k + 1, rest, order, eps, occ, out, zeta, slack, limit)?;
            n += 1;
        }
        occ[i] = 0;
        Ok(())
    }
    if zeta >= 0.0 {
        walk(0, zeta, &order, &eps, &mut occ, &mut out, zeta, slack, limit)?;
    }
    out.sort_by(|a, b| a.energy.total_cmp(&b.energy).then_with(|| a.occupations.cmp(&b.occupations)));
    Ok(out)
}

/// Ground energy, GP dispersion and the levels below ζ on a mode set.
pub fn predict_spectrum(ground_energy: f64, a0: f64, modes: &ModeSet, zeta: f64, limit: usize) -> Result<SpectrumPrediction> {
    let dispersion: Vec<(LatticeVector, f64)> =
        modes.without_zero().modes().iter().map(|&p| (p, gp_dispersion(a0, p))).collect();
    let levels = enumerate_levels(&dispersion, zeta, limit)?;
    Ok(SpectrumPrediction { ground_energy, dispersion, levels, zeta })
}

impl SpectrumPrediction {
    /// Columns nx, ny, nz, p2, epsilon.
    pub fn dispersion_csv(&self) -> String {
        let mut s = String::from("nx,ny,nz,p2,epsilon\n");
        for (p, e) in &self.dispersion {
            let [x, y, z] = p.n();
            writeln!(s, "{x},{y},{z},{:.16e},{:.16e}", p.p2(), e).unwrap();
        }
        s
    }

    /// Columns energy, configuration as "n@(nx,ny,nz);…".
    pub fn levels_csv(&self) -> String {
        let mut s = String::from("energy,configuration\n");
        for l in &self.levels {
            let conf: Vec<String> = l
                .occupations
                .iter()
                .zip(&self.dispersion)
                .filter(|(&n, _)| n > 0)
                .map(|(n, (p, _))| {
                    let [x, y, z] = p.n();
                    format!("{n}@({x},{y},{z})")
                })
                .collect();
            writeln!(s, "{:.16e},{}", l.energy, conf.join(";")).unwrap();
        }
        s
    }
}
