//! Generalized Bogoliubov transformations T(η), T(τ), the cubic phase S(η),
//! the renormalized Hamiltonians obtained by conjugation, and measurements
//! of what the explicit decompositions leave over.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlations::{split_high_low, CorrelationProfile};
use crate::error::{invalid, Error, NumericalError, Result};
use crate::fock::{assemble, build_basis, FockBasis, Observables, Op, Truncation};
use crate::linalg::{expm, expm_action, pencil_extremes};
use crate::model::LatticeVector;
use crate::predictor::{Diagonalization, QuadraticForm, Stage};
use crate::sparse::SparseOperator;

/// Largest dimension for which generators are exponentiated densely.
pub const DENSE_EXPM_LIMIT: usize = 5000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    /// ½ Σ η_p (b*_p b*_{-p} - b_p b_{-p})
    Quadratic,
    /// N^{-1/2} Σ_{r∈P_H, v∈P_L} η_r [b*_{r+v} b*_{-r} (γ_v b_v + σ_v b*_{-v}) - h.c.]
    Cubic,
    /// The quadratic generator with the diagonalizing angles τ_p.
    FinalQuadratic,
}

fn slots(basis: &FockBasis) -> (Vec<LatticeVector>, Vec<usize>) {
    let modes = basis.modes().modes().to_vec();
    let neg = modes.iter().map(|&m| basis.modes().index_of(-m).expect("mode sets are closed under negation")).collect();
    (modes, neg)
}

fn require_excitations(basis: &FockBasis) -> Result<()> {
    if !basis.is_excitation_basis() {
        return Err(invalid("transformations act on excitation bases without the zero mode"));
    }
    Ok(())
}

/// ½ Σ_p c_p (b*_p b*_{-p} - b_p b_{-p}) for a coefficient map c.
pub fn quadratic_generator<F: Fn(LatticeVector) -> f64 + Sync>(basis: &FockBasis, n: u64, coeff: F) -> Result<SparseOperator> {
    require_excitations(basis)?;
    let (modes, neg) = slots(basis);
    let c: Vec<f64> = modes.iter().map(|&m| coeff(m)).collect();
    if (0..modes.len()).any(|k| c[k] != c[neg[k]]) {
        return Err(invalid("generator coefficients must be even in p"));
    }
    Ok(assemble(basis, n, "B", false, |_, s, np, e| {
        for k in 0..modes.len() {
            let h = 0.5 * c[k];
            e.emit(s, np, &[Op::Bd(k), Op::Bd(neg[k])], h);
            e.emit(s, np, &[Op::B(k), Op::B(neg[k])], -h);
        }
    }))
}

/// A(η) with the split of the profile's modes at |p| = √N.
pub fn cubic_generator(basis: &FockBasis, profile: &CorrelationProfile) -> Result<SparseOperator> {
    require_excitations(basis)?;
    let n = profile.n();
    let (modes, neg) = slots(basis);
    let (high, low) = split_high_low(basis.modes(), n);
    let idx = |m: LatticeVector| basis.modes().index_of(m).expect("split modes come from the basis");
    let high: Vec<(usize, f64)> = high.iter().map(|&r| (idx(r), profile.eta(r))).collect();
    let low: Vec<(usize, f64, f64)> = low.iter().map(|&v| (idx(v), profile.sigma(v), profile.gamma(v))).collect();
    let c0 = 1.0 / (n as f64).sqrt();
    Ok(assemble(basis, n, "A", false, |_, s, np, e| {
        for &(r, eta_r) in &high {
            for &(v, sv, gv) in &low {
                let Some(rv) = basis.modes().index_of(modes[r] + modes[v]) else { continue };
                let c = c0 * eta_r;
                e.emit(s, np, &[Op::Bd(rv), Op::Bd(neg[r]), Op::B(v)], c * gv);
                e.emit(s, np, &[Op::Bd(rv), Op::Bd(neg[r]), Op::Bd(neg[v])], c * sv);
                e.emit(s, np, &[Op::Bd(v), Op::B(neg[r]), Op::B(rv)], -c * gv);
                e.emit(s, np, &[Op::B(neg[v]), Op::B(neg[r]), Op::B(rv)], -c * sv);
            }
        }
    }))
}

/// e^A for an antisymmetric generator, checked for orthogonality.
pub fn exponentiate_generator(generator: &SparseOperator) -> Result<DMatrix<f64>> {
    let dim = generator.dim();
    if dim > DENSE_EXPM_LIMIT {
        return Err(Error::DimensionLimit { count: dim as u128, limit: DENSE_EXPM_LIMIT });
    }
    let sym = generator.symmetric_part_max();
    if sym > 1e-12 {
        return Err(NumericalError::Other(format!("generator is not antisymmetric: max |A + Aᵀ| = {sym:e}")).into());
    }
    let t = expm(&generator.to_dense())?;
    let defect = orthogonality_defect(&t);
    if defect > 1e-10 {
        return Err(NumericalError::Other(format!("exponential is not orthogonal: ‖TᵀT - I‖ = {defect:e}")).into());
    }
    Ok(t)
}

/// max |(TᵀT - I)_{ij}|, a bound on ‖TᵀT - I‖ up to the dimension.
pub fn orthogonality_defect(t: &DMatrix<f64>) -> f64 {
    let g = t.transpose() * t;
    let mut worst: f64 = 0.0;
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            let id = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - id).abs());
        }
    }
    worst
}

/// Stage of the renormalization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenormStage {
    G,
    J,
    M,
}

/// The three unitaries of the renormalization chain as dense matrices.
#[derive(Clone, Debug)]
pub struct Conjugations {
    pub t_eta: DMatrix<f64>,
    pub s_eta: DMatrix<f64>,
    pub t_tau: DMatrix<f64>,
}

impl Conjugations {
    /// T(η), S(η) and T(τ) on an excitation basis.
    pub fn build(basis: &FockBasis, profile: &CorrelationProfile, tau: Option<&Diagonalization>) -> Result<Self> {
        let n = profile.n();
        let t_eta = exponentiate_generator(&quadratic_generator(basis, n, |p| profile.eta(p))?)?;
        let s_eta = exponentiate_generator(&cubic_generator(basis, profile)?)?;
        let t_tau = match tau {
            Some(d) => {
                check_modes(basis, &d.modes)?;
                let map = |p: LatticeVector| d.modes.iter().position(|&m| m == p).map_or(0.0, |i| d.tau[i]);
                exponentiate_generator(&quadratic_generator(basis, n, map)?)?
            }
            None => DMatrix::identity(basis.dim(), basis.dim()),
        };
        Ok(Self { t_eta, s_eta, t_tau })
    }

    /// The product of the unitaries applied up to the given stage.
    pub fn chain(&self, stage: RenormStage) -> DMatrix<f64> {
        match stage {
            RenormStage::G => self.t_eta.clone(),
            RenormStage::J => &self.t_eta * &self.s_eta,
            RenormStage::M => &self.t_eta * &self.s_eta * &self.t_tau,
        }
    }
}

/// Uᵀ ℒ U for the chain up to `stage`: 𝒢 = T*ℒT, 𝒥 = S*𝒢S, ℳ = T(τ)*𝒥T(τ).
pub fn renormalize(stage: RenormStage, l: &SparseOperator, c: &Conjugations) -> Result<DMatrix<f64>> {
    let u = c.chain(stage);
    if u.nrows() != l.dim() {
        return Err(invalid(format!("conjugations of dimension {} for an operator of dimension {}", u.nrows(), l.dim())));
    }
    let lu = sparse_times_dense(l, &u);
    let m = u.transpose() * lu;
    Ok((&m + m.transpose()) * 0.5)
}

/// A·D for sparse A and dense D, parallel over columns of D.
pub fn sparse_times_dense(a: &SparseOperator, d: &DMatrix<f64>) -> DMatrix<f64> {
    let cols: Vec<Vec<f64>> = (0..d.ncols()).into_par_iter().map(|j| a.apply(d.column(j).as_slice(), false)).collect();
    DMatrix::from_fn(d.nrows(), d.ncols(), |i, j| cols[j][i])
}

fn check_modes(basis: &FockBasis, modes: &[LatticeVector]) -> Result<()> {
    if basis.modes().modes() != modes {
        return Err(invalid("predictor/basis mismatch: the form's modes differ from the basis modes"));
    }
    Ok(())
}

/// Σ d_p b*_p b_p + ½ Σ o_p (b*_p b*_{-p} + b_p b_{-p}).
pub fn quadratic_operator(basis: &FockBasis, n: u64, diagonal: &[f64], pairing: &[f64]) -> SparseOperator {
    let (modes, neg) = slots(basis);
    assemble(basis, n, "Q", true, |_, s, np, e| {
        for k in 0..modes.len() {
            e.emit(s, np, &[Op::Bd(k), Op::B(k)], diagonal[k]);
            e.emit(s, np, &[Op::Bd(k), Op::Bd(neg[k])], 0.5 * pairing[k]);
            e.emit(s, np, &[Op::B(k), Op::B(neg[k])], 0.5 * pairing[k]);
        }
    })
}

/// Explicit part of a renormalized Hamiltonian:
/// G: C_𝒢 + Q_𝒢 + 𝒞_N + 𝒱_N; J: C_𝒥 + Q_𝒥 + 𝒱_N;
/// M: C_𝒥 + Σ ½(ε_p - F_p) + Σ ε_p b*_p b_p + 𝒱_N.
pub fn predicted_operator(
    stage: RenormStage,
    basis: &FockBasis,
    n: u64,
    form: &QuadraticForm,
    diag: Option<&Diagonalization>,
    obs: &Observables,
) -> Result<SparseOperator> {
    check_modes(basis, &form.modes)?;
    let expected = match stage {
        RenormStage::G => Stage::G,
        _ => Stage::J,
    };
    if form.stage != expected {
        return Err(invalid(format!("stage {stage:?} needs a {expected:?} form, got {:?}", form.stage)));
    }
    let id = SparseOperator::identity("1", basis.dim());
    let op = match stage {
        RenormStage::G => {
            let q = quadratic_operator(basis, n, &form.diagonal, &form.pairing);
            SparseOperator::linear_combination(
                "G_pred",
                &[(form.constant, &id), (1.0, &q), (1.0, &obs.cubic), (1.0, &obs.potential)],
            )
        }
        RenormStage::J => {
            let q = quadratic_operator(basis, n, &form.diagonal, &form.pairing);
            SparseOperator::linear_combination("J_pred", &[(form.constant, &id), (1.0, &q), (1.0, &obs.potential)])
        }
        RenormStage::M => {
            let d = diag.ok_or_else(|| invalid("stage M needs the diagonalization of the J form"))?;
            check_modes(basis, &d.modes)?;
            let q = quadratic_operator(basis, n, &d.eps, &vec![0.0; d.eps.len()]);
            SparseOperator::linear_combination(
                "M_pred",
                &[(form.constant + d.shift, &id), (1.0, &q), (1.0, &obs.potential)],
            )
        }
    };
    Ok(op)
}

/// (𝒩₊+1)³ + ½{𝒩₊+1, ℋ_N+1}.
pub fn comparison_operator(obs: &Observables) -> DMatrix<f64> {
    let dim = obs.number.dim();
    let np1: Vec<f64> = obs.number.diagonal_values().iter().map(|x| x + 1.0).collect();
    let mut h1 = obs.h.to_dense();
    for i in 0..dim {
        h1[(i, i)] += 1.0;
    }
    DMatrix::from_fn(dim, dim, |i, j| {
        let cube = if i == j { np1[i].powi(3) } else { 0.0 };
        cube + 0.5 * (np1[i] + np1[j]) * h1[(i, j)]
    })
}

/// Residual of a decomposition measured against the comparison operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub stage: RenormStage,
    pub n: u64,
    pub kappa: f64,
    pub beta: f64,
    pub dim: usize,
    /// Largest |eigenvalue| of the residual.
    pub residual_norm: f64,
    /// Extremal λ of R x = λ S x.
    pub pencil_lower: f64,
    pub pencil_upper: f64,
    /// max(|lower|, |upper|): the smallest c with ±R ≤ c S.
    pub ratio: f64,
}

/// Renormalized operator minus its predicted explicit terms, against S.
pub fn measure_decomposition_residual(
    stage: RenormStage,
    renormalized: &DMatrix<f64>,
    predicted: &SparseOperator,
    obs: &Observables,
    kappa: f64,
    beta: f64,
    n: u64,
) -> Result<ResidualReport> {
    if predicted.dim() != renormalized.nrows() || obs.number.dim() != predicted.dim() {
        return Err(invalid("predictor/basis mismatch: operator dimensions differ"));
    }
    let r = renormalized - predicted.to_dense();
    let r = (&r + r.transpose()) * 0.5;
    let residual_norm = r.symmetric_eigenvalues().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let s = comparison_operator(obs);
    let (lo, hi) = pencil_extremes(&r, &s)?;
    Ok(ResidualReport {
        stage,
        n,
        kappa,
        beta,
        dim: r.nrows(),
        residual_norm,
        pencil_lower: lo,
        pencil_upper: hi,
        ratio: lo.abs().max(hi.abs()),
    })
}

/// Smallest C ≥ 0 with ±(𝒢_N - 4π𝔞₀N - ℋ_N) ≤ α ℋ_N + C κ (𝒩₊+1).
pub fn stage_g_constant(g: &DMatrix<f64>, obs: &Observables, a0: f64, n: u64, kappa: f64, alpha: f64) -> Result<f64> {
    let dim = g.nrows();
    let h = obs.h.to_dense();
    let mut delta = g - &h;
    let shift = 4.0 * std::f64::consts::PI * a0 * n as f64;
    for i in 0..dim {
        delta[(i, i)] -= shift;
    }
    let s = DMatrix::from_diagonal(&DVector::from_iterator(
        dim,
        obs.number.diagonal_values().into_iter().map(|x| kappa * (x + 1.0)),
    ));
    let (_, up) = pencil_extremes(&(&delta - &h * alpha), &s)?;
    let (_, down) = pencil_extremes(&(-&delta - &h * alpha), &s)?;
    Ok(up.max(down).max(0.0))
}

/// sup_ξ ⟨Uξ, X Uξ⟩/⟨ξ, X ξ⟩ for a positive X, i.e. the top of the pencil (UᵀXU, X).
pub fn growth_ratio(u: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<f64> {
    let conj = u.transpose() * x * u;
    let conj = (&conj + conj.transpose()) * 0.5;
    Ok(pencil_extremes(&conj, x)?.1)
}

/// Growth of (𝒩₊+1)^m for m = 1, 2, 3 and of ½{ℋ_N+1, 𝒩₊+1} under U.
pub fn growth_ratios(u: &DMatrix<f64>, obs: &Observables) -> Result<[f64; 4]> {
    let dim = u.nrows();
    let np1: Vec<f64> = obs.number.diagonal_values().iter().map(|x| x + 1.0).collect();
    let pow = |m: i32| DMatrix::from_diagonal(&DVector::from_iterator(dim, np1.iter().map(|x| x.powi(m))));
    let mut h1 = obs.h.to_dense();
    for i in 0..dim {
        h1[(i, i)] += 1.0;
    }
    let mixed = DMatrix::from_fn(dim, dim, |i, j| 0.5 * (np1[i] + np1[j]) * h1[(i, j)]);
    Ok([growth_ratio(u, &pow(1))?, growth_ratio(u, &pow(2))?, growth_ratio(u, &pow(3))?, growth_ratio(u, &mixed)?])
}

/// Statistics of ‖d_p ξ‖/‖(𝒩₊+1)^{3/2} ξ‖ over a probe set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemainderStats {
    pub n: u64,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    /// Largest ratio among probes of each 𝒩₊ level of the basis states.
    pub per_level_max: Vec<f64>,
    pub random_max: f64,
    pub probes: usize,
    pub seed: u64,
    /// Extra excitation levels of the enlarged basis T(η) acts on.
    pub margin: u32,
}

/// Probes: every state of `basis` plus `random` seeded unit vectors.
/// T(η) acts on an enlarged basis with `margin` more excitations so that
/// T(η)ξ is represented faithfully; d_p is measured for every mode p.
pub fn measure_remainders_dp(
    basis: &FockBasis,
    profile: &CorrelationProfile,
    margin: u32,
    random: usize,
    seed: u64,
) -> Result<RemainderStats> {
    require_excitations(basis)?;
    let n = profile.n();
    let cap = basis.rule().excitation_cap();
    let big = build_basis(basis.modes(), Truncation::Excitations { max: cap + margin }, basis.sector())?;
    let gen = quadratic_generator(&big, n, |p| profile.eta(p))?;
    let embed: Vec<usize> = (0..basis.dim())
        .map(|i| big.index_of(basis.state(i)).expect("small basis embeds in the enlarged one"))
        .collect();
    let (modes, neg) = slots(&big);
    let b_ops: Vec<SparseOperator> =
        (0..modes.len()).map(|k| crate::fock::operator_from_strings(&big, n, "b", false, &[(1.0, vec![Op::B(k)])])).collect();
    let bd_ops: Vec<SparseOperator> = (0..modes.len())
        .map(|k| crate::fock::operator_from_strings(&big, n, "b*", false, &[(1.0, vec![Op::Bd(neg[k])])]))
        .collect();

    let mut probes: Vec<(Option<u32>, Vec<f64>)> = (0..basis.dim())
        .map(|i| {
            let mut v = vec![0.0; basis.dim()];
            v[i] = 1.0;
            (Some(basis.n_plus(i)), v)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random {
        let v: Vec<f64> = (0..basis.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        probes.push((None, v.into_iter().map(|x| x / nrm).collect()));
    }

    let np: Vec<f64> = (0..basis.dim()).map(|i| basis.n_plus(i) as f64 + 1.0).collect();
    let ratios: Result<Vec<(Option<u32>, f64)>> = probes
        .par_iter()
        .map(|(level, v)| {
            let mut x = vec![0.0; big.dim()];
            for (i, &j) in embed.iter().enumerate() {
                x[j] = v[i];
            }
            let denom = v.iter().zip(&np).map(|(a, w)| (a * w.powf(1.5)).powi(2)).sum::<f64>().sqrt();
            let tx = expm_action(&gen, 1.0, &x, 1e-14)?;
            let mut worst: f64 = 0.0;
            for (k, &p) in modes.iter().enumerate() {
                let btx = b_ops[k].apply(&tx, false);
                let back = expm_action(&gen, -1.0, &btx, 1e-14)?;
                let e = profile.eta(p);
                let bx = b_ops[k].apply(&x, false);
                let bdx = bd_ops[k].apply(&x, false);
                let d: f64 = (0..big.dim())
                    .map(|i| (back[i] - e.cosh() * bx[i] - e.sinh() * bdx[i]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                worst = worst.max(d / denom);
            }
            Ok((*level, worst))
        })
        .collect();
    let ratios = ratios?;
    let max_level = (0..basis.dim()).map(|i| basis.n_plus(i)).max().unwrap_or(0) as usize;
    let mut per_level_max = vec![0.0f64; max_level + 1];
    let mut random_max: f64 = 0.0;
    for (lvl, r) in &ratios {
        match lvl {
            Some(l) => per_level_max[*l as usize] = per_level_max[*l as usize].max(*r),
            None => random_max = random_max.max(*r),
        }
    }
    let max_ratio = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    let mean_ratio = ratios.iter().map(|r| r.1).sum::<f64>() / ratios.len().max(1) as f64;
    Ok(RemainderStats { n, max_ratio, mean_ratio, per_level_max, random_max, probes: ratios.len(), seed, margin })
}
