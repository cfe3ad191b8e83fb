//! Lowest eigenpairs of symmetric sparse operators, and derived observables.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, NumericalError, Result};
use crate::fock::{FockBasis, StateVector, Truncation};
use crate::sparse::SparseOperator;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dense,
    Iterative,
    /// Dense up to `DENSE_LIMIT`, iterative above.
    Auto,
}

pub const DENSE_LIMIT: usize = 2500;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOptions {
    pub m: usize,
    pub tol: f64,
    pub method: Method,
    /// Parallel matrix-vector products (results are identical either way).
    pub parallel: bool,
    pub max_krylov: usize,
    pub max_restarts: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { m: 6, tol: 1e-10, method: Method::Auto, parallel: true, max_krylov: 300, max_restarts: 40 }
    }
}

#[derive(Clone, Debug)]
pub struct EigenResult {
    pub values: Vec<f64>,
    pub vectors: Vec<StateVector>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub method: Method,
}

impl EigenResult {
    /// CSV with columns index, eigenvalue, residual.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,eigenvalue,residual\n");
        for (i, (v, r)) in self.values.iter().zip(&self.residuals).enumerate() {
            s.push_str(&format!("{i},{v:.16e},{r:.16e}\n"));
        }
        s
    }
}

fn residual(op: &SparseOperator, lambda: f64, v: &[f64], parallel: bool) -> f64 {
    let hv = op.apply(v, parallel);
    hv.iter().zip(v).map(|(h, x)| (h - lambda * x).powi(2)).sum::<f64>().sqrt()
}

/// Sorted eigen-decomposition of a dense symmetric matrix.
pub fn dense_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let e = SymmetricEigen::new(sym);
    let mut idx: Vec<usize> = (0..e.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
    let vals = idx.iter().map(|&i| e.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(m.nrows(), idx.len(), |r, c| e.eigenvectors[(r, idx[c])]);
    (vals, vecs)
}

/// All eigenvalues of a dense symmetric matrix, ascending.
pub fn dense_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut v: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn lowest_spectrum(op: &SparseOperator, opts: &SolverOptions) -> Result<EigenResult> {
    let dim = op.dim();
    if opts.m == 0 || opts.m > dim {
        return Err(invalid(format!("requested {} eigenvalues of a {dim}-dimensional operator", opts.m)));
    }
    let asym = op.asymmetry();
    if asym > 1e-10 {
        return Err(invalid(format!("operator '{}' is not symmetric (defect {asym:.3e})", op.label)));
    }
    let method = match opts.method {
        Method::Auto if dim <= DENSE_LIMIT => Method::Dense,
        Method::Auto => Method::Iterative,
        m => m,
    };
    match method {
        Method::Dense => {
            let (vals, vecs) = dense_eigen(&op.to_dense());
            let mut out = EigenResult { values: vec![], vectors: vec![], residuals: vec![], iterations: 1, method };
            for k in 0..opts.m {
                let v: Vec<f64> = vecs.column(k).iter().copied().collect();
                out.residuals.push(residual(op, vals[k], &v, opts.parallel));
                out.values.push(vals[k]);
                out.vectors.push(StateVector { coeffs: v });
            }
            Ok(out)
        }
        _ => lanczos_locked(op, opts),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Two passes of Gram-Schmidt against `basis`.
fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = dot(v, b);
            axpy(v, -c, b);
        }
    }
}

/// Deterministic start for the k-th locking sweep: all ones plus a seeded
/// perturbation. A fresh perturbation per sweep is needed to reach every
/// copy of a degenerate eigenvalue.
fn start_vector(dim: usize, k: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + k as u64);
    let mut v: Vec<f64> = (0..dim).map(|_| 1.0 + 0.5 * rng.random::<f64>()).collect();
    normalize(&mut v);
    v
}

/// Lanczos with full reorthogonalization, locking one converged pair per sweep.
fn lanczos_locked(op: &SparseOperator, opts: &SolverOptions) -> Result<EigenResult> {
    let dim = op.dim();
    let mut locked: Vec<Vec<f64>> = Vec::new();
    let mut values = Vec::new();
    let mut residuals = Vec::new();
    let mut iterations = 0;
    let mut start = start_vector(dim, 0);
    while locked.len() < opts.m {
        let mut restarts = 0;
        loop {
            orthogonalize(&mut start, &locked);
            if normalize(&mut start) < 1e-300 {
                start = start_vector(dim, 1000 + locked.len() * 64 + restarts);
                restarts += 1;
                continue;
            }
            let room = dim - locked.len();
            let kmax = opts.max_krylov.min(room).max(1);
            let (theta, y, res) = lanczos_run(op, &start, &locked, kmax, opts, &mut iterations);
            if res <= opts.tol * theta.abs().max(1.0) {
                values.push(theta);
                residuals.push(res);
                locked.push(y);
                start = start_vector(dim, locked.len());
                break;
            }
            restarts += 1;
            if restarts > opts.max_restarts {
                return Err(NumericalError::NoConvergence { what: "Lanczos", iterations, residual: res }.into());
            }
            start = y;
        }
    }
    // Locking order is ascending up to round-off; enforce it.
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    Ok(EigenResult {
        values: idx.iter().map(|&i| values[i]).collect(),
        vectors: idx.iter().map(|&i| StateVector { coeffs: locked[i].clone() }).collect(),
        residuals: idx.iter().map(|&i| residuals[i]).collect(),
        iterations,
        method: Method::Iterative,
    })
}

/// One Lanczos run in the complement of `locked`; returns the lowest Ritz pair and its true residual.
fn lanczos_run(
    op: &SparseOperator,
    start: &[f64],
    locked: &[Vec<f64>],
    kmax: usize,
    opts: &SolverOptions,
    iterations: &mut usize,
) -> (f64, Vec<f64>, f64) {
    let mut q: Vec<Vec<f64>> = vec![start.to_vec()];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut best = (0.0, start.to_vec(), f64::INFINITY);
    for k in 0..kmax {
        *iterations += 1;
        let mut w = op.apply(&q[k], opts.parallel);
        orthogonalize(&mut w, locked);
        let a = dot(&w, &q[k]);
        alpha.push(a);
        orthogonalize(&mut w, &q);
        let b = normalize(&mut w);
        let breakdown = b < 1e-13 * a.abs().max(1.0);
        let check = breakdown || k + 1 == kmax || (k + 1) % 10 == 0;
        if check {
            let t = DMatrix::from_fn(k + 1, k + 1, |i, j| {
                if i == j {
                    alpha[i]
                } else if i + 1 == j {
                    beta[i]
                } else if j + 1 == i {
                    beta[j]
                } else {
                    0.0
                }
            });
            let (vals, vecs) = dense_eigen(&t);
            let theta = vals[0];
            let est = (b * vecs[(k, 0)]).abs();
            if est <= opts.tol * theta.abs().max(1.0) * 0.1 || breakdown || k + 1 == kmax {
                let mut y = vec![0.0; op.dim()];
                for (j, qj) in q.iter().enumerate() {
                    axpy(&mut y, vecs[(j, 0)], qj);
                }
                orthogonalize(&mut y, locked);
                normalize(&mut y);
                let res = residual(op, theta, &y, opts.parallel);
                best = (theta, y, res);
                if res <= opts.tol * theta.abs().max(1.0) || breakdown || k + 1 == kmax {
                    return best;
                }
            }
        }
        if breakdown {
            break;
        }
        beta.push(b);
        q.push(w);
    }
    best
}

/// 1 − ⟨φ₀, γ_N φ₀⟩ = ⟨ψ, 𝒩₊ ψ⟩ / N.
pub fn depletion(psi: &StateVector, basis: &FockBasis) -> Result<f64> {
    let n = match basis.rule() {
        Truncation::Total { n, .. } => n as f64,
        Truncation::Excitations { .. } => return Err(invalid("depletion needs a fixed-N basis with the zero mode")),
    };
    if psi.coeffs.len() != basis.dim() {
        return Err(invalid("state and basis dimensions differ"));
    }
    let norm2: f64 = psi.coeffs.iter().map(|c| c * c).sum();
    let np: f64 = psi.coeffs.iter().enumerate().map(|(i, c)| c * c * basis.n_plus(i) as f64).sum();
    Ok(np / norm2 / n)
}

/// ⟨ξ,(𝒩₊+1)³ξ⟩ and the symmetrized ⟨ξ, ½{𝒩₊+1, ℋ+1} ξ⟩.
pub fn moment_check(xi: &StateVector, number: &SparseOperator, h: &SparseOperator) -> Result<(f64, f64)> {
    let d = xi.coeffs.len();
    if number.dim() != d || h.dim() != d {
        return Err(invalid("state and operator dimensions differ"));
    }
    let np1: Vec<f64> = number.diagonal_values().iter().map(|x| x + 1.0).collect();
    if number.nnz() > d || (0..d).any(|i| number.row(i).any(|(c, _)| c != i)) {
        return Err(invalid("the number operator must be diagonal"));
    }
    let m3 = xi.coeffs.iter().zip(&np1).map(|(c, n)| c * c * n.powi(3)).sum();
    let hx = h.apply(&xi.coeffs, false);
    // ⟨ξ,(N+1)(H+1)ξ⟩ is real for real ξ and equals the symmetrized form.
    let mixed = xi.coeffs.iter().zip(&np1).zip(hx.iter().zip(&xi.coeffs)).map(|((c, n), (hx, x))| c * n * (hx + x)).sum();
    Ok((m3, mixed))
}
