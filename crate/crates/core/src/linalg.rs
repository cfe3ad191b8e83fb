//! Dense matrix exponential, exponential action for sparse generators, and
//! extremal eigenvalues of symmetric pencils.

use nalgebra::DMatrix;

use crate::error::{NumericalError, Result};
use crate::sparse::SparseOperator;

fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// e^A by scaling and squaring with the degree-13 Padé approximant.
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA13: f64 = 5.371920351148152;
    let n = a.nrows();
    let nrm = norm1(a);
    if !nrm.is_finite() {
        return Err(NumericalError::Other("matrix exponential of a non-finite matrix".into()).into());
    }
    let s = if nrm > THETA13 { (nrm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a / 2f64.powi(s);
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * B[13] + &a4 * B[11] + &a2 * B[9]) + &a6 * B[7] + &a4 * B[5] + &a2 * B[3] + &id * B[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * B[12] + &a4 * B[10] + &a2 * B[8]) + &a6 * B[6] + &a4 * B[4] + &a2 * B[2] + &id * B[0];
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .ok_or_else(|| NumericalError::Other("singular denominator in the Padé approximant".into()))?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

/// e^{tA} v for a sparse generator, by step-wise Taylor expansion.
pub fn expm_action(a: &SparseOperator, t: f64, v: &[f64], tol: f64) -> Result<Vec<f64>> {
    let dim = a.dim();
    let mut colsum = vec![0.0; dim];
    for (_, c, x) in a.triplets() {
        colsum[c] += x.abs();
    }
    let nrm = colsum.iter().fold(0.0f64, |m, &x| m.max(x)) * t.abs();
    let steps = (nrm / 0.5).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let mut y = v.to_vec();
    for _ in 0..steps {
        let scale = y.iter().map(|x| x.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut term = y.clone();
        let mut acc = y.clone();
        let mut k = 1usize;
        loop {
            term = a.apply(&term, true);
            term.iter_mut().for_each(|x| *x *= h / k as f64);
            acc.iter_mut().zip(&term).for_each(|(s, x)| *s += x);
            let tmax = term.iter().map(|x| x.abs()).fold(0.0, f64::max);
            if tmax <= tol * 1e-3 * scale || tmax == 0.0 {
                break;
            }
            k += 1;
            if k > 200 {
                return Err(NumericalError::NoConvergence { what: "Taylor exponential action", iterations: k, residual: tmax }
                    .into());
            }
        }
        y = acc;
    }
    Ok(y)
}

/// Smallest and largest λ with R x = λ S x, for symmetric R and positive definite S.
pub fn pencil_extremes(r: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<(f64, f64)> {
    let chol = s
        .clone()
        .cholesky()
        .ok_or_else(|| NumericalError::Other("comparison operator is not positive definite".into()))?;
    let l = chol.l();
    let y = l
        .solve_lower_triangular(r)
        .ok_or_else(|| NumericalError::Other("triangular solve failed".into()))?;
    let m = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| NumericalError::Other("triangular solve failed".into()))?;
    let m = (&m + m.transpose()) * 0.5;
    let ev = m.symmetric_eigenvalues();
    let lo = ev.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

/// Operator 2-norm of a symmetric matrix.
pub fn symmetric_norm(a: &DMatrix<f64>) -> f64 {
    let s = (a + a.transpose()) * 0.5;
    s.symmetric_eigenvalues().iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Operator 2-norm of a general matrix.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.singular_values().max()
}
