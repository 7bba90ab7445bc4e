//! Small dense linear-algebra helpers shared by the model and spectral code.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{CoverError, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// All eigenvalues of a complex matrix, ordered by decreasing modulus with
/// ties (within 1e-14) broken by increasing argument.
pub fn eigenvalues_sorted(m: &CMatrix) -> Result<Vec<Complex64>> {
    if m.nrows() == 1 {
        return Ok(vec![m[(0, 0)]]);
    }
    let schur = m.clone().schur();
    let vals = schur
        .eigenvalues()
        .ok_or_else(|| CoverError::NonConvergence("complex Schur form not triangular".into()))?;
    let mut out: Vec<Complex64> = vals.iter().copied().collect();
    sort_by_modulus(&mut out);
    Ok(out)
}

pub(crate) fn sort_by_modulus(vals: &mut [Complex64]) {
    vals.sort_by(|a, b| {
        let (na, nb) = (a.norm(), b.norm());
        if (na - nb).abs() > 1e-14 {
            nb.partial_cmp(&na).unwrap_or(std::cmp::Ordering::Equal)
        } else {
            a.arg()
                .partial_cmp(&b.arg())
                .unwrap_or(std::cmp::Ordering::Equal)
        }
    });
}

/// Right and left null vectors of `m - mu I` from the smallest singular
/// triplet. The left vector is returned as a row (w with w (m - mu I) = 0).
pub fn eigenvectors_at(m: &CMatrix, mu: Complex64) -> Result<(CVector, CVector)> {
    let n = m.nrows();
    let shifted = m - CMatrix::identity(n, n) * mu;
    let svd = shifted.clone().svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(CoverError::NonConvergence("SVD failed".into())),
    };
    let idx = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(i, _)| i)
        .ok_or_else(|| CoverError::Numerical("empty matrix".into()))?;
    // shifted = U S V^H; right null vector is the idx-th row of V^H, conjugated.
    let right = CVector::from_iterator(n, v_t.row(idx).iter().map(|z| z.conj()));
    let left = CVector::from_iterator(n, u.column(idx).iter().map(|z| z.conj()));
    let mut right = right;
    let mut left = left;
    refine_pair(&shifted, &mut right, &mut left);
    Ok((right, left))
}

/// One step of inverse iteration on each side, which cleans up the SVD null
/// vectors when the shift is already an accurate eigenvalue.
fn refine_pair(shifted: &CMatrix, right: &mut CVector, left: &mut CVector) {
    let n = shifted.nrows();
    let scale = shifted.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let eps = Complex64::new(scale * 1e-13, 0.0);
    let pert = shifted - CMatrix::identity(n, n) * eps;
    let lu = pert.clone().lu();
    if let Some(x) = lu.solve(right) {
        let nx = x.norm();
        if nx.is_finite() && nx > 0.0 {
            *right = x / Complex64::new(nx, 0.0);
        }
    }
    let lu_h = pert.adjoint().lu();
    let wh = left.map(|z| z.conj());
    if let Some(x) = lu_h.solve(&wh) {
        let nx = x.norm();
        if nx.is_finite() && nx > 0.0 {
            *left = x.map(|z| z.conj()) / Complex64::new(nx, 0.0);
        }
    }
}

/// Stationary distribution of a row-stochastic matrix.
///
/// Dense null-space solve for up to 64 states, power iteration beyond.
pub fn stationary_vector(p: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = p.nrows();
    let raw: Vec<f64> = if n <= 64 {
        let a = p.transpose() - DMatrix::<f64>::identity(n, n);
        let svd = a.svd(false, true);
        let v_t = svd
            .v_t
            .ok_or_else(|| CoverError::NonConvergence("SVD failed".into()))?;
        let idx = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(i, _)| i)
            .unwrap_or(0);
        v_t.row(idx).iter().copied().collect()
    } else {
        power_iteration(p, 1e-14, 1_000_000)?
    };
    let sum: f64 = raw.iter().sum();
    if sum.abs() < 1e-300 {
        return Err(CoverError::Numerical("stationary vector has zero mass".into()));
    }
    let mut pi: Vec<f64> = raw.iter().map(|x| (x / sum).max(0.0)).collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= total);
    Ok(pi)
}

fn power_iteration(p: &DMatrix<f64>, tol: f64, cap: usize) -> Result<Vec<f64>> {
    let n = p.nrows();
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..cap {
        // lazy version keeps periodic chains from oscillating
        let y = (p.tr_mul(&x) + &x) * 0.5;
        let diff = (&y - &x).amax();
        x = y;
        if diff < tol {
            return Ok(x.iter().copied().collect());
        }
    }
    Err(CoverError::NonConvergence(
        "power iteration for the stationary vector".into(),
    ))
}

/// Real symmetric eigenvalues, ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    v
}
