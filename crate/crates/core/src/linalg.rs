//! Dense complex linear-algebra kernels used by the pencil and perturbation code.
//!
//! Matrices are nalgebra types throughout; the SVD, general eigenproblem and
//! inverse are delegated to LAPACK through ndarray-linalg.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ShapeBuilder};
use ndarray_linalg::{Eig as _, EigVals as _, Inverse as _, JobSvd, SVDDC as _};
use num_complex::Complex;

use crate::error::{Result, SampError};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

fn to_ndarray(m: &CMatrix) -> Array2<C64> {
    Array2::from_shape_vec((m.nrows(), m.ncols()).f(), m.as_slice().to_vec())
        .expect("shape matches storage")
}

fn from_ndarray(a: &Array2<C64>) -> CMatrix {
    CMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

fn check_finite(m: &CMatrix) -> Result<()> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(SampError::Decomposition("non-finite matrix entry".into()));
    }
    Ok(())
}

/// Thin SVD with singular values in descending order.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: CMatrix,
    pub sigma: Vec<f64>,
    pub v: CMatrix,
}

pub fn thin_svd(m: &CMatrix) -> Result<ThinSvd> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(SampError::invalid("SVD of an empty matrix"));
    }
    check_finite(m)?;
    let (u, s, vt) = to_ndarray(m)
        .svddc(JobSvd::Some)
        .map_err(|e| SampError::Decomposition(format!("SVD failed: {e}")))?;
    let u = u.expect("u requested");
    let vt = vt.expect("vt requested");
    let k = s.len();
    let u = CMatrix::from_fn(m.nrows(), k, |i, j| u[[i, j]]);
    let v = CMatrix::from_fn(m.ncols(), k, |i, j| vt[[j, i]].conj());
    Ok(ThinSvd { u, sigma: s.to_vec(), v })
}

pub fn singular_values(m: &CMatrix) -> Result<Vec<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(SampError::invalid("SVD of an empty matrix"));
    }
    check_finite(m)?;
    let (_, s, _) = to_ndarray(m)
        .svddc(JobSvd::None)
        .map_err(|e| SampError::Decomposition(format!("SVD failed: {e}")))?;
    Ok(s.to_vec())
}

/// 2-norm condition number; infinite for a singular matrix.
pub fn condition_number(m: &CMatrix) -> Result<f64> {
    let s = singular_values(m)?;
    let max = s[0];
    let min = *s.last().unwrap();
    Ok(if min <= 0.0 { f64::INFINITY } else { max / min })
}

/// Eigendecomposition of a general (non-Hermitian) complex square matrix.
#[derive(Debug, Clone)]
pub struct Eig {
    pub values: Vec<C64>,
    /// Unit-norm right eigenvectors as columns.
    pub vectors: CMatrix,
}

/// `A Q = Q diag(λ)`, eigenvalues in solver order.
pub fn eig(a: &CMatrix) -> Result<Eig> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(SampError::invalid("eigendecomposition needs a non-empty square matrix"));
    }
    check_finite(a)?;
    let (values, vectors) = to_ndarray(a)
        .eig()
        .map_err(|e| SampError::Decomposition(format!("eigensolver failed: {e}")))?;
    let mut vectors = from_ndarray(&vectors);
    for mut col in vectors.column_iter_mut() {
        let nrm = col.norm();
        if nrm > 0.0 {
            col.unscale_mut(nrm);
        }
    }
    Ok(Eig { values: values.to_vec(), vectors })
}

/// Eigenvalues only, in solver order.
pub fn eigenvalues(a: &CMatrix) -> Result<Vec<C64>> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(SampError::invalid("eigendecomposition needs a non-empty square matrix"));
    }
    check_finite(a)?;
    let values = to_ndarray(a)
        .eigvals()
        .map_err(|e| SampError::Decomposition(format!("eigensolver failed: {e}")))?;
    Ok(values.to_vec())
}

/// Relative eigen-residual `‖AQ − Q diag(λ)‖_F / ‖A‖_F`.
pub fn eig_residual(a: &CMatrix, values: &[C64], vectors: &CMatrix) -> f64 {
    let mut qd = vectors.clone();
    for (j, mut col) in qd.column_iter_mut().enumerate() {
        col *= values[j];
    }
    let r = (a * vectors - qd).norm();
    let an = a.norm();
    if an == 0.0 {
        r
    } else {
        r / an
    }
}

pub fn inverse(m: &CMatrix) -> Result<CMatrix> {
    if m.nrows() == 0 || m.ncols() != m.nrows() {
        return Err(SampError::invalid("inverse needs a non-empty square matrix"));
    }
    check_finite(m)?;
    let inv = to_ndarray(m).inv().map_err(|_| SampError::IllConditioned(f64::INFINITY))?;
    Ok(from_ndarray(&inv))
}

/// Moore–Penrose pseudo-inverse with singular values below `rel_cutoff · σ_max` dropped.
pub fn pinv(m: &CMatrix, rel_cutoff: f64) -> Result<CMatrix> {
    let svd = thin_svd(m)?;
    let cut = rel_cutoff * svd.sigma[0];
    let mut out = CMatrix::zeros(m.ncols(), m.nrows());
    for (k, &s) in svd.sigma.iter().enumerate() {
        if s <= cut || s == 0.0 {
            continue;
        }
        let vk = svd.v.column(k);
        let uk = svd.u.column(k);
        out += (vk * uk.adjoint()).unscale(s);
    }
    Ok(out)
}

/// Vandermonde column `[1, z, …, z^{len−1}]`.
pub fn vandermonde_column(z: C64, len: usize) -> CVector {
    let mut v = CVector::zeros(len);
    let mut p = ONE;
    for k in 0..len {
        v[k] = p;
        p *= z;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMatrix {
        CMatrix::from_fn(r, c, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    #[test]
    fn svd_reconstructs_and_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_matrix(&mut rng, 10, 6);
        let s = thin_svd(&m).unwrap();
        let d = CMatrix::from_diagonal(&CVector::from_iterator(
            s.sigma.len(),
            s.sigma.iter().map(|&x| C64::new(x, 0.0)),
        ));
        let rec = &s.u * d * s.v.adjoint();
        assert!((rec - &m).norm() <= 1e-10 * m.norm());
        assert!((s.u.adjoint() * &s.u - CMatrix::identity(6, 6)).norm() < 1e-10);
        assert!((s.v.adjoint() * &s.v - CMatrix::identity(6, 6)).norm() < 1e-10);
        assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn eig_residual_is_small_for_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 2, 5, 24, 60] {
            let a = random_matrix(&mut rng, n, n);
            let e = eig(&a).unwrap();
            assert!(eig_residual(&a, &e.values, &e.vectors) < 1e-9, "n = {n}");
        }
    }

    #[test]
    fn eig_of_triangular_matrix_reads_diagonal() {
        let a = CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(1.0, 0.0), C64::new(3.0, 0.0), ZERO, C64::new(2.0, 0.0)],
        );
        let e = eig(&a).unwrap();
        let mut vals: Vec<f64> = e.values.iter().map(|v| v.re).collect();
        vals.sort_by(f64::total_cmp);
        assert!((vals[0] - 1.0).abs() < 1e-12 && (vals[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn pinv_of_ones_row() {
        let row = CMatrix::from_element(1, 2, ONE);
        let p = pinv(&row, 1e-12).unwrap();
        assert!((p[(0, 0)] - C64::new(0.5, 0.0)).norm() < 1e-14);
        assert!((p[(1, 0)] - C64::new(0.5, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn svd_of_rank_one_ones_matrix() {
        let m = CMatrix::from_element(5, 3, ONE);
        let s = thin_svd(&m).unwrap();
        assert!((s.sigma[0] - 15f64.sqrt()).abs() < 1e-12);
        assert!(s.sigma[1] < 1e-12);
        let rec = s.u.column(0) * s.v.column(0).adjoint() * C64::new(s.sigma[0], 0.0);
        assert!((rec - m).norm() < 1e-12);
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_matrix(&mut rng, 7, 7);
        let ai = inverse(&a).unwrap();
        assert!((&a * ai - CMatrix::identity(7, 7)).norm() < 1e-10);
        assert!(inverse(&CMatrix::zeros(2, 2)).is_err());
    }
}
