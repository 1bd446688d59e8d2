//! Hankel pencil construction and the SVD/eigendecomposition pipeline.
//!
//! For samples `y(0..N)` and pencil parameter `L` the full Hankel matrix is
//! `(N−L) × (L+1)`; `Y₀` drops its last column and `Y₁` its first. With the
//! truncated SVD `Y₀ ≈ U Σ Vᴴ`, the reduced matrix `A = Σ⁻¹ Uᴴ Y₁ V` is
//! diagonalised as `A Q = Q Λ̃`, and the un-normalized MP modes are
//! `Z̃_L = U Σ Q` (columns) and `Z̃_R = Q⁻¹ Vᴴ` (rows).

use crate::error::{Result, SampError};
use crate::linalg::{self, CMatrix, C64};
use crate::signal::TimeSeries;

/// Relative tolerance used for reconstruction and eigen-residual checks.
pub const TOL_RECON: f64 = 1e-9;
pub const TOL_EIG: f64 = 1e-9;
/// Eigenvector matrices with a larger condition number are rejected.
pub const MAX_EIGVEC_CONDITION: f64 = 1e12;

/// `round(n / 3)`, the default pencil parameter.
pub fn default_pencil_parameter(n: usize) -> Result<usize> {
    if n < 4 {
        return Err(SampError::invalid(format!("need at least 4 samples, got {n}")));
    }
    Ok((n as f64 / 3.0).round() as usize)
}

#[derive(Debug, Clone)]
pub struct HankelPair {
    pub full: CMatrix,
    pub y0: CMatrix,
    pub y1: CMatrix,
    pub pencil_parameter: usize,
}

impl HankelPair {
    pub fn sample_count(&self) -> usize {
        self.full.nrows() + self.pencil_parameter
    }

    /// Row count `N − L`, the length of a left mode.
    pub fn mode_len(&self) -> usize {
        self.full.nrows()
    }
}

pub fn build_hankel(y: &TimeSeries, l: usize) -> Result<HankelPair> {
    build_hankel_from(y.samples(), l)
}

pub fn build_hankel_from(y: &[C64], l: usize) -> Result<HankelPair> {
    let n = y.len();
    if l < 1 || l + 1 > n {
        return Err(SampError::PencilOutOfRange { l, n });
    }
    let rows = n - l;
    let full = CMatrix::from_fn(rows, l + 1, |i, j| y[i + j]);
    let y0 = full.columns(0, l).into_owned();
    let y1 = full.columns(1, l).into_owned();
    Ok(HankelPair { full, y0, y1, pencil_parameter: l })
}

/// Thin SVD factors of `Y₀`, possibly truncated.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: CMatrix,
    pub sigma: Vec<f64>,
    pub v: CMatrix,
    pub rank: usize,
}

impl SvdFactors {
    /// Leading `rank` singular triplets.
    pub fn truncated(&self, rank: usize) -> Result<SvdFactors> {
        if rank < 1 || rank > self.sigma.len() {
            return Err(SampError::invalid(format!(
                "truncation rank {rank} outside 1..={}",
                self.sigma.len()
            )));
        }
        Ok(SvdFactors {
            u: self.u.columns(0, rank).into_owned(),
            sigma: self.sigma[..rank].to_vec(),
            v: self.v.columns(0, rank).into_owned(),
            rank,
        })
    }

    /// `U diag(σ) Vᴴ`.
    pub fn recompose(&self) -> CMatrix {
        let mut us = self.u.clone();
        for (j, mut col) in us.column_iter_mut().enumerate() {
            col *= C64::new(self.sigma[j], 0.0);
        }
        us * self.v.adjoint()
    }
}

pub fn svd_y0(pair: &HankelPair, rank: Option<usize>) -> Result<SvdFactors> {
    let svd = linalg::thin_svd(&pair.y0)?;
    let full_rank = svd.sigma.len();
    let factors = SvdFactors { u: svd.u, sigma: svd.sigma, v: svd.v, rank: full_rank };
    match rank {
        None => Ok(factors),
        Some(r) => factors.truncated(r),
    }
}

/// Reduced matrix, eigensystem and MP modes at a fixed truncation rank.
///
/// Eigenvalues are sorted by descending magnitude; columns of `eig_vectors`,
/// columns of `left_modes` and rows of `right_modes` follow the same order.
#[derive(Debug, Clone)]
pub struct PencilDecomposition {
    pub svd: SvdFactors,
    pub reduced: CMatrix,
    pub eig_vectors: CMatrix,
    pub eig_vectors_inv: CMatrix,
    pub eigenvalues: Vec<C64>,
    pub left_modes: CMatrix,
    pub right_modes: CMatrix,
    pub rank: usize,
    pub eig_vectors_condition: f64,
    pub mode_len: usize,
}

impl PencilDecomposition {
    /// Relative error of `Z̃_L Z̃_R` against the rank-r truncation of `Y₀`.
    pub fn reconstruction_error(&self) -> f64 {
        let y0r = self.svd.recompose();
        let denom = y0r.norm();
        let err = (&self.left_modes * &self.right_modes - &y0r).norm();
        if denom == 0.0 {
            err
        } else {
            err / denom
        }
    }

    pub fn eig_residual(&self) -> f64 {
        linalg::eig_residual(&self.reduced, &self.eigenvalues, &self.eig_vectors)
    }
}

pub fn decompose(pair: &HankelPair, rank: usize) -> Result<PencilDecomposition> {
    let svd = svd_y0(pair, None)?;
    decompose_with_svd(pair, &svd, rank)
}

/// Like [`decompose`] but reuses a full SVD of `Y₀`, so callers sweeping the
/// rank pay for the factorization once.
pub fn decompose_with_svd(
    pair: &HankelPair,
    svd: &SvdFactors,
    rank: usize,
) -> Result<PencilDecomposition> {
    let svd = svd.truncated(rank)?;
    let reduced = reduced_matrix(pair, &svd)?;
    let e = linalg::eig(&reduced)?;
    let mut order: Vec<usize> = (0..rank).collect();
    order.sort_by(|&a, &b| e.values[b].norm().total_cmp(&e.values[a].norm()));
    let eigenvalues: Vec<C64> = order.iter().map(|&k| e.values[k]).collect();
    let q = CMatrix::from_fn(rank, rank, |i, j| e.vectors[(i, order[j])]);

    let cond = linalg::condition_number(&q)?;
    if !(cond <= MAX_EIGVEC_CONDITION) {
        return Err(SampError::IllConditioned(cond));
    }
    let q_inv = linalg::inverse(&q)?;

    let mut us = svd.u.clone();
    for (j, mut col) in us.column_iter_mut().enumerate() {
        col *= C64::new(svd.sigma[j], 0.0);
    }
    let left_modes = us * &q;
    let right_modes = &q_inv * svd.v.adjoint();

    Ok(PencilDecomposition {
        mode_len: pair.mode_len(),
        svd,
        reduced,
        eig_vectors: q,
        eig_vectors_inv: q_inv,
        eigenvalues,
        left_modes,
        right_modes,
        rank,
        eig_vectors_condition: cond,
    })
}

/// `A = Σ⁻¹ Uᴴ Y₁ V` for already truncated factors.
pub fn reduced_matrix(pair: &HankelPair, svd: &SvdFactors) -> Result<CMatrix> {
    let rank = svd.rank;
    if !(svd.sigma[rank - 1] > f64::MIN_POSITIVE) {
        return Err(SampError::Decomposition(format!(
            "singular value {rank} is zero; cannot form the reduced matrix"
        )));
    }
    let mut reduced = svd.u.adjoint() * &pair.y1 * &svd.v;
    for (i, mut row) in reduced.row_iter_mut().enumerate() {
        row.unscale_mut(svd.sigma[i]);
    }
    Ok(reduced)
}

/// Eigenvalues of the reduced matrix at `rank`, without modes.
pub fn eigenvalues_at_rank(pair: &HankelPair, svd: &SvdFactors, rank: usize) -> Result<Vec<C64>> {
    let svd = svd.truncated(rank)?;
    linalg::eigenvalues(&reduced_matrix(pair, &svd)?)
}

/// Rebuilds the modes after an arbitrary permutation and per-column rescaling
/// of the eigenvectors. Used to check that downstream quantities do not depend
/// on solver conventions.
pub fn with_rescaled_eigenvectors(
    d: &PencilDecomposition,
    permutation: &[usize],
    scales: &[C64],
) -> Result<PencilDecomposition> {
    let r = d.rank;
    if permutation.len() != r || scales.len() != r {
        return Err(SampError::invalid("permutation and scales must have length rank"));
    }
    let q = CMatrix::from_fn(r, r, |i, j| d.eig_vectors[(i, permutation[j])] * scales[j]);
    let q_inv = linalg::inverse(&q)?;
    let mut us = d.svd.u.clone();
    for (j, mut col) in us.column_iter_mut().enumerate() {
        col *= C64::new(d.svd.sigma[j], 0.0);
    }
    Ok(PencilDecomposition {
        left_modes: us * &q,
        right_modes: &q_inv * d.svd.v.adjoint(),
        eigenvalues: permutation.iter().map(|&k| d.eigenvalues[k]).collect(),
        eig_vectors_condition: linalg::condition_number(&q)?,
        eig_vectors: q,
        eig_vectors_inv: q_inv,
        ..d.clone()
    })
}
