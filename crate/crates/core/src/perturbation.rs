//! First-order noise analysis of the signal modes.
//!
//! Builds the noiseless Vandermonde factorization `X₀ = Z_L B Z_R` of the
//! Hankel pencil and the first-order expansion of each left signal mode under
//! additive noise, so the detector can be checked against ground truth. All
//! operations are dense and meant for desk-scale validation.

use rand::Rng;

use crate::detect::test_vector;
use crate::error::{Result, SampError};
use crate::linalg::{self, CMatrix, CVector, C64, ZERO};
use crate::pencil::{self, HankelPair};
use crate::signal::{self, NoiseModel, SignalSpec, TimeSeries};

/// Eigenvalues below this fraction of the largest magnitude count as zero.
pub const ZERO_EIGENVALUE_REL: f64 = 1e-8;
/// Gram matrices of the Vandermonde factors above this condition are rejected.
pub const MAX_GRAM_CONDITION: f64 = 1e12;
/// Eigenvector matrices above this condition are treated as defective.
pub const MAX_EIGVEC_CONDITION: f64 = 1e12;
/// Smallest admissible `|z̃_i − z_m|` in the first-order expansion.
pub const MIN_POLE_GAP: f64 = 1e-12;
const PINV_CUTOFF: f64 = 1e-10;

/// Vandermonde factors of the noiseless pencil and their pseudo-inverses.
#[derive(Debug, Clone)]
pub struct NoiselessFactors {
    /// `(N−L) × M`, column `m` is `a(z_m)`.
    pub z_left: CMatrix,
    /// `M × L`, row `m` is `[1, z_m, …, z_m^{L−1}]`.
    pub z_right: CMatrix,
    pub amplitudes: Vec<C64>,
    pub poles: Vec<C64>,
    /// `M × (N−L)`, row `m` is `p_m^H`, a row of `(Z_Lᴴ Z_L)⁻¹ Z_Lᴴ`.
    pub p_rows: CMatrix,
    /// `L × M`, column `m` is `q_m`, a column of `Z_Rᴴ (Z_R Z_Rᴴ)⁻¹`.
    pub q_cols: CMatrix,
}

impl NoiselessFactors {
    pub fn order(&self) -> usize {
        self.poles.len()
    }

    pub fn mode_len(&self) -> usize {
        self.z_left.nrows()
    }

    pub fn pencil_parameter(&self) -> usize {
        self.z_right.ncols()
    }

    pub fn sample_count(&self) -> usize {
        self.mode_len() + self.pencil_parameter()
    }

    /// `Z_L B Z_R`.
    pub fn x0(&self) -> CMatrix {
        self.product(|m| self.amplitudes[m])
    }

    /// `Z_L B Z Z_R`.
    pub fn x1(&self) -> CMatrix {
        self.product(|m| self.amplitudes[m] * self.poles[m])
    }

    fn product(&self, diag: impl Fn(usize) -> C64) -> CMatrix {
        let mut left = self.z_left.clone();
        for (m, mut col) in left.column_iter_mut().enumerate() {
            col *= diag(m);
        }
        left * &self.z_right
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.order() {
            return Err(SampError::invalid(format!("mode index {i} out of range for order {}", self.order())));
        }
        Ok(())
    }

    fn check_noise(&self, noise: &TimeSeries) -> Result<()> {
        if noise.len() != self.sample_count() {
            return Err(SampError::invalid(format!(
                "noise has {} samples, factors expect {}",
                noise.len(),
                self.sample_count()
            )));
        }
        Ok(())
    }
}

pub fn noiseless_factors(spec: &SignalSpec, l: usize) -> Result<NoiselessFactors> {
    let m = spec.order();
    let n = spec.sample_count();
    if m == 0 || l < m || l + m > n {
        return Err(SampError::PencilOutOfRange { l, n });
    }
    let poles = spec.poles();
    let mut z_left = CMatrix::zeros(n - l, m);
    let mut z_right = CMatrix::zeros(m, l);
    for (k, &z) in poles.iter().enumerate() {
        z_left.set_column(k, &test_vector(z, n - l)?);
        z_right.set_row(k, &test_vector(z, l)?.transpose());
    }
    let q_cols = z_right.adjoint() * checked_inverse(&(&z_right * z_right.adjoint()))?;
    let p_rows = checked_inverse(&(z_left.adjoint() * &z_left))? * z_left.adjoint();
    Ok(NoiselessFactors { z_left, z_right, amplitudes: spec.amplitudes(), poles, p_rows, q_cols })
}

fn checked_inverse(gram: &CMatrix) -> Result<CMatrix> {
    let cond = linalg::condition_number(gram)?;
    if !(cond <= MAX_GRAM_CONDITION) {
        return Err(SampError::IllConditioned(cond));
    }
    linalg::inverse(gram)
}

/// `Q w` for the banded operator with `Q[k, k+t] = q[t]`, length `N − L + 1`.
///
/// Under this operator `W₀ q = I₀ Q w` and `W₁ q` is `Q w` without its first
/// entry, where `W₀`, `W₁` are the Hankel matrices of `w`.
pub fn conv_apply(q: &[C64], w: &[C64]) -> Result<CVector> {
    if q.is_empty() || q.len() > w.len() {
        return Err(SampError::invalid(format!(
            "kernel length {} must be in 1..={}",
            q.len(),
            w.len()
        )));
    }
    let out_len = w.len() - q.len() + 1;
    Ok(CVector::from_fn(out_len, |k, _| q.iter().zip(&w[k..]).map(|(a, b)| a * b).sum()))
}

/// Full linear convolution, length `u.len() + v.len() − 1`.
pub fn full_convolution(u: &[C64], v: &[C64]) -> Vec<C64> {
    if u.is_empty() || v.is_empty() {
        return Vec::new();
    }
    let mut out = vec![ZERO; u.len() + v.len() - 1];
    for (a, &x) in u.iter().enumerate() {
        for (b, &y) in v.iter().enumerate() {
            out[a + b] += x * y;
        }
    }
    out
}

/// `u_mᵀ = [0, p_mᴴ] − z_i [p_mᴴ, 0]`, where `p_row` holds the entries of `p_mᴴ`.
pub fn u_vector(p_row: &[C64], z_i: C64) -> CVector {
    let n = p_row.len();
    CVector::from_fn(n + 1, |k, _| {
        let shifted = if k > 0 { p_row[k - 1] } else { ZERO };
        let direct = if k < n { p_row[k] } else { ZERO };
        shifted - z_i * direct
    })
}

/// First-order pieces of the noise column `E_L^i`.
#[derive(Debug, Clone)]
pub struct PerturbationTerms {
    /// `Σ_{m≠i} γ_{i,m} a(z_m) + ξ_i`.
    pub e_left_col: CVector,
    /// `γ_{i,m}` for each `m` in `others`.
    pub gammas: Vec<C64>,
    pub xi: CVector,
    /// `u_m` for each `m` in `others`.
    pub u_vectors: Vec<CVector>,
    /// Indices `m ≠ i`, ascending.
    pub others: Vec<usize>,
}

fn others(order: usize, i: usize) -> Vec<usize> {
    (0..order).filter(|&m| m != i).collect()
}

fn pole_gaps(factors: &NoiselessFactors, i: usize, perturbed_pole: C64) -> Result<Vec<C64>> {
    others(factors.order(), i)
        .into_iter()
        .map(|m| {
            let gap = perturbed_pole - factors.poles[m];
            if gap.norm() < MIN_POLE_GAP {
                Err(SampError::Flagged(format!(
                    "perturbed pole {i} coincides with pole {m}; separation premise violated"
                )))
            } else {
                Ok(gap)
            }
        })
        .collect()
}

fn row(m: &CMatrix, r: usize) -> Vec<C64> {
    m.row(r).iter().copied().collect()
}

fn col(m: &CMatrix, c: usize) -> Vec<C64> {
    m.column(c).iter().copied().collect()
}

/// `E_L^i` assembled from `γ_{i,m} = u_mᵀ Q_i w / ((z̃_i − z_m) b_i)` and `ξ_i = I₀ Q_i w / b_i`.
pub fn first_order_noise_column(
    factors: &NoiselessFactors,
    noise: &TimeSeries,
    i: usize,
    perturbed_pole: C64,
) -> Result<PerturbationTerms> {
    factors.check_index(i)?;
    factors.check_noise(noise)?;
    let gaps = pole_gaps(factors, i, perturbed_pole)?;
    let b = factors.amplitudes[i];
    let z_i = factors.poles[i];
    let len = factors.mode_len();

    let s = conv_apply(&col(&factors.q_cols, i), noise.samples())?;
    let xi = s.rows(0, len).map(|v| v / b);
    let others = others(factors.order(), i);
    let u_vectors: Vec<CVector> = others.iter().map(|&m| u_vector(&row(&factors.p_rows, m), z_i)).collect();
    let gammas: Vec<C64> =
        u_vectors.iter().zip(&gaps).map(|(u, &gap)| u.dot(&s) / (gap * b)).collect();

    let mut e_left_col = xi.clone();
    for (&m, &g) in others.iter().zip(&gammas) {
        e_left_col += factors.z_left.column(m) * g;
    }
    Ok(PerturbationTerms { e_left_col, gammas, xi, u_vectors, others })
}

/// `E_L^i` assembled directly from the noise Hankel matrices:
/// `Σ_{m≠i} p_mᴴ (W₁ − z_i W₀) q_i / (b_i (z̃_i − z_m)) a(z_m) + W₀ q_i / b_i`.
pub fn hankel_noise_column(
    factors: &NoiselessFactors,
    noise: &TimeSeries,
    i: usize,
    perturbed_pole: C64,
) -> Result<CVector> {
    factors.check_index(i)?;
    factors.check_noise(noise)?;
    let gaps = pole_gaps(factors, i, perturbed_pole)?;
    let w = pencil::build_hankel(noise, factors.pencil_parameter())?;
    let b = factors.amplitudes[i];
    let q = factors.q_cols.column(i);
    let mixed = (&w.y1 - &w.y0 * factors.poles[i]) * q;
    let mut out = (&w.y0 * q).map(|v| v / b);
    for (m, gap) in others(factors.order(), i).into_iter().zip(gaps) {
        let coeff = factors.p_rows.row(m).transpose().dot(&mixed) / (b * gap);
        out += factors.z_left.column(m) * coeff;
    }
    Ok(out)
}

/// `‖E_L^i‖ / ‖a(z_i)‖`.
pub fn interference_to_signal_ratio(factors: &NoiselessFactors, terms: &PerturbationTerms, i: usize) -> f64 {
    terms.e_left_col.norm() / factors.z_left.column(i).norm()
}

/// The candidate nearest to `target` in the complex plane.
pub fn nearest_pole(candidates: &[C64], target: C64) -> Option<C64> {
    candidates.iter().copied().min_by(|a, b| (a - target).norm().total_cmp(&(b - target).norm()))
}

/// Complete eigensystem with `T_Lᴴ = T_R⁻¹`, so that `u_kᴴ v_k = 1`.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub values: Vec<C64>,
    /// Right eigenvectors `v_k` as columns.
    pub right: CMatrix,
    /// Left eigenvectors as rows `u_kᴴ`.
    pub left_adj: CMatrix,
}

impl EigenSystem {
    pub fn new(values: Vec<C64>, right: CMatrix) -> Result<Self> {
        if right.nrows() != right.ncols() || right.ncols() != values.len() {
            return Err(SampError::invalid("eigensystem needs one square column per eigenvalue"));
        }
        let cond = linalg::condition_number(&right)?;
        if !(cond <= MAX_EIGVEC_CONDITION) {
            return Err(SampError::Flagged(format!("defective eigensystem (eigenvector condition {cond:.3e})")));
        }
        let left_adj = linalg::inverse(&right)?;
        Ok(Self { values, right, left_adj })
    }

    /// Eigensystem of a general square matrix from the dense solver.
    pub fn of(a: &CMatrix) -> Result<Self> {
        let e = linalg::eig(a)?;
        Self::new(e.values, e.vectors)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `T_R Λ T_Lᴴ`.
    pub fn matrix(&self) -> CMatrix {
        let mut scaled = self.right.clone();
        for (k, mut c) in scaled.column_iter_mut().enumerate() {
            c *= self.values[k];
        }
        scaled * &self.left_adj
    }

    fn pairing(&self, k: usize) -> C64 {
        self.left_adj.row(k).transpose().dot(&self.right.column(k))
    }

    /// `D_i = diag(1 / (u_kᴴ v_k (λ̃_i − λ_k)))` with a zero in slot `i`.
    pub fn resolvent_diagonal(&self, perturbed_value: C64, i: usize) -> Result<Vec<C64>> {
        (0..self.dim())
            .map(|k| {
                if k == i {
                    return Ok(ZERO);
                }
                let denom = self.pairing(k) * (perturbed_value - self.values[k]);
                if denom.norm() < MIN_POLE_GAP {
                    return Err(SampError::Flagged(format!(
                        "perturbed eigenvalue {i} coincides with eigenvalue {k}"
                    )));
                }
                Ok(denom.inv())
            })
            .collect()
    }

    /// `ρ(D_i T_Lᴴ δA T_R)`.
    pub fn spectral_condition(&self, delta: &CMatrix, perturbed_value: C64, i: usize) -> Result<f64> {
        if i >= self.dim() {
            return Err(SampError::invalid(format!("eigen index {i} out of range")));
        }
        if delta.shape() != self.right.shape() {
            return Err(SampError::invalid("perturbation shape does not match the eigensystem"));
        }
        let d = self.resolvent_diagonal(perturbed_value, i)?;
        let mut k = &self.left_adj * delta * &self.right;
        for (r, mut row) in k.row_iter_mut().enumerate() {
            row *= d[r];
        }
        let rho = linalg::eigenvalues(&k)?.iter().map(|v| v.norm()).fold(0.0, f64::max);
        Ok(rho)
    }
}

/// Full eigensystem of `X₀† X₁` with signal eigenpairs first, in pole order.
///
/// Zero eigenvalues are those below `ZERO_EIGENVALUE_REL` of the largest; their
/// eigenvectors are an orthonormal basis of the null space.
pub fn noiseless_eigensystem(factors: &NoiselessFactors) -> Result<EigenSystem> {
    let base = linalg::pinv(&factors.x0(), PINV_CUTOFF)? * factors.x1();
    let l = factors.pencil_parameter();
    let m = factors.order();
    let e = linalg::eig(&base)?;
    let max = e.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let nonzero: Vec<usize> =
        (0..l).filter(|&k| e.values[k].norm() >= ZERO_EIGENVALUE_REL * max).collect();
    if nonzero.len() != m {
        return Err(SampError::Flagged(format!(
            "expected {m} nonzero eigenvalues of the noiseless pencil, found {}",
            nonzero.len()
        )));
    }

    let mut values = vec![ZERO; l];
    let mut right = CMatrix::zeros(l, l);
    let mut used = vec![false; l];
    for (slot, &z) in factors.poles.iter().enumerate() {
        let k = nonzero
            .iter()
            .copied()
            .filter(|&k| !used[k])
            .min_by(|&a, &b| (e.values[a] - z).norm().total_cmp(&(e.values[b] - z).norm()))
            .expect("one eigenvalue per pole");
        used[k] = true;
        values[slot] = e.values[k];
        right.set_column(slot, &e.vectors.column(k));
    }
    let svd = linalg::thin_svd(&base)?;
    for k in m..l {
        right.set_column(k, &svd.v.column(k));
    }
    EigenSystem::new(values, right)
}

/// Pseudo-inverse keeping the `rank` leading singular triplets.
pub fn truncated_pinv(m: &CMatrix, rank: usize) -> Result<CMatrix> {
    let svd = linalg::thin_svd(m)?;
    if rank == 0 || rank > svd.sigma.len() || !(svd.sigma[rank - 1] > 0.0) {
        return Err(SampError::invalid(format!("cannot truncate a pseudo-inverse to rank {rank}")));
    }
    let mut v = svd.v.columns(0, rank).into_owned();
    for (k, mut c) in v.column_iter_mut().enumerate() {
        c.unscale_mut(svd.sigma[k]);
    }
    Ok(v * svd.u.columns(0, rank).adjoint())
}

/// `ρ(D_i T_Lᴴ δ(X₀†X₁) T_R)` for the noisy pencil `pair`, where `Y₀†` is
/// truncated to the model order and `z̃_i` is the eigenvalue of `Y₀†Y₁`
/// nearest `z_i`.
pub fn check_spectral_condition(factors: &NoiselessFactors, pair: &HankelPair, i: usize) -> Result<f64> {
    factors.check_index(i)?;
    if pair.y0.shape() != (factors.mode_len(), factors.pencil_parameter()) {
        return Err(SampError::invalid("pencil shape does not match the noiseless factors"));
    }
    let sys = noiseless_eigensystem(factors)?;
    let noisy = truncated_pinv(&pair.y0, factors.order())? * &pair.y1;
    let delta = &noisy - sys.matrix();
    let perturbed = nearest_pole(&linalg::eigenvalues(&noisy)?, factors.poles[i]).expect("nonempty spectrum");
    sys.spectral_condition(&delta, perturbed, i)
}

/// High-probability bounds on `|γ_{i,m}|` (one per `m ≠ i`) and on `‖ξ_i‖_∞`.
pub fn prop3_bounds(factors: &NoiselessFactors, snr_i: f64, epsilon: f64, i: usize) -> Result<(Vec<f64>, f64)> {
    factors.check_index(i)?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(SampError::invalid("epsilon must lie in (0, 1)"));
    }
    if !(snr_i > 0.0 && snr_i.is_finite()) {
        return Err(SampError::invalid("component SNR must be positive"));
    }
    let scale = (2.0 * (1.0 / epsilon).ln() / snr_i).sqrt();
    let z_i = factors.poles[i];
    let q = col(&factors.q_cols, i);
    let gamma_bounds = others(factors.order(), i)
        .into_iter()
        .map(|m| {
            let u = u_vector(&row(&factors.p_rows, m), z_i);
            let conv: f64 = full_convolution(u.as_slice(), &q).iter().map(|v| v.norm_sqr()).sum();
            2.0 * scale * conv.sqrt() / (z_i - factors.poles[m]).norm()
        })
        .collect();
    Ok((gamma_bounds, scale))
}

/// First-order right eigenvector of `A + δA` for eigenvalue `i`, normalized so `u_iᴴ ṽ_i = 1`.
pub fn perturbed_eigvec_approx(sys: &EigenSystem, delta: &CMatrix, i: usize) -> Result<CVector> {
    if i >= sys.dim() {
        return Err(SampError::invalid(format!("eigen index {i} out of range")));
    }
    let perturbed_values = linalg::eigenvalues(&(sys.matrix() + delta))?;
    let lambda = nearest_pole(&perturbed_values, sys.values[i]).expect("nonempty spectrum");
    let rho = sys.spectral_condition(delta, lambda, i)?;
    if !(rho < 1.0) {
        return Err(SampError::Flagged(format!("spectral radius condition violated (rho = {rho:.3e})")));
    }
    let d = sys.resolvent_diagonal(lambda, i)?;
    let v_i = sys.right.column(i);
    let coupling = &sys.left_adj * (delta * v_i);
    let mut out = v_i.into_owned();
    for k in (0..sys.dim()).filter(|&k| k != i) {
        out += sys.right.column(k) * (coupling[k] * d[k]);
    }
    Ok(out)
}

/// `|λ̃ − mean_k(mode[k+1] / mode[k])|`, skipping ratios with a zero denominator.
pub fn local_ratio_feature(mode: &[C64], eigenvalue: C64) -> Result<f64> {
    let ratios: Vec<C64> =
        mode.windows(2).filter(|p| p[0] != ZERO).map(|p| p[1] / p[0]).collect();
    if ratios.is_empty() {
        return Err(SampError::Flagged("no consecutive-entry ratio is defined".into()));
    }
    let mean = ratios.iter().sum::<C64>() / ratios.len() as f64;
    Ok((eigenvalue - mean).norm())
}

/// Empirical exceedance of the `γ` and `ξ` bounds over noise draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCoverage {
    /// Mode-draw pairs satisfying `|z_i − z_m| ≥ 2|z̃_i − z_i|` for all `m ≠ i`.
    pub eligible: usize,
    /// Eligible pairs where any `|γ_{i,m}|` or `‖ξ_i‖_∞` exceeded its bound.
    pub violations: usize,
}

impl BoundCoverage {
    pub fn rate(&self) -> f64 {
        if self.eligible == 0 {
            0.0
        } else {
            self.violations as f64 / self.eligible as f64
        }
    }
}

/// Monte-Carlo check of the `γ`/`ξ` bounds for every component of `spec`
/// under circular Gaussian noise of the given variance. `z̃_i` is the
/// rank-`M` pencil eigenvalue nearest `z_i`.
pub fn bound_coverage<R: Rng + ?Sized>(
    spec: &SignalSpec,
    l: usize,
    variance: f64,
    epsilon: f64,
    draws: usize,
    rng: &mut R,
) -> Result<BoundCoverage> {
    let factors = noiseless_factors(spec, l)?;
    let clean = signal::synthesize(spec);
    let model = NoiseModel::gaussian(variance);
    let order = spec.order();
    let bounds: Vec<(Vec<f64>, f64)> = spec
        .components()
        .iter()
        .enumerate()
        .map(|(i, c)| prop3_bounds(&factors, signal::component_snr(c, variance), epsilon, i))
        .collect::<Result<_>>()?;

    let mut out = BoundCoverage { eligible: 0, violations: 0 };
    for _ in 0..draws {
        let noise = TimeSeries::new(model.sample(spec.sample_count(), rng)?);
        let y = TimeSeries::new(clean.samples().iter().zip(noise.samples()).map(|(a, b)| a + b).collect());
        let pair = pencil::build_hankel(&y, l)?;
        let decomp = pencil::decompose(&pair, order)?;
        for i in 0..order {
            let z_i = factors.poles[i];
            let perturbed = nearest_pole(&decomp.eigenvalues, z_i).expect("nonempty spectrum");
            let shift = (perturbed - z_i).norm();
            if others(order, i).iter().any(|&m| (z_i - factors.poles[m]).norm() < 2.0 * shift) {
                continue;
            }
            out.eligible += 1;
            let terms = first_order_noise_column(&factors, &noise, i, perturbed)?;
            let (gamma_bounds, xi_bound) = &bounds[i];
            let gamma_bad = terms.gammas.iter().zip(gamma_bounds).any(|(g, b)| g.norm() > *b);
            let xi_bad = terms.xi.iter().any(|x| x.norm() > *xi_bound);
            if gamma_bad || xi_bad {
                out.violations += 1;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect;
    use crate::signal::ExponentialComponent;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest, ProptestConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn rel(a: &CVector, b: &CVector) -> f64 {
        (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
        (0..n).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
    }

    fn two_tone(n: usize) -> SignalSpec {
        let spacing = 2.0 * std::f64::consts::PI / n as f64;
        SignalSpec::new(
            vec![
                ExponentialComponent::undamped(c(1.0, 0.0), 0.5).unwrap(),
                ExponentialComponent::undamped(c(0.0, 1.0), 0.5 + 3.0 * spacing).unwrap(),
            ],
            n,
        )
        .unwrap()
    }

    fn gaussian_noise(n: usize, variance: f64, seed: u64) -> TimeSeries {
        TimeSeries::new(NoiseModel::gaussian(variance).sample(n, &mut signal::rng_from_seed(seed)).unwrap())
    }

    fn dense_q(q: &[C64], n: usize) -> CMatrix {
        let rows = n - q.len() + 1;
        CMatrix::from_fn(rows, n, |k, j| if j >= k && j - k < q.len() { q[j - k] } else { ZERO })
    }

    #[test]
    fn single_unit_pole_factors() {
        let spec = SignalSpec::new(vec![ExponentialComponent::undamped(c(1.0, 0.0), 0.0).unwrap()], 6).unwrap();
        let f = noiseless_factors(&spec, 2).unwrap();
        assert_eq!(f.z_left.shape(), (4, 1));
        assert!(f.z_left.iter().all(|v| (v - c(1.0, 0.0)).norm() < 1e-15));
        assert_eq!(f.z_right.shape(), (1, 2));
        assert!(f.q_cols.iter().all(|v| (v - c(0.5, 0.0)).norm() < 1e-15));
        assert!(f.p_rows.iter().all(|v| (v - c(0.25, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn factors_reconstruct_and_are_biorthogonal() {
        let spec = SignalSpec::new(
            vec![
                ExponentialComponent::new(c(1.0, 0.5), 0.01, 0.4).unwrap(),
                ExponentialComponent::new(c(-0.3, 0.8), 0.0, 2.0).unwrap(),
                ExponentialComponent::new(c(0.7, 0.0), 0.03, -1.1).unwrap(),
            ],
            40,
        )
        .unwrap();
        let l = 13;
        let f = noiseless_factors(&spec, l).unwrap();
        let pair = pencil::build_hankel(&signal::synthesize(&spec), l).unwrap();
        assert!((f.x0() - &pair.y0).norm() <= 1e-10 * pair.y0.norm());
        assert!((f.x1() - &pair.y1).norm() <= 1e-10 * pair.y1.norm());
        let pl = &f.p_rows * &f.z_left;
        let rq = &f.z_right * &f.q_cols;
        for a in 0..3 {
            for b in 0..3 {
                let id = if a == b { 1.0 } else { 0.0 };
                assert!((pl[(a, b)] - id).norm() < 1e-9);
                assert!((rq[(a, b)] - id).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn factor_preconditions() {
        let spec = two_tone(20);
        assert!(matches!(noiseless_factors(&spec, 1), Err(SampError::PencilOutOfRange { .. })));
        assert!(matches!(noiseless_factors(&spec, 19), Err(SampError::PencilOutOfRange { .. })));
        let close = SignalSpec::new(
            vec![
                ExponentialComponent::undamped(c(1.0, 0.0), 0.5).unwrap(),
                ExponentialComponent::undamped(c(1.0, 0.0), 0.5 + 1e-9).unwrap(),
            ],
            30,
        )
        .unwrap();
        assert!(matches!(noiseless_factors(&close, 10), Err(SampError::IllConditioned(_))));
    }

    #[test]
    fn conv_apply_examples() {
        let w = random_vec(&mut ChaCha8Rng::seed_from_u64(1), 7);
        assert_eq!(conv_apply(&[c(1.0, 0.0)], &w).unwrap().as_slice(), w.as_slice());
        let abc = [c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)];
        let shifted = conv_apply(&[ZERO, c(1.0, 0.0)], &abc).unwrap();
        assert_eq!(shifted.as_slice(), &abc[1..]);
        assert_eq!(shifted, dense_q(&[ZERO, c(1.0, 0.0)], 3) * CVector::from_column_slice(&abc));
        assert!(conv_apply(&[], &w).is_err());
        assert!(conv_apply(&w, &w[..3]).is_err());
    }

    #[test]
    fn u_vector_examples() {
        let e1 = [c(1.0, 0.0), ZERO, ZERO];
        assert_eq!(u_vector(&e1, ZERO).as_slice(), &[ZERO, c(1.0, 0.0), ZERO, ZERO]);
        assert_eq!(u_vector(&e1, c(1.0, 0.0)).as_slice(), &[c(-1.0, 0.0), c(1.0, 0.0), ZERO, ZERO]);
    }

    #[test]
    fn noiseless_column_is_zero() {
        let spec = two_tone(30);
        let f = noiseless_factors(&spec, 10).unwrap();
        let t = first_order_noise_column(&f, &TimeSeries::zeros(30), 0, f.poles[0]).unwrap();
        assert!(t.gammas.iter().all(|g| g.norm() == 0.0));
        assert!(t.xi.iter().all(|x| x.norm() == 0.0));
        assert!(t.e_left_col.iter().all(|x| x.norm() == 0.0));
        assert_eq!(t.others, vec![1]);
        assert_eq!(t.u_vectors[0].len(), 21);
    }

    #[test]
    fn noise_along_own_pole_has_no_cross_terms() {
        let spec = two_tone(45);
        let f = noiseless_factors(&spec, 15).unwrap();
        for i in 0..2 {
            let noise = TimeSeries::new(test_vector(f.poles[i], 45).unwrap().map(|v| v * c(0.3, -0.2)).as_slice().to_vec());
            let t = first_order_noise_column(&f, &noise, i, f.poles[i] + c(1e-3, 0.0)).unwrap();
            for g in &t.gammas {
                assert!(g.norm() < 1e-10, "gamma {g}");
            }
        }
    }

    #[test]
    fn coincident_perturbed_pole_is_rejected() {
        let spec = two_tone(30);
        let f = noiseless_factors(&spec, 10).unwrap();
        let noise = gaussian_noise(30, 0.1, 3);
        assert!(matches!(first_order_noise_column(&f, &noise, 0, f.poles[1]), Err(SampError::Flagged(_))));
        assert!(first_order_noise_column(&f, &noise, 2, f.poles[0]).is_err());
        assert!(first_order_noise_column(&f, &TimeSeries::zeros(29), 0, f.poles[0]).is_err());
    }

    #[test]
    fn isr_chain_bounds_signal_mode_similarity() {
        // A signal mode a(z_i) + E scores at least ((1 − ISR)/(1 + ISR))² at z_i.
        let n = 60;
        let l = pencil::default_pencil_parameter(n).unwrap();
        let spec = two_tone(n);
        let f = noiseless_factors(&spec, l).unwrap();
        let var = signal::noise_variance_for_snr(&spec, 20.0);
        let grid = detect::GridConfig::default();
        let mut checked = 0;
        for seed in 0..100 {
            let noise = gaussian_noise(n, var, seed);
            let y = TimeSeries::new(signal::synthesize(&spec).samples().iter().zip(noise.samples()).map(|(a, b)| a + b).collect());
            let d = pencil::decompose(&pencil::build_hankel(&y, l).unwrap(), 2).unwrap();
            for i in 0..2 {
                let zt = nearest_pole(&d.eigenvalues, f.poles[i]).unwrap();
                let k = d.eigenvalues.iter().position(|&v| v == zt).unwrap();
                let t = first_order_noise_column(&f, &noise, i, zt).unwrap();
                let isr = interference_to_signal_ratio(&f, &t, i);
                if isr >= 1.0 {
                    continue;
                }
                let mode: Vec<C64> = d.left_modes.column(k).iter().copied().collect();
                let (_, raw) = detect::maximize_similarity(&mode, &grid).unwrap();
                let bound = ((1.0 - isr) / (1.0 + isr)).powi(2);
                assert!(raw >= bound, "seed {seed} mode {i}: raw {raw} < bound {bound} (isr {isr})");
                checked += 1;
            }
        }
        assert!(checked > 150);
    }

    #[test]
    fn spectral_condition_is_zero_without_noise() {
        let spec = two_tone(45);
        let f = noiseless_factors(&spec, 15).unwrap();
        let pair = pencil::build_hankel(&signal::synthesize(&spec), 15).unwrap();
        for i in 0..2 {
            let rho = check_spectral_condition(&f, &pair, i).unwrap();
            assert!(rho < 1e-6, "rho {rho}");
        }
        let sys = noiseless_eigensystem(&f).unwrap();
        let d = sys.resolvent_diagonal(f.poles[0], 0).unwrap();
        assert_eq!(d[0], ZERO);
        assert!(d[1..].iter().all(|v| v.norm() > 0.0));
    }

    #[test]
    fn noiseless_eigensystem_separates_signal_and_null_space() {
        let spec = two_tone(45);
        let f = noiseless_factors(&spec, 15).unwrap();
        let sys = noiseless_eigensystem(&f).unwrap();
        for i in 0..2 {
            assert!((sys.values[i] - f.poles[i]).norm() < 1e-9);
        }
        let base = linalg::pinv(&f.x0(), 1e-10).unwrap() * f.x1();
        assert!((sys.matrix() - &base).norm() < 1e-8 * base.norm());
        for k in 2..15 {
            assert!((&f.z_right * sys.right.column(k)).norm() < 1e-8);
        }
    }

    #[test]
    fn spectral_condition_holds_at_high_snr() {
        let n = 60;
        let l = 20;
        let spec = two_tone(n);
        let f = noiseless_factors(&spec, l).unwrap();
        let var = signal::noise_variance_for_snr(&spec, 40.0);
        let clean = signal::synthesize(&spec);
        let trials = 200;
        let mut ok = 0;
        for seed in 0..trials {
            let noise = gaussian_noise(n, var, 1000 + seed);
            let y = TimeSeries::new(clean.samples().iter().zip(noise.samples()).map(|(a, b)| a + b).collect());
            let pair = pencil::build_hankel(&y, l).unwrap();
            if (0..2).all(|i| check_spectral_condition(&f, &pair, i).unwrap() < 1.0) {
                ok += 1;
            }
        }
        assert!(ok as f64 >= 0.99 * trials as f64, "{ok}/{trials}");
    }

    #[test]
    fn truncated_pinv_inverts_on_the_leading_subspace() {
        let spec = two_tone(30);
        let x0 = noiseless_factors(&spec, 10).unwrap().x0();
        let p = truncated_pinv(&x0, 2).unwrap();
        assert!((&x0 * &p * &x0 - &x0).norm() < 1e-10 * x0.norm());
        assert!((p - linalg::pinv(&x0, 1e-10).unwrap()).norm() < 1e-10);
        assert!(truncated_pinv(&x0, 0).is_err());
        assert!(truncated_pinv(&x0, 11).is_err());
    }

    #[test]
    fn bounds_scale_and_vanish() {
        let spec = two_tone(45);
        let f = noiseless_factors(&spec, 15).unwrap();
        let (g1, x1) = prop3_bounds(&f, 10.0, 0.05, 0).unwrap();
        let (g4, x4) = prop3_bounds(&f, 40.0, 0.05, 0).unwrap();
        assert!((x4 - x1 / 2.0).abs() < 1e-12);
        assert!((g4[0] - g1[0] / 2.0).abs() < 1e-12 * g1[0]);
        let (g, x) = prop3_bounds(&f, 10.0, 1.0 - 1e-12, 0).unwrap();
        assert!(x < 1e-5 && g[0] < 1e-3);
        assert_eq!(g1.len(), 1);
        assert!(prop3_bounds(&f, 10.0, 0.0, 0).is_err());
        assert!(prop3_bounds(&f, 10.0, 1.0, 0).is_err());
        assert!(prop3_bounds(&f, 0.0, 0.5, 0).is_err());
    }

    #[test]
    fn bound_coverage_at_ten_db() {
        let n = 71;
        let spacing = 2.0 * std::f64::consts::PI / n as f64;
        let spec = SignalSpec::new(
            vec![
                ExponentialComponent::undamped(c(1.0, 0.0), 0.0).unwrap(),
                ExponentialComponent::undamped(c(1.0, 0.0), spacing).unwrap(),
            ],
            n,
        )
        .unwrap();
        let eps = 0.05;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cov = bound_coverage(&spec, 24, 0.1, eps, 500, &mut rng).unwrap();
        let se = (eps * (1.0 - eps) / cov.eligible as f64).sqrt();
        assert!(cov.eligible > 500, "{cov:?}");
        assert!(cov.rate() <= eps + 2.0 * se, "{cov:?}");
    }

    #[test]
    fn eigvec_approx_without_perturbation_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = CMatrix::from_vec(4, 4, random_vec(&mut rng, 16));
        let sys = EigenSystem::of(&a).unwrap();
        for i in 0..4 {
            let v = perturbed_eigvec_approx(&sys, &CMatrix::zeros(4, 4), i).unwrap();
            assert_eq!(v, sys.right.column(i).into_owned());
        }
    }

    #[test]
    fn eigvec_approx_two_by_two() {
        let t = 1e-3;
        let sys = EigenSystem::new(
            vec![c(1.0, 0.0), c(2.0, 0.0)],
            CMatrix::identity(2, 2),
        )
        .unwrap();
        let delta = CMatrix::from_row_slice(2, 2, &[ZERO, c(t, 0.0), ZERO, ZERO]);
        // e₂ᴴ δA e₁ = 0: the λ = 1 eigenvector has no first-order change.
        let v1 = perturbed_eigvec_approx(&sys, &delta, 0).unwrap();
        assert_eq!(v1.as_slice(), &[c(1.0, 0.0), ZERO]);
        // The λ = 2 eigenvector of [[1, t], [0, 2]] is [t, 1] exactly.
        let v2 = perturbed_eigvec_approx(&sys, &delta, 1).unwrap();
        assert!((v2[0] - c(t, 0.0)).norm() < 1e-15 && v2[1] == c(1.0, 0.0));
    }

    fn exact_eigvec(sys: &EigenSystem, delta: &CMatrix, i: usize) -> CVector {
        let e = linalg::eig(&(sys.matrix() + delta)).unwrap();
        let k = (0..sys.dim())
            .min_by(|&a, &b| (e.values[a] - sys.values[i]).norm().total_cmp(&(e.values[b] - sys.values[i]).norm()))
            .unwrap();
        let v = e.vectors.column(k).into_owned();
        let scale = sys.left_adj.row(i).transpose().dot(&v);
        v / scale
    }

    #[test]
    fn eigvec_approx_error_is_quadratic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = CMatrix::from_vec(5, 5, random_vec(&mut rng, 25));
        let sys = EigenSystem::of(&a).unwrap();
        let dir = CMatrix::from_vec(5, 5, random_vec(&mut rng, 25));
        let dir = &dir / C64::from(dir.norm());
        for i in 0..5 {
            let err = |h: f64| {
                let delta = &dir * C64::from(h);
                rel(&perturbed_eigvec_approx(&sys, &delta, i).unwrap(), &exact_eigvec(&sys, &delta, i))
            };
            let ratio = err(1e-4) / err(5e-5);
            assert!((3.5..=4.5).contains(&ratio), "mode {i}: ratio {ratio}");
        }
    }

    #[test]
    fn eigvec_approx_flags_large_perturbation() {
        let sys = EigenSystem::new(vec![c(1.0, 0.0), c(1.01, 0.0)], CMatrix::identity(2, 2)).unwrap();
        let delta = CMatrix::from_row_slice(2, 2, &[ZERO, ZERO, ZERO, c(2.0, 0.0)]);
        assert!(matches!(perturbed_eigvec_approx(&sys, &delta, 0), Err(SampError::Flagged(_))));
    }

    #[test]
    fn local_ratio_examples() {
        let z = C64::from_polar(0.97, 0.8);
        let a = test_vector(z, 20).unwrap();
        assert!(local_ratio_feature(a.as_slice(), z).unwrap() < 1e-12);
        let scaled: Vec<C64> = a.iter().map(|v| v * c(-2.0, 0.5)).collect();
        assert!(local_ratio_feature(&scaled, z).unwrap() < 1e-12);
        let with_zero = [c(1.0, 0.0), ZERO, c(2.0, 0.0), c(4.0, 0.0)];
        assert!((local_ratio_feature(&with_zero, c(2.0, 0.0)).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(local_ratio_feature(&[ZERO, ZERO], ZERO), Err(SampError::Flagged(_))));
        assert!(local_ratio_feature(&[c(1.0, 0.0)], ZERO).is_err());
    }

    #[test]
    fn local_ratio_small_at_twenty_db() {
        let n = 60;
        let l = 20;
        let spec = SignalSpec::new(vec![ExponentialComponent::undamped(c(1.0, 0.0), 1.0).unwrap()], n).unwrap();
        let var = signal::noise_variance_for_snr(&spec, 20.0);
        let clean = signal::synthesize(&spec);
        let trials = 500;
        let mut ok = 0;
        for seed in 0..trials {
            let noise = gaussian_noise(n, var, 5000 + seed);
            let y = TimeSeries::new(clean.samples().iter().zip(noise.samples()).map(|(a, b)| a + b).collect());
            let d = pencil::decompose(&pencil::build_hankel(&y, l).unwrap(), 1).unwrap();
            let mode: Vec<C64> = d.left_modes.column(0).iter().copied().collect();
            if local_ratio_feature(&mode, d.eigenvalues[0]).unwrap() < 0.1 {
                ok += 1;
            }
        }
        assert!(ok as f64 >= 0.95 * trials as f64, "{ok}/{trials}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn conv_apply_matches_dense_operator(seed in any::<u64>(), l in 1usize..12, extra in 0usize..20) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = random_vec(&mut rng, l);
            let w = random_vec(&mut rng, l + extra);
            let fast = conv_apply(&q, &w).unwrap();
            let dense = dense_q(&q, w.len()) * CVector::from_column_slice(&w);
            prop_assert!((fast - &dense).norm() <= 1e-12 * dense.norm().max(1.0));
        }

        #[test]
        fn u_vector_matches_concatenation(seed in any::<u64>(), n in 1usize..15) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_vec(&mut rng, n);
            let z = random_vec(&mut rng, 1)[0];
            let mut a = vec![ZERO];
            a.extend_from_slice(&p);
            let mut b = p.clone();
            b.push(ZERO);
            let expect: Vec<C64> = a.iter().zip(&b).map(|(x, y)| x - z * y).collect();
            let u = u_vector(&p, z);
            prop_assert_eq!(u.as_slice(), expect.as_slice());
        }

        #[test]
        fn two_assemblies_of_noise_column_agree(seed in any::<u64>(), snr_db in -5.0f64..30.0) {
            let n = 48;
            let spec = two_tone(n);
            let f = noiseless_factors(&spec, 16).unwrap();
            let noise = gaussian_noise(n, signal::noise_variance_for_snr(&spec, snr_db), seed);
            for i in 0..2 {
                let zt = f.poles[i] * C64::from_polar(0.999, 0.003);
                let t = first_order_noise_column(&f, &noise, i, zt).unwrap();
                let h = hankel_noise_column(&f, &noise, i, zt).unwrap();
                prop_assert!(rel(&t.e_left_col, &h) <= 1e-9);
            }
        }

        #[test]
        fn adjoint_convolution_norm_matches_operator(seed in any::<u64>(), l in 1usize..10, extra in 0usize..10) {
            // ‖Qᵀ u‖ is the norm of the full convolution u * q.
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = random_vec(&mut rng, l);
            let n = l + extra;
            let u = random_vec(&mut rng, n - l + 1);
            let dense = dense_q(&q, n).transpose() * CVector::from_column_slice(&u);
            let full = full_convolution(&u, &q);
            prop_assert!((&dense - CVector::from_vec(full)).norm() <= 1e-12 * dense.norm().max(1.0));
        }
    }
}
