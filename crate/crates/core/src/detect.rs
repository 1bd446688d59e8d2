//! Mode features, detection thresholds and the singular-value baselines.

use std::cell::RefCell;
use std::f64::consts::PI;

use rustfft::FftPlanner;

use crate::error::{Result, SampError};
use crate::estimate;
use crate::linalg::{vandermonde_column, CVector, C64};
use crate::pencil::{self, PencilDecomposition};
use crate::signal::TimeSeries;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Search grid for the similarity maximization.
#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub freq_oversample: usize,
    pub radius_grid: Vec<f64>,
    pub refine: bool,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            freq_oversample: 8,
            radius_grid: log_spaced_radii(-0.15, 15),
            refine: true,
        }
    }
}

/// `count` radii `exp(t)` with `t` evenly spaced over `[log_min, 0]`.
pub fn log_spaced_radii(log_min: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![1.0];
    }
    (0..count)
        .map(|k| (log_min * (1.0 - k as f64 / (count - 1) as f64)).exp())
        .collect()
}

impl GridConfig {
    pub fn unit_circle(freq_oversample: usize) -> Self {
        GridConfig { freq_oversample, radius_grid: vec![1.0], refine: true }
    }

    pub fn validate(&self) -> Result<()> {
        if self.freq_oversample < 1 {
            return Err(SampError::invalid("freq_oversample must be at least 1"));
        }
        if self.radius_grid.is_empty() {
            return Err(SampError::invalid("radius grid is empty"));
        }
        if self.radius_grid.iter().any(|&r| !(r > 0.0 && r <= 1.05)) {
            return Err(SampError::invalid("radii must lie in (0, 1.05]"));
        }
        Ok(())
    }

    pub fn fft_len(&self, mode_len: usize) -> usize {
        (self.freq_oversample * mode_len).next_power_of_two()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeFeature {
    pub index: usize,
    pub maximizer: C64,
    pub raw: f64,
    pub concentration: f64,
    pub normalized: f64,
    pub threshold: f64,
    pub is_signal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub features: Vec<ModeFeature>,
    pub selected: Vec<usize>,
    pub order: usize,
}

/// `[1, z, …, z^{len−1}]`.
pub fn test_vector(z: C64, len: usize) -> Result<CVector> {
    if z == C64::new(0.0, 0.0) {
        return Err(SampError::invalid("test vector needs a nonzero point"));
    }
    if len == 0 {
        return Err(SampError::invalid("test vector length must be positive"));
    }
    Ok(vandermonde_column(z, len))
}

/// Normalized squared correlation between `mode` and `a(z)`, in `[0, 1]`.
pub fn similarity(mode: &[C64], z: C64) -> Result<f64> {
    let mode_energy: f64 = mode.iter().map(|m| m.norm_sqr()).sum();
    if !(mode_energy > 0.0) {
        return Err(SampError::invalid("similarity of a zero mode"));
    }
    let a = test_vector(z, mode.len())?;
    Ok(similarity_unchecked(mode, mode_energy, &a))
}

fn similarity_unchecked(mode: &[C64], mode_energy: f64, a: &CVector) -> f64 {
    let mut dot = C64::new(0.0, 0.0);
    let mut a_energy = 0.0;
    for (ak, mk) in a.iter().zip(mode) {
        dot += ak.conj() * mk;
        a_energy += ak.norm_sqr();
    }
    (dot.norm_sqr() / (a_energy * mode_energy)).clamp(0.0, 1.0)
}

fn similarity_polar(mode: &[C64], mode_energy: f64, radius: f64, freq: f64) -> f64 {
    let z = C64::from_polar(radius, freq);
    similarity_unchecked(mode, mode_energy, &vandermonde_column(z, mode.len()))
}

/// Power spectrum `|Σ_n ρⁿ m[n] e^{−j2πkn/F}|²` over the `F` bins, one radius.
pub fn scaled_power_spectrum(mode: &[C64], radius: f64, fft_len: usize) -> Vec<f64> {
    let mut buf = vec![C64::new(0.0, 0.0); fft_len.max(mode.len())];
    let mut w = 1.0;
    for (b, m) in buf.iter_mut().zip(mode) {
        *b = m * w;
        w *= radius;
    }
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    fft.process(&mut buf);
    buf.iter().map(|x| x.norm_sqr()).collect()
}

fn wrap_angle(x: f64) -> f64 {
    let mut t = x.rem_euclid(2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// Vertex offset of the parabola through `(−1, a)`, `(0, b)`, `(1, c)`, in `[−1, 1]`.
fn parabola_offset(a: f64, b: f64, c: f64) -> f64 {
    let denom = a - 2.0 * b + c;
    if denom < 0.0 {
        (0.5 * (a - c) / denom).clamp(-1.0, 1.0)
    } else {
        0.0
    }
}

/// Maximizes the similarity over the radius/frequency grid, then optionally
/// refines the winner by local parabolic steps that are kept only if they
/// increase the value.
pub fn maximize_similarity(mode: &[C64], grid: &GridConfig) -> Result<(C64, f64)> {
    let mode_energy: f64 = mode.iter().map(|m| m.norm_sqr()).sum();
    if !(mode_energy > 0.0) || !mode_energy.is_finite() {
        return Err(SampError::invalid("similarity of a zero or non-finite mode"));
    }
    let len = mode.len();
    let fft_len = grid.fft_len(len);
    let mut best = (0usize, 0usize, -1.0f64);
    for (ri, &rho) in grid.radius_grid.iter().enumerate() {
        let a_energy = if (rho - 1.0).abs() < 1e-15 {
            len as f64
        } else {
            let r2 = rho * rho;
            (1.0 - r2.powi(len as i32)) / (1.0 - r2)
        };
        let spec = scaled_power_spectrum(mode, rho, fft_len);
        let scale = 1.0 / (a_energy * mode_energy);
        for (k, &p) in spec.iter().enumerate() {
            let v = p * scale;
            if v > best.2 {
                best = (ri, k, v);
            }
        }
    }
    let (ri, k, grid_value) = best;
    let mut rho = grid.radius_grid[ri];
    let mut freq = wrap_angle(2.0 * PI * k as f64 / fft_len as f64);
    let mut value = grid_value.clamp(0.0, 1.0);

    if grid.refine {
        let mut d_freq = 2.0 * PI / fft_len as f64;
        let (r_lo, r_hi) = grid
            .radius_grid
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));
        let mut d_log_r = if grid.radius_grid.len() > 1 {
            (r_hi.ln() - r_lo.ln()) / (grid.radius_grid.len() - 1) as f64
        } else {
            0.0
        };
        let eval = |r: f64, f: f64| similarity_polar(mode, mode_energy, r, f);
        for _ in 0..4 {
            let lo = eval(rho, freq - d_freq);
            let hi = eval(rho, freq + d_freq);
            let f_new = freq + parabola_offset(lo, value, hi) * d_freq;
            let v = eval(rho, f_new);
            if v > value {
                value = v;
                freq = f_new;
            }
            if d_log_r > 0.0 {
                let lr = rho.ln();
                let r_minus = (lr - d_log_r).exp().max(r_lo);
                let r_plus = (lr + d_log_r).exp().min(r_hi);
                let lo = eval(r_minus, freq);
                let hi = eval(r_plus, freq);
                let r_new = (lr + parabola_offset(lo, value, hi) * d_log_r).exp().clamp(r_lo, r_hi);
                let v = eval(r_new, freq);
                if v > value {
                    value = v;
                    rho = r_new;
                }
            }
            d_freq *= 0.5;
            d_log_r *= 0.5;
        }
    }
    Ok((C64::from_polar(rho, wrap_angle(freq)), value.clamp(0.0, 1.0)))
}

/// `d_i = Σ_m |λ_m / λ_i|²`; near-zero eigenvalues get `+∞`.
pub fn concentration_weights(eigenvalues: &[C64]) -> Vec<f64> {
    let max = eigenvalues.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let total: f64 = eigenvalues.iter().map(|l| l.norm_sqr()).sum();
    eigenvalues
        .iter()
        .map(|l| {
            let m = l.norm();
            if !(m >= 1e-12 * max) || m == 0.0 {
                f64::INFINITY
            } else {
                total / (m * m)
            }
        })
        .collect()
}

/// Raw similarity maxima, concentration weights and normalized features of
/// every retained mode. Thresholds are left at zero.
pub fn samp_features(decomp: &PencilDecomposition, grid: &GridConfig) -> Result<Vec<ModeFeature>> {
    grid.validate()?;
    let weights = concentration_weights(&decomp.eigenvalues);
    let mut features = Vec::with_capacity(decomp.rank);
    for i in 0..decomp.rank {
        let col: Vec<C64> = decomp.left_modes.column(i).iter().copied().collect();
        let d = weights[i];
        let (maximizer, raw) = if d.is_finite() {
            maximize_similarity(&col, grid)?
        } else {
            (C64::new(0.0, 0.0), 0.0)
        };
        let eps = if d.is_finite() { raw / d } else { 0.0 };
        features.push(ModeFeature {
            index: i,
            maximizer,
            raw,
            concentration: d,
            normalized: eps,
            threshold: 0.0,
            is_signal: false,
        });
    }
    let top = features.iter().map(|f| f.normalized).fold(0.0, f64::max);
    if top > 0.0 {
        for f in &mut features {
            f.normalized /= top;
        }
    }
    Ok(features)
}

/// How the amplitude-based threshold treats `t = c / (|b̂|‖a(λ̃)‖) ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdRule {
    /// `((1−t)/(1+t))²` for every `t ≥ 0`; small amplitudes push it toward 1.
    #[default]
    Literal,
    /// As above for `t < 1`, and 0 once `t ≥ 1`.
    Clamped,
}

pub fn practical_threshold(
    amp_est: C64,
    eigenvalue: C64,
    c: f64,
    len: usize,
    rule: ThresholdRule,
) -> f64 {
    let a_norm = vandermonde_norm(eigenvalue, len);
    let denom = amp_est.norm() * a_norm;
    let t = if denom > 0.0 { c / denom } else { f64::INFINITY };
    if t.is_infinite() {
        return match rule {
            ThresholdRule::Literal => 1.0,
            ThresholdRule::Clamped => 0.0,
        };
    }
    if rule == ThresholdRule::Clamped && t >= 1.0 {
        return 0.0;
    }
    (((1.0 - t) / (1.0 + t)).powi(2)).clamp(0.0, 1.0)
}

/// `‖a(z)‖` for a length-`len` Vandermonde column, via the geometric series.
pub fn vandermonde_norm(z: C64, len: usize) -> f64 {
    let r2 = z.norm_sqr();
    if (r2 - 1.0).abs() < 1e-12 {
        (len as f64).sqrt()
    } else {
        ((1.0 - r2.powi(len as i32)) / (1.0 - r2)).sqrt()
    }
}

pub fn theoretical_threshold(isr: f64) -> f64 {
    if isr >= 1.0 {
        return 0.0;
    }
    ((1.0 - isr) / (1.0 + isr)).powi(2)
}

/// Default tuning constant `10·√(N−L)`.
pub fn default_threshold_constant(mode_len: usize) -> f64 {
    10.0 * (mode_len as f64).sqrt()
}

pub fn detect_samp(
    decomp: &PencilDecomposition,
    amps: &[C64],
    grid: &GridConfig,
    c: &[f64],
    rule: ThresholdRule,
) -> Result<DetectionResult> {
    if amps.len() != decomp.rank || c.len() != decomp.rank {
        return Err(SampError::invalid(format!(
            "expected {} amplitudes and constants, got {} and {}",
            decomp.rank,
            amps.len(),
            c.len()
        )));
    }
    let mut features = samp_features(decomp, grid)?;
    let mut selected = Vec::new();
    for f in &mut features {
        let i = f.index;
        f.threshold = practical_threshold(amps[i], decomp.eigenvalues[i], c[i], decomp.mode_len, rule);
        f.is_signal = f.threshold <= f.normalized && f.concentration.is_finite();
        if f.is_signal {
            selected.push(i);
        }
    }
    Ok(DetectionResult { order: selected.len(), features, selected })
}

/// Count of singular values with `σ_i/σ₁ ≥ 10^{−p}`.
pub fn detect_sdd(sigma: &[f64], p: u32) -> Result<usize> {
    let top = *sigma.first().ok_or_else(|| SampError::invalid("empty singular values"))?;
    if !(top > 0.0) {
        return Err(SampError::invalid("largest singular value must be positive"));
    }
    let cut = 10f64.powi(-(p as i32));
    Ok(sigma.iter().take_while(|&&s| s / top >= cut).count())
}

/// Position (1-based) of the largest consecutive ratio `σ_i/σ_{i+1}`.
pub fn detect_gap(sigma: &[f64]) -> Result<usize> {
    if sigma.len() < 2 {
        return Err(SampError::invalid("gap detector needs at least two singular values"));
    }
    let floor = |s: f64| s.max(1e-300);
    let mut best = (1usize, f64::NEG_INFINITY);
    for i in 0..sigma.len() - 1 {
        let ratio = floor(sigma[i]) / floor(sigma[i + 1]);
        if ratio > best.1 {
            best = (i + 1, ratio);
        }
    }
    Ok(best.0)
}

/// `round(exp(H))` where `H` is the entropy of the normalized singular values.
pub fn detect_effective_rank(sigma: &[f64]) -> Result<usize> {
    let total: f64 = sigma.iter().sum();
    if !(total > 0.0) || sigma.iter().any(|&s| s < 0.0) {
        return Err(SampError::invalid("effective rank needs nonnegative, not all zero values"));
    }
    let entropy: f64 = sigma
        .iter()
        .map(|&s| s / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    Ok(entropy.exp().round() as usize)
}

/// Residual variances are floored at this multiple of the mean signal power.
pub const RESIDUAL_FLOOR_REL: f64 = 1e-24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfoCriterion {
    Aic,
    Bic,
}

/// Residual variances `‖y − x̂_k‖²/N` of classical fits at ranks `1..=m_max`.
/// Ranks whose decomposition fails are reported as `None`.
pub fn ite_residual_variances(y: &TimeSeries, l: usize, m_max: usize) -> Result<Vec<Option<f64>>> {
    if m_max < 1 || m_max > l {
        return Err(SampError::invalid(format!("m_max must lie in 1..={l}, got {m_max}")));
    }
    let pair = pencil::build_hankel(y, l)?;
    let svd = pencil::svd_y0(&pair, None)?;
    let n = y.len() as f64;
    let power = y.samples().iter().map(|s| s.norm_sqr()).sum::<f64>() / n;
    // Residuals below round-off of the data carry no order information.
    let floor = (RESIDUAL_FLOOR_REL * power).max(1e-300);
    let mut out = Vec::with_capacity(m_max);
    for k in 1..=m_max {
        let fit = pencil::eigenvalues_at_rank(&pair, &svd, k).and_then(|poles| {
            let b = estimate::amplitudes_least_squares(y, &poles)?;
            Ok((estimate::residual_energy(y, &poles, &b) / n).max(floor))
        });
        out.push(fit.ok());
    }
    Ok(out)
}

/// Information-criterion score of each candidate order; failed fits score `+∞`.
pub fn ite_scores(residuals: &[Option<f64>], n: usize, criterion: InfoCriterion) -> Vec<f64> {
    let nf = n as f64;
    residuals
        .iter()
        .enumerate()
        .map(|(idx, r)| match r {
            None => f64::INFINITY,
            Some(v) => {
                let k = (idx + 1) as f64;
                let dof = 4.0 * k + 1.0;
                let penalty = match criterion {
                    InfoCriterion::Aic => 2.0 * dof,
                    InfoCriterion::Bic => dof * nf.ln(),
                };
                nf * v.max(1e-300).ln() + penalty
            }
        })
        .collect()
}

/// 1-based argmin of the scores, ties toward the smaller order.
pub fn argmin_order(scores: &[f64]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_finite() && best.is_none_or(|(_, b)| s < b) {
            best = Some((i + 1, s));
        }
    }
    best.map(|(k, _)| k)
        .ok_or_else(|| SampError::Decomposition("no candidate order produced a fit".into()))
}

pub fn detect_ite(y: &TimeSeries, l: usize, m_max: usize, criterion: InfoCriterion) -> Result<usize> {
    let residuals = ite_residual_variances(y, l, m_max)?;
    argmin_order(&ite_scores(&residuals, y.len(), criterion))
}
