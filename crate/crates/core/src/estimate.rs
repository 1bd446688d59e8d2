//! Parameter extraction and the two end-to-end pipelines.

use crate::detect::{self, DetectionResult, GridConfig, InfoCriterion, ThresholdRule};
use crate::error::{Result, SampError};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::pencil::{self, PencilDecomposition};
use crate::signal::TimeSeries;

/// Vandermonde systems with a larger condition number are rejected.
pub const MAX_VANDERMONDE_CONDITION: f64 = 1e12;
/// Relative singular-value cutoff of the least-squares pseudo-inverse.
pub const PINV_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterEstimates {
    pub frequencies: Vec<f64>,
    pub dampings: Vec<f64>,
    pub amplitudes: Vec<C64>,
    /// Normalized mode feature when the estimate came from SAMP, NaN otherwise.
    pub features: Vec<f64>,
    pub mode_indices: Vec<usize>,
    pub order: usize,
}

impl ParameterEstimates {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn poles(&self) -> Vec<C64> {
        self.frequencies
            .iter()
            .zip(&self.dampings)
            .map(|(&f, &a)| C64::from_polar((-a).exp(), f))
            .collect()
    }
}

/// `θ̂ = arg λ`, `α̂ = −ln|λ|`, so that `e^{−α̂ + jθ̂} = λ`.
pub fn poles_to_params(eigenvalues: &[C64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut freqs = Vec::with_capacity(eigenvalues.len());
    let mut damps = Vec::with_capacity(eigenvalues.len());
    for l in eigenvalues {
        let r = l.norm();
        if !(r > 0.0) || !r.is_finite() {
            return Err(SampError::invalid(format!("cannot map eigenvalue {l} to parameters")));
        }
        let mut theta = l.arg();
        if theta <= -std::f64::consts::PI {
            theta = std::f64::consts::PI;
        }
        freqs.push(theta);
        damps.push(-r.ln());
    }
    Ok((freqs, damps))
}

pub fn vandermonde(eigenvalues: &[C64], n: usize) -> CMatrix {
    let mut v = CMatrix::zeros(n, eigenvalues.len());
    for (j, &z) in eigenvalues.iter().enumerate() {
        v.set_column(j, &linalg::vandermonde_column(z, n));
    }
    v
}

/// Least-squares amplitudes together with the condition number of the system.
#[derive(Debug, Clone)]
pub struct LeastSquaresFit {
    pub amplitudes: Vec<C64>,
    pub condition: f64,
}

/// `V⁺ y` through the truncated-SVD pseudo-inverse, without a conditioning check.
pub fn fit_amplitudes(y: &TimeSeries, eigenvalues: &[C64]) -> Result<LeastSquaresFit> {
    let n = y.len();
    if eigenvalues.is_empty() {
        return Ok(LeastSquaresFit { amplitudes: Vec::new(), condition: 1.0 });
    }
    if eigenvalues.len() > n {
        return Err(SampError::invalid("more poles than samples"));
    }
    let v = vandermonde(eigenvalues, n);
    let svd = linalg::thin_svd(&v)?;
    let cut = PINV_CUTOFF * svd.sigma[0];
    let yv = CVector::from_column_slice(y.samples());
    let coeffs = svd.u.adjoint() * &yv;
    let mut b = CVector::zeros(eigenvalues.len());
    for (k, &s) in svd.sigma.iter().enumerate() {
        if s > cut && s > 0.0 {
            b += svd.v.column(k) * (coeffs[k] / s);
        }
    }
    let smin = *svd.sigma.last().unwrap();
    let condition = if smin > 0.0 { svd.sigma[0] / smin } else { f64::INFINITY };
    Ok(LeastSquaresFit { amplitudes: b.iter().copied().collect(), condition })
}

pub fn amplitudes_least_squares(y: &TimeSeries, eigenvalues: &[C64]) -> Result<Vec<C64>> {
    let fit = fit_amplitudes(y, eigenvalues)?;
    if !(fit.condition <= MAX_VANDERMONDE_CONDITION) {
        return Err(SampError::IllConditioned(fit.condition));
    }
    Ok(fit.amplitudes)
}

/// `‖y − V b‖²`.
pub fn residual_energy(y: &TimeSeries, eigenvalues: &[C64], amplitudes: &[C64]) -> f64 {
    let mut powers: Vec<C64> = amplitudes.to_vec();
    let mut total = 0.0;
    for &yn in y.samples() {
        let mut model = C64::new(0.0, 0.0);
        for (p, &z) in powers.iter_mut().zip(eigenvalues) {
            model += *p;
            *p *= z;
        }
        total += (yn - model).norm_sqr();
    }
    total
}

/// Products of the first entry of each left mode with the first entry of the
/// matching right mode.
pub fn amplitudes_from_modes(decomp: &PencilDecomposition) -> Vec<C64> {
    (0..decomp.rank)
        .map(|i| decomp.left_modes[(0, i)] * decomp.right_modes[(i, 0)])
        .collect()
}

/// Same products as [`amplitudes_from_modes`], formed from the first row of
/// `UΣQ` and the first column of `Q⁻¹Vᴴ` without the full mode matrices.
pub fn amplitudes_from_factors(decomp: &PencilDecomposition) -> Vec<C64> {
    let r = decomp.rank;
    let u0: Vec<C64> = (0..r).map(|k| decomp.svd.u[(0, k)] * decomp.svd.sigma[k]).collect();
    let v0: Vec<C64> = (0..r).map(|k| decomp.svd.v[(0, k)].conj()).collect();
    (0..r)
        .map(|i| {
            let left: C64 = (0..r).map(|k| u0[k] * decomp.eig_vectors[(k, i)]).sum();
            let right: C64 = (0..r).map(|k| decomp.eig_vectors_inv[(i, k)] * v0[k]).sum();
            left * right
        })
        .collect()
}

/// Restricts all-mode estimates to the detected signal modes.
pub fn select_components(all: &ParameterEstimates, detection: &DetectionResult) -> ParameterEstimates {
    let pick = |i: usize| all.mode_indices.iter().position(|&m| m == i);
    let mut out = ParameterEstimates::empty();
    for &i in &detection.selected {
        let Some(k) = pick(i) else { continue };
        out.frequencies.push(all.frequencies[k]);
        out.dampings.push(all.dampings[k]);
        out.amplitudes.push(all.amplitudes[k]);
        let feature = detection
            .features
            .iter()
            .find(|f| f.index == i)
            .map_or(f64::NAN, |f| f.normalized);
        out.features.push(feature);
        out.mode_indices.push(i);
    }
    out.order = out.frequencies.len();
    out
}

fn all_modes(decomp: &PencilDecomposition, amplitudes: Vec<C64>) -> Result<ParameterEstimates> {
    let (frequencies, dampings) = poles_to_params(&decomp.eigenvalues)?;
    Ok(ParameterEstimates {
        features: vec![f64::NAN; decomp.rank],
        mode_indices: (0..decomp.rank).collect(),
        order: decomp.rank,
        frequencies,
        dampings,
        amplitudes,
    })
}

/// Rank used before the SAMP eigendecomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Truncation {
    #[default]
    EffectiveRank,
    /// Keep all `L` singular values.
    None,
    /// Drop the smallest `⌊L/2⌋` singular values.
    Half,
    Fixed(usize),
}

/// Tuning constants `c_i` of the amplitude-based threshold.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum ThresholdConstants {
    /// `10·√(N−L)` for every mode.
    #[default]
    Default,
    Uniform(f64),
    /// One value per mode, in descending-|λ| order; the last value repeats.
    PerMode(Vec<f64>),
}

impl ThresholdConstants {
    pub fn resolve(&self, rank: usize, mode_len: usize) -> Result<Vec<f64>> {
        match self {
            ThresholdConstants::Default => Ok(vec![detect::default_threshold_constant(mode_len); rank]),
            ThresholdConstants::Uniform(c) => Ok(vec![*c; rank]),
            ThresholdConstants::PerMode(v) => {
                let last = *v.last().ok_or_else(|| SampError::invalid("empty per-mode constants"))?;
                Ok((0..rank).map(|i| v.get(i).copied().unwrap_or(last)).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampConfig {
    pub pencil_parameter: Option<usize>,
    pub truncation: Truncation,
    pub grid: GridConfig,
    pub constants: ThresholdConstants,
    pub threshold_rule: ThresholdRule,
}

/// Everything SAMP computed on one signal.
#[derive(Debug, Clone)]
pub struct SampRun {
    pub estimates: ParameterEstimates,
    pub detection: DetectionResult,
    pub all_modes: ParameterEstimates,
    pub pencil_parameter: usize,
    pub rank: usize,
}

pub fn truncation_rank(sigma: &[f64], pencil_parameter: usize, rule: Truncation) -> Result<usize> {
    let r = match rule {
        Truncation::EffectiveRank => detect::detect_effective_rank(sigma)?,
        Truncation::None => sigma.len(),
        Truncation::Half => pencil_parameter - pencil_parameter / 2,
        Truncation::Fixed(r) => r,
    };
    Ok(r.min(sigma.len()))
}

fn resolve_pencil(y: &TimeSeries, over: Option<usize>) -> Result<usize> {
    if y.len() < 8 {
        return Err(SampError::invalid(format!("need at least 8 samples, got {}", y.len())));
    }
    match over {
        Some(l) => Ok(l),
        None => pencil::default_pencil_parameter(y.len()),
    }
}

pub fn samp_run(y: &TimeSeries, config: &SampConfig) -> Result<SampRun> {
    let l = resolve_pencil(y, config.pencil_parameter)?;
    let pair = pencil::build_hankel(y, l)?;
    let svd = pencil::svd_y0(&pair, None)?;
    let empty = |rank| SampRun {
        estimates: ParameterEstimates::empty(),
        detection: DetectionResult { features: Vec::new(), selected: Vec::new(), order: 0 },
        all_modes: ParameterEstimates::empty(),
        pencil_parameter: l,
        rank,
    };
    if !(svd.sigma[0] > 0.0) {
        return Ok(empty(0));
    }
    let mut rank = truncation_rank(&svd.sigma, l, config.truncation)?;
    if rank == 0 {
        return Ok(empty(0));
    }
    // An ill-conditioned eigenvector matrix is retried at lower rank.
    let decomp = loop {
        match pencil::decompose_with_svd(&pair, &svd, rank) {
            Ok(d) => break d,
            Err(SampError::IllConditioned(_)) | Err(SampError::Decomposition(_)) if rank > 1 => rank -= 1,
            Err(e) => return Err(e),
        }
    };
    let amps = amplitudes_from_modes(&decomp);
    let constants = config.constants.resolve(rank, decomp.mode_len)?;
    let detection =
        detect::detect_samp(&decomp, &amps, &config.grid, &constants, config.threshold_rule)?;
    let all = all_modes(&decomp, amps)?;
    let estimates = select_components(&all, &detection);
    Ok(SampRun { estimates, detection, all_modes: all, pencil_parameter: l, rank })
}

pub fn samp_pipeline(y: &TimeSeries, config: &SampConfig) -> Result<ParameterEstimates> {
    Ok(samp_run(y, config)?.estimates)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Detector {
    Sdd,
    Gap,
    EffectiveRank,
    Aic,
    Bic,
}

impl Detector {
    pub const ALL: [Detector; 5] =
        [Detector::Sdd, Detector::Gap, Detector::EffectiveRank, Detector::Aic, Detector::Bic];

    pub fn name(self) -> &'static str {
        match self {
            Detector::Sdd => "SDD",
            Detector::Gap => "GAP",
            Detector::EffectiveRank => "EFF",
            Detector::Aic => "AIC",
            Detector::Bic => "BIC",
        }
    }

    pub fn parse(s: &str) -> Option<Detector> {
        match s.to_ascii_uppercase().as_str() {
            "SDD" => Some(Detector::Sdd),
            "GAP" => Some(Detector::Gap),
            "EFF" | "EFFECTIVE" | "EFFECTIVE_RANK" => Some(Detector::EffectiveRank),
            "AIC" => Some(Detector::Aic),
            "BIC" => Some(Detector::Bic),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalConfig {
    pub pencil_parameter: Option<usize>,
    /// Significant decimal digits of the SDD detector.
    pub sdd_digits: u32,
    /// Largest order tried by AIC/BIC; `None` means `L`.
    pub ite_max_order: Option<usize>,
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        ClassicalConfig { pencil_parameter: None, sdd_digits: 3, ite_max_order: None }
    }
}

/// Model order chosen by a singular-value or information-criterion detector.
pub fn classical_order(y: &TimeSeries, config: &ClassicalConfig, detector: Detector) -> Result<usize> {
    let l = resolve_pencil(y, config.pencil_parameter)?;
    match detector {
        Detector::Aic | Detector::Bic => {
            let crit = if detector == Detector::Aic { InfoCriterion::Aic } else { InfoCriterion::Bic };
            detect::detect_ite(y, l, config.ite_max_order.unwrap_or(l).min(l), crit)
        }
        _ => {
            let sigma = linalg::singular_values(&pencil::build_hankel(y, l)?.y0)?;
            if !(sigma[0] > 0.0) {
                return Ok(0);
            }
            match detector {
                Detector::Sdd => detect::detect_sdd(&sigma, config.sdd_digits),
                Detector::Gap => detect::detect_gap(&sigma),
                _ => detect::detect_effective_rank(&sigma),
            }
        }
    }
}

/// Orders from several detectors on one signal, sharing the singular values
/// and the information-criterion residual sweep between detectors.
pub fn classical_orders(
    y: &TimeSeries,
    config: &ClassicalConfig,
    detectors: &[Detector],
) -> Result<Vec<Result<usize>>> {
    let l = resolve_pencil(y, config.pencil_parameter)?;
    let needs_sv = detectors.iter().any(|d| !matches!(d, Detector::Aic | Detector::Bic));
    let needs_ite = detectors.iter().any(|d| matches!(d, Detector::Aic | Detector::Bic));
    let sigma = if needs_sv { Some(linalg::singular_values(&pencil::build_hankel(y, l)?.y0)?) } else { None };
    let residuals = if needs_ite {
        Some(detect::ite_residual_variances(y, l, config.ite_max_order.unwrap_or(l).min(l))?)
    } else {
        None
    };
    Ok(detectors
        .iter()
        .map(|&d| match d {
            Detector::Aic | Detector::Bic => {
                let crit = if d == Detector::Aic { InfoCriterion::Aic } else { InfoCriterion::Bic };
                detect::argmin_order(&detect::ite_scores(residuals.as_ref().unwrap(), y.len(), crit))
            }
            _ => {
                let sigma = sigma.as_ref().unwrap();
                if !(sigma[0] > 0.0) {
                    return Ok(0);
                }
                match d {
                    Detector::Sdd => detect::detect_sdd(sigma, config.sdd_digits),
                    Detector::Gap => detect::detect_gap(sigma),
                    _ => detect::detect_effective_rank(sigma),
                }
            }
        })
        .collect())
}

/// Classical detect-then-estimate flow: order, truncate, decompose, poles and
/// least-squares amplitudes.
pub fn classical_fit(y: &TimeSeries, config: &ClassicalConfig, order: usize) -> Result<ParameterEstimates> {
    if order == 0 {
        return Ok(ParameterEstimates::empty());
    }
    let l = resolve_pencil(y, config.pencil_parameter)?;
    let pair = pencil::build_hankel(y, l)?;
    let decomp = pencil::decompose(&pair, order)?;
    let amps = amplitudes_least_squares(y, &decomp.eigenvalues)?;
    all_modes(&decomp, amps)
}

pub fn classical_pipeline(y: &TimeSeries, config: &ClassicalConfig, detector: Detector) -> Result<ParameterEstimates> {
    let order = classical_order(y, config, detector)?;
    classical_fit(y, config, order)
}
