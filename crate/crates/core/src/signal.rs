//! Signal model: damped complex exponentials plus additive noise.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SampError};
use crate::linalg::C64;

/// One term `b · e^{(−α + jθ) n}` of the signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialComponent {
    pub amplitude: C64,
    /// Damping factor α ≥ 0 in nepers per sample.
    pub damping: f64,
    /// Normalized frequency θ in rad/sample, in (−π, π].
    pub frequency: f64,
}

impl ExponentialComponent {
    pub fn new(amplitude: C64, damping: f64, frequency: f64) -> Result<Self> {
        if !(damping.is_finite() && damping >= 0.0) {
            return Err(SampError::invalid(format!("damping must be finite and >= 0, got {damping}")));
        }
        if !(frequency.is_finite() && frequency > -PI - 1e-12 && frequency <= PI + 1e-12) {
            return Err(SampError::invalid(format!("frequency {frequency} outside (-pi, pi]")));
        }
        if !(amplitude.re.is_finite() && amplitude.im.is_finite()) {
            return Err(SampError::invalid("amplitude must be finite"));
        }
        Ok(Self { amplitude, damping, frequency })
    }

    pub fn undamped(amplitude: C64, frequency: f64) -> Result<Self> {
        Self::new(amplitude, 0.0, frequency)
    }

    /// The signal pole `z = e^{−α + jθ}`.
    pub fn pole(&self) -> C64 {
        C64::new(-self.damping, self.frequency).exp()
    }
}

/// Ground-truth description of a sampled signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    components: Vec<ExponentialComponent>,
    sample_count: usize,
}

impl SignalSpec {
    pub fn new(components: Vec<ExponentialComponent>, sample_count: usize) -> Result<Self> {
        let m = components.len();
        if m == 0 {
            return Err(SampError::invalid("a signal needs at least one component"));
        }
        if sample_count <= 2 * m {
            return Err(SampError::invalid(format!(
                "need N > 2M for a feasible pencil, got N = {sample_count}, M = {m}"
            )));
        }
        let poles: Vec<C64> = components.iter().map(ExponentialComponent::pole).collect();
        for i in 0..m {
            for k in (i + 1)..m {
                if (poles[i] - poles[k]).norm() <= 1e-12 {
                    return Err(SampError::DuplicatePoles(i, k));
                }
            }
        }
        Ok(Self { components, sample_count })
    }

    pub fn components(&self) -> &[ExponentialComponent] {
        &self.components
    }

    pub fn order(&self) -> usize {
        self.components.len()
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn poles(&self) -> Vec<C64> {
        self.components.iter().map(ExponentialComponent::pole).collect()
    }

    pub fn amplitudes(&self) -> Vec<C64> {
        self.components.iter().map(|c| c.amplitude).collect()
    }

    /// Total signal power `Σ |b_i|²`.
    pub fn power(&self) -> f64 {
        self.components.iter().map(|c| c.amplitude.norm_sqr()).sum()
    }
}

/// Ordered complex samples `y(0), …, y(N−1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries(pub Vec<C64>);

impl TimeSeries {
    pub fn new(samples: Vec<C64>) -> Self {
        Self(samples)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![C64::new(0.0, 0.0); len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn samples(&self) -> &[C64] {
        &self.0
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self(self.0.iter().map(|&v| v * c).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    ComplexGaussian,
    BiNormal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub variance: f64,
    /// Probability of drawing from the narrow mixture component.
    pub binormal_threshold: f64,
    /// Standard-deviation ratio of the wide to the narrow component.
    pub binormal_scale_ratio: f64,
}

impl NoiseModel {
    pub const DEFAULT_BINORMAL_THRESHOLD: f64 = 0.85;
    pub const DEFAULT_BINORMAL_SCALE_RATIO: f64 = 3.0;

    pub fn gaussian(variance: f64) -> Self {
        Self {
            kind: NoiseKind::ComplexGaussian,
            variance,
            binormal_threshold: Self::DEFAULT_BINORMAL_THRESHOLD,
            binormal_scale_ratio: Self::DEFAULT_BINORMAL_SCALE_RATIO,
        }
    }

    pub fn binormal(variance: f64) -> Self {
        Self { kind: NoiseKind::BiNormal, ..Self::gaussian(variance) }
    }

    pub fn with_kind(self, kind: NoiseKind) -> Self {
        Self { kind, ..self }
    }

    pub fn with_variance(self, variance: f64) -> Self {
        Self { variance, ..self }
    }

    fn validate(&self) -> Result<()> {
        if !(self.variance.is_finite() && self.variance > 0.0) {
            return Err(SampError::invalid(format!(
                "noise variance must be positive, got {}",
                self.variance
            )));
        }
        if self.kind == NoiseKind::BiNormal {
            let r = self.binormal_threshold;
            if !(r > 0.0 && r < 1.0) {
                return Err(SampError::invalid(format!("bi-normal threshold {r} outside (0, 1)")));
            }
            if !(self.binormal_scale_ratio.is_finite() && self.binormal_scale_ratio > 0.0) {
                return Err(SampError::invalid("bi-normal scale ratio must be positive"));
            }
        }
        Ok(())
    }

    /// Variances of the narrow and wide components; they mix to `variance`.
    pub fn binormal_component_variances(&self) -> (f64, f64) {
        let r = self.binormal_threshold;
        let k2 = self.binormal_scale_ratio * self.binormal_scale_ratio;
        let narrow = self.variance / (r + (1.0 - r) * k2);
        (narrow, narrow * k2)
    }

    /// Draws `len` noise samples.
    pub fn sample<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Result<Vec<C64>> {
        self.validate()?;
        let out = match self.kind {
            NoiseKind::ComplexGaussian => {
                let s = (self.variance / 2.0).sqrt();
                (0..len).map(|_| circular_gaussian(rng, s)).collect()
            }
            NoiseKind::BiNormal => {
                let (narrow, wide) = self.binormal_component_variances();
                let (sn, sw) = ((narrow / 2.0).sqrt(), (wide / 2.0).sqrt());
                (0..len)
                    .map(|_| {
                        let p: f64 = rng.random();
                        let s = if p < self.binormal_threshold { sn } else { sw };
                        circular_gaussian(rng, s)
                    })
                    .collect()
            }
        };
        Ok(out)
    }
}

fn circular_gaussian<R: Rng + ?Sized>(rng: &mut R, per_axis_std: f64) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * per_axis_std, im * per_axis_std)
}

/// Seeded generator used for every noise draw in the crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Noiseless samples `x(n) = Σ_i b_i e^{(−α_i + jθ_i) n}`.
pub fn synthesize(spec: &SignalSpec) -> TimeSeries {
    let n = spec.sample_count();
    let mut out = vec![C64::new(0.0, 0.0); n];
    for c in spec.components() {
        let s = C64::new(-c.damping, c.frequency);
        for (k, v) in out.iter_mut().enumerate() {
            // Direct exponentiation avoids drift from repeated multiplication.
            *v += c.amplitude * (s * k as f64).exp();
        }
    }
    TimeSeries(out)
}

/// Returns `x + w` with `w` drawn from `model` using a generator seeded by `seed`.
pub fn apply_noise(x: &TimeSeries, model: &NoiseModel, seed: u64) -> Result<TimeSeries> {
    let mut rng = rng_from_seed(seed);
    apply_noise_with(x, model, &mut rng)
}

pub fn apply_noise_with<R: Rng + ?Sized>(
    x: &TimeSeries,
    model: &NoiseModel,
    rng: &mut R,
) -> Result<TimeSeries> {
    let w = model.sample(x.len(), rng)?;
    Ok(TimeSeries(x.0.iter().zip(w).map(|(a, b)| a + b).collect()))
}

/// Noise variance giving a total SNR of `snr_db` (SNR = Σ|b_i|² / σ_w²).
pub fn noise_variance_for_snr(spec: &SignalSpec, snr_db: f64) -> f64 {
    spec.power() / 10f64.powf(snr_db / 10.0)
}

/// Per-component SNR `|b_i|² / σ_w²`.
pub fn component_snr(component: &ExponentialComponent, variance: f64) -> f64 {
    component.amplitude.norm_sqr() / variance
}
