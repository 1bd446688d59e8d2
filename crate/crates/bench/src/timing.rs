//! Wall-clock studies: per-method pipeline time against signal length, and the
//! two amplitude extractors at full rank.

use std::time::Instant;

use samp_core::estimate::{self, ClassicalConfig, SampConfig};
use samp_core::pencil;
use samp_core::signal::{self, NoiseModel, TimeSeries};
use samp_core::C64;

use crate::engine::Method;
use crate::error::{BenchError, Result};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq)]
pub struct TimingConfig {
    pub scenario: Scenario,
    pub samples: Vec<usize>,
    pub methods: Vec<Method>,
    pub warmup: usize,
    pub reps: usize,
    pub seed: u64,
    pub samp: SampConfig,
    pub classical: ClassicalConfig,
}

impl TimingConfig {
    pub fn new(scenario: Scenario, samples: Vec<usize>) -> Self {
        TimingConfig {
            scenario,
            samples,
            methods: Method::ALL.to_vec(),
            warmup: 1,
            reps: 5,
            seed: 0,
            samp: SampConfig::default(),
            classical: ClassicalConfig::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.samples.is_empty() || self.methods.is_empty() {
            return Err(BenchError::config(
                "timing needs at least one length and one method",
            ));
        }
        if self.reps == 0 {
            return Err(BenchError::config("reps must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub samples: usize,
    pub method: Method,
    /// Median seconds per invocation; NaN when every repetition failed.
    pub seconds: f64,
    pub failures: usize,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median over `reps` timed calls after `warmup` untimed ones.
fn time_call<T, E>(
    warmup: usize,
    reps: usize,
    mut f: impl FnMut() -> std::result::Result<T, E>,
) -> (f64, usize) {
    for _ in 0..warmup {
        let _ = f();
    }
    let mut times = Vec::with_capacity(reps);
    let mut failures = 0;
    for _ in 0..reps {
        let start = Instant::now();
        let ok = f().is_ok();
        let t = start.elapsed().as_secs_f64();
        if ok {
            times.push(t);
        } else {
            failures += 1;
        }
    }
    (median(times), failures)
}

fn noisy_signal(scenario: &Scenario, n: usize, seed: u64) -> Result<TimeSeries> {
    let spec = scenario.spec(n, None)?;
    let variance = signal::noise_variance_for_snr(&spec, scenario.snr_db);
    Ok(signal::apply_noise(
        &signal::synthesize(&spec),
        &NoiseModel::gaussian(variance),
        seed,
    )?)
}

/// Times each method's full pipeline on one noisy signal per length. Runs
/// serially so measurements do not compete for cores.
pub fn time_methods(config: &TimingConfig) -> Result<Vec<TimingRow>> {
    config.validate()?;
    let mut rows = Vec::new();
    for (k, &n) in config.samples.iter().enumerate() {
        let y = noisy_signal(&config.scenario, n, config.seed.wrapping_add(k as u64))?;
        for &method in &config.methods {
            let (seconds, failures) = match method {
                Method::Samp => time_call(config.warmup, config.reps, || {
                    estimate::samp_pipeline(&y, &config.samp)
                }),
                Method::Classical(d) => time_call(config.warmup, config.reps, || {
                    estimate::classical_pipeline(&y, &config.classical, d)
                }),
            };
            rows.push(TimingRow {
                samples: n,
                method,
                seconds,
                failures,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmplitudeMethod {
    /// First entries of the left and right modes.
    Modes,
    LeastSquares,
}

impl AmplitudeMethod {
    pub const ALL: [AmplitudeMethod; 2] = [AmplitudeMethod::Modes, AmplitudeMethod::LeastSquares];

    pub fn name(self) -> &'static str {
        match self {
            AmplitudeMethod::Modes => "modes",
            AmplitudeMethod::LeastSquares => "least_squares",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeStudyConfig {
    pub scenario: Scenario,
    pub samples: Vec<usize>,
    pub trials: usize,
    pub reps: usize,
    pub seed: u64,
}

impl AmplitudeStudyConfig {
    pub const DEFAULT_SAMPLES: [usize; 4] = [100, 200, 400, 600];

    pub fn new(scenario: Scenario, samples: Vec<usize>) -> Self {
        AmplitudeStudyConfig {
            scenario,
            samples,
            trials: 20,
            reps: 3,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.samples.is_empty() {
            return Err(BenchError::config(
                "amplitude study needs at least one length",
            ));
        }
        if self.trials == 0 || self.reps == 0 {
            return Err(BenchError::config("trials and reps must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeRow {
    pub samples: usize,
    pub method: AmplitudeMethod,
    /// Sum over true components of the amplitude RMSE.
    pub rmse: f64,
    /// Median seconds of the amplitude step alone.
    pub seconds: f64,
    pub failures: usize,
}

/// Amplitude error of each true component against the estimate at the
/// nearest estimated pole.
fn amplitude_errors(truth: &[(C64, C64)], poles: &[C64], amps: &[C64]) -> Vec<f64> {
    truth
        .iter()
        .map(|&(z, b)| {
            let k = (0..poles.len())
                .min_by(|&a, &c| (poles[a] - z).norm().total_cmp(&(poles[c] - z).norm()))
                .expect("at least one pole");
            (amps[k] - b).norm_sqr()
        })
        .collect()
}

/// Compares mode-based and least-squares amplitudes at full rank `r = L`.
/// Both methods reuse one decomposition per trial; only the amplitude step is
/// timed.
pub fn amplitude_study(config: &AmplitudeStudyConfig) -> Result<Vec<AmplitudeRow>> {
    config.validate()?;
    let mut rows = Vec::new();
    for (k, &n) in config.samples.iter().enumerate() {
        let spec = config.scenario.spec(n, None)?;
        let truth: Vec<(C64, C64)> = spec.poles().into_iter().zip(spec.amplitudes()).collect();
        let clean = signal::synthesize(&spec);
        let noise = NoiseModel::gaussian(signal::noise_variance_for_snr(
            &spec,
            config.scenario.snr_db,
        ));
        let l = pencil::default_pencil_parameter(n)?;
        let m = truth.len();
        let mut sq = [vec![0.0; m], vec![0.0; m]];
        let mut times: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        let mut counted = [0usize; 2];
        let mut failures = [0usize; 2];
        for t in 0..config.trials {
            let seed = config
                .seed
                .wrapping_add((k as u64).wrapping_mul(config.trials as u64))
                .wrapping_add(t as u64);
            let y = signal::apply_noise(&clean, &noise, seed)?;
            let pair = pencil::build_hankel(&y, l)?;
            let svd = pencil::svd_y0(&pair, None)?;
            let decomp = (0..=l.saturating_sub(m))
                .find_map(|drop| pencil::decompose_with_svd(&pair, &svd, l - drop).ok());
            let Some(decomp) = decomp else {
                failures.iter_mut().for_each(|f| *f += 1);
                continue;
            };
            for (mi, method) in AmplitudeMethod::ALL.iter().enumerate() {
                let run = || -> Result<Vec<C64>> {
                    Ok(match method {
                        AmplitudeMethod::Modes => estimate::amplitudes_from_factors(&decomp),
                        AmplitudeMethod::LeastSquares => {
                            estimate::fit_amplitudes(&y, &decomp.eigenvalues)?.amplitudes
                        }
                    })
                };
                let mut last = None;
                let mut reps = Vec::with_capacity(config.reps);
                for _ in 0..config.reps {
                    let start = Instant::now();
                    let out = run();
                    reps.push(start.elapsed().as_secs_f64());
                    last = Some(out);
                }
                match last.expect("reps >= 1") {
                    Ok(amps) => {
                        times[mi].push(median(reps));
                        for (acc, e) in sq[mi].iter_mut().zip(amplitude_errors(
                            &truth,
                            &decomp.eigenvalues,
                            &amps,
                        )) {
                            *acc += e;
                        }
                        counted[mi] += 1;
                    }
                    Err(_) => failures[mi] += 1,
                }
            }
        }
        for (mi, &method) in AmplitudeMethod::ALL.iter().enumerate() {
            let rmse = if counted[mi] == 0 {
                f64::NAN
            } else {
                sq[mi].iter().map(|s| (s / counted[mi] as f64).sqrt()).sum()
            };
            rows.push(AmplitudeRow {
                samples: n,
                method,
                rmse,
                seconds: median(std::mem::take(&mut times[mi])),
                failures: failures[mi],
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(Vec::new()).is_nan());
    }

    #[test]
    fn timing_reports_every_method_and_length() {
        let mut c = TimingConfig::new(Scenario::new(2, false), vec![40, 60]);
        c.reps = 1;
        c.warmup = 0;
        let rows = time_methods(&c).unwrap();
        assert_eq!(rows.len(), 12);
        assert!(rows.iter().all(|r| r.failures == 0 && r.seconds >= 0.0));
        assert_eq!(rows[6].samples, 60);
    }

    #[test]
    fn amplitude_study_rows_and_accuracy() {
        let mut s = Scenario::new(2, false);
        s.snr_db = 60.0;
        let mut c = AmplitudeStudyConfig::new(s, vec![60, 90]);
        c.trials = 3;
        c.reps = 1;
        let rows = amplitude_study(&c).unwrap();
        assert_eq!(rows.len(), 4);
        for r in &rows {
            assert_eq!(r.failures, 0);
            assert!(r.rmse < 1e-2, "{r:?}");
        }
    }

    #[test]
    fn nearest_pole_error() {
        let truth = [(C64::new(1.0, 0.0), C64::new(2.0, 0.0))];
        let poles = [C64::new(0.0, 1.0), C64::new(0.99, 0.0)];
        let amps = [C64::new(9.0, 0.0), C64::new(2.0, 1.0)];
        assert_eq!(amplitude_errors(&truth, &poles, &amps), vec![1.0]);
    }
}
