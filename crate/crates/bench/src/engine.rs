//! Deterministic Monte-Carlo engine.
//!
//! Trial `t` at sweep point `k` draws its noise from the seed
//! `seed + k·trials + t`, so results do not depend on thread scheduling. The
//! same noisy signal is shared by every method within a trial.

use std::time::Instant;

use rayon::prelude::*;
use samp_core::estimate::{self, ClassicalConfig, Detector, ParameterEstimates, SampConfig};
use samp_core::signal::TimeSeries;
use samp_core::signal::{self, NoiseModel};

use crate::crb;
use crate::error::{BenchError, Result};
use crate::metrics::{self, Penalty, TrialScore};
use crate::scenario::{Scenario, Sweep, SweepAxis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Samp,
    Classical(Detector),
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Samp,
        Method::Classical(Detector::Sdd),
        Method::Classical(Detector::Gap),
        Method::Classical(Detector::EffectiveRank),
        Method::Classical(Detector::Aic),
        Method::Classical(Detector::Bic),
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Samp => "SAMP",
            Method::Classical(d) => d.name(),
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        if s.eq_ignore_ascii_case("samp") {
            Some(Method::Samp)
        } else {
            Detector::parse(s).map(Method::Classical)
        }
    }

    fn is_ite(self) -> bool {
        matches!(self, Method::Classical(Detector::Aic | Detector::Bic))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub sweep: Sweep,
    pub trials: usize,
    pub methods: Vec<Method>,
    /// Noise template; its variance is replaced at every sweep point.
    pub noise: NoiseModel,
    pub seed: u64,
    pub penalty: Penalty,
    pub samp: SampConfig,
    pub classical: ClassicalConfig,
}

impl ExperimentConfig {
    pub const DEFAULT_TRIALS: usize = 500;

    pub fn new(scenario: Scenario, sweep: Sweep) -> Self {
        ExperimentConfig {
            scenario,
            sweep,
            trials: Self::DEFAULT_TRIALS,
            methods: Method::ALL.to_vec(),
            noise: NoiseModel::gaussian(1.0),
            seed: 0,
            penalty: Penalty::SweepScaled,
            samp: SampConfig::default(),
            classical: ClassicalConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.sweep.validate()?;
        if self.trials == 0 {
            return Err(BenchError::config("trials must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(BenchError::config("no methods selected"));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(BenchError::config(format!(
                    "method {} listed twice",
                    m.name()
                )));
            }
        }
        if let Penalty::Divisor(s) = self.penalty {
            if !(s.is_finite() && s > 0.0) {
                return Err(BenchError::config("penalty divisor must be positive"));
            }
        }
        self.samp.grid.validate()?;
        for k in 0..self.sweep.grid.len() {
            let p = self.sweep.point(&self.scenario, k);
            self.scenario.spec(p.samples, p.separation)?;
        }
        Ok(())
    }

    pub fn trial_seed(&self, point: usize, trial: usize) -> u64 {
        self.seed
            .wrapping_add((point as u64).wrapping_mul(self.trials as u64))
            .wrapping_add(trial as u64)
    }
}

/// What one method produced on one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    /// `None` when the pipeline failed.
    pub order: Option<usize>,
    pub score: TrialScore,
    pub seconds: f64,
}

/// Per-method aggregates over the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSeries {
    pub method: Method,
    pub pd: Vec<f64>,
    pub pd_ci: Vec<f64>,
    /// RMSE of each true frequency, `[point][component]`.
    pub rmse_per_component: Vec<Vec<f64>>,
    /// Mean over components of the per-component RMSE.
    pub rmse: Vec<f64>,
    /// Bias of each true frequency over order-matched trials.
    pub bias_per_component: Vec<Vec<f64>>,
    /// Mean over components of `|bias|`.
    pub mean_abs_bias: Vec<f64>,
    pub mean_seconds: Vec<f64>,
    pub failures: Vec<usize>,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub axis: SweepAxis,
    pub x: Vec<f64>,
    pub trials: usize,
    pub methods: Vec<MethodSeries>,
    /// `CRB(θ_i)` per point and component.
    pub crb_per_component: Vec<Vec<f64>>,
    /// Mean over components of `√CRB(θ_i)`, comparable to `rmse`.
    pub crb: Vec<f64>,
}

impl MetricSeries {
    pub fn method(&self, m: Method) -> Option<&MethodSeries> {
        self.methods.iter().find(|s| s.method == m)
    }

    pub fn total_failures(&self) -> usize {
        self.methods.iter().flat_map(|m| &m.failures).sum()
    }
}

struct PointSetup {
    truth: Vec<f64>,
    clean: TimeSeries,
    noise: NoiseModel,
    penalty_sq: Option<f64>,
}

fn setup(config: &ExperimentConfig, k: usize) -> Result<(PointSetup, Vec<f64>)> {
    let p = config.sweep.point(&config.scenario, k);
    let spec = config.scenario.spec(p.samples, p.separation)?;
    let variance = signal::noise_variance_for_snr(&spec, p.snr_db);
    let scale = if config.sweep.axis == SweepAxis::Samples {
        p.samples
    } else {
        config.scenario.samples
    };
    let crb =
        crb::crb_frequencies(&spec, variance).unwrap_or_else(|_| vec![f64::NAN; spec.order()]);
    Ok((
        PointSetup {
            truth: spec.components().iter().map(|c| c.frequency).collect(),
            clean: signal::synthesize(&spec),
            noise: config.noise.with_variance(variance),
            penalty_sq: config.penalty.squared(scale as f64),
        },
        crb,
    ))
}

fn frequencies(e: &ParameterEstimates) -> &[f64] {
    &e.frequencies
}

fn run_trial(
    config: &ExperimentConfig,
    setup: &PointSetup,
    seed: u64,
) -> Result<Vec<MethodOutcome>> {
    let y = signal::apply_noise(&setup.clean, &setup.noise, seed)?;
    let truth_order = setup.truth.len();
    let score_est = |est: Option<&ParameterEstimates>| {
        metrics::match_and_score(est.map(frequencies), &setup.truth, setup.penalty_sq)
    };

    let mut detectors: [Vec<Detector>; 2] = [Vec::new(), Vec::new()];
    for m in &config.methods {
        if let Method::Classical(d) = m {
            detectors[usize::from(m.is_ite())].push(*d);
        }
    }
    let mut classical = Vec::new();
    for group in detectors.iter().filter(|g| !g.is_empty()) {
        let start = Instant::now();
        let orders = estimate::classical_orders(&y, &config.classical, group);
        let seconds = start.elapsed().as_secs_f64();
        match orders {
            Ok(orders) => classical.extend(
                group
                    .iter()
                    .copied()
                    .zip(orders)
                    .map(|(d, o)| (d, o.ok(), seconds)),
            ),
            Err(_) => classical.extend(group.iter().map(|&d| (d, None, seconds))),
        }
    }

    let out = config
        .methods
        .iter()
        .map(|&m| match m {
            Method::Samp => {
                let start = Instant::now();
                let est = estimate::samp_pipeline(&y, &config.samp).ok();
                let seconds = start.elapsed().as_secs_f64();
                MethodOutcome {
                    order: est.as_ref().map(|e| e.order),
                    score: score_est(est.as_ref()),
                    seconds,
                }
            }
            Method::Classical(d) => {
                let &(_, order, detect_seconds) = classical
                    .iter()
                    .find(|c| c.0 == d)
                    .expect("every detector ran");
                // Estimates only matter for the score when the order is right.
                if order != Some(truth_order) {
                    return MethodOutcome {
                        order,
                        score: score_est(None),
                        seconds: detect_seconds,
                    };
                }
                let start = Instant::now();
                let est = estimate::classical_fit(&y, &config.classical, truth_order).ok();
                let seconds = detect_seconds + start.elapsed().as_secs_f64();
                let order = est.as_ref().map(|e| e.order);
                MethodOutcome {
                    order,
                    score: score_est(est.as_ref()),
                    seconds,
                }
            }
        })
        .collect();
    Ok(out)
}

fn mean_finite(v: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = v
        .filter(|x| x.is_finite())
        .fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

/// Runs every trial at every sweep point and aggregates the metrics.
pub fn run_monte_carlo(config: &ExperimentConfig) -> Result<MetricSeries> {
    config.validate()?;
    let points = config.sweep.grid.len();
    let m = config.scenario.order;
    let mut per_point: Vec<Vec<Vec<MethodOutcome>>> = Vec::with_capacity(points);
    let mut crb_per_component = Vec::with_capacity(points);
    for k in 0..points {
        let (setup, crb) = setup(config, k)?;
        let trials: Vec<Vec<MethodOutcome>> = (0..config.trials)
            .into_par_iter()
            .map(|t| run_trial(config, &setup, config.trial_seed(k, t)))
            .collect::<Result<_>>()?;
        per_point.push(trials);
        crb_per_component.push(crb);
    }

    let mut methods = Vec::with_capacity(config.methods.len());
    for (mi, &method) in config.methods.iter().enumerate() {
        let mut s = MethodSeries {
            method,
            pd: Vec::new(),
            pd_ci: Vec::new(),
            rmse_per_component: Vec::new(),
            rmse: Vec::new(),
            bias_per_component: Vec::new(),
            mean_abs_bias: Vec::new(),
            mean_seconds: Vec::new(),
            failures: Vec::new(),
            auc: f64::NAN,
        };
        for trials in &per_point {
            let outcomes: Vec<&MethodOutcome> = trials.iter().map(|t| &t[mi]).collect();
            let orders: Vec<usize> = outcomes
                .iter()
                .map(|o| o.order.unwrap_or(usize::MAX))
                .collect();
            let pd = metrics::detection_probability(&orders, m)?;
            s.pd.push(pd);
            s.pd_ci.push(metrics::binomial_halfwidth(pd, config.trials));
            s.failures
                .push(outcomes.iter().filter(|o| o.order.is_none()).count());
            let rmse: Vec<f64> = (0..m)
                .map(|i| mean_finite(outcomes.iter().map(|o| o.score.squared[i])).sqrt())
                .collect();
            let bias: Vec<f64> = (0..m)
                .map(|i| {
                    mean_finite(
                        outcomes
                            .iter()
                            .filter_map(|o| o.score.signed.as_ref().map(|v| v[i])),
                    )
                })
                .collect();
            s.rmse.push(mean_finite(rmse.iter().copied()));
            s.mean_abs_bias
                .push(mean_finite(bias.iter().map(|b| b.abs())));
            s.rmse_per_component.push(rmse);
            s.bias_per_component.push(bias);
            s.mean_seconds
                .push(mean_finite(outcomes.iter().map(|o| o.seconds)));
        }
        if points >= 2 {
            s.auc = metrics::auc(&config.sweep.grid, &s.pd)?;
        }
        methods.push(s);
    }

    let crb = crb_per_component
        .iter()
        .map(|c| mean_finite(c.iter().map(|v| v.sqrt())))
        .collect();
    Ok(MetricSeries {
        axis: config.sweep.axis,
        x: config.sweep.grid.clone(),
        trials: config.trials,
        methods,
        crb_per_component,
        crb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(trials: usize) -> ExperimentConfig {
        let mut c =
            ExperimentConfig::new(Scenario::new(2, false), Sweep::snr(vec![0.0, 10.0, 20.0]));
        c.trials = trials;
        c.seed = 3;
        c
    }

    #[test]
    fn noiseless_equivalent_detects_everywhere() {
        let mut c = small(1);
        c.sweep = Sweep::snr(vec![180.0, 200.0]);
        c.methods = vec![Method::Samp];
        let s = run_monte_carlo(&c).unwrap();
        assert_eq!(s.methods[0].pd, vec![1.0, 1.0]);
        assert!(s.methods[0].rmse.iter().all(|r| *r < 1e-6));
        assert_eq!(s.methods[0].auc, 1.0);
    }

    #[test]
    fn runs_are_reproducible_and_seeded() {
        let c = small(6);
        let a = run_monte_carlo(&c).unwrap();
        let b = run_monte_carlo(&c).unwrap();
        let strip = |s: &MetricSeries| {
            let mut s = s.clone();
            s.methods.iter_mut().for_each(|m| m.mean_seconds.clear());
            format!("{s:?}")
        };
        assert_eq!(strip(&a), strip(&b));
        assert_eq!(a.methods.len(), 6);
        assert!(a.crb.iter().all(|v| v.is_finite() && *v > 0.0));
        assert!(a.crb[0] > a.crb[2]);
        let mut d = c.clone();
        d.seed = 4;
        assert_ne!(strip(&run_monte_carlo(&d).unwrap()), strip(&a));
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let c = small(5);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let three = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let a = one.install(|| run_monte_carlo(&c)).unwrap();
        let b = three.install(|| run_monte_carlo(&c)).unwrap();
        for (x, y) in a.methods.iter().zip(&b.methods) {
            assert_eq!((&x.pd, &x.rmse, &x.failures), (&y.pd, &y.rmse, &y.failures));
        }
    }

    #[test]
    fn seeds_are_distinct_across_points_and_trials() {
        let c = small(4);
        let mut seeds: Vec<u64> = (0..3)
            .flat_map(|k| (0..4).map(move |t| (k, t)))
            .map(|(k, t)| c.trial_seed(k, t))
            .collect();
        seeds.sort();
        seeds.dedup();
        assert_eq!(seeds.len(), 12);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = small(0);
        assert!(run_monte_carlo(&c).is_err());
        c.trials = 1;
        c.methods = vec![Method::Samp, Method::Samp];
        assert!(c.validate().is_err());
        c.methods.clear();
        assert!(c.validate().is_err());
        assert_eq!(
            Method::parse("eff"),
            Some(Method::Classical(Detector::EffectiveRank))
        );
        assert_eq!(Method::parse("Samp"), Some(Method::Samp));
        assert_eq!(Method::parse("evt"), None);
    }
}
