//! Run configuration files: TOML sections with `key = value` pairs.
//!
//! Unknown sections and keys are rejected. `--set section.key=value` flags
//! are applied on top of the file before validation.

use std::path::Path;

use samp_bench::metrics::Penalty;
use samp_bench::{ExperimentConfig, Method, Scenario, Sweep};
use samp_core::detect::{log_spaced_radii, GridConfig, ThresholdRule};
use samp_core::estimate::{ClassicalConfig, SampConfig, ThresholdConstants, Truncation};
use samp_core::signal::{NoiseKind, NoiseModel};
use serde::Deserialize;
use toml::{Table, Value};

use crate::error::{CliError, Result};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub experiment: Option<ExperimentSection>,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub samp: SampSection,
    #[serde(default)]
    pub classical: ClassicalSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default)]
    pub damped: bool,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_base_frequency")]
    pub base_frequency: f64,
    pub separation: Option<f64>,
    #[serde(default = "default_snr_db")]
    pub snr_db: f64,
    #[serde(default = "default_sweep")]
    pub sweep: String,
    pub grid: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub step: Option<f64>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub methods: Option<Vec<String>>,
    #[serde(default = "default_penalty")]
    pub penalty: String,
    pub penalty_divisor: Option<f64>,
}

fn default_order() -> usize {
    2
}
fn default_samples() -> usize {
    71
}
fn default_base_frequency() -> f64 {
    2.0
}
fn default_snr_db() -> f64 {
    10.0
}
fn default_sweep() -> String {
    "snr_db".into()
}
fn default_penalty() -> String {
    "sweep".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default = "default_noise_kind")]
    pub kind: String,
    #[serde(default = "default_binormal_threshold")]
    pub binormal_threshold: f64,
    #[serde(default = "default_binormal_scale_ratio")]
    pub binormal_scale_ratio: f64,
}

fn default_noise_kind() -> String {
    "normal".into()
}
fn default_binormal_threshold() -> f64 {
    NoiseModel::DEFAULT_BINORMAL_THRESHOLD
}
fn default_binormal_scale_ratio() -> f64 {
    NoiseModel::DEFAULT_BINORMAL_SCALE_RATIO
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            kind: default_noise_kind(),
            binormal_threshold: default_binormal_threshold(),
            binormal_scale_ratio: default_binormal_scale_ratio(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampSection {
    pub pencil_parameter: Option<usize>,
    #[serde(default = "default_truncation")]
    pub truncation: String,
    pub truncation_rank: Option<usize>,
    #[serde(default = "default_freq_oversample")]
    pub freq_oversample: usize,
    #[serde(default = "default_radius_log_min")]
    pub radius_log_min: f64,
    #[serde(default = "default_radius_count")]
    pub radius_count: usize,
    #[serde(default = "default_true")]
    pub refine: bool,
    pub threshold_constant: Option<f64>,
    #[serde(default = "default_threshold_rule")]
    pub threshold_rule: String,
}

fn default_truncation() -> String {
    "effective_rank".into()
}
fn default_freq_oversample() -> usize {
    8
}
fn default_radius_log_min() -> f64 {
    -0.15
}
fn default_radius_count() -> usize {
    15
}
fn default_true() -> bool {
    true
}
fn default_threshold_rule() -> String {
    "literal".into()
}

impl Default for SampSection {
    fn default() -> Self {
        SampSection {
            pencil_parameter: None,
            truncation: default_truncation(),
            truncation_rank: None,
            freq_oversample: default_freq_oversample(),
            radius_log_min: default_radius_log_min(),
            radius_count: default_radius_count(),
            refine: true,
            threshold_constant: None,
            threshold_rule: default_threshold_rule(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalSection {
    pub pencil_parameter: Option<usize>,
    #[serde(default = "default_sdd_digits")]
    pub sdd_digits: u32,
    pub ite_max_order: Option<usize>,
}

fn default_sdd_digits() -> u32 {
    3
}

impl Default for ClassicalSection {
    fn default() -> Self {
        ClassicalSection { pencil_parameter: None, sdd_digits: default_sdd_digits(), ite_max_order: None }
    }
}

fn parse_value(raw: &str) -> Value {
    match toml::from_str::<Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => Value::String(raw.to_string()),
    }
}

/// Applies one `section.key=value` override.
fn apply_override(table: &mut Table, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::input(format!("override '{spec}' is not of the form section.key=value")))?;
    let (section, key) = path
        .trim()
        .split_once('.')
        .ok_or_else(|| CliError::input(format!("override key '{}' needs a section, e.g. samp.{}", path.trim(), path.trim())))?;
    let entry = table.entry(section.to_string()).or_insert_with(|| Value::Table(Table::new()));
    let Value::Table(inner) = entry else {
        return Err(CliError::input(format!("'{section}' is not a section")));
    };
    inner.insert(key.to_string(), parse_value(raw.trim()));
    Ok(())
}

pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<FileConfig> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::input(format!("cannot read config {}: {e}", p.display())))?;
            text.parse::<Table>().map_err(|e| CliError::input(format!("config {}: {e}", p.display())))?
        }
        None => Table::new(),
    };
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    FileConfig::deserialize(Value::Table(table)).map_err(|e| CliError::input(format!("config: {e}")))
}

pub fn parse_methods(names: &[String]) -> Result<Vec<Method>> {
    names
        .iter()
        .map(|n| {
            Method::parse(n.trim()).ok_or_else(|| {
                let known: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
                CliError::input(format!("unknown method '{n}' (known: {})", known.join(", ")))
            })
        })
        .collect()
}

impl NoiseSection {
    pub fn model(&self) -> Result<NoiseModel> {
        let kind = match self.kind.to_ascii_lowercase().as_str() {
            "normal" | "gaussian" => NoiseKind::ComplexGaussian,
            "binormal" | "bi-normal" => NoiseKind::BiNormal,
            other => return Err(CliError::input(format!("unknown noise kind '{other}' (normal, binormal)"))),
        };
        Ok(NoiseModel {
            kind,
            variance: 1.0,
            binormal_threshold: self.binormal_threshold,
            binormal_scale_ratio: self.binormal_scale_ratio,
        })
    }
}

impl SampSection {
    pub fn build(&self) -> Result<SampConfig> {
        let truncation = match self.truncation.as_str() {
            "effective_rank" => Truncation::EffectiveRank,
            "none" => Truncation::None,
            "half" => Truncation::Half,
            "fixed" => Truncation::Fixed(
                self.truncation_rank.ok_or_else(|| CliError::input("truncation = \"fixed\" needs truncation_rank"))?,
            ),
            other => {
                return Err(CliError::input(format!(
                    "unknown truncation '{other}' (effective_rank, none, half, fixed)"
                )))
            }
        };
        let threshold_rule = match self.threshold_rule.as_str() {
            "literal" => ThresholdRule::Literal,
            "clamped" => ThresholdRule::Clamped,
            other => return Err(CliError::input(format!("unknown threshold_rule '{other}' (literal, clamped)"))),
        };
        if self.radius_count == 0 {
            return Err(CliError::input("radius_count must be at least 1"));
        }
        let grid = GridConfig {
            freq_oversample: self.freq_oversample,
            radius_grid: log_spaced_radii(self.radius_log_min, self.radius_count),
            refine: self.refine,
        };
        grid.validate()?;
        Ok(SampConfig {
            pencil_parameter: self.pencil_parameter,
            truncation,
            grid,
            constants: self.threshold_constant.map_or(ThresholdConstants::Default, ThresholdConstants::Uniform),
            threshold_rule,
        })
    }
}

impl ClassicalSection {
    pub fn build(&self) -> ClassicalConfig {
        ClassicalConfig {
            pencil_parameter: self.pencil_parameter,
            sdd_digits: self.sdd_digits,
            ite_max_order: self.ite_max_order,
        }
    }
}

impl FileConfig {
    /// Full experiment described by the `[experiment]` section.
    pub fn experiment(&self) -> Result<ExperimentConfig> {
        let e = self.experiment.as_ref().ok_or_else(|| CliError::input("config has no [experiment] section"))?;
        let scenario = Scenario {
            order: e.order,
            damped: e.damped,
            samples: e.samples,
            base_frequency: e.base_frequency,
            separation: e.separation,
            snr_db: e.snr_db,
        };
        let grid = match (&e.grid, e.start, e.stop, e.step) {
            (Some(g), None, None, None) => g.clone(),
            (None, Some(a), Some(b), Some(s)) if s > 0.0 => Sweep::range(a, b, s),
            _ => return Err(CliError::input("[experiment] needs either grid or start/stop/step (step > 0)")),
        };
        let sweep = match e.sweep.as_str() {
            "snr_db" => Sweep::snr(grid),
            "samples" => {
                if grid.iter().any(|x| x.fract() != 0.0 || *x < 0.0) {
                    return Err(CliError::input("samples grid must hold non-negative integers"));
                }
                Sweep::samples(grid.iter().map(|&x| x as usize).collect())
            }
            "separation" => Sweep::separation(grid),
            other => return Err(CliError::input(format!("unknown sweep '{other}' (snr_db, samples, separation)"))),
        };
        let mut config = ExperimentConfig::new(scenario, sweep);
        config.penalty = match (e.penalty.as_str(), e.penalty_divisor) {
            ("sweep", None) => Penalty::SweepScaled,
            ("exclude", None) => Penalty::Exclude,
            ("divisor", Some(d)) => Penalty::Divisor(d),
            _ => {
                return Err(CliError::input(
                    "penalty must be \"sweep\", \"exclude\", or \"divisor\" with penalty_divisor",
                ))
            }
        };
        if let Some(t) = e.trials {
            config.trials = t;
        }
        if let Some(s) = e.seed {
            config.seed = s;
        }
        if let Some(m) = &e.methods {
            config.methods = parse_methods(m)?;
        }
        self.apply_algorithms(&mut config)?;
        config.noise = self.noise.model()?;
        Ok(config)
    }

    /// Copies the `[samp]` and `[classical]` sections into a preset.
    pub fn apply_algorithms(&self, config: &mut ExperimentConfig) -> Result<()> {
        config.samp = self.samp.build()?;
        config.classical = self.classical.build();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<FileConfig> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, text).unwrap();
        load(Some(&p), &[])
    }

    #[test]
    fn full_experiment() {
        let c = parse(
            "[experiment]\norder = 4\ndamped = true\nsweep = \"separation\"\nstart = 0.02\nstop = 0.1\nstep = 0.02\n\
             trials = 7\nseed = 3\nmethods = [\"samp\", \"gap\"]\n[noise]\nkind = \"binormal\"\n[samp]\nthreshold_rule = \"clamped\"\n",
        )
        .unwrap();
        let e = c.experiment().unwrap();
        assert_eq!(e.scenario.order, 4);
        assert_eq!(e.sweep.grid.len(), 5);
        assert_eq!((e.trials, e.seed), (7, 3));
        assert_eq!(e.methods.len(), 2);
        assert_eq!(e.noise.kind, NoiseKind::BiNormal);
        assert_eq!(e.samp.threshold_rule, ThresholdRule::Clamped);
        e.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = parse("[samp]\nfreq_oversampel = 4\n").unwrap_err();
        assert!(err.to_string().contains("freq_oversampel"), "{err}");
        let err = parse("[sampling]\nx = 1\n").unwrap_err();
        assert!(err.to_string().contains("sampling"), "{err}");
    }

    #[test]
    fn overrides_apply_on_top_of_file() {
        let c = load(None, &["experiment.trials=9".into(), "experiment.grid=[1.0, 2.0]".into(), "noise.kind=binormal".into()])
            .unwrap();
        let e = c.experiment().unwrap();
        assert_eq!(e.trials, 9);
        assert_eq!(e.sweep.grid, vec![1.0, 2.0]);
        assert_eq!(e.noise.kind, NoiseKind::BiNormal);
        assert!(load(None, &["trials=9".into()]).is_err());
        assert!(load(None, &["experiment.trials".into()]).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(parse("[experiment]\ngrid = [1.0]\nstart = 0.0\n").unwrap().experiment().is_err());
        assert!(parse("[experiment]\ngrid = [1.0]\nmethods = [\"evt\"]\n").unwrap().experiment().is_err());
        assert!(parse("[samp]\ntruncation = \"fixed\"\n").unwrap().samp.build().is_err());
        assert!(parse("[samp]\nfreq_oversample = 0\n").unwrap().samp.build().is_err());
        assert!(parse("[noise]\nkind = \"laplace\"\n").unwrap().noise.model().is_err());
        assert!(parse("[experiment]\norder = \"two\"\n").is_err());
    }
}
