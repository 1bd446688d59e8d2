//! Named experiment presets for the figure and table reproductions.

use samp_core::signal::{NoiseKind, NoiseModel};

use crate::engine::ExperimentConfig;
use crate::scenario::{Scenario, Sweep};
use crate::timing::{AmplitudeStudyConfig, TimingConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum PresetKind {
    /// One or more labelled Monte-Carlo runs.
    Experiments(Vec<(String, ExperimentConfig)>),
    Timing(TimingConfig),
    Amplitudes(AmplitudeStudyConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub kind: PresetKind,
}

pub const PRESET_NAMES: [&str; 22] = [
    "fig3a",
    "fig3b",
    "fig3c",
    "fig3d",
    "fig4",
    "fig4a",
    "fig4b",
    "fig4c",
    "fig4d",
    "fig5",
    "fig5a",
    "fig5b",
    "fig5c",
    "fig5d",
    "fig6",
    "fig6a",
    "fig6b",
    "fig6c",
    "fig6d",
    "table1",
    "fig7-timing",
    "fig8-amps",
];

pub fn snr_grid() -> Vec<f64> {
    Sweep::range(-10.0, 20.0, 2.0)
}

pub fn samples_grid() -> Vec<usize> {
    (20..=140).step_by(10).collect()
}

pub fn separation_grid() -> Vec<f64> {
    Sweep::range(0.02, 0.2, 0.02)
}

pub const TIMING_SAMPLES: [usize; 6] = [50, 100, 150, 200, 300, 400];

/// `a`–`d` select M=2 undamped, M=2 damped, M=4 undamped, M=4 damped.
fn variant(letter: char) -> Option<Scenario> {
    match letter {
        'a' => Some(Scenario::new(2, false)),
        'b' => Some(Scenario::new(2, true)),
        'c' => Some(Scenario::new(4, false)),
        'd' => Some(Scenario::new(4, true)),
        _ => None,
    }
}

fn single(name: &'static str, description: &'static str, config: ExperimentConfig) -> Preset {
    Preset {
        name,
        description,
        kind: PresetKind::Experiments(vec![(name.to_string(), config)]),
    }
}

/// Noise/damping combinations of the AUC table, M = 2.
pub fn table1_runs() -> Vec<(String, ExperimentConfig)> {
    let mut runs = Vec::new();
    for (noise, noise_name) in [
        (NoiseKind::ComplexGaussian, "normal"),
        (NoiseKind::BiNormal, "binormal"),
    ] {
        for damped in [false, true] {
            let mut c = ExperimentConfig::new(Scenario::new(2, damped), Sweep::snr(snr_grid()));
            c.noise = NoiseModel::gaussian(1.0).with_kind(noise);
            let label = format!(
                "{noise_name}-{}",
                if damped { "damped" } else { "undamped" }
            );
            runs.push((label, c));
        }
    }
    runs
}

pub fn preset(name: &str) -> Option<Preset> {
    let name: &'static str = PRESET_NAMES.iter().copied().find(|p| *p == name)?;
    let (family, letter) = match name.strip_prefix("fig") {
        Some(rest) if rest.len() <= 2 && rest.is_char_boundary(1) => {
            let (digit, suffix) = rest.split_at(1);
            (digit, suffix.chars().next().unwrap_or('a'))
        }
        _ => ("", 'a'),
    };
    let scenario = variant(letter);
    let preset = match (name, family) {
        ("table1", _) => Preset {
            name,
            description: "AUC of every method, normal and bi-normal noise, M=2 undamped and damped",
            kind: PresetKind::Experiments(table1_runs()),
        },
        ("fig7-timing", _) => Preset {
            name,
            description: "median pipeline time per method versus N, M=2 undamped, 10 dB",
            kind: PresetKind::Timing(TimingConfig::new(
                Scenario::new(2, false),
                TIMING_SAMPLES.to_vec(),
            )),
        },
        ("fig8-amps", _) => Preset {
            name,
            description: "mode-based versus least-squares amplitudes at r = L, M=4 undamped, 10 dB",
            kind: PresetKind::Amplitudes(AmplitudeStudyConfig::new(
                Scenario::new(4, false),
                AmplitudeStudyConfig::DEFAULT_SAMPLES.to_vec(),
            )),
        },
        (_, "3") | (_, "6") => single(
            name,
            "p_d, bias and RMSE versus SNR at N=71, Rayleigh spacing",
            ExperimentConfig::new(scenario?, Sweep::snr(snr_grid())),
        ),
        (_, "4") => {
            let mut s = scenario?;
            s.snr_db = 8.0;
            single(
                name,
                "p_d versus N at 8 dB, Rayleigh spacing at each N",
                ExperimentConfig::new(s, Sweep::samples(samples_grid())),
            )
        }
        (_, "5") => single(
            name,
            "p_d versus frequency separation at 10 dB, N=71",
            ExperimentConfig::new(scenario?, Sweep::separation(separation_grid())),
        ),
        _ => return None,
    };
    Some(preset)
}
