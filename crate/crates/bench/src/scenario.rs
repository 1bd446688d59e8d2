//! Test signals and sweep axes of the experiments.

use std::f64::consts::PI;

use samp_core::signal::{ExponentialComponent, SignalSpec};
use samp_core::C64;

use crate::error::{BenchError, Result};

/// Dampings assigned to components in the damped scenarios, cycled by index.
pub const DAMPINGS: [f64; 2] = [0.03, 0.05];

/// Closely spaced unit-amplitude exponentials in one or two clusters.
///
/// Frequencies are `θ₁`, `θ₁ + Δ`, `−θ₁`, `−θ₁ − Δ`, truncated to `order`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub order: usize,
    pub damped: bool,
    pub samples: usize,
    pub base_frequency: f64,
    /// `Δ`; `None` means the Rayleigh spacing `2π/N` at the current `N`.
    pub separation: Option<f64>,
    pub snr_db: f64,
}

impl Scenario {
    pub fn new(order: usize, damped: bool) -> Self {
        Scenario {
            order,
            damped,
            samples: 71,
            base_frequency: 2.0,
            separation: None,
            snr_db: 10.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.order) {
            return Err(BenchError::config(format!(
                "order must be 1..=4, got {}",
                self.order
            )));
        }
        if self.samples < 8 {
            return Err(BenchError::config(format!(
                "need at least 8 samples, got {}",
                self.samples
            )));
        }
        if !self.base_frequency.is_finite() || !self.snr_db.is_finite() {
            return Err(BenchError::config("frequency and SNR must be finite"));
        }
        if let Some(d) = self.separation {
            if !(d.is_finite() && d > 0.0) {
                return Err(BenchError::config("separation must be positive"));
            }
        }
        Ok(())
    }

    pub fn frequencies(&self, samples: usize, separation: Option<f64>) -> Vec<f64> {
        let delta = separation
            .or(self.separation)
            .unwrap_or(2.0 * PI / samples as f64);
        let t1 = self.base_frequency;
        [t1, t1 + delta, -t1, -t1 - delta]
            .into_iter()
            .take(self.order)
            .collect()
    }

    pub fn spec(&self, samples: usize, separation: Option<f64>) -> Result<SignalSpec> {
        let comps = self
            .frequencies(samples, separation)
            .into_iter()
            .enumerate()
            .map(|(i, f)| {
                let alpha = if self.damped {
                    DAMPINGS[i % DAMPINGS.len()]
                } else {
                    0.0
                };
                ExponentialComponent::new(C64::new(1.0, 0.0), alpha, f)
            })
            .collect::<samp_core::Result<Vec<_>>>()?;
        Ok(SignalSpec::new(comps, samples)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    SnrDb,
    Samples,
    Separation,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::SnrDb => "snr_db",
            SweepAxis::Samples => "samples",
            SweepAxis::Separation => "separation",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
}

/// Signal settings at one sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub x: f64,
    pub samples: usize,
    pub separation: Option<f64>,
    pub snr_db: f64,
}

impl Sweep {
    pub fn snr(grid: Vec<f64>) -> Self {
        Sweep {
            axis: SweepAxis::SnrDb,
            grid,
        }
    }

    pub fn samples(grid: Vec<usize>) -> Self {
        Sweep {
            axis: SweepAxis::Samples,
            grid: grid.into_iter().map(|n| n as f64).collect(),
        }
    }

    pub fn separation(grid: Vec<f64>) -> Self {
        Sweep {
            axis: SweepAxis::Separation,
            grid,
        }
    }

    /// Evenly spaced inclusive grid `start, start + step, …, ≤ stop`.
    pub fn range(start: f64, stop: f64, step: f64) -> Vec<f64> {
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|k| start + k as f64 * step).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(BenchError::config("sweep grid is empty"));
        }
        if self.grid.iter().any(|x| !x.is_finite()) {
            return Err(BenchError::config("sweep grid has non-finite values"));
        }
        if self.grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(BenchError::config("sweep grid must be strictly increasing"));
        }
        match self.axis {
            SweepAxis::Samples if self.grid.iter().any(|&n| n.fract() != 0.0 || n < 8.0) => {
                Err(BenchError::config("sample-count grid needs integers ≥ 8"))
            }
            SweepAxis::Separation if self.grid[0] <= 0.0 => {
                Err(BenchError::config("separation grid must be positive"))
            }
            _ => Ok(()),
        }
    }

    pub fn point(&self, scenario: &Scenario, k: usize) -> SweepPoint {
        let x = self.grid[k];
        let mut p = SweepPoint {
            x,
            samples: scenario.samples,
            separation: scenario.separation,
            snr_db: scenario.snr_db,
        };
        match self.axis {
            SweepAxis::SnrDb => p.snr_db = x,
            SweepAxis::Samples => p.samples = x as usize,
            SweepAxis::Separation => p.separation = Some(x),
        }
        p
    }
}
