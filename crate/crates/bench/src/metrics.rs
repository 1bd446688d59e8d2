//! Detection and estimation metrics.

use std::f64::consts::PI;

use crate::error::{BenchError, Result};

/// Fraction of trials whose estimated order equals `truth`.
pub fn detection_probability(orders: &[usize], truth: usize) -> Result<f64> {
    if orders.is_empty() {
        return Err(BenchError::config("no orders to score"));
    }
    Ok(orders.iter().filter(|&&o| o == truth).count() as f64 / orders.len() as f64)
}

/// 95% normal-approximation half-width of a binomial proportion.
pub fn binomial_halfwidth(p: f64, trials: usize) -> f64 {
    1.96 * (p * (1.0 - p) / trials as f64).sqrt()
}

/// Trapezoidal area under `pd(x)`, normalized by the width of the grid.
pub fn auc(x: &[f64], pd: &[f64]) -> Result<f64> {
    if x.len() < 2 || x.len() != pd.len() {
        return Err(BenchError::config("AUC needs at least two matching points"));
    }
    if x.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
        return Err(BenchError::config("AUC grid must be strictly increasing"));
    }
    if pd.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(BenchError::config(
            "detection probabilities must lie in [0, 1]",
        ));
    }
    let area: f64 = x
        .windows(2)
        .zip(pd.windows(2))
        .map(|(xs, ps)| (xs[1] - xs[0]) * (ps[0] + ps[1]) / 2.0)
        .sum();
    Ok(area / (x[x.len() - 1] - x[0]))
}

/// Angle difference wrapped to `(−π, π]`.
pub fn wrap_angle(d: f64) -> f64 {
    let w = d.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Greedy nearest matching: repeatedly pairs the globally closest estimate and
/// truth (by wrapped distance). Returns, per truth index, the estimate index.
pub fn match_frequencies(estimates: &[f64], truth: &[f64]) -> Vec<Option<usize>> {
    let mut pairs: Vec<(f64, usize, usize)> = truth
        .iter()
        .enumerate()
        .flat_map(|(t, &ft)| {
            estimates
                .iter()
                .enumerate()
                .map(move |(e, &fe)| (wrap_angle(fe - ft).abs(), t, e))
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out = vec![None; truth.len()];
    let mut used = vec![false; estimates.len()];
    for (_, t, e) in pairs {
        if out[t].is_none() && !used[e] {
            out[t] = Some(e);
            used[e] = true;
        }
    }
    out
}

/// Error assigned to every component of a trial whose order is wrong.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Penalty {
    /// `(2π / s)²` with `s` the current `N` on sample sweeps and the
    /// scenario's `N` otherwise.
    #[default]
    SweepScaled,
    /// `(2π / s)²` with a fixed `s`.
    Divisor(f64),
    /// Mismatched trials are left out of the RMSE.
    Exclude,
}

impl Penalty {
    /// Squared-error penalty, `None` when mismatches are excluded.
    pub fn squared(&self, scale: f64) -> Option<f64> {
        match *self {
            Penalty::SweepScaled => Some((2.0 * PI / scale).powi(2)),
            Penalty::Divisor(s) => Some((2.0 * PI / s).powi(2)),
            Penalty::Exclude => None,
        }
    }
}

/// Per-component errors of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialScore {
    /// Squared frequency error per true component; NaN when excluded.
    pub squared: Vec<f64>,
    /// Signed wrapped error per true component, only when the order matched.
    pub signed: Option<Vec<f64>>,
}

/// Scores estimated frequencies against the truth; `penalty_sq` applies to
/// every component when the orders differ.
pub fn match_and_score(
    estimates: Option<&[f64]>,
    truth: &[f64],
    penalty_sq: Option<f64>,
) -> TrialScore {
    let mismatch = || TrialScore {
        squared: vec![penalty_sq.unwrap_or(f64::NAN); truth.len()],
        signed: None,
    };
    let Some(est) = estimates else {
        return mismatch();
    };
    if est.len() != truth.len() {
        return mismatch();
    }
    let matching = match_frequencies(est, truth);
    let signed: Vec<f64> = matching
        .iter()
        .zip(truth)
        .map(|(e, &t)| wrap_angle(est[e.expect("equal counts match fully")] - t))
        .collect();
    TrialScore {
        squared: signed.iter().map(|d| d * d).collect(),
        signed: Some(signed),
    }
}
