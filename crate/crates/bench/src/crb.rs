//! Cramér–Rao bound on the frequencies of a deterministic exponential sum in
//! circular white Gaussian noise.

use nalgebra::{DMatrix, SymmetricEigen};
use samp_core::signal::SignalSpec;
use samp_core::{CMatrix, SampError, C64};

use crate::error::Result;

/// Fisher matrices with eigenvalue spread beyond this are treated as singular.
pub const MAX_FIM_CONDITION: f64 = 1e14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    Magnitude,
    Phase,
    Damping,
    Frequency,
}

/// Parameter layout: per component `|b|, arg b, [α,] θ`, with `α` left out
/// when every component is undamped.
pub fn parameter_layout(spec: &SignalSpec) -> Vec<(usize, Param)> {
    let damped = spec.components().iter().any(|c| c.damping != 0.0);
    let mut out = Vec::new();
    for i in 0..spec.order() {
        out.push((i, Param::Magnitude));
        out.push((i, Param::Phase));
        if damped {
            out.push((i, Param::Damping));
        }
        out.push((i, Param::Frequency));
    }
    out
}

/// `∂x(n)/∂p` for every parameter in [`parameter_layout`], as columns.
pub fn signal_jacobian(spec: &SignalSpec) -> CMatrix {
    let n = spec.sample_count();
    let layout = parameter_layout(spec);
    let comps = spec.components();
    CMatrix::from_fn(n, layout.len(), |t, k| {
        let (i, p) = layout[k];
        let c = &comps[i];
        let phase = C64::from_polar(1.0, c.amplitude.arg());
        let term = c.amplitude * (C64::new(-c.damping, c.frequency) * t as f64).exp();
        match p {
            Param::Magnitude => phase * (C64::new(-c.damping, c.frequency) * t as f64).exp(),
            Param::Phase => C64::i() * term,
            Param::Damping => -(t as f64) * term,
            Param::Frequency => C64::i() * t as f64 * term,
        }
    })
}

/// `(2/σ²) Re(Jᴴ J)`.
pub fn fisher_information(spec: &SignalSpec, variance: f64) -> DMatrix<f64> {
    let j = signal_jacobian(spec);
    (j.adjoint() * &j).map(|v| 2.0 * v.re / variance)
}

/// CRB of each frequency `θ_i`, in component order.
pub fn crb_frequencies(spec: &SignalSpec, variance: f64) -> Result<Vec<f64>> {
    if !(variance.is_finite() && variance > 0.0) {
        return Err(SampError::InvalidArgument("noise variance must be positive".into()).into());
    }
    let fim = fisher_information(spec, variance);
    let eig = SymmetricEigen::new(fim.clone());
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| {
            (lo.min(v), hi.max(v.abs()))
        });
    if !(lo > 0.0 && hi / lo <= MAX_FIM_CONDITION) {
        return Err(SampError::Flagged(format!(
            "singular Fisher information (eigenvalues {lo:.3e}..{hi:.3e})"
        ))
        .into());
    }
    let inv = fim
        .cholesky()
        .ok_or_else(|| SampError::Flagged("Fisher information not positive definite".into()))?
        .inverse();
    Ok(parameter_layout(spec)
        .iter()
        .enumerate()
        .filter(|(_, (_, p))| *p == Param::Frequency)
        .map(|(k, _)| inv[(k, k)])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use samp_core::signal::{synthesize, ExponentialComponent};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn spec_from(params: &[(f64, f64, f64, f64)], n: usize) -> SignalSpec {
        let comps = params
            .iter()
            .map(|&(mag, phase, alpha, theta)| {
                ExponentialComponent::new(C64::from_polar(mag, phase), alpha, theta).unwrap()
            })
            .collect();
        SignalSpec::new(comps, n).unwrap()
    }

    #[test]
    fn single_tone_closed_form() {
        for &(n, mag, var) in &[(64usize, 1.0, 0.1), (71, 2.0, 0.5), (20, 0.5, 1.0)] {
            let spec = spec_from(&[(mag, 0.3, 0.0, 1.1)], n);
            let crb = crb_frequencies(&spec, var).unwrap();
            let nf = n as f64;
            let closed = 6.0 * var / (mag * mag * nf * (nf * nf - 1.0));
            assert!(
                (crb[0] - closed).abs() <= 1e-10 * closed,
                "{} vs {closed}",
                crb[0]
            );
        }
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let base = [
            (1.0, 0.4, 0.03, 2.0),
            (0.7, -1.0, 0.05, 2.09),
            (1.3, 2.0, 0.01, -2.0),
        ];
        let spec = spec_from(&base, 40);
        let j = signal_jacobian(&spec);
        let layout = parameter_layout(&spec);
        let h = 1e-6;
        let mut worst = 0.0f64;
        for (k, &(i, p)) in layout.iter().enumerate() {
            let shifted = |d: f64| {
                let mut q = base;
                match p {
                    Param::Magnitude => q[i].0 += d,
                    Param::Phase => q[i].1 += d,
                    Param::Damping => q[i].2 += d,
                    Param::Frequency => q[i].3 += d,
                }
                synthesize(&spec_from(&q, 40))
            };
            let (plus, minus) = (shifted(h), shifted(-h));
            for t in 0..40 {
                let fd = (plus.samples()[t] - minus.samples()[t]) / (2.0 * h);
                let an = j[(t, k)];
                worst = worst.max((fd - an).norm() / an.norm().max(1e-3));
            }
        }
        assert!(worst <= 1e-5, "max relative deviation {worst}");
    }

    #[test]
    fn bound_is_linear_in_variance() {
        let spec = spec_from(&[(1.0, 0.0, 0.0, 2.0), (1.0, 0.0, 0.0, 2.0885)], 71);
        let a = crb_frequencies(&spec, 0.1).unwrap();
        let b = crb_frequencies(&spec, 0.2).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((y / x - 2.0).abs() < 1e-10);
        }
        assert_eq!(parameter_layout(&spec).len(), 6);
        let damped = spec_from(&[(1.0, 0.0, 0.03, 2.0), (1.0, 0.0, 0.05, 2.0885)], 71);
        assert_eq!(parameter_layout(&damped).len(), 8);
        assert!(crb_frequencies(&damped, 0.1)
            .unwrap()
            .iter()
            .all(|v| *v > 0.0));
    }

    #[test]
    fn coincident_poles_are_flagged() {
        let mut spec = spec_from(&[(1.0, 0.0, 0.0, 2.0)], 30);
        let comps = vec![
            spec.components()[0],
            ExponentialComponent::new(c(1.0, 0.0), 0.0, 2.0 + 1e-9).unwrap(),
        ];
        spec = SignalSpec::new(comps, 30).unwrap();
        assert!(matches!(
            crb_frequencies(&spec, 0.1),
            Err(crate::BenchError::Core(SampError::Flagged(_)))
        ));
        assert!(crb_frequencies(&spec_from(&[(1.0, 0.0, 0.0, 2.0)], 30), 0.0).is_err());
    }
}
