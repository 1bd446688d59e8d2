//! CSV output of experiment results.

use std::fs;
use std::path::Path;

use csv::Writer;

use crate::engine::MetricSeries;
use crate::error::Result;
use crate::timing::{AmplitudeRow, TimingRow};

/// Shortest round-trip decimal; NaN becomes an empty field.
pub fn fmt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

fn long_rows(
    w: &mut Writer<fs::File>,
    series: &MetricSeries,
    value: impl Fn(&crate::engine::MethodSeries, usize) -> (f64, f64),
) -> Result<()> {
    w.write_record(["x", "method", "value", "ci_halfwidth"])?;
    for m in &series.methods {
        for (k, &x) in series.x.iter().enumerate() {
            let (v, ci) = value(m, k);
            w.write_record([fmt(x), m.method.name().to_string(), fmt(v), fmt(ci)])?;
        }
    }
    Ok(())
}

/// Writes the deterministic metric files of one run into `dir`:
/// `pd.csv`, `pd_wide.csv`, `rmse.csv`, `bias.csv`, `components.csv`, and
/// the wall-clock `runtime.csv`.
pub fn write_series(dir: &Path, series: &MetricSeries) -> Result<()> {
    fs::create_dir_all(dir)?;

    let mut w = Writer::from_path(dir.join("pd.csv"))?;
    long_rows(&mut w, series, |m, k| (m.pd[k], m.pd_ci[k]))?;
    w.flush()?;

    let mut w = Writer::from_path(dir.join("pd_wide.csv"))?;
    let mut header = vec![series.axis.name().to_string()];
    header.extend(series.methods.iter().map(|m| m.method.name().to_string()));
    w.write_record(&header)?;
    for (k, &x) in series.x.iter().enumerate() {
        let mut row = vec![fmt(x)];
        row.extend(series.methods.iter().map(|m| fmt(m.pd[k])));
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut w = Writer::from_path(dir.join("rmse.csv"))?;
    long_rows(&mut w, series, |m, k| (m.rmse[k], f64::NAN))?;
    for (k, &x) in series.x.iter().enumerate() {
        w.write_record([fmt(x), "CRB".to_string(), fmt(series.crb[k]), String::new()])?;
    }
    w.flush()?;

    let mut w = Writer::from_path(dir.join("bias.csv"))?;
    long_rows(&mut w, series, |m, k| (m.mean_abs_bias[k], f64::NAN))?;
    w.flush()?;

    let mut w = Writer::from_path(dir.join("components.csv"))?;
    w.write_record(["x", "method", "component", "rmse", "bias", "crb"])?;
    for m in &series.methods {
        for (k, &x) in series.x.iter().enumerate() {
            for (i, (r, b)) in m.rmse_per_component[k]
                .iter()
                .zip(&m.bias_per_component[k])
                .enumerate()
            {
                let crb = series.crb_per_component[k]
                    .get(i)
                    .map_or(f64::NAN, |c| c.sqrt());
                w.write_record([
                    fmt(x),
                    m.method.name().to_string(),
                    i.to_string(),
                    fmt(*r),
                    fmt(*b),
                    fmt(crb),
                ])?;
            }
        }
    }
    w.flush()?;

    let mut w = Writer::from_path(dir.join("runtime.csv"))?;
    w.write_record(["x", "method", "seconds"])?;
    for m in &series.methods {
        for (k, &x) in series.x.iter().enumerate() {
            w.write_record([fmt(x), m.method.name().to_string(), fmt(m.mean_seconds[k])])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `summary.csv`: one row per run and method with the AUC and failure count.
pub fn write_summary(path: &Path, runs: &[(String, MetricSeries)]) -> Result<()> {
    let mut w = Writer::from_path(path)?;
    w.write_record(["experiment", "method", "auc", "failures", "trials"])?;
    for (label, s) in runs {
        for m in &s.methods {
            let failures: usize = m.failures.iter().sum();
            w.write_record([
                label.clone(),
                m.method.name().to_string(),
                fmt(m.auc),
                failures.to_string(),
                s.trials.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_timing(path: &Path, rows: &[TimingRow]) -> Result<()> {
    let mut w = Writer::from_path(path)?;
    w.write_record(["n", "method", "seconds", "failures"])?;
    for r in rows {
        w.write_record([
            r.samples.to_string(),
            r.method.name().to_string(),
            fmt(r.seconds),
            r.failures.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_amplitudes(path: &Path, rows: &[AmplitudeRow]) -> Result<()> {
    let mut w = Writer::from_path(path)?;
    w.write_record(["n", "method", "rmse", "seconds", "failures"])?;
    for r in rows {
        w.write_record([
            r.samples.to_string(),
            r.method.name().to_string(),
            fmt(r.rmse),
            fmt(r.seconds),
            r.failures.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
