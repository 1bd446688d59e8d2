//! CSV readers and writers for signals, estimates and mode features.
//!
//! Signals are two columns `re,im`, one sample per row, with an optional
//! header row. Values are written with 17 significant digits so a round trip
//! is lossless.

use std::io::{Read, Write};
use std::path::Path;

use crate::detect::ModeFeature;
use crate::error::{Result, SampError};
use crate::estimate::ParameterEstimates;
use crate::linalg::C64;
use crate::signal::TimeSeries;

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn read_signal<R: Read>(reader: R) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(reader);
    let mut samples = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(idx as u64 + 1, |p| p.line()) as usize;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if rec.len() != 2 {
            return Err(SampError::Parse { line, msg: format!("expected 2 fields, found {}", rec.len()) });
        }
        let re = rec[0].parse::<f64>();
        let im = rec[1].parse::<f64>();
        match (re, im) {
            (Ok(re), Ok(im)) if re.is_finite() && im.is_finite() => samples.push(C64::new(re, im)),
            (Ok(_), Ok(_)) => {
                return Err(SampError::Parse { line, msg: "non-finite value".into() });
            }
            _ if samples.is_empty() && idx == 0 && rec[0].eq_ignore_ascii_case("re") => {}
            _ => {
                return Err(SampError::Parse {
                    line,
                    msg: format!("cannot parse '{}', '{}' as numbers", &rec[0], &rec[1]),
                });
            }
        }
    }
    if samples.is_empty() {
        return Err(SampError::Parse { line: 1, msg: "no samples".into() });
    }
    Ok(TimeSeries::new(samples))
}

pub fn read_signal_file(path: &Path) -> Result<TimeSeries> {
    read_signal(std::fs::File::open(path)?)
}

pub fn write_signal<W: Write>(writer: W, y: &TimeSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["re", "im"])?;
    for s in y.samples() {
        w.write_record([fmt(s.re), fmt(s.im)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_signal_file(path: &Path, y: &TimeSeries) -> Result<()> {
    write_signal(std::fs::File::create(path)?, y)
}

pub const ESTIMATES_HEADER: [&str; 6] = ["theta", "alpha", "re_b", "im_b", "feature", "mode_index"];

pub fn write_estimates<W: Write>(writer: W, est: &ParameterEstimates) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ESTIMATES_HEADER)?;
    for k in 0..est.order {
        let feature = est.features.get(k).copied().unwrap_or(f64::NAN);
        w.write_record([
            fmt(est.frequencies[k]),
            fmt(est.dampings[k]),
            fmt(est.amplitudes[k].re),
            fmt(est.amplitudes[k].im),
            if feature.is_nan() { String::new() } else { fmt(feature) },
            est.mode_indices[k].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const FEATURES_HEADER: [&str; 8] =
    ["index", "re_z", "im_z", "raw", "d", "eps", "threshold", "is_signal"];

pub fn write_features<W: Write>(writer: W, features: &[ModeFeature]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(FEATURES_HEADER)?;
    for f in features {
        w.write_record([
            f.index.to_string(),
            fmt(f.maximizer.re),
            fmt(f.maximizer.im),
            fmt(f.raw),
            fmt(f.concentration),
            fmt(f.normalized),
            fmt(f.threshold),
            u8::from(f.is_signal).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
