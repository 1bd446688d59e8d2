use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use samp_bench::presets::{self, PresetKind};
use samp_bench::timing::{amplitude_study, time_methods, AmplitudeStudyConfig};
use samp_bench::{report, run_monte_carlo, ExperimentConfig, MetricSeries, Scenario};
use samp_core::detect::ModeFeature;
use samp_core::estimate::{self, Detector, ParameterEstimates};
use samp_core::io;

use crate::config::{self, FileConfig};
use crate::error::{CliError, Result};
use crate::{AnalyzeArgs, BenchAmpsArgs, Cli, Command, SimulateArgs};

pub fn run(cli: Cli) -> Result<()> {
    let verbose = cli.verbose;
    match cli.command {
        Command::Analyze(args) => analyze(&args),
        Command::Simulate(args) => simulate(&args, verbose),
        Command::BenchAmps(args) => bench_amps(&args),
        Command::Presets => {
            for name in presets::PRESET_NAMES {
                let p = presets::preset(name).expect("listed preset exists");
                println!("{name:<12} {}", p.description);
            }
            Ok(())
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

fn analyze(args: &AnalyzeArgs) -> Result<()> {
    let file = config::load(args.common.config.as_deref(), &args.common.overrides)?;
    let y = io::read_signal_file(&args.input)
        .map_err(|e| CliError::input(format!("{}: {e}", args.input.display())))?;

    let (label, estimates, features): (&str, ParameterEstimates, Vec<ModeFeature>) =
        if args.detector.eq_ignore_ascii_case("samp") {
            let run = estimate::samp_run(&y, &file.samp.build()?)?;
            ("SAMP", run.estimates, run.detection.features)
        } else {
            let detector = Detector::parse(&args.detector).ok_or_else(|| {
                CliError::input(format!("unknown detector '{}' (samp, sdd, gap, eff, aic, bic)", args.detector))
            })?;
            let est = estimate::classical_pipeline(&y, &file.classical.build(), detector)?;
            (detector.name(), est, Vec::new())
        };

    create_dir(&args.out)?;
    io::write_estimates(create(&args.out.join("estimates.csv"))?, &estimates)?;
    io::write_features(create(&args.out.join("features.csv"))?, &features)?;

    println!("detector: {label}");
    println!("samples: {}", y.len());
    println!("order: {}", estimates.order);
    println!("{:>3} {:>12} {:>12} {:>12} {:>12}", "k", "theta", "alpha", "abs_b", "arg_b");
    for k in 0..estimates.order {
        let b = estimates.amplitudes[k];
        println!(
            "{:>3} {:>12.6} {:>12.6} {:>12.6} {:>12.6}",
            k,
            estimates.frequencies[k],
            estimates.dampings[k],
            b.norm(),
            b.arg()
        );
    }
    Ok(())
}

fn apply_flags(config: &mut ExperimentConfig, args: &SimulateArgs) -> Result<()> {
    if let Some(t) = args.trials {
        config.trials = t;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(m) = &args.methods {
        config.methods = config::parse_methods(m)?;
    }
    Ok(())
}

fn write_runs(out: &Path, runs: &[(String, MetricSeries)]) -> Result<()> {
    if let [(_, series)] = runs {
        report::write_series(out, series)?;
    } else {
        for (label, series) in runs {
            report::write_series(&out.join(label), series)?;
        }
    }
    report::write_summary(&out.join("summary.csv"), runs)?;
    Ok(())
}

fn simulate(args: &SimulateArgs, verbose: u8) -> Result<()> {
    if let Some(k) = args.threads {
        if k == 0 {
            return Err(CliError::input("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::input(format!("cannot start {k} threads: {e}")))?;
    }
    let file: FileConfig = config::load(args.common.config.as_deref(), &args.common.overrides)?;

    let kind = match &args.preset {
        Some(name) => {
            let preset = presets::preset(name).ok_or_else(|| {
                CliError::input(format!("unknown preset '{name}'; available: {}", presets::PRESET_NAMES.join(", ")))
            })?;
            if file.experiment.is_some() {
                return Err(CliError::input("[experiment] overrides cannot be combined with --preset"));
            }
            preset.kind
        }
        None => PresetKind::Experiments(vec![("experiment".to_string(), file.experiment()?)]),
    };

    create_dir(&args.out)?;
    match kind {
        PresetKind::Experiments(runs) => {
            let mut results = Vec::with_capacity(runs.len());
            for (label, mut config) in runs {
                if args.preset.is_some() {
                    file.apply_algorithms(&mut config)?;
                    let noise = config.noise.kind;
                    config.noise = file.noise.model()?;
                    config.noise.kind = noise;
                }
                apply_flags(&mut config, args)?;
                if verbose > 0 {
                    eprintln!(
                        "{label}: {} points x {} trials, {} methods",
                        config.sweep.grid.len(),
                        config.trials,
                        config.methods.len()
                    );
                }
                let series = run_monte_carlo(&config)?;
                if verbose > 0 {
                    for m in &series.methods {
                        eprintln!("  {:<5} auc {:.3}", m.method.name(), m.auc);
                    }
                }
                results.push((label, series));
            }
            write_runs(&args.out, &results)?;
            let total: usize = results.iter().map(|(_, s)| s.total_failures()).sum();
            println!("wrote {} run(s) to {} ({total} failed pipeline calls)", results.len(), args.out.display());
        }
        PresetKind::Timing(mut config) => {
            config.samp = file.samp.build()?;
            config.classical = file.classical.build();
            if let Some(s) = args.seed {
                config.seed = s;
            }
            if let Some(m) = &args.methods {
                config.methods = config::parse_methods(m)?;
            }
            let rows = time_methods(&config)?;
            report::write_timing(&args.out.join("timing.csv"), &rows)?;
            println!("wrote {} timing rows to {}", rows.len(), args.out.display());
        }
        PresetKind::Amplitudes(mut config) => {
            if let Some(t) = args.trials {
                config.trials = t;
            }
            if let Some(s) = args.seed {
                config.seed = s;
            }
            let rows = amplitude_study(&config)?;
            report::write_amplitudes(&args.out.join("amplitudes.csv"), &rows)?;
            println!("wrote {} amplitude rows to {}", rows.len(), args.out.display());
        }
    }
    Ok(())
}

fn bench_amps(args: &BenchAmpsArgs) -> Result<()> {
    let mut scenario = Scenario::new(args.order, false);
    scenario.snr_db = args.snr_db;
    let mut config = AmplitudeStudyConfig::new(scenario, args.samples.clone());
    config.trials = args.trials;
    config.reps = args.reps;
    config.seed = args.seed;
    let rows = amplitude_study(&config)?;
    create_dir(&args.out)?;
    report::write_amplitudes(&args.out.join("amplitudes.csv"), &rows)?;
    println!("{:>6} {:<14} {:>12} {:>12}", "n", "method", "rmse", "seconds");
    for r in &rows {
        println!("{:>6} {:<14} {:>12.6} {:>12.3e}", r.samples, r.method.name(), r.rmse, r.seconds);
    }
    Ok(())
}
