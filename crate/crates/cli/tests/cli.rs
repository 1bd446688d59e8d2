use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use samp_core::io;
use samp_core::signal::{synthesize, ExponentialComponent, SignalSpec};
use samp_core::C64;

fn samp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_samp")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_tone(path: &Path) {
    let spec = SignalSpec::new(vec![ExponentialComponent::undamped(C64::new(1.0, 0.0), 1.0).unwrap()], 64).unwrap();
    io::write_signal_file(path, &synthesize(&spec)).unwrap();
}

#[test]
fn analyze_clean_tone() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("tone.csv");
    write_tone(&input);
    let out = samp(&["analyze", input.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("detector: SAMP"));
    assert!(text.contains("order: 1"), "{text}");

    let est = fs::read_to_string(dir.path().join("estimates.csv")).unwrap();
    let rows: Vec<&str> = est.lines().collect();
    assert_eq!(rows[0], "theta,alpha,re_b,im_b,feature,mode_index");
    assert_eq!(rows.len(), 2);
    let theta: f64 = rows[1].split(',').next().unwrap().parse().unwrap();
    assert!((theta - 1.0).abs() < 1e-6, "{theta}");
    let features = fs::read_to_string(dir.path().join("features.csv")).unwrap();
    assert!(features.starts_with("index,re_z,im_z,raw,d,eps,threshold,is_signal"));
    assert!(features.lines().count() >= 2);
}

#[test]
fn analyze_with_classical_detector() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("tone.csv");
    write_tone(&input);
    let out = samp(&["analyze", input.to_str().unwrap(), "-o", dir.path().to_str().unwrap(), "--detector", "gap"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("detector: GAP"));
    assert_eq!(fs::read_to_string(dir.path().join("features.csv")).unwrap().lines().count(), 1);

    let bad = samp(&["analyze", input.to_str().unwrap(), "-o", dir.path().to_str().unwrap(), "--detector", "evt"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn analyze_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let header_only = dir.path().join("empty.csv");
    fs::write(&header_only, "re,im\n").unwrap();
    let out = samp(&["analyze", header_only.to_str().unwrap(), "-o", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("error:"));

    let malformed = dir.path().join("bad.csv");
    fs::write(&malformed, "re,im\n1,0\n0.5,0.5\nx,1\n").unwrap();
    let out = samp(&["analyze", malformed.to_str().unwrap(), "-o", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 4"), "{}", stderr(&out));

    let missing = samp(&["analyze", dir.path().join("nope.csv").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn simulate_preset_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = samp(&["simulate", "--preset", "fig3a", "--trials", "50", "--seed", "1", "-o", out_dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", stderr(&out));
        out_dir
    };
    let (a, b) = (run("a"), run("b"));
    for file in ["pd.csv", "pd_wide.csv", "rmse.csv", "bias.csv", "components.csv", "summary.csv"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
    let wide = fs::read_to_string(a.join("pd_wide.csv")).unwrap();
    let lines: Vec<&str> = wide.lines().collect();
    assert_eq!(lines.len(), 17);
    assert!(lines.iter().all(|l| l.split(',').count() == 7));
    let grid: Vec<f64> = lines[1..].iter().map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    let expected: Vec<f64> = (0..16).map(|k| -10.0 + 2.0 * k as f64).collect();
    assert_eq!(grid, expected);
    let summary = fs::read_to_string(a.join("summary.csv")).unwrap();
    let methods: Vec<&str> = summary.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(methods, ["SAMP", "SDD", "GAP", "EFF", "AIC", "BIC"]);
}

#[test]
fn simulate_from_config_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "[experiment]\nsweep = \"samples\"\ngrid = [30, 50]\nsnr_db = 15.0\ntrials = 4\nmethods = [\"samp\", \"bic\"]\n\
         [noise]\nkind = \"binormal\"\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = samp(&[
        "simulate", "--config", cfg.to_str().unwrap(), "--set", "experiment.seed=5", "--threads", "1", "-o",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let wide = fs::read_to_string(out_dir.join("pd_wide.csv")).unwrap();
    assert_eq!(wide.lines().next().unwrap(), "samples,SAMP,BIC");
    assert_eq!(wide.lines().count(), 3);
}

#[test]
fn simulate_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[experiment]\ngrid = [0.0, 10.0]\n").unwrap();

    let both = samp(&["simulate", "--preset", "fig3a", "--config", cfg.to_str().unwrap()]);
    assert_eq!(both.status.code(), Some(2));

    let unknown = samp(&["simulate", "--preset", "fig99", "-o", dir.path().to_str().unwrap()]);
    assert_eq!(unknown.status.code(), Some(2));
    let msg = stderr(&unknown);
    assert!(msg.starts_with("error:") && msg.contains("fig3a") && msg.contains("table1"), "{msg}");

    fs::write(&cfg, "[experiment]\ngrid = [0.0, 10.0]\ntrails = 5\n").unwrap();
    let typo = samp(&["simulate", "--config", cfg.to_str().unwrap(), "-o", dir.path().to_str().unwrap()]);
    assert_eq!(typo.status.code(), Some(2));
    assert!(stderr(&typo).contains("trails"));

    let zero = samp(&["simulate", "--preset", "fig3a", "--trials", "0", "-o", dir.path().to_str().unwrap()]);
    assert_eq!(zero.status.code(), Some(2));
}

#[test]
fn bench_amps_default_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = samp(&["bench-amps", "-o", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("amplitudes.csv")).unwrap();
    let rows: Vec<Vec<String>> =
        text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect();
    assert_eq!(text.lines().next().unwrap(), "n,method,rmse,seconds,failures");
    assert_eq!(rows.len(), 8);
    for n in ["100", "200", "400", "600"] {
        for m in ["modes", "least_squares"] {
            assert!(rows.iter().any(|r| r[0] == n && r[1] == m), "{n} {m}");
        }
    }
    let at = |m: &str, col: usize| -> f64 { rows.iter().find(|r| r[0] == "600" && r[1] == m).unwrap()[col].parse().unwrap() };
    assert!(at("modes", 3) < at("least_squares", 3));
    assert!(at("modes", 2) / at("least_squares", 2) <= 1.5);
}

#[test]
fn presets_are_listed() {
    let out = samp(&["presets"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for name in ["fig3a", "fig3b", "fig4", "fig5", "fig6", "table1", "fig7-timing", "fig8-amps"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name}");
    }
}
