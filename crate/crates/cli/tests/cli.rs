//! End-to-end runs of the `photon-memory-sim` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pms_cli::Config;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_photon-memory-sim"));
    c.env_remove("PMS_OUT");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn summary(dir: &Path) -> Vec<(String, String)> {
    fs::read_to_string(dir.join("summary.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let (k, v) = l.split_once(',').unwrap();
            (k.to_string(), v.to_string())
        })
        .collect()
}

fn value(dir: &Path, key: &str) -> f64 {
    summary(dir)
        .into_iter()
        .find(|(k, _)| k == key)
        .unwrap_or_else(|| panic!("no {key} in summary"))
        .1
        .parse()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn print_config_is_a_loadable_default() {
    let out = run(&["simulate", "--print-config"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let cfg = Config::parse(&text, Path::new("printed.toml")).unwrap();
    assert_eq!(cfg, Config::default());
    assert!(text.contains("g_mhz = 4.9"));
    assert!(text.contains("# eta_max = 0.766050"));
}

#[test]
fn config_errors_exit_with_2() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(run(&["simulate"]).status.code(), Some(2));
    let unknown = write_config(tmp.path(), "u.toml", "[params]\ng = 1.0\n");
    let out = run(&["simulate", "--config", s(&unknown), "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown field"));
    let even = write_config(tmp.path(), "e.toml", "[geometry]\nn_modes = 200\n");
    assert_eq!(run(&["simulate", "--config", s(&even)]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--config", "/does/not/exist.toml"]).status.code(), Some(2));
    assert_eq!(run(&["nonsense"]).status.code(), Some(2));
}

#[test]
fn numeric_failure_exits_with_3() {
    let tmp = TempDir::new().unwrap();
    // Ω^D has no real solution for such a short photon.
    let cfg = write_config(tmp.path(), "d.toml", "[params]\ntc_us = 0.01\n[pulse]\nkind = \"D\"\n");
    let out = run(&["simulate", "--config", s(&cfg), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_reproduces_adiabatic_efficiencies() {
    let tmp = TempDir::new().unwrap();
    let x = tmp.path().join("x");
    let out = run(&["simulate", "--config", s(&configs().join("storage_x.toml")), "--out", s(&x)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!((value(&x, "eta") - 0.653).abs() <= 0.007);
    assert!((value(&x, "eta_prime_max") - 0.65328).abs() < 1e-4);
    for f in ["record.csv", "pulse.csv", "summary.csv"] {
        assert!(x.join(f).exists());
    }

    let g = tmp.path().join("g");
    let out = run(&["simulate", "--config", s(&configs().join("storage_g_lossless.toml")), "--out", s(&g)]);
    assert!(out.status.success());
    assert!((value(&g, "eta") - 0.77).abs() <= 0.01);
}

#[test]
fn identical_configs_give_identical_files() {
    let tmp = TempDir::new().unwrap();
    let cfg = configs().join("storage_x.toml");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&["simulate", "--config", s(&cfg), "--out", s(&a)]).status.success());
    assert!(run(&["simulate", "--config", s(&cfg), "--out", s(&b)]).status.success());
    for f in ["record.csv", "pulse.csv", "summary.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn exported_optimized_pulse_reproduces_its_record() {
    let tmp = TempDir::new().unwrap();
    let base = "[params]\ntc_us = 0.05\n[geometry]\nn_modes = 31\n[optimize]\nslices = 16\nmax_iters = 5\n";
    let opt = write_config(tmp.path(), "opt.toml", &format!("{base}[pulse]\nkind = \"opt\"\n"));
    let first = tmp.path().join("first");
    assert!(run(&["simulate", "--config", s(&opt), "--out", s(&first)]).status.success());

    let file = write_config(
        tmp.path(),
        "file.toml",
        &format!("{base}[pulse]\nkind = \"file\"\nfile = \"first/pulse.csv\"\ninterpolation = \"hold\"\n"),
    );
    let second = tmp.path().join("second");
    let out = run(&["simulate", "--config", s(&file), "--out", s(&second)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        fs::read(first.join("record.csv")).unwrap(),
        fs::read(second.join("record.csv")).unwrap()
    );
    assert_eq!(
        fs::read(first.join("pulse.csv")).unwrap(),
        fs::read(second.join("pulse.csv")).unwrap()
    );
}

#[test]
fn sweep_rows_follow_the_axis_for_any_job_count() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "s.toml",
        "[geometry]\nn_modes = 61\n[sweep]\nvariable = \"gamma\"\nstart = 1.0\nstop = 5.0\npoints = 3\npulses = [\"X\", \"G\"]\n",
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&["sweep", "--config", s(&cfg), "--out", s(&a), "--jobs", "1"]).status.success());
    assert!(run(&["sweep", "--config", s(&cfg), "--out", s(&b), "--jobs", "3"]).status.success());
    let text = fs::read_to_string(a.join("sweep.csv")).unwrap();
    assert_eq!(text, fs::read_to_string(b.join("sweep.csv")).unwrap());
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,pulse,eta,p_r,p_s,p_loss,status");
    assert_eq!(lines.len(), 7);
    assert!(lines[1].starts_with("1.00000000000e0,X,"));
    assert!(lines[2].starts_with("1.00000000000e0,G,"));
    assert!(lines[6].starts_with("5.00000000000e0,G,"));
}

#[test]
fn failed_sweep_points_are_recorded_and_exit_with_4() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "s.toml",
        "[geometry]\nn_modes = 61\n[sweep]\nvariable = \"Tc\"\nstart = 0.01\nstop = 1.0\npoints = 2\nscale = \"log\"\npulses = [\"D\"]\n",
    );
    let out_dir = tmp.path().join("o");
    let out = run(&["sweep", "--config", s(&cfg), "--out", s(&out_dir)]);
    assert_eq!(out.status.code(), Some(4));
    let text = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[1].contains("NaN") && lines[1].contains("radicand"), "{}", lines[1]);
    assert!(lines[2].ends_with(",ok"), "{}", lines[2]);
}

#[test]
fn output_directory_defaults_to_pms_out() {
    let tmp = TempDir::new().unwrap();
    let target = tmp.path().join("from_env");
    let cfg = write_config(tmp.path(), "c.toml", "[geometry]\nn_modes = 31\n");
    let out = bin()
        .args(["simulate", "--config", s(&cfg)])
        .env("PMS_OUT", &target)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(target.join("record.csv").exists());
}

#[test]
fn chain_of_five_keeps_its_efficiency() {
    let tmp = TempDir::new().unwrap();
    let out_dir = tmp.path().join("c");
    let out = run(&["retrieve-chain", "--config", s(&configs().join("chain.toml")), "--out", s(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(out_dir.join("chain.csv")).unwrap();
    let etas: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(etas.len(), 5);
    for e in &etas {
        assert!((e - etas[0]).abs() < 1e-3, "{etas:?}");
    }
    assert!(value(&out_dir, "eta_spread") < 1e-3);
    assert!(out_dir.join("chain_envelopes.csv").exists());
}

#[test]
fn optimize_writes_pulse_history_and_comparison() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "o.toml",
        "[params]\ntc_us = 0.05\nkappa_loss_mhz = 0.33\n[geometry]\nn_modes = 31\n\
         [optimize]\nslices = 16\nmax_iters = 20\ntc_values = [0.05, 0.1]\n",
    );
    let out_dir = tmp.path().join("o");
    let out = run(&["optimize", "--config", s(&cfg), "--out", s(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let opt = value(&out_dir, "eta_opt_lossless");
    assert!(opt >= value(&out_dir, "eta_x_lossless") - 1e-9);
    assert!(value(&out_dir, "eta_opt_lossy") <= value(&out_dir, "eta_prime_max") + 0.01);
    let curve = fs::read_to_string(out_dir.join("optimize_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 3);
    for f in ["optimized_pulse.csv", "optimize_history.csv", "record_lossless.csv", "record_lossy.csv"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
}

#[test]
fn tcmin_single_coupling() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "t.toml",
        "[tcmin]\ng_over_kappa_min = 1.0\ng_over_kappa_max = 1.0\nper_decade = 1\n",
    );
    let out_dir = tmp.path().join("t");
    let out = run(&["tcmin", "--config", s(&cfg), "--out", s(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(out_dir.join("tcmin.csv")).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let tc: f64 = row[1].parse().unwrap();
    assert!((tc / 0.0159 - 1.0).abs() < 0.1, "{tc}");
    assert!(out_dir.join("tcmin_fit.csv").exists());
}

#[test]
fn plot_stub_needs_no_config() {
    let tmp = TempDir::new().unwrap();
    let out = run(&["plot-stub", "--out", s(tmp.path())]);
    assert!(out.status.success());
    let script = fs::read_to_string(tmp.path().join("plot.py")).unwrap();
    assert!(script.contains("matplotlib"));
}

#[test]
fn shipped_configs_parse() {
    for entry in fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        Config::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}
