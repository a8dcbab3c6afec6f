//! Scenario runners. Each writes its CSV files into the output directory and
//! returns their paths; data files carry no timestamps, so identical configs
//! give byte-identical output.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use photon_memory::csv_io::{
    fmt_value, read_pulse_file, write_chain, write_chain_envelopes, write_pulse, write_record, write_sweep,
    write_tcmin, SweepRow,
};
use photon_memory::grape::{
    evaluate_with_losses, fit_two_regimes, log_log_slope, min_coherence_time, optimize_storage, OptimizationReport,
    TcMinPoint,
};
use photon_memory::io_oracle::node_chain;
use photon_memory::model::mhz;
use photon_memory::propagator::propagate_photon;
use photon_memory::pulses::{
    default_c1, omega_d, omega_f, omega_g, omega_x, ControlPulse, EfficiencyBounds, Interpolation,
};
use photon_memory::{PhotonEnvelope, SimulationRecord, SystemParams};
use rayon::prelude::*;

use crate::config::{Config, PulseKind, SweepVariable};
use crate::{CliError, Context};

/// Output directory that remembers what was written.
pub struct Output {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Output {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::Output {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    /// Creates `name` and hands a buffered writer to `f`.
    pub fn write<F>(&mut self, name: &str, f: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> photon_memory::Result<()>,
    {
        let path = self.dir.join(name);
        let io_err = |source| CliError::Output {
            path: path.clone(),
            source,
        };
        let mut w = BufWriter::new(File::create(&path).map_err(io_err)?);
        f(&mut w).map_err(|e| match e {
            photon_memory::Error::Io(source) => CliError::Output {
                path: path.clone(),
                source,
            },
            other => CliError::Output {
                path: path.clone(),
                source: std::io::Error::other(other.to_string()),
            },
        })?;
        w.flush().map_err(io_err)?;
        self.written.push(path);
        Ok(())
    }

    pub fn files(self) -> Vec<PathBuf> {
        self.written
    }
}

/// `quantity,value` table.
fn write_summary(out: &mut Output, name: &str, rows: &[(&str, String)]) -> Result<(), CliError> {
    out.write(name, |w| {
        writeln!(w, "quantity,value")?;
        for (k, v) in rows {
            writeln!(w, "{k},{v}")?;
        }
        Ok(())
    })
}

fn bound_rows(p: &SystemParams) -> Vec<(&'static str, String)> {
    match EfficiencyBounds::new(p) {
        Ok(b) => vec![
            ("cooperativity", fmt_value(b.c)),
            ("cooperativity_loss", fmt_value(b.c_prime)),
            ("eta_max", fmt_value(b.eta_max)),
            ("eta_prime_max", fmt_value(b.eta_prime_max)),
        ],
        // γ = 0: the bounds are 1 and κ/(κ+κ_loss).
        Err(_) => vec![
            ("eta_max", fmt_value(1.0)),
            ("eta_prime_max", fmt_value(p.kappa / p.kappa_total())),
        ],
    }
}

fn record_rows(rec: &SimulationRecord) -> Vec<(&'static str, String)> {
    let last = |v: &[f64]| fmt_value(*v.last().unwrap_or(&f64::NAN));
    vec![
        ("eta", last(&rec.eta)),
        ("p_r", last(&rec.p_r)),
        ("p_s", last(&rec.p_s)),
        ("p_loss", last(&rec.p_loss)),
        ("rho_ee", last(&rec.rho_ee)),
        ("rho_aa", last(&rec.rho_aa)),
        ("max_closure_error", fmt_value(rec.max_closure_error())),
    ]
}

fn optimize(cfg: &Config, p: &SystemParams, env: &PhotonEnvelope) -> Result<OptimizationReport, CliError> {
    let report = optimize_storage(&p.lossless(), env, &cfg.grape_options(), None).ctx("optimize")?;
    info!(
        "GRAPE: eta = {:.5} after {} iterations ({})",
        report.final_eta(),
        report.iterations,
        report.termination
    );
    Ok(report)
}

/// Control pulse of the requested kind for `env` under `p`.
pub fn build_pulse(
    cfg: &Config,
    kind: PulseKind,
    p: &SystemParams,
    env: &PhotonEnvelope,
) -> Result<ControlPulse, CliError> {
    let scenario = format!("pulse {kind}");
    let pulse = match kind {
        PulseKind::X => omega_x(p, env, p.delta_1).ctx(&scenario)?,
        PulseKind::G => omega_g(p, env, p.delta_1).ctx(&scenario)?,
        PulseKind::F => {
            let c1 = default_c1(p, env, cfg.pulse.rho0).ctx(&scenario)?;
            omega_f(p, env, Some(c1)).ctx(&scenario)?
        }
        PulseKind::D => omega_d(p, env, cfg.pulse.rho0).ctx(&scenario)?,
        PulseKind::Opt => optimize(cfg, p, env)?.pulse,
        PulseKind::File => {
            let path = cfg.pulse.file.as_deref().expect("validated");
            read_pulse_file(path, Interpolation::from(cfg.pulse.interpolation))
                .map_err(|e| CliError::Config(format!("pulse file {}: {e}", path.display())))?
        }
    };
    Ok(match cfg.pulse.cap_mhz {
        Some(c) => pulse.with_cap(mhz(c)),
        None => pulse,
    })
}

/// Stores the configured photon with the configured pulse and writes
/// `record.csv`, `pulse.csv` and `summary.csv`.
pub fn run_simulate(cfg: &Config, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let tc = cfg.params.tc_us;
    let p = cfg.system(tc)?;
    let env = cfg.photon(&p, tc)?;
    let pulse = build_pulse(cfg, cfg.pulse.kind, &p, &env)?;
    let (rec, _) = propagate_photon(&env, &p, &pulse, cfg.numerics.points, &cfg.propagate_options()).ctx("simulate")?;

    let mut out = Output::new(dir)?;
    out.write("record.csv", |w| write_record(&rec, w))?;
    out.write("pulse.csv", |w| write_pulse(&pulse, &rec.times, w))?;
    let mut rows = vec![("pulse", cfg.pulse.kind.to_string())];
    rows.extend(record_rows(&rec));
    rows.extend(bound_rows(&p));
    rows.push(("clip_events", pulse.clip_events().to_string()));
    write_summary(&mut out, "summary.csv", &rows)?;
    Ok(out.files())
}

fn sweep_point(cfg: &Config, x: f64, kind: PulseKind) -> Result<SweepRow, CliError> {
    let mut c = cfg.clone();
    match cfg.sweep.variable {
        SweepVariable::Gamma => c.params.gamma_mhz = x,
        SweepVariable::Kappa => c.params.kappa_mhz = x,
        SweepVariable::Tc => c.params.tc_us = x,
        SweepVariable::KappaLoss => c.params.kappa_loss_mhz = x,
        SweepVariable::Delta => c.params.delta_mhz = x,
    }
    c.validate()?;
    let tc = c.params.tc_us;
    let p = c.system(tc)?;
    let env = c.photon(&p, tc)?;
    let pulse = build_pulse(&c, kind, &p, &env)?;
    let (rec, _) = propagate_photon(&env, &p, &pulse, c.numerics.points, &c.propagate_options()).ctx("sweep")?;
    let last = |v: &[f64]| *v.last().unwrap_or(&f64::NAN);
    Ok(SweepRow {
        x,
        pulse: kind.to_string(),
        eta: rec.final_eta(),
        p_r: last(&rec.p_r),
        p_s: last(&rec.p_s),
        p_loss: last(&rec.p_loss),
        status: "ok".to_string(),
    })
}

/// One row per sweep value and pulse in axis order; failed points keep their
/// error message in the `status` column and make the run partial.
pub fn run_sweep(cfg: &Config, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let items: Vec<(f64, PulseKind)> = cfg
        .sweep
        .values()
        .into_iter()
        .flat_map(|x| cfg.sweep.pulses.iter().map(move |&k| (x, k)))
        .collect();
    info!("sweep: {} points", items.len());
    let rows: Vec<SweepRow> = items
        .par_iter()
        .map(|&(x, kind)| {
            sweep_point(cfg, x, kind).unwrap_or_else(|e| SweepRow {
                x,
                pulse: kind.to_string(),
                eta: f64::NAN,
                p_r: f64::NAN,
                p_s: f64::NAN,
                p_loss: f64::NAN,
                status: e.to_string(),
            })
        })
        .collect();
    let mut out = Output::new(dir)?;
    out.write("sweep.csv", |w| write_sweep(&rows, w))?;
    let failed = rows.iter().filter(|r| !r.is_ok()).count();
    if failed > 0 {
        return Err(CliError::Partial {
            failed,
            total: rows.len(),
        });
    }
    Ok(out.files())
}

/// Lossless GRAPE at the configured Tc, compared with Ω^X and re-evaluated
/// with the configured losses. With `optimize.tc_values` set, also writes the
/// η(Tc) comparison `optimize_curve.csv`.
pub fn run_optimize(cfg: &Config, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let tc = cfg.params.tc_us;
    let p = cfg.system(tc)?;
    let env = cfg.photon(&p, tc)?;
    let lossless = p.lossless();
    let opts = cfg.propagate_options();
    let n = cfg.numerics.points;

    let x = omega_x(&lossless, &env, p.delta_1).ctx("optimize")?;
    let (eta_x, _) = evaluate_with_losses(&x, &lossless, &env, n, &opts).ctx("optimize")?;
    let report = optimize(cfg, &p, &env)?;
    let (eta_opt, rec_lossless) = evaluate_with_losses(&report.pulse, &lossless, &env, n, &opts).ctx("optimize")?;
    let (eta_lossy, rec_lossy) = evaluate_with_losses(&report.pulse, &p, &env, n, &opts).ctx("optimize")?;

    let mut out = Output::new(dir)?;
    out.write("optimized_pulse.csv", |w| write_pulse(&report.pulse, &[], w))?;
    out.write("optimize_history.csv", |w| {
        writeln!(w, "iteration,eta,grad_norm")?;
        for (i, (e, g)) in report.eta_history.iter().zip(&report.grad_norms).enumerate() {
            writeln!(w, "{i},{},{}", fmt_value(*e), fmt_value(*g))?;
        }
        Ok(())
    })?;
    out.write("record_lossless.csv", |w| write_record(&rec_lossless, w))?;
    out.write("record_lossy.csv", |w| write_record(&rec_lossy, w))?;
    let mut rows = vec![
        ("eta_x_lossless", fmt_value(eta_x)),
        ("eta_opt_objective", fmt_value(report.final_eta())),
        ("eta_opt_lossless", fmt_value(eta_opt)),
        ("eta_opt_lossy", fmt_value(eta_lossy)),
        ("iterations", report.iterations.to_string()),
        ("termination", report.termination.to_string()),
    ];
    rows.extend(bound_rows(&p));
    write_summary(&mut out, "summary.csv", &rows)?;

    if !cfg.optimize.tc_values.is_empty() {
        let curve: Vec<Result<(f64, f64), CliError>> = cfg
            .optimize
            .tc_values
            .par_iter()
            .map(|&tc| {
                let p = cfg.system(tc)?.lossless();
                let env = cfg.photon(&p, tc)?;
                let x = omega_x(&p, &env, p.delta_1).ctx("optimize")?;
                let (ex, _) = evaluate_with_losses(&x, &p, &env, n, &opts).ctx("optimize")?;
                let r = optimize(cfg, &p, &env)?;
                let (eo, _) = evaluate_with_losses(&r.pulse, &p, &env, n, &opts).ctx("optimize")?;
                Ok((ex, eo))
            })
            .collect();
        out.write("optimize_curve.csv", |w| {
            writeln!(w, "tc,eta_x,eta_opt,status")?;
            for (tc, r) in cfg.optimize.tc_values.iter().zip(&curve) {
                match r {
                    Ok((ex, eo)) => writeln!(w, "{},{},{},ok", fmt_value(*tc), fmt_value(*ex), fmt_value(*eo))?,
                    Err(e) => writeln!(w, "{},NaN,NaN,{}", fmt_value(*tc), e.to_string().replace(['\n', ','], " "))?,
                }
            }
            Ok(())
        })?;
        let failed = curve.iter().filter(|r| r.is_err()).count();
        if failed > 0 {
            return Err(CliError::Partial {
                failed,
                total: curve.len(),
            });
        }
    }
    Ok(out.files())
}

/// Minimum coherence time reaching `tcmin.eta_target` over a log grid of g,
/// plus the two-regime fit `Tc ≈ a κ/g²` (g ≤ κ/3) and `Tc ≈ a′/κ` (g ≥ 3κ).
pub fn run_tcmin(cfg: &Config, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let base = cfg.system(cfg.params.tc_us)?;
    let couplings = cfg.tcmin_couplings();
    info!("tcmin: {} couplings", couplings.len());
    let results = min_coherence_time(&couplings, &base, &cfg.tcmin_options());
    let mut failed = 0;
    let points: Vec<TcMinPoint> = couplings
        .iter()
        .zip(results)
        .map(|(&g, r)| {
            r.unwrap_or_else(|e| {
                log::warn!("tcmin at g = {g}: {e}");
                failed += 1;
                TcMinPoint {
                    g,
                    tc_min: None,
                    eta_achieved: f64::NAN,
                    iters: 0,
                }
            })
        })
        .collect();

    let kappa = base.kappa;
    let reached: Vec<(f64, f64)> = points.iter().filter_map(|p| p.tc_min.map(|t| (p.g, t))).collect();
    let bad: Vec<(f64, f64)> = reached.iter().copied().filter(|&(g, _)| g <= kappa / 3.0).collect();
    let good: Vec<(f64, f64)> = reached.iter().copied().filter(|&(g, _)| g >= 3.0 * kappa).collect();
    let slope = if bad.len() >= 2 {
        let (x, y): (Vec<f64>, Vec<f64>) = bad.iter().copied().unzip();
        log_log_slope(&x, &y)
    } else {
        f64::NAN
    };
    let variation = if good.is_empty() {
        f64::NAN
    } else {
        let (lo, hi) = good
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &(_, t)| (lo.min(t), hi.max(t)));
        hi / lo - 1.0
    };
    let (a, a_prime) = if bad.is_empty() || good.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        fit_two_regimes(kappa, &bad, &good)
    };

    let mut out = Output::new(dir)?;
    out.write("tcmin.csv", |w| write_tcmin(&points, w))?;
    write_summary(
        &mut out,
        "tcmin_fit.csv",
        &[
            ("kappa", fmt_value(kappa)),
            ("eta_target", fmt_value(cfg.tcmin.eta_target)),
            ("a", fmt_value(a)),
            ("a_prime", fmt_value(a_prime)),
            ("slope_bad_cavity", fmt_value(slope)),
            ("variation_good_cavity", fmt_value(variation)),
        ],
    )?;
    if failed > 0 {
        return Err(CliError::Partial {
            failed,
            total: points.len(),
        });
    }
    Ok(out.files())
}

/// Passes the configured photon through `chain.n_nodes` nodes; writes per-hop
/// efficiencies and the incoming envelope of every hop.
pub fn run_retrieve_chain(cfg: &Config, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let tc = cfg.params.tc_us;
    let p = cfg.system(tc)?;
    let env = cfg.photon(&p, tc)?;
    let hops = node_chain(&p, &env, &cfg.chain_options()).ctx("retrieve-chain")?;
    let spread = hops.iter().map(|h| (h.eta - hops[0].eta).abs()).fold(0.0, f64::max);

    let mut out = Output::new(dir)?;
    out.write("chain.csv", |w| write_chain(&hops, w))?;
    out.write("chain_envelopes.csv", |w| write_chain_envelopes(&hops, 401, w))?;
    let mut rows = vec![("nodes", hops.len().to_string()), ("eta_spread", fmt_value(spread))];
    rows.extend(bound_rows(&p));
    write_summary(&mut out, "summary.csv", &rows)?;
    Ok(out.files())
}

const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Quick look at the CSV files of a photon-memory-sim output directory.

Usage: python3 plot.py [DIR]   (defaults to the directory of this script)
"""
import csv
import os
import sys
from collections import defaultdict

import matplotlib.pyplot as plt


def rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def col(rs, key):
    return [float(r[key]) if r[key] not in ("", "NaN") else float("nan") for r in rs]


def plot_record(ax, rs, title):
    t = col(rs, "t")
    for key in ("eta", "p_r", "p_s", "p_loss", "rho_ee", "rho_aa"):
        ax.plot(t, col(rs, key), label=key)
    ax.set_xlabel("t [us]")
    ax.set_title(title)
    ax.legend()


def main():
    d = sys.argv[1] if len(sys.argv) > 1 else os.path.dirname(os.path.abspath(__file__))
    figs = []
    for name in sorted(os.listdir(d)):
        path = os.path.join(d, name)
        if not name.endswith(".csv"):
            continue
        rs = rows(path)
        if not rs:
            continue
        keys = list(rs[0].keys())
        fig, ax = plt.subplots()
        if keys[:2] == ["t", "eta"]:
            plot_record(ax, rs, name)
        elif keys == ["t", "omega_re", "omega_im"]:
            t = col(rs, "t")
            ax.step(t, col(rs, "omega_re"), where="post", label="Re")
            ax.step(t, col(rs, "omega_im"), where="post", label="Im")
            ax.set_xlabel("t [us]")
            ax.set_ylabel("Omega [rad/us]")
            ax.legend()
        elif keys[:2] == ["x", "pulse"]:
            by = defaultdict(list)
            for r in rs:
                by[r["pulse"]].append(r)
            for pulse, rr in by.items():
                ax.plot(col(rr, "x"), col(rr, "eta"), "o-", label=pulse)
            ax.set_ylabel("eta")
            ax.legend()
        elif keys[:2] == ["g", "tc_min"]:
            ax.loglog(col(rs, "g"), col(rs, "tc_min"), "o-")
            ax.set_xlabel("g [rad/us]")
            ax.set_ylabel("Tc_min [us]")
        elif keys[:2] == ["node", "eta"]:
            ax.plot(col(rs, "node"), col(rs, "eta"), "o-")
            ax.set_xlabel("node")
            ax.set_ylabel("eta")
        elif keys[:2] == ["tc", "eta_x"]:
            ax.semilogx(col(rs, "tc"), col(rs, "eta_x"), "o-", label="X")
            ax.semilogx(col(rs, "tc"), col(rs, "eta_opt"), "s-", label="opt")
            ax.legend()
        elif keys[:2] == ["iteration", "eta"]:
            ax.plot(col(rs, "iteration"), col(rs, "eta"))
            ax.set_xlabel("iteration")
        else:
            plt.close(fig)
            continue
        ax.set_title(name)
        figs.append((name, fig))
    for name, fig in figs:
        fig.savefig(os.path.join(d, name[:-4] + ".png"), dpi=120)
    print(f"wrote {len(figs)} figures to {d}")


if __name__ == "__main__":
    main()
"#;

/// Writes a generic matplotlib script that plots whatever CSV files it finds.
pub fn write_plot_stub(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Output::new(dir)?;
    out.write("plot.py", |w| Ok(w.write_all(PLOT_SCRIPT.as_bytes())?))?;
    Ok(out.files())
}
