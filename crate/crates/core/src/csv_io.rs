//! CSV files shared by the library, the command-line runner and the tests.
//!
//! Observables are written with 12 significant digits in exponent form so that
//! identical runs give byte-identical files. Pulse files use the shortest
//! representation that round-trips exactly, so an exported pulse re-imports
//! bit for bit.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::grape::TcMinPoint;
use crate::io_oracle::ChainHop;
use crate::model::PhotonEnvelope;
use crate::pulses::{ControlPulse, Interpolation};
use crate::{Error, Result, SimulationRecord, C64};

pub const RECORD_HEADER: [&str; 10] = [
    "t", "eta", "p_r", "p_s", "p_loss", "rho_rr", "rho_ee", "rho_aa", "omega_re", "omega_im",
];
pub const PULSE_HEADER: [&str; 3] = ["t", "omega_re", "omega_im"];
pub const SWEEP_HEADER: [&str; 7] = ["x", "pulse", "eta", "p_r", "p_s", "p_loss", "status"];
pub const TCMIN_HEADER: [&str; 4] = ["g", "tc_min", "eta_achieved", "iters"];
pub const CHAIN_HEADER: [&str; 3] = ["node", "eta", "emitted_norm"];
pub const ENVELOPE_HEADER: [&str; 4] = ["node", "t", "re", "im"];

/// Fixed-width exponent form used for observables.
pub fn fmt_value(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:.11e}")
    }
}

// Shortest exact representation.
fn fmt_exact(x: f64) -> String {
    format!("{x:e}")
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn create(path: &Path) -> Result<File> {
    Ok(File::create(path)?)
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let h = rdr.headers()?;
    if h.iter().ne(expected.iter().copied()) {
        return Err(Error::Format(format!(
            "header {:?} does not match {:?}",
            h.iter().collect::<Vec<_>>(),
            expected
        )));
    }
    Ok(())
}

fn parse(field: &str, line: u64) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Format(format!("line {line}: cannot parse `{field}` as a number")))
}

pub fn write_record<W: Write>(rec: &SimulationRecord, w: W) -> Result<()> {
    let mut wr = writer(w);
    wr.write_record(RECORD_HEADER)?;
    for i in 0..rec.len() {
        wr.write_record([
            fmt_value(rec.times[i]),
            fmt_value(rec.eta[i]),
            fmt_value(rec.p_r[i]),
            fmt_value(rec.p_s[i]),
            fmt_value(rec.p_loss[i]),
            fmt_value(rec.rho_rr[i]),
            fmt_value(rec.rho_ee[i]),
            fmt_value(rec.rho_aa[i]),
            fmt_value(rec.omega[i].re),
            fmt_value(rec.omega[i].im),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_record_file(rec: &SimulationRecord, path: &Path) -> Result<()> {
    write_record(rec, create(path)?)
}

pub fn read_record<R: Read>(r: R) -> Result<SimulationRecord> {
    let mut rdr = csv::Reader::from_reader(r);
    check_header(&mut rdr, &RECORD_HEADER)?;
    let mut rec = SimulationRecord::default();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let v: Vec<f64> = row.iter().map(|f| parse(f, line)).collect::<Result<_>>()?;
        if v.len() != RECORD_HEADER.len() {
            return Err(Error::Format(format!("line {line}: expected 10 fields")));
        }
        rec.times.push(v[0]);
        rec.eta.push(v[1]);
        rec.p_r.push(v[2]);
        rec.p_s.push(v[3]);
        rec.p_loss.push(v[4]);
        rec.rho_rr.push(v[5]);
        rec.rho_ee.push(v[6]);
        rec.rho_aa.push(v[7]);
        rec.omega.push(C64::new(v[8], v[9]));
    }
    Ok(rec)
}

/// Writes a pulse. Sample-backed pulses are written at their own samples
/// (held pulses get a closing row at the end of their domain); other pulses
/// are sampled on `grid`.
pub fn write_pulse<W: Write>(pulse: &ControlPulse, grid: &[f64], w: W) -> Result<()> {
    let (times, values) = match pulse.native_samples() {
        Some((t, v, _)) => (t, v),
        None => (grid.to_vec(), pulse.sample(grid)),
    };
    let mut wr = writer(w);
    wr.write_record(PULSE_HEADER)?;
    for (t, v) in times.iter().zip(&values) {
        wr.write_record([fmt_exact(*t), fmt_exact(v.re), fmt_exact(v.im)])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_pulse_file(pulse: &ControlPulse, grid: &[f64], path: &Path) -> Result<()> {
    write_pulse(pulse, grid, create(path)?)
}

/// Reads a pulse file. With [`Interpolation::Hold`] every row but the last
/// starts a constant piece and the last row only marks the end of the domain.
pub fn read_pulse<R: Read>(r: R, interp: Interpolation) -> Result<ControlPulse> {
    let mut rdr = csv::Reader::from_reader(r);
    check_header(&mut rdr, &PULSE_HEADER)?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != 3 {
            return Err(Error::Format(format!("line {line}: expected 3 fields")));
        }
        times.push(parse(&row[0], line)?);
        values.push(C64::new(parse(&row[1], line)?, parse(&row[2], line)?));
    }
    let pulse = match interp {
        Interpolation::Linear => ControlPulse::sampled(times, values, interp, None)?,
        Interpolation::Hold => {
            if times.len() < 3 {
                return Err(Error::Format("a held pulse needs at least 3 rows".into()));
            }
            let end = times.pop().expect("len >= 3");
            values.pop();
            ControlPulse::sampled(times, values, interp, Some(end))?
        }
    };
    Ok(pulse.with_label("file"))
}

pub fn read_pulse_file(path: &Path, interp: Interpolation) -> Result<ControlPulse> {
    read_pulse(File::open(path)?, interp)
}

/// One row of a parameter sweep. `status` is `ok` or the error message of a
/// failed point, whose numbers are then not-a-number.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub x: f64,
    pub pulse: String,
    pub eta: f64,
    pub p_r: f64,
    pub p_s: f64,
    pub p_loss: f64,
    pub status: String,
}

impl SweepRow {
    pub fn failed(x: f64, pulse: impl Into<String>, err: &Error) -> Self {
        Self {
            x,
            pulse: pulse.into(),
            eta: f64::NAN,
            p_r: f64::NAN,
            p_s: f64::NAN,
            p_loss: f64::NAN,
            status: err.to_string(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

pub fn write_sweep<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut wr = writer(w);
    wr.write_record(SWEEP_HEADER)?;
    for r in rows {
        wr.write_record([
            fmt_value(r.x),
            r.pulse.clone(),
            fmt_value(r.eta),
            fmt_value(r.p_r),
            fmt_value(r.p_s),
            fmt_value(r.p_loss),
            r.status.clone(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_sweep<R: Read>(r: R) -> Result<Vec<SweepRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    check_header(&mut rdr, &SWEEP_HEADER)?;
    let mut rows = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != SWEEP_HEADER.len() {
            return Err(Error::Format(format!("line {line}: expected 7 fields")));
        }
        rows.push(SweepRow {
            x: parse(&row[0], line)?,
            pulse: row[1].to_string(),
            eta: parse(&row[2], line)?,
            p_r: parse(&row[3], line)?,
            p_s: parse(&row[4], line)?,
            p_loss: parse(&row[5], line)?,
            status: row[6].to_string(),
        });
    }
    Ok(rows)
}

/// Unreached targets are written with an empty `tc_min`.
pub fn write_tcmin<W: Write>(points: &[TcMinPoint], w: W) -> Result<()> {
    let mut wr = writer(w);
    wr.write_record(TCMIN_HEADER)?;
    for p in points {
        wr.write_record([
            fmt_value(p.g),
            p.tc_min.map(fmt_value).unwrap_or_default(),
            fmt_value(p.eta_achieved),
            p.iters.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_chain<W: Write>(hops: &[ChainHop], w: W) -> Result<()> {
    let mut wr = writer(w);
    wr.write_record(CHAIN_HEADER)?;
    for h in hops {
        wr.write_record([h.node.to_string(), fmt_value(h.eta), fmt_value(h.emitted_norm)])?;
    }
    wr.flush()?;
    Ok(())
}

/// Incoming envelope of every hop, `n` samples each.
pub fn write_chain_envelopes<W: Write>(hops: &[ChainHop], n: usize, w: W) -> Result<()> {
    let mut wr = writer(w);
    wr.write_record(ENVELOPE_HEADER)?;
    for h in hops {
        let (ts, vs) = h.incoming.sample(n);
        for (t, v) in ts.iter().zip(&vs) {
            wr.write_record([h.node.to_string(), fmt_value(*t), fmt_value(v.re), fmt_value(v.im)])?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// A single envelope as node 0 in the envelope schema.
pub fn write_envelope<W: Write>(env: &PhotonEnvelope, n: usize, w: W) -> Result<()> {
    let mut wr = writer(w);
    wr.write_record(ENVELOPE_HEADER)?;
    let (ts, vs) = env.sample(n);
    for (t, v) in ts.iter().zip(&vs) {
        wr.write_record(["0".to_string(), fmt_value(*t), fmt_value(v.re), fmt_value(v.im)])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::linspace;

    #[test]
    fn piecewise_pulse_round_trips_exactly() {
        let slices: Vec<C64> = (0..20).map(|k| C64::new(0.1 * k as f64, -1.0 / (k + 1) as f64)).collect();
        let p = ControlPulse::piecewise(slices.clone(), -0.3, 0.7).unwrap();
        let mut buf = Vec::new();
        write_pulse(&p, &[], &mut buf).unwrap();
        let q = read_pulse(buf.as_slice(), Interpolation::Hold).unwrap();
        assert_eq!(q.domain(), p.domain());
        for t in linspace(-0.3, 0.7, 997) {
            assert_eq!(p.value(t), q.value(t), "t = {t}");
        }
    }

    #[test]
    fn analytic_pulse_is_sampled_on_grid() {
        let p = ControlPulse::from_fn("f", 0.0, 1.0, |t| C64::new(t.sin(), 0.0)).unwrap();
        let grid = linspace(0.0, 1.0, 11);
        let mut buf = Vec::new();
        write_pulse(&p, &grid, &mut buf).unwrap();
        let q = read_pulse(buf.as_slice(), Interpolation::Linear).unwrap();
        for &t in &grid {
            assert_eq!(q.value(t), p.value(t));
        }
    }

    #[test]
    fn bad_header_is_rejected() {
        let txt = "time,re,im\n0,1,0\n1,1,0\n";
        assert!(matches!(read_pulse(txt.as_bytes(), Interpolation::Linear), Err(Error::Format(_))));
        let txt = "t,omega_re,omega_im\n0,x,0\n1,1,0\n";
        assert!(matches!(read_pulse(txt.as_bytes(), Interpolation::Linear), Err(Error::Format(_))));
    }

    #[test]
    fn sweep_rows_keep_failures() {
        let rows = vec![
            SweepRow {
                x: 1.0,
                pulse: "X".into(),
                eta: 0.5,
                p_r: 0.1,
                p_s: 0.2,
                p_loss: 0.2,
                status: "ok".into(),
            },
            SweepRow::failed(2.0, "D", &Error::ZeroNorm),
        ];
        let mut buf = Vec::new();
        write_sweep(&rows, &mut buf).unwrap();
        let back = read_sweep(buf.as_slice()).unwrap();
        assert_eq!(back[0], rows[0]);
        assert!(back[1].eta.is_nan() && back[1].status == "envelope has zero norm");
    }

    #[test]
    fn record_format_is_fixed() {
        assert_eq!(fmt_value(0.5), "5.00000000000e-1");
        assert_eq!(fmt_value(f64::NAN), "NaN");
    }
}
