//! CSV and JSON persistence for sweeps, pulses, trajectories and tables.
//!
//! Numbers are written with Rust's shortest round-trip formatting in the
//! crate's internal units (rad/µs, µs, volts), so a file read back yields the
//! exact values that were written and repeated runs produce identical bytes.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{DrivePulse, PhotonWaveform, Simulation};
use crate::spectroscopy::{SweepRecord, SweepStatus};

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("row {row}: {reason}")]
    Parse { row: usize, reason: String },
}

pub const SWEEP_HEADER: [&str; 6] = [
    "vd_v",
    "omega_d_rad_per_us",
    "gamma_f_per_us",
    "omega_ph_rad_per_us",
    "fit_residual",
    "status",
];

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn status_name(s: SweepStatus) -> &'static str {
    match s {
        SweepStatus::Ok => "ok",
        SweepStatus::NoEmission => "no_emission",
        SweepStatus::Oscillatory => "oscillatory",
        SweepStatus::FitFailed => "fit_failed",
    }
}

fn parse_status(s: &str) -> Option<SweepStatus> {
    Some(match s {
        "ok" => SweepStatus::Ok,
        "no_emission" => SweepStatus::NoEmission,
        "oscillatory" => SweepStatus::Oscillatory,
        "fit_failed" => SweepStatus::FitFailed,
        _ => return None,
    })
}

pub fn write_sweep_csv<W: Write>(out: W, records: &[SweepRecord]) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in records {
        w.write_record([
            num(r.vd),
            num(r.omega_d),
            opt(r.gamma_f),
            opt(r.omega_ph),
            num(r.fit_residual),
            status_name(r.status).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep_csv<R: Read>(input: R) -> Result<Vec<SweepRecord>, ExportError> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != SWEEP_HEADER {
        return Err(ExportError::Parse {
            row: 0,
            reason: format!("unexpected header {header:?}"),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let bad = |reason: String| ExportError::Parse { row, reason };
        let field = |k: usize| -> Result<f64, ExportError> {
            rec[k].parse().map_err(|e| bad(format!("{}: {e}", SWEEP_HEADER[k])))
        };
        let optional = |k: usize| -> Result<Option<f64>, ExportError> {
            if rec[k].is_empty() {
                Ok(None)
            } else {
                field(k).map(Some)
            }
        };
        out.push(SweepRecord {
            vd: field(0)?,
            omega_d: field(1)?,
            gamma_f: optional(2)?,
            omega_ph: optional(3)?,
            fit_residual: field(4)?,
            status: parse_status(&rec[5]).ok_or_else(|| bad(format!("status {:?}", &rec[5])))?,
        });
    }
    Ok(out)
}

/// Drive pulse as `t, vd, omega_d, phase_offset`.
pub fn write_pulse_csv<W: Write>(out: W, pulse: &DrivePulse) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t_us", "vd_v", "omega_d_rad_per_us", "phase_offset_rad"])?;
    for (k, t) in pulse.times().into_iter().enumerate() {
        w.write_record([
            num(t),
            num(pulse.vd[k]),
            num(pulse.omega_d[k]),
            num(pulse.phase_offset[k]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_pulse_csv<R: Read>(input: R) -> Result<DrivePulse, ExportError> {
    let mut rd = csv::Reader::from_reader(input);
    let mut cols: [Vec<f64>; 4] = Default::default();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        if rec.len() != 4 {
            return Err(ExportError::Parse {
                row: i + 1,
                reason: format!("expected 4 fields, found {}", rec.len()),
            });
        }
        for (c, v) in cols.iter_mut().zip(rec.iter()) {
            c.push(v.parse().map_err(|e| ExportError::Parse {
                row: i + 1,
                reason: format!("{e}"),
            })?);
        }
    }
    let [t, vd, omega_d, phase_offset] = cols;
    if t.len() < 2 {
        return Err(ExportError::Parse {
            row: t.len(),
            reason: "a pulse needs at least two samples".into(),
        });
    }
    Ok(DrivePulse {
        t0: t[0],
        dt: t[1] - t[0],
        vd,
        omega_d,
        phase_offset,
    })
}

/// Header stored next to a waveform CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformHeader {
    pub frame_freq_rad_per_us: f64,
    pub t0_us: f64,
    pub dt_us: f64,
    pub samples: usize,
    /// SHA-256 of the configuration that produced the waveform.
    pub device_hash: String,
}

impl WaveformHeader {
    pub fn new(w: &PhotonWaveform, device_hash: &str) -> Self {
        Self {
            frame_freq_rad_per_us: w.frame_freq,
            t0_us: w.t0,
            dt_us: w.dt,
            samples: w.len(),
            device_hash: device_hash.to_string(),
        }
    }
}

/// Waveform as `t, re, im`.
pub fn write_waveform_csv<W: Write>(out: W, w: &PhotonWaveform) -> Result<(), ExportError> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(["t_us", "re", "im"])?;
    for (t, s) in w.times().into_iter().zip(&w.samples) {
        wr.write_record([num(t), num(s.re), num(s.im)])?;
    }
    wr.flush()?;
    Ok(())
}

/// Simulation as `t, re, im` of the output field followed by the
/// populations of `|f0>`, `|g1>`, `|g0>` and the emitted energy.
pub fn write_simulation_csv<W: Write>(out: W, sim: &Simulation) -> Result<(), ExportError> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(["t_us", "re", "im", "p_f0", "p_g1", "p_g0", "emitted"])?;
    let tr = &sim.trajectory;
    for (k, s) in sim.waveform.samples.iter().enumerate() {
        let st = &tr.states[k];
        wr.write_record([
            num(sim.waveform.t0 + k as f64 * sim.waveform.dt),
            num(s.re),
            num(s.im),
            num(st.rho_f0f0),
            num(st.rho_g1g1),
            num(st.rho_g0g0),
            num(tr.emitted[k]),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// Plain numeric table with a header row.
pub fn write_rows<W, I>(out: W, header: &[&str], rows: I) -> Result<(), ExportError>
where
    W: Write,
    I: IntoIterator<Item = Vec<f64>>,
{
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(header)?;
    for row in rows {
        wr.write_record(row.into_iter().map(num))?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_json<W: Write, T: Serialize>(mut out: W, value: &T) -> Result<(), ExportError> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<R: Read, T: for<'de> Deserialize<'de>>(input: R) -> Result<T, ExportError> {
    Ok(serde_json::from_reader(input)?)
}
