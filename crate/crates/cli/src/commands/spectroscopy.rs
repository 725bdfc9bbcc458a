use std::collections::BTreeMap;
use std::fs::File;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use shaped_photon::dynamics::emission_rate;
use shaped_photon::export::{read_sweep_csv, write_rows, write_sweep_csv};
use shaped_photon::spectroscopy::{run_sweep, SweepSettings, SweepStatus};
use shaped_photon::units::to_mhz;
use shaped_photon::{DeviceParams, SweepRecord};

use super::{read_json, Ctx};
use crate::config::{linspace, DeviceConfig, SweepConfig};
use crate::svg::{sequential, Figure, Panel, Series, Style};

/// Rows with `|g_eff| <= kappa / LORENTZ_COUPLING_DIV` are compared with the
/// adiabatic Lorentzian.
const LORENTZ_COUPLING_DIV: f64 = 10.0;

#[derive(Debug, Serialize, Deserialize)]
pub struct LorentzianCheck {
    pub max_coupling_mhz: f64,
    pub window_mhz: f64,
    pub points: usize,
    pub max_relative_deviation: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SweepSummary {
    pub sweep_hash: String,
    pub device: DeviceConfig,
    pub settings: SweepConfig,
    pub vd_grid_v: Vec<f64>,
    pub omega_d_grid_rad_per_us: Vec<f64>,
    pub status_counts: BTreeMap<String, usize>,
    pub lorentzian: LorentzianCheck,
}

pub fn settings(s: &SweepConfig) -> SweepSettings {
    SweepSettings {
        pulse_len: s.pulse_len_us,
        dt: s.dt_us,
        dt_int: s.dt_int_us,
        discard: s.discard_us,
    }
}

fn status_name(s: SweepStatus) -> String {
    serde_json::to_value(s)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// Largest relative deviation of the measured rate from the Lorentzian over
/// weakly driven points within one linewidth of the resonator.
pub fn lorentzian_check(d: &DeviceParams, records: &[SweepRecord]) -> LorentzianCheck {
    let g_max = d.kappa / LORENTZ_COUPLING_DIV;
    let mut points = 0;
    let mut worst: f64 = 0.0;
    for r in records.iter().filter(|r| r.status == SweepStatus::Ok) {
        let g = d.coupling_at_volts(r.vd).abs();
        let (Some(gamma), Some(w)) = (r.gamma_f, r.omega_ph) else {
            continue;
        };
        if g == 0.0 || g > g_max || (w - d.omega_r).abs() > d.kappa {
            continue;
        }
        let model = emission_rate(d, g, w);
        worst = worst.max((gamma - model).abs() / model);
        points += 1;
    }
    LorentzianCheck {
        max_coupling_mhz: to_mhz(g_max),
        window_mhz: to_mhz(d.kappa),
        points,
        max_relative_deviation: worst,
    }
}

/// Sweep records for the configured device, reusing `sweep.csv` from the
/// output directory when its recorded hash matches.
pub fn load_or_run(ctx: &Ctx) -> Result<Vec<SweepRecord>> {
    let summary = ctx.out_dir.join("sweep.json");
    let csv = ctx.out_dir.join("sweep.csv");
    if summary.exists() && csv.exists() {
        let s: SweepSummary = read_json(&summary)?;
        if s.sweep_hash == ctx.cfg.sweep_hash() {
            let f = File::open(&csv).with_context(|| format!("opening {}", csv.display()))?;
            return read_sweep_csv(f).with_context(|| format!("reading {}", csv.display()));
        }
    }
    sweep(ctx)
}

fn sweep(ctx: &Ctx) -> Result<Vec<SweepRecord>> {
    let d = ctx.cfg.device_params();
    Ok(run_sweep(
        &d,
        &ctx.cfg.vd_grid(),
        &ctx.cfg.omega_d_grid(),
        &settings(&ctx.cfg.sweep),
    )?)
}

pub fn run(ctx: &Ctx) -> Result<()> {
    let d = ctx.cfg.device_params();
    let records = sweep(ctx)?;
    let mut out = ctx.output("spectroscopy")?;
    out.csv("sweep.csv", |b| write_sweep_csv(b, &records))?;

    let mut status_counts = BTreeMap::new();
    for r in &records {
        *status_counts.entry(status_name(r.status)).or_insert(0) += 1;
    }
    let lorentzian = lorentzian_check(&d, &records);
    let summary = SweepSummary {
        sweep_hash: ctx.cfg.sweep_hash(),
        device: ctx.cfg.device,
        settings: ctx.cfg.sweep.clone(),
        vd_grid_v: ctx.cfg.vd_grid(),
        omega_d_grid_rad_per_us: ctx.cfg.omega_d_grid(),
        status_counts,
        lorentzian,
    };
    out.json("sweep.json", &summary)?;

    let model_rows = records.iter().filter(|r| r.status == SweepStatus::Ok).map(|r| {
        let g = d.coupling_at_volts(r.vd).abs();
        let w = r.omega_ph.unwrap_or(f64::NAN);
        let gamma = r.gamma_f.unwrap_or(f64::NAN);
        let model = emission_rate(&d, g, w);
        vec![r.vd, r.omega_d, w, gamma, model, (gamma - model) / model]
    });
    out.csv("sweep_model.csv", |b| {
        write_rows(
            b,
            &[
                "vd_v",
                "omega_d_rad_per_us",
                "omega_ph_rad_per_us",
                "gamma_f_per_us",
                "gamma_model_per_us",
                "relative_deviation",
            ],
            model_rows,
        )
    })?;

    let (rate, freq) = figures(ctx, &d, &records);
    out.svg("spectroscopy_rate.svg", &rate)?;
    out.svg("spectroscopy_frequency.svg", &freq)?;
    println!(
        "spectroscopy: {} points, Lorentzian deviation {:.2}% over {} weak-drive points",
        records.len(),
        100.0 * summary.lorentzian.max_relative_deviation,
        summary.lorentzian.points
    );
    out.finish()
}

/// Records grouped by amplitude, in grid order.
fn rows(records: &[SweepRecord]) -> Vec<(f64, Vec<&SweepRecord>)> {
    let mut rows: Vec<(f64, Vec<&SweepRecord>)> = Vec::new();
    for r in records {
        match rows.last_mut() {
            Some((v, row)) if *v == r.vd => row.push(r),
            _ => rows.push((r.vd, vec![r])),
        }
    }
    rows
}

fn figures(ctx: &Ctx, d: &DeviceParams, records: &[SweepRecord]) -> (Figure, Figure) {
    let comment = format!("config {}", ctx.hash);
    let vd_max = ctx.cfg.sweep.vd_max_v.max(f64::MIN_POSITIVE);
    let mut rate = Panel::new("Emission rate", "photon frequency (MHz)", "Gamma_f / 2pi (MHz)");
    let mut freq = Panel::new("Photon frequency", "drive frequency (MHz)", "photon frequency (MHz)");
    rate.legend = false;
    freq.legend = false;
    for (vd, row) in rows(records) {
        let ok: Vec<&&SweepRecord> = row.iter().filter(|r| r.status == SweepStatus::Ok).collect();
        if ok.is_empty() {
            continue;
        }
        let color = sequential(vd / vd_max);
        let w: Vec<f64> = ok.iter().map(|r| to_mhz(r.omega_ph.unwrap_or(f64::NAN))).collect();
        let gm: Vec<f64> = ok.iter().map(|r| to_mhz(r.gamma_f.unwrap_or(f64::NAN))).collect();
        let wd: Vec<f64> = ok.iter().map(|r| to_mhz(r.omega_d)).collect();
        let label = format!("{vd:.3} V");
        rate.series.push(Series::new(&label, w.clone(), gm, &color, Style::Points));
        freq.series.push(Series::new(&label, wd, w.clone(), &color, Style::Line));

        let g = d.coupling_at_volts(vd).abs();
        let lo = w.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let grid = linspace(lo, hi, 101);
        let model = grid
            .iter()
            .map(|f| to_mhz(emission_rate(d, g, shaped_photon::units::mhz(*f))))
            .collect();
        rate.series.push(Series::new(&label, grid, model, &color, Style::Dashed));
    }
    rate.vlines.push((to_mhz(d.omega_r), "omega_r".into()));
    let mut fr = Figure::new("Square-pulse spectroscopy: emission rate", &comment);
    fr.panels.push(rate);
    let mut ff = Figure::new("Square-pulse spectroscopy: photon frequency", &comment);
    ff.panels.push(freq);
    (fr, ff)
}
