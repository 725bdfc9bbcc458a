use anyhow::{bail, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use shaped_photon::dynamics::DrivePulse;
use shaped_photon::export::{write_pulse_csv, write_rows};
use shaped_photon::shaper::{
    check_feasibility, design_drive, emitted_mode, phase_correct, photon_metrics, FeasibilityReport,
    PhaseCorrectionOptions, PhotonMetrics,
};
use shaped_photon::spectroscopy::build_table;
use shaped_photon::units::{mhz, to_mhz};
use shaped_photon::{CalibrationTable, PhotonWaveform, TargetWaveform};

use super::{spectroscopy, tag, Ctx};
use crate::config::{linspace, DesignConfig};
use crate::svg::{Figure, Panel, Series, Style, PALETTE};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrectionSummary {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub history: Vec<f64>,
}

/// Contents of `design_<f>.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignRecord {
    pub target_mhz: f64,
    pub gamma_ph_mhz: f64,
    pub epsilon_trunc: f64,
    pub feasibility: FeasibilityReport,
    pub capped_samples: usize,
    pub uncorrected: PhotonMetrics,
    pub corrected: PhotonMetrics,
    pub phase_correction: CorrectionSummary,
    pub pulse: DrivePulse,
}

#[derive(Serialize)]
struct Rejected<'a> {
    target_mhz: f64,
    reason: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    feasibility: Option<FeasibilityReport>,
}

pub fn options(d: &DesignConfig) -> PhaseCorrectionOptions {
    PhaseCorrectionOptions {
        iterations: d.phase_iterations,
        dt_int: d.dt_int_us,
        ring_down: d.ring_down_us,
        support_threshold: d.support_threshold,
        tolerance: d.residual_tolerance,
    }
}

struct Designed {
    table: CalibrationTable,
    record: DesignRecord,
    before: PhotonWaveform,
    after: PhotonWaveform,
}

enum Outcome {
    Done(Box<Designed>),
    Rejected(Option<CalibrationTable>, Option<FeasibilityReport>, String),
}

fn design_one(ctx: &Ctx, records: &[shaped_photon::SweepRecord], target: &TargetWaveform, f: f64) -> Result<Outcome> {
    let d = ctx.cfg.device_params();
    let omega = mhz(f);
    let table = match build_table(records, omega, ctx.cfg.sweep.fit_residual_max) {
        Ok(t) => t,
        Err(e) => return Ok(Outcome::Rejected(None, None, e.to_string())),
    };
    let feasibility = check_feasibility(&table, target)?;
    if !feasibility.feasible {
        let reason = format!(
            "required rate {:.4} MHz exceeds calibrated maximum {:.4} MHz",
            to_mhz(feasibility.required_max),
            to_mhz(feasibility.available_max)
        );
        return Ok(Outcome::Rejected(Some(table), Some(feasibility), reason));
    }
    let shaped = design_drive(&table, target)?;
    let opts = options(&ctx.cfg.design);
    let before = emitted_mode(&d, &shaped.pulse, &opts)?;
    let uncorrected = photon_metrics(target, &before, omega)?;
    let pc = phase_correct(&d, &shaped.pulse, omega, &opts)?;
    let after = emitted_mode(&d, &pc.pulse, &opts)?;
    let corrected = photon_metrics(target, &after, omega)?;
    Ok(Outcome::Done(Box::new(Designed {
        record: DesignRecord {
            target_mhz: f,
            gamma_ph_mhz: ctx.cfg.gamma_ph_mhz,
            epsilon_trunc: ctx.cfg.epsilon_trunc,
            feasibility: shaped.feasibility,
            capped_samples: shaped.capped_samples,
            uncorrected,
            corrected,
            phase_correction: CorrectionSummary {
                iterations: pc.iterations,
                residual: pc.residual,
                converged: pc.converged,
                history: pc.history,
            },
            pulse: pc.pulse,
        },
        table,
        before: before.reframed(omega),
        after: after.reframed(omega),
    })))
}

pub fn run(ctx: &Ctx) -> Result<()> {
    let records = spectroscopy::load_or_run(ctx)?;
    let target = ctx.target()?;
    let outcomes: Vec<Result<Outcome>> = ctx
        .cfg
        .targets_mhz
        .par_iter()
        .map(|f| design_one(ctx, &records, &target, *f))
        .collect();

    let mut out = ctx.output("design")?;
    let mut symmetry = Vec::new();
    let mut rejected = Vec::new();
    for (f, outcome) in ctx.cfg.targets_mhz.iter().zip(outcomes) {
        let t = tag(*f);
        match outcome? {
            Outcome::Rejected(table, feasibility, reason) => {
                if let Some(table) = table {
                    out.json(&format!("table_{t}.json"), &table)?;
                }
                out.json(
                    &format!("feasibility_{t}.json"),
                    &Rejected {
                        target_mhz: *f,
                        reason: &reason,
                        feasibility,
                    },
                )?;
                eprintln!("design {t} MHz: rejected, {reason}");
                rejected.push(t);
            }
            Outcome::Done(des) => {
                let r = &des.record;
                out.json(&format!("table_{t}.json"), &des.table)?;
                out.json(&format!("design_{t}.json"), r)?;
                out.csv(&format!("pulse_{t}.csv"), |b| write_pulse_csv(b, &r.pulse))?;
                out.svg(&format!("design_{t}.svg"), &figure(ctx, &target, &des))?;
                println!(
                    "design {t} MHz: s {:.4} -> {:.4}, overlap {:.4}, peak offset {:+.4} MHz",
                    r.uncorrected.time_symmetry,
                    r.corrected.time_symmetry,
                    r.corrected.overlap,
                    to_mhz(r.corrected.omega_peak) - f
                );
                symmetry.push(vec![
                    *f,
                    r.uncorrected.time_symmetry,
                    r.corrected.time_symmetry,
                    r.uncorrected.overlap,
                    r.corrected.overlap,
                    to_mhz(r.corrected.omega_peak) - f,
                    r.corrected.efficiency,
                ]);
            }
        }
    }
    out.csv("symmetry.csv", |b| {
        write_rows(
            b,
            &[
                "target_mhz",
                "s_before",
                "s_after",
                "overlap_before",
                "overlap_after",
                "peak_offset_mhz",
                "efficiency",
            ],
            symmetry,
        )
    })?;
    out.finish()?;
    if !rejected.is_empty() {
        bail!("infeasible targets (MHz): {}", rejected.join(", "));
    }
    Ok(())
}

fn figure(ctx: &Ctx, target: &TargetWaveform, des: &Designed) -> Figure {
    let r = &des.record;
    let p = &r.pulse;
    let t = p.times();
    let mut fig = Figure::new(&format!("Shaped drive for {} MHz", tag(r.target_mhz)), &format!("config {}", ctx.hash));
    fig.cols = 2;

    let mut drive = Panel::new("Drive amplitude", "t (us)", "V_d (V)");
    drive.legend = false;
    drive.series.push(Series::new("V_d", t.clone(), p.vd.clone(), PALETTE[0], Style::Line));
    fig.panels.push(drive);

    let mut freq = Panel::new("Drive frequency and phase", "t (us)", "MHz / rad");
    let base = to_mhz(p.omega_d.first().copied().unwrap_or(0.0));
    freq.series.push(Series::new(
        "drive shift (MHz)",
        t.clone(),
        p.omega_d.iter().map(|w| to_mhz(*w) - base).collect(),
        PALETTE[0],
        Style::Line,
    ));
    freq.series.push(Series::new(
        "phase offset (rad)",
        t.clone(),
        p.phase_offset.clone(),
        PALETTE[1],
        Style::Dashed,
    ));
    fig.panels.push(freq);

    let mut photon = Panel::new("Photon mode", "t (us)", "amplitude (1/sqrt(us))");
    photon.series.push(Series::new("target", target.times(), target.samples.clone(), PALETTE[2], Style::Dashed));
    for (w, label, color) in [(&des.before, "Re, uncorrected", PALETTE[3]), (&des.after, "Re, corrected", PALETTE[0])] {
        photon.series.push(Series::new(label, w.times(), w.samples.iter().map(|s| s.re).collect(), color, Style::Line));
    }
    photon.series.push(Series::new(
        "Im, corrected",
        des.after.times(),
        des.after.samples.iter().map(|s| s.im).collect(),
        PALETTE[1],
        Style::Line,
    ));
    fig.panels.push(photon);

    let tb = &des.table;
    let mut table = Panel::new("Calibration", "V_d (V)", "Gamma_f / 2pi (MHz)");
    table.series.push(Series::new(
        "intersections",
        tb.points.iter().map(|q| q[0]).collect(),
        tb.points.iter().map(|q| to_mhz(q[2])).collect(),
        PALETTE[0],
        Style::Points,
    ));
    let vs = linspace(0.0, tb.vd_domain[1], 101);
    table.series.push(Series::new(
        "fit",
        vs.clone(),
        vs.iter().map(|v| to_mhz(tb.gamma_at(*v))).collect(),
        PALETTE[1],
        Style::Line,
    ));
    table.hlines.push((to_mhz(r.feasibility.required_max), "required".into()));
    fig.panels.push(table);
    fig
}
