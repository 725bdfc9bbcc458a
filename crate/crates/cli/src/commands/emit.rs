use anyhow::{ensure, Result};
use num_complex::Complex64;
use serde::Serialize;
use shaped_photon::dynamics::{integrate, simulate_photon_mode, Simulation};
use shaped_photon::export::{write_rows, write_simulation_csv, WaveformHeader};
use shaped_photon::shaper::{photon_metrics, PhotonMetrics};
use shaped_photon::units::{mhz, to_mhz};
use shaped_photon::{PhotonWaveform, ThreeLevelState};

use super::design::DesignRecord;
use super::{read_json, tag, Ctx};
use crate::config::linspace;
use crate::svg::{Figure, Panel, Series, Style, PALETTE};

/// Spectrum half-span in units of `gamma_ph`.
const SPECTRUM_SPAN: f64 = 6.0;
const SPECTRUM_POINTS: usize = 241;

#[derive(Serialize)]
struct EmitRecord {
    target_mhz: f64,
    waveform: WaveformHeader,
    metrics: PhotonMetrics,
    emitted_energy: f64,
    final_populations: [f64; 3],
}

/// Design artifact for `f`, checked against the current configuration.
pub fn load_design(ctx: &Ctx, f: f64) -> Result<DesignRecord> {
    let path = ctx.out_dir.join(format!("design_{}.json", tag(f)));
    ensure!(
        path.exists(),
        "{} is missing; run the design command first",
        path.display()
    );
    let stamp: serde_json::Value = read_json(&path)?;
    ensure!(
        stamp["config_hash"] == ctx.hash.as_str(),
        "{} was produced by a different configuration; rerun the design command",
        path.display()
    );
    read_json(&path)
}

/// `|int psi(t) e^{i delta t} dt|^2`, so a component at `frame + delta`
/// peaks at `delta`.
pub fn power_spectrum(w: &PhotonWaveform, deltas: &[f64]) -> Vec<f64> {
    let times = w.times();
    deltas
        .iter()
        .map(|d| {
            let s: Complex64 = w
                .samples
                .iter()
                .zip(&times)
                .map(|(a, t)| a * Complex64::from_polar(1.0, d * t))
                .sum();
            (s * w.dt).norm_sqr()
        })
        .collect()
}

pub fn run(ctx: &Ctx) -> Result<()> {
    let d = ctx.cfg.device_params();
    let target = ctx.target()?;
    let designs = ctx
        .cfg
        .targets_mhz
        .iter()
        .map(|f| load_design(ctx, *f))
        .collect::<Result<Vec<_>>>()?;
    let mut out = ctx.output("emit")?;
    for des in &designs {
        let t = tag(des.target_mhz);
        let omega = mhz(des.target_mhz);
        let extra = (ctx.cfg.design.ring_down_us / des.pulse.dt).round() as usize;
        let pulse = des.pulse.padded(extra);
        let dt_int = ctx.cfg.design.dt_int_us;
        let fock = integrate(&d, &pulse, &ThreeLevelState::excited(), dt_int)?;
        let mode = simulate_photon_mode(&d, &pulse, dt_int)?.waveform;
        let metrics = photon_metrics(&target, &mode, omega)?;
        let sim = Simulation {
            trajectory: fock.trajectory,
            waveform: mode,
        };
        out.csv(&format!("emit_{t}.csv"), |b| write_simulation_csv(b, &sim))?;

        let last = sim.trajectory.last();
        let record = EmitRecord {
            target_mhz: des.target_mhz,
            waveform: WaveformHeader::new(&sim.waveform, &ctx.hash),
            metrics,
            emitted_energy: sim.trajectory.total_emitted(),
            final_populations: [last.rho_f0f0, last.rho_g1g1, last.rho_g0g0],
        };
        out.json(&format!("emit_{t}.json"), &record)?;

        let span = SPECTRUM_SPAN * mhz(ctx.cfg.gamma_ph_mhz);
        let deltas = linspace(-span, span, SPECTRUM_POINTS);
        let demod = sim.waveform.reframed(omega);
        let photon = power_spectrum(&demod, &deltas);
        let ideal = power_spectrum(&target.as_waveform(omega), &deltas);
        let rows = deltas
            .iter()
            .zip(photon.iter().zip(&ideal))
            .map(|(dl, (p, i))| vec![des.target_mhz + to_mhz(*dl), to_mhz(*dl), *p, *i]);
        out.csv(&format!("spectrum_{t}.csv"), |b| {
            write_rows(b, &["f_mhz", "offset_mhz", "power_photon", "power_target"], rows)
        })?;
        out.svg(
            &format!("emit_{t}.svg"),
            &figure(ctx, des.target_mhz, &sim, &demod, &deltas, &photon, &ideal),
        )?;
        println!(
            "emit {t} MHz: emitted {:.5}, s {:.4}, peak {:+.4} MHz",
            record.emitted_energy,
            metrics.time_symmetry,
            to_mhz(metrics.omega_peak) - des.target_mhz
        );
    }
    out.finish()
}

fn figure(
    ctx: &Ctx,
    f: f64,
    sim: &Simulation,
    demod: &PhotonWaveform,
    deltas: &[f64],
    photon: &[f64],
    ideal: &[f64],
) -> Figure {
    let mut fig = Figure::new(&format!("Emission at {} MHz", tag(f)), &format!("config {}", ctx.hash));
    fig.cols = 3;
    let t = demod.times();
    let tr = &sim.trajectory;
    let mut pops = Panel::new("Populations from |f0>", "t (us)", "population");
    for (k, (label, get)) in [
        ("f0", (|s: &ThreeLevelState| s.rho_f0f0) as fn(&ThreeLevelState) -> f64),
        ("g1", |s| s.rho_g1g1),
        ("g0", |s| s.rho_g0g0),
    ]
    .into_iter()
    .enumerate()
    {
        pops.series.push(Series::new(label, t.clone(), tr.states.iter().map(get).collect(), PALETTE[k], Style::Line));
    }
    fig.panels.push(pops);

    let mut field = Panel::new("Photon mode, target frame", "t (us)", "amplitude (1/sqrt(us))");
    field.series.push(Series::new("Re", t.clone(), demod.samples.iter().map(|s| s.re).collect(), PALETTE[0], Style::Line));
    field.series.push(Series::new("Im", t, demod.samples.iter().map(|s| s.im).collect(), PALETTE[1], Style::Line));
    fig.panels.push(field);

    let mut spec = Panel::new("Spectrum", "offset from target (MHz)", "power (us)");
    let x: Vec<f64> = deltas.iter().map(|d| to_mhz(*d)).collect();
    spec.series.push(Series::new("photon", x.clone(), photon.to_vec(), PALETTE[0], Style::Line));
    spec.series.push(Series::new("target", x, ideal.to_vec(), PALETTE[2], Style::Dashed));
    fig.panels.push(spec);
    fig
}
