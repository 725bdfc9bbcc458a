use anyhow::{Context, Result};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use shaped_photon::dynamics::simulate_photon_mode;
use shaped_photon::export::write_rows;
use shaped_photon::tomography::{
    derive_seed, measure_state, mode_amplitude, process_tomography, project_amplitude, six_preparations,
    wigner, PauliTransferMatrix, StateTomography, TomographySettings,
};
use shaped_photon::units::mhz;
use shaped_photon::PhotonDensityMatrix;

use super::emit::load_design;
use super::{tag, Ctx};
use crate::config::linspace;
use crate::svg::{Figure, Heatmap, Panel};

#[derive(Serialize)]
struct StateResult {
    label: &'static str,
    prepared: PhotonDensityMatrix,
    #[serde(flatten)]
    tomography: StateTomography,
}

#[derive(Serialize)]
struct EtaResult {
    eta: f64,
    states: Vec<StateResult>,
    ptm: PauliTransferMatrix,
    process_fidelity: f64,
    mean_fidelity: f64,
}

#[derive(Serialize)]
struct TargetResult {
    target_mhz: f64,
    mode_amplitude: Complex64,
    mode_population: f64,
    samples: usize,
    fourth_moment_samples: usize,
    seed: u64,
    efficiencies: Vec<EtaResult>,
}

pub fn run(ctx: &Ctx) -> Result<()> {
    let d = ctx.cfg.device_params();
    let target = ctx.target()?;
    let tc = &ctx.cfg.tomography;
    let settings = TomographySettings {
        samples: tc.samples,
        fourth_moment_samples: tc.fourth_moment_samples,
    };
    let designs = ctx
        .cfg
        .targets_mhz
        .iter()
        .map(|f| load_design(ctx, *f))
        .collect::<Result<Vec<_>>>()?;
    let preps = six_preparations();
    let axis = linspace(-tc.wigner_extent, tc.wigner_extent, tc.wigner_points);

    let mut out = ctx.output("tomography")?;
    let mut summary = Vec::new();
    for (ti, des) in designs.iter().enumerate() {
        let t = tag(des.target_mhz);
        let omega = mhz(des.target_mhz);
        let extra = (ctx.cfg.design.ring_down_us / des.pulse.dt).round() as usize;
        let mode = simulate_photon_mode(&d, &des.pulse.padded(extra), ctx.cfg.design.dt_int_us)?
            .waveform
            .reframed(omega);
        let c = mode_amplitude(&mode, &target)?;
        let target_seed = derive_seed(tc.seed, ti as u64);

        let mut efficiencies = Vec::new();
        for (ei, eta) in tc.eta.iter().enumerate() {
            let eta_seed = derive_seed(target_seed, ei as u64);
            let states = preps
                .par_iter()
                .enumerate()
                .map(|(pi, prep)| {
                    let rho = project_amplitude(c, prep);
                    let seed = derive_seed(eta_seed, pi as u64);
                    let tomography = measure_state(&rho, &prep.ideal_photon(), *eta, &settings, seed)
                        .with_context(|| format!("state {} at eta {eta}", prep.label))?;
                    Ok(StateResult {
                        label: prep.label,
                        prepared: rho,
                        tomography,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let inputs: [PhotonDensityMatrix; 6] = std::array::from_fn(|k| preps[k].ideal_photon());
            let outputs: [PhotonDensityMatrix; 6] = std::array::from_fn(|k| states[k].tomography.reconstruction.rho);
            let (ptm, process_fidelity) = process_tomography(&inputs, &outputs)?;
            let mean_fidelity = states.iter().map(|s| s.tomography.fidelity).sum::<f64>() / states.len() as f64;
            efficiencies.push(EtaResult {
                eta: *eta,
                states,
                ptm,
                process_fidelity,
                mean_fidelity,
            });
        }

        let mut fid_rows = Vec::new();
        for e in &efficiencies {
            for s in &e.states {
                let st = &s.tomography;
                let fm = &st.fourth_moment;
                fid_rows.push(vec![
                    format!("{}", e.eta),
                    s.label.to_string(),
                    format!("{}", st.fidelity),
                    format!("{}", st.fidelity_sigma),
                    format!("{}", fm.value),
                    format!("{}", fm.sigma),
                    format!("{}", fm.bound),
                ]);
            }
            let et = tag(e.eta);
            out.csv(&format!("ptm_{t}_eta{et}.csv"), |b| {
                write_rows(b, &["row", "I", "X", "Y", "Z"], e.ptm.r.iter().enumerate().map(|(i, r)| {
                    let mut v = vec![i as f64];
                    v.extend_from_slice(r);
                    v
                }))
            })?;
            let maps: Vec<Vec<Vec<f64>>> = e
                .states
                .iter()
                .map(|s| wigner(&s.tomography.reconstruction.rho, &axis, &axis))
                .collect();
            let mut rows = Vec::new();
            for (s, map) in e.states.iter().zip(&maps) {
                for (pi, p) in axis.iter().enumerate() {
                    for (xi, x) in axis.iter().enumerate() {
                        rows.push(vec![
                            s.label.to_string(),
                            format!("{x}"),
                            format!("{p}"),
                            format!("{}", map[pi][xi]),
                        ]);
                    }
                }
            }
            out.table(&format!("wigner_{t}_eta{et}.csv"), &["state", "x", "p", "w"], &rows)?;
            out.svg(&format!("wigner_{t}_eta{et}.svg"), &wigner_figure(ctx, des.target_mhz, e, &axis, maps))?;

            let worst_fourth = e
                .states
                .iter()
                .map(|s| s.tomography.fourth_moment.value)
                .fold(f64::NEG_INFINITY, f64::max);
            let min_fidelity = e.states.iter().map(|s| s.tomography.fidelity).fold(f64::INFINITY, f64::min);
            summary.push(vec![
                des.target_mhz,
                e.eta,
                c.norm_sqr(),
                e.mean_fidelity,
                min_fidelity,
                e.process_fidelity,
                worst_fourth,
            ]);
            println!(
                "tomography {t} MHz, eta {}: mean fidelity {:.4}, process fidelity {:.4}",
                e.eta, e.mean_fidelity, e.process_fidelity
            );
        }
        out.table(
            &format!("fidelity_{t}.csv"),
            &["eta", "state", "fidelity", "fidelity_sigma", "fourth_moment", "fourth_moment_sigma", "multiphoton_bound"],
            &fid_rows,
        )?;
        out.json(
            &format!("tomography_{t}.json"),
            &TargetResult {
                target_mhz: des.target_mhz,
                mode_amplitude: c,
                mode_population: c.norm_sqr(),
                samples: tc.samples,
                fourth_moment_samples: tc.fourth_moment_samples,
                seed: tc.seed,
                efficiencies,
            },
        )?;
    }
    out.csv("tomography.csv", |b| {
        write_rows(
            b,
            &[
                "target_mhz",
                "eta",
                "mode_population",
                "mean_fidelity",
                "min_fidelity",
                "process_fidelity",
                "max_fourth_moment",
            ],
            summary,
        )
    })?;
    out.finish()
}

fn wigner_figure(ctx: &Ctx, f: f64, e: &EtaResult, axis: &[f64], maps: Vec<Vec<Vec<f64>>>) -> Figure {
    let mut fig = Figure::new(
        &format!("Reconstructed Wigner functions, {} MHz, eta = {}", tag(f), e.eta),
        &format!("config {}", ctx.hash),
    );
    fig.cols = 3;
    for (s, z) in e.states.iter().zip(maps) {
        let mut p = Panel::new(
            &format!("|{}>  F = {:.4}", s.label, s.tomography.fidelity),
            "x",
            "p",
        );
        p.legend = false;
        p.heatmap = Some(Heatmap {
            x: axis.to_vec(),
            y: axis.to_vec(),
            z,
            limit: 1.0 / std::f64::consts::PI,
        });
        fig.panels.push(p);
    }
    fig
}
