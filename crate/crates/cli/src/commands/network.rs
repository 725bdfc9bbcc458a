use anyhow::Result;
use serde::Serialize;
use shaped_photon::export::write_rows;
use shaped_photon::network::{
    erf, matching_probability, max_sigma, mode_overlap, mode_overlap_closed_form, overlap_threshold, NetworkSpec,
};
use shaped_photon::units::{mhz, to_mhz};

use super::Ctx;
use crate::config::linspace;
use crate::svg::{Figure, Panel, Series, Style, PALETTE};

#[derive(Serialize)]
struct Anchors {
    erf_2: f64,
    match_probability_n10_sigma10_delta40: f64,
    sigma_max_n10_delta40_p050_mhz: f64,
}

#[derive(Serialize)]
struct ScalingSummary {
    p_min: f64,
    sigma_mhz: f64,
    n_pairs: Vec<u32>,
    anchors: Anchors,
}

fn probability(n: u32, sigma_mhz: f64, delta_mhz: f64, gamma_ph_mhz: f64) -> f64 {
    matching_probability(&NetworkSpec {
        n_pairs: n,
        sigma: mhz(sigma_mhz),
        delta_tunable: mhz(delta_mhz),
        gamma_ph: mhz(gamma_ph_mhz),
    })
}

pub fn scaling(ctx: &Ctx) -> Result<()> {
    let sc = &ctx.cfg.scaling;
    let deltas = linspace(sc.delta_min_mhz, sc.delta_max_mhz, sc.delta_points);
    let mut header = vec!["delta_mhz".to_string()];
    for n in &sc.n_pairs {
        header.push(format!("sigma_max_n{n}_mhz"));
        header.push(format!("p_match_n{n}"));
    }
    let sigma_curves: Vec<Vec<f64>> = sc
        .n_pairs
        .iter()
        .map(|n| deltas.iter().map(|d| to_mhz(max_sigma(*n, mhz(*d), sc.p_min))).collect())
        .collect();
    let rows = deltas.iter().enumerate().map(|(k, d)| {
        let mut row = vec![*d];
        for (n, curve) in sc.n_pairs.iter().zip(&sigma_curves) {
            row.push(curve[k]);
            row.push(probability(*n, sc.sigma_mhz, *d, ctx.cfg.gamma_ph_mhz));
        }
        row
    });
    let mut out = ctx.output("scaling")?;
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv("scaling.csv", |b| write_rows(b, &header_refs, rows))?;

    let anchors = Anchors {
        erf_2: erf(2.0),
        match_probability_n10_sigma10_delta40: probability(10, 10.0, 40.0, ctx.cfg.gamma_ph_mhz),
        sigma_max_n10_delta40_p050_mhz: to_mhz(max_sigma(10, mhz(40.0), 0.5)),
    };
    println!(
        "scaling: P(N=10, sigma=10 MHz, delta=40 MHz) = {:.6}, sigma_max(N=10, 40 MHz, 0.5) = {:.4} MHz",
        anchors.match_probability_n10_sigma10_delta40, anchors.sigma_max_n10_delta40_p050_mhz
    );
    out.json(
        "scaling.json",
        &ScalingSummary {
            p_min: sc.p_min,
            sigma_mhz: sc.sigma_mhz,
            n_pairs: sc.n_pairs.clone(),
            anchors,
        },
    )?;

    let mut fig = Figure::new("Tolerable frequency spread", &format!("config {}", ctx.hash));
    let mut p = Panel::new(
        &format!("P(all matched) >= {}", sc.p_min),
        "tuning range (MHz)",
        "max sigma (MHz)",
    );
    for (i, (n, curve)) in sc.n_pairs.iter().zip(sigma_curves).enumerate() {
        p.series.push(Series::new(
            format!("N = {n}"),
            deltas.clone(),
            curve,
            PALETTE[i % PALETTE.len()],
            Style::Line,
        ));
    }
    p.hlines.push((10.0, "10 MHz".into()));
    fig.panels.push(p);
    out.svg("scaling.svg", &fig)?;
    out.finish()
}

#[derive(Serialize)]
struct OverlapSummary {
    level: f64,
    threshold_ratio: f64,
    gamma_ph_mhz: f64,
    budget_mhz: f64,
}

pub fn overlap(ctx: &Ctx) -> Result<()> {
    let oc = &ctx.cfg.overlap;
    let ratios = linspace(0.0, oc.ratio_max, oc.points);
    let numeric: Vec<f64> = ratios.iter().map(|r| mode_overlap(*r, 1.0).norm()).collect();
    let closed: Vec<f64> = ratios.iter().map(|r| mode_overlap_closed_form(*r, 1.0)).collect();
    let threshold_ratio = overlap_threshold(oc.level);
    let summary = OverlapSummary {
        level: oc.level,
        threshold_ratio,
        gamma_ph_mhz: ctx.cfg.gamma_ph_mhz,
        // ratios of angular frequencies equal ratios of ordinary ones
        budget_mhz: threshold_ratio * ctx.cfg.gamma_ph_mhz,
    };
    println!(
        "overlap: |I| >= {} up to delta/gamma = {:.6}, budget {:.5} MHz at gamma/2pi = {} MHz",
        oc.level, threshold_ratio, summary.budget_mhz, ctx.cfg.gamma_ph_mhz
    );

    let mut out = ctx.output("overlap")?;
    let rows = ratios
        .iter()
        .zip(numeric.iter().zip(&closed))
        .map(|(r, (n, c))| vec![*r, *n, *c]);
    out.csv("overlap.csv", |b| write_rows(b, &["ratio", "overlap_numeric", "overlap_closed_form"], rows))?;
    out.json("overlap.json", &summary)?;

    let mut fig = Figure::new("Fixed-frequency mode overlap", &format!("config {}", ctx.hash));
    let mut p = Panel::new("Overlap of detuned sech modes", "delta_omega / gamma_ph", "|I|");
    p.series.push(Series::new("numeric", ratios.clone(), numeric, PALETTE[0], Style::Line));
    p.series.push(Series::new("x / sinh x", ratios, closed, PALETTE[1], Style::Dashed));
    p.hlines.push((oc.level, format!("{}", oc.level)));
    p.vlines.push((threshold_ratio, format!("{threshold_ratio:.4}")));
    fig.panels.push(p);
    out.svg("overlap.svg", &fig)?;
    out.finish()
}
