//! Square-pulse emission spectroscopy and calibration tables.
//!
//! A sweep drives the `|f0>`-`|g1>` transition with square pulses on a
//! `(V_d, omega_d)` grid, fits the slow envelope decay (`Gamma_f / 2`) and the
//! spectral peak of each emitted waveform, and `build_table` turns the sweep
//! into even-polynomial maps `Gamma_f(V_d)` and `omega_d(V_d)` for one target
//! photon frequency.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::DeviceParams;
use crate::dynamics::{
    adiabatic_rate_from_envelope, integrate, DrivePulse, DynamicsError, PhotonWaveform,
    ThreeLevelState,
};

#[derive(Debug, Error)]
pub enum SpectroscopyError {
    #[error("fit window contains {0} usable samples")]
    TooFewSamples(usize),
    #[error("envelope is not monotone (rises by {rise:.3} in log amplitude)")]
    NonMonotone { rise: f64 },
    #[error("waveform carries no signal")]
    ZeroSignal,
    #[error("only {found} sweep rows reach the target frequency, need {needed}")]
    InsufficientData { found: usize, needed: usize },
    #[error("fitted emission rate is not increasing near zero amplitude")]
    NotMonotone,
    #[error("polynomial least-squares fit failed: {0}")]
    Fit(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Outcome of one sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepStatus {
    Ok,
    /// No drive, hence no emission and no defined photon frequency.
    NoEmission,
    /// `|g_eff| > kappa/4`: populations oscillate and the point is skipped.
    Oscillatory,
    /// Envelope or frequency extraction failed.
    FitFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub vd: f64,
    pub omega_d: f64,
    pub gamma_f: Option<f64>,
    pub omega_ph: Option<f64>,
    pub fit_residual: f64,
    pub status: SweepStatus,
}

/// Timing of a spectroscopy sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    /// Square-pulse length (µs).
    pub pulse_len: f64,
    /// Sample spacing of pulse and recorded waveform (µs).
    pub dt: f64,
    /// Integration step (µs).
    pub dt_int: f64,
    /// Leading part of the waveform excluded from the envelope fit (µs).
    /// `None` uses `10/kappa`.
    pub discard: Option<f64>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            pulse_len: 4.0,
            dt: 1e-3,
            dt_int: 1e-4,
            discard: None,
        }
    }
}

impl SweepSettings {
    pub fn discard_for(&self, d: &DeviceParams) -> f64 {
        self.discard.unwrap_or(10.0 / d.kappa)
    }
}

/// Simulates one square pulse from `(|g0> + |f0>)/sqrt(2)` and extracts
/// `Gamma_f` and `omega_ph`.
pub fn measure_point(
    d: &DeviceParams,
    vd: f64,
    omega_d: f64,
    settings: &SweepSettings,
) -> Result<SweepRecord, SpectroscopyError> {
    let mut record = SweepRecord {
        vd,
        omega_d,
        gamma_f: None,
        omega_ph: None,
        fit_residual: 0.0,
        status: SweepStatus::Ok,
    };
    if vd == 0.0 {
        record.gamma_f = Some(0.0);
        record.status = SweepStatus::NoEmission;
        return Ok(record);
    }
    if d.coupling_at_volts(vd).abs() > d.kappa / 4.0 {
        record.status = SweepStatus::Oscillatory;
        return Ok(record);
    }
    let n = (settings.pulse_len / settings.dt).round() as usize + 1;
    let pulse = DrivePulse::square(0.0, settings.dt, n, vd, omega_d);
    let sim = integrate(d, &pulse, &ThreeLevelState::superposition(), settings.dt_int)?;
    let envelope = fit_envelope(&sim.waveform, settings.discard_for(d));
    let frequency = extract_frequency(&sim.waveform);
    match (envelope, frequency) {
        (Ok(env), Ok(freq)) => {
            record.gamma_f = Some(adiabatic_rate_from_envelope(env.gamma_minus));
            record.omega_ph = Some(freq.omega);
            record.fit_residual = env.residual;
        }
        _ => record.status = SweepStatus::FitFailed,
    }
    Ok(record)
}

/// Runs `measure_point` over the full grid in parallel. Records are ordered
/// with `omega_d` varying fastest.
pub fn run_sweep(
    d: &DeviceParams,
    vd_grid: &[f64],
    omega_d_grid: &[f64],
    settings: &SweepSettings,
) -> Result<Vec<SweepRecord>, SpectroscopyError> {
    d.validate().map_err(DynamicsError::from)?;
    let points: Vec<(f64, f64)> = vd_grid
        .iter()
        .flat_map(|v| omega_d_grid.iter().map(move |w| (*v, *w)))
        .collect();
    points
        .par_iter()
        .map(|(v, w)| measure_point(d, *v, *w, settings))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    /// Slow decay rate of `|<a_out>|`.
    pub gamma_minus: f64,
    /// RMS residual of the log-amplitude fit.
    pub residual: f64,
}

/// Relative amplitude below which samples are treated as numerical noise.
const NOISE_FLOOR: f64 = 1e-9;
/// Largest rise of `ln|a|` tolerated before the envelope counts as oscillating.
const MAX_LOG_RISE: f64 = 0.05;

/// Least-squares line through `ln|samples|` on `[t0 + discard, t_end]`,
/// stopping early where the amplitude falls below the noise floor.
pub fn fit_envelope(w: &PhotonWaveform, discard: f64) -> Result<EnvelopeFit, SpectroscopyError> {
    let peak = w.samples.iter().map(|s| s.norm()).fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(SpectroscopyError::ZeroSignal);
    }
    let floor = peak * NOISE_FLOOR;
    let start = (discard / w.dt).ceil().max(0.0) as usize;
    let mut ts = Vec::new();
    let mut ys = Vec::new();
    for (k, s) in w.samples.iter().enumerate().skip(start) {
        let a = s.norm();
        if a <= floor {
            break;
        }
        ts.push(w.t0 + k as f64 * w.dt);
        ys.push(a.ln());
    }
    if ts.len() < 8 {
        return Err(SpectroscopyError::TooFewSamples(ts.len()));
    }
    let mut running_min = f64::INFINITY;
    let mut rise: f64 = 0.0;
    for y in &ys {
        running_min = running_min.min(*y);
        rise = rise.max(y - running_min);
    }
    if rise > MAX_LOG_RISE {
        return Err(SpectroscopyError::NonMonotone { rise });
    }

    let n = ts.len() as f64;
    let t_mean = ts.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, y) in ts.iter().zip(&ys) {
        sxy += (t - t_mean) * (y - y_mean);
        sxx += (t - t_mean) * (t - t_mean);
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * t_mean;
    let sse: f64 = ts
        .iter()
        .zip(&ys)
        .map(|(t, y)| (y - intercept - slope * t).powi(2))
        .sum();
    Ok(EnvelopeFit {
        gamma_minus: (-slope).max(0.0),
        residual: (sse / n).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyEstimate {
    /// Absolute photon frequency (rad/µs).
    pub omega: f64,
    /// A second spectral maximum of comparable height exists.
    pub ambiguous: bool,
}

const ZERO_PAD: usize = 8;
const AMBIGUITY_RATIO: f64 = 0.5;

/// Spectral peak of the waveform. Samples follow the `exp(-i omega t)`
/// convention, so a component `exp(-i Delta t)` reports
/// `frame_freq + Delta`.
pub fn extract_frequency(w: &PhotonWaveform) -> Result<FrequencyEstimate, SpectroscopyError> {
    let n = w.samples.len();
    if n < 2 || w.samples.iter().all(|s| s.norm() == 0.0) {
        return Err(SpectroscopyError::ZeroSignal);
    }
    let nfft = (ZERO_PAD * n).next_power_of_two();
    let mut buf: Vec<Complex64> = w.samples.clone();
    buf.resize(nfft, Complex64::new(0.0, 0.0));
    // The inverse transform carries exp(+i ...), matching the sign convention.
    FftPlanner::new().plan_fft_inverse(nfft).process(&mut buf);
    let mag: Vec<f64> = buf.iter().map(|c| c.norm()).collect();
    let (k, peak) = mag
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (i, m)| if *m > acc.1 { (i, *m) } else { acc });

    let at = |i: isize| mag[i.rem_euclid(nfft as isize) as usize];
    let (lm, l0, lp) = (
        at(k as isize - 1).max(f64::MIN_POSITIVE).ln(),
        peak.ln(),
        at(k as isize + 1).max(f64::MIN_POSITIVE).ln(),
    );
    let denom = lm - 2.0 * l0 + lp;
    let shift = if denom.abs() > 0.0 {
        (0.5 * (lm - lp) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    let mut bin = k as f64 + shift;
    if bin > nfft as f64 / 2.0 {
        bin -= nfft as f64;
    }
    let offset = std::f64::consts::TAU * bin / (nfft as f64 * w.dt);

    // Look for another local maximum outside the main lobe.
    let lobe = 2 * nfft / n + 1;
    let ambiguous = (0..nfft).any(|i| {
        let dist = (i as isize - k as isize).rem_euclid(nfft as isize) as usize;
        let dist = dist.min(nfft - dist);
        dist > lobe
            && mag[i] >= AMBIGUITY_RATIO * peak
            && mag[i] >= at(i as isize - 1)
            && mag[i] >= at(i as isize + 1)
    });
    Ok(FrequencyEstimate {
        omega: w.frame_freq + offset,
        ambiguous,
    })
}

/// Even-polynomial calibration maps for one target photon frequency.
///
/// Coefficient `i` multiplies `V_d^(2i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    pub target_omega_ph: f64,
    pub gamma_of_vd: Vec<f64>,
    pub omegad_of_vd: Vec<f64>,
    /// Range `[0, V_max]` on which `Gamma_f(V_d)` is strictly increasing.
    pub vd_domain: [f64; 2],
    /// Largest amplitude among the rows used for the fit.
    pub vd_data_max: f64,
    /// Intersection points `(V_d, omega_d, Gamma_f)` the polynomials were fitted to.
    pub points: Vec<[f64; 3]>,
}

pub fn eval_even(coeffs: &[f64], v: f64) -> f64 {
    let v2 = v * v;
    coeffs.iter().rev().fold(0.0, |acc, c| acc * v2 + c)
}

pub fn eval_even_derivative(coeffs: &[f64], v: f64) -> f64 {
    let v2 = v * v;
    let mut acc = 0.0;
    for (i, c) in coeffs.iter().enumerate().skip(1).rev() {
        acc = acc * v2 + 2.0 * i as f64 * c;
    }
    // acc holds sum 2i c_i v^(2i-2)
    acc * v
}

impl CalibrationTable {
    pub fn gamma_at(&self, vd: f64) -> f64 {
        eval_even(&self.gamma_of_vd, vd)
    }

    pub fn omega_d_at(&self, vd: f64) -> f64 {
        eval_even(&self.omegad_of_vd, vd)
    }

    /// Largest emission rate reachable on the monotone domain.
    pub fn max_gamma(&self) -> f64 {
        self.gamma_at(self.vd_domain[1])
    }
}

/// Minimum number of amplitude rows needed for a table.
pub const MIN_TABLE_ROWS: usize = 6;
const MAX_EVEN_TERMS: usize = 6;

/// Builds the calibration table for `target_omega_ph`. Sweep points with
/// status other than `Ok`, or with envelope residual above `tolerance`, are
/// ignored.
pub fn build_table(
    records: &[SweepRecord],
    target_omega_ph: f64,
    tolerance: f64,
) -> Result<CalibrationTable, SpectroscopyError> {
    let mut rows: Vec<(f64, Vec<(f64, f64, f64)>)> = Vec::new();
    for r in records {
        let (Some(gamma), Some(omega_ph)) = (r.gamma_f, r.omega_ph) else {
            continue;
        };
        if r.status != SweepStatus::Ok || r.fit_residual > tolerance || r.vd <= 0.0 {
            continue;
        }
        match rows.iter_mut().find(|(v, _)| *v == r.vd) {
            Some((_, pts)) => pts.push((r.omega_d, omega_ph, gamma)),
            None => rows.push((r.vd, vec![(r.omega_d, omega_ph, gamma)])),
        }
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut points = Vec::new();
    for (vd, mut pts) in rows {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        if let Some((wd, gamma)) = intersect(&pts, target_omega_ph).filter(|p| p.1 > 0.0) {
            points.push([vd, wd, gamma]);
        }
    }
    if points.len() < MIN_TABLE_ROWS {
        return Err(SpectroscopyError::InsufficientData {
            found: points.len(),
            needed: MIN_TABLE_ROWS,
        });
    }

    let vd_data_max = points.iter().map(|p| p[0]).fold(0.0, f64::max);
    let vs: Vec<f64> = points.iter().map(|p| p[0]).collect();
    let wd: Vec<f64> = points.iter().map(|p| p[1]).collect();
    let gs: Vec<f64> = points.iter().map(|p| p[2]).collect();
    let terms = MAX_EVEN_TERMS.min(points.len() - 1);
    let omegad_of_vd = fit_even(&vs, &wd, None, vd_data_max, 0, terms)?;
    // rates span decades, so residuals are weighted relative to the rate
    let weights: Vec<f64> = gs.iter().map(|g| 1.0 / g).collect();
    let gamma_of_vd = fit_even(&vs, &gs, Some(&weights), vd_data_max, 1, terms)?;

    let v_max = monotone_limit(&gamma_of_vd, vd_data_max).ok_or(SpectroscopyError::NotMonotone)?;
    Ok(CalibrationTable {
        target_omega_ph,
        gamma_of_vd,
        omegad_of_vd,
        vd_domain: [0.0, v_max],
        vd_data_max,
        points,
    })
}

/// Linear interpolation along one amplitude row (sorted by `omega_d`) of the
/// drive frequency that yields `target`, and the emission rate there.
fn intersect(pts: &[(f64, f64, f64)], target: f64) -> Option<(f64, f64)> {
    pts.windows(2).find_map(|w| {
        let (a, b) = (w[0], w[1]);
        let (da, db) = (a.1 - target, b.1 - target);
        if da * db > 0.0 || a.1 == b.1 {
            return None;
        }
        let f = da / (da - db);
        Some((a.0 + f * (b.0 - a.0), a.2 + f * (b.2 - a.2)))
    })
}

/// Weighted least squares in the scaled variable `u = v / scale` over the
/// even powers `first..terms`; returns coefficients of `v^(2i)` for
/// `i < terms` with the skipped leading ones set to zero.
fn fit_even(
    vs: &[f64],
    ys: &[f64],
    weights: Option<&[f64]>,
    scale: f64,
    first: usize,
    terms: usize,
) -> Result<Vec<f64>, SpectroscopyError> {
    let cols = terms - first;
    let w = |r: usize| weights.map_or(1.0, |w| w[r]);
    let a = DMatrix::from_fn(vs.len(), cols, |r, c| {
        w(r) * (vs[r] / scale).powi(2 * (c + first) as i32)
    });
    let b = DVector::from_fn(vs.len(), |r, _| w(r) * ys[r]);
    let x = a
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| SpectroscopyError::Fit(e.to_string()))?;
    let mut coeffs = vec![0.0; MAX_EVEN_TERMS];
    for c in 0..cols {
        let order = c + first;
        coeffs[order] = x[c] / scale.powi(2 * order as i32);
    }
    Ok(coeffs)
}

/// End of the interval `[0, v]` on which the polynomial stays positive and
/// strictly increasing, found on a dense grid.
fn monotone_limit(coeffs: &[f64], v_hi: f64) -> Option<f64> {
    const STEPS: usize = 4000;
    let mut prev = eval_even(coeffs, 0.0);
    let mut last_good = None;
    for i in 1..=STEPS {
        let v = v_hi * i as f64 / STEPS as f64;
        let g = eval_even(coeffs, v);
        if g <= prev || g <= 0.0 {
            break;
        }
        prev = g;
        last_good = Some(v);
    }
    last_good
}
