//! Pulse design: target photon shape, required emission rate, inversion of
//! the calibration table into an amplitude/frequency-modulated drive, phase
//! correction and the time-symmetry metric.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::DeviceParams;
use crate::dynamics::{simulate_photon_mode, trapezoid, DrivePulse, DynamicsError, PhotonWaveform};
use crate::spectroscopy::{extract_frequency, CalibrationTable, SpectroscopyError};

#[derive(Debug, Error)]
pub enum ShaperError {
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error("remaining energy {remaining:.3e} at t = {t} us is below the truncation budget")]
    TruncationTooAggressive { t: f64, remaining: f64 },
    #[error("required emission rate {required} exceeds the calibrated maximum {available} (rad/us)")]
    Infeasible { required: f64, available: f64 },
    #[error("waveform carries no energy")]
    ZeroEnergy,
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Spectroscopy(#[from] SpectroscopyError),
}

/// Sampled `psi(t) = sqrt(gamma_ph/2) sech(gamma_ph t)` on `[-T, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetWaveform {
    pub gamma_ph: f64,
    /// Half-width `T` of the truncation window (µs).
    pub duration: f64,
    pub dt: f64,
    pub epsilon_trunc: f64,
    pub samples: Vec<f64>,
}

impl TargetWaveform {
    pub fn t0(&self) -> f64 {
        -self.duration
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.samples.len())
            .map(|k| -self.duration + k as f64 * self.dt)
            .collect()
    }

    pub fn energy(&self) -> f64 {
        trapezoid(self.samples.iter().map(|s| s * s), self.dt)
    }

    /// `3 pi / gamma_ph`: the window `|t| < 1.5 / (gamma_ph / 2 pi)`, which
    /// holds 99.98% of the photon energy.
    pub fn nominal_width(&self) -> f64 {
        3.0 * std::f64::consts::PI / self.gamma_ph
    }

    /// The target as a waveform on its own grid.
    pub fn as_waveform(&self, frame_freq: f64) -> PhotonWaveform {
        PhotonWaveform {
            t0: self.t0(),
            dt: self.dt,
            samples: self.samples.iter().map(|s| Complex64::new(*s, 0.0)).collect(),
            frame_freq,
        }
    }
}

/// Default sample spacing of designed pulses (µs).
pub const DEFAULT_DT: f64 = 1e-3;

pub fn sech_target(gamma_ph: f64, epsilon_trunc: f64) -> Result<TargetWaveform, ShaperError> {
    sech_target_on_grid(gamma_ph, epsilon_trunc, DEFAULT_DT)
}

/// Sech target whose window holds `1 - epsilon_trunc` of the energy. The grid
/// spacing is the largest value `<= dt` that divides `2T` into an even number
/// of steps, so the grid is symmetric and contains `t = 0`.
pub fn sech_target_on_grid(
    gamma_ph: f64,
    epsilon_trunc: f64,
    dt: f64,
) -> Result<TargetWaveform, ShaperError> {
    if !(gamma_ph > 0.0) || !gamma_ph.is_finite() {
        return Err(ShaperError::InvalidTarget(format!("gamma_ph = {gamma_ph}")));
    }
    if !(epsilon_trunc > 0.0 && epsilon_trunc < 0.1) {
        return Err(ShaperError::InvalidTarget(format!(
            "truncation {epsilon_trunc} outside (0, 0.1)"
        )));
    }
    if !(dt > 0.0) {
        return Err(ShaperError::InvalidTarget(format!("dt = {dt}")));
    }
    let duration = (1.0 - epsilon_trunc).atanh() / gamma_ph;
    let n = 2 * (duration / dt).ceil().max(1.0) as usize;
    let dt_eff = 2.0 * duration / n as f64;
    let amp = (gamma_ph / 2.0).sqrt();
    let samples = (0..=n)
        .map(|k| {
            // index from both ends so the samples are exactly symmetric
            let j = k.min(n - k) as f64;
            let t = -duration + j * dt_eff;
            amp / (gamma_ph * t).cosh()
        })
        .collect();
    Ok(TargetWaveform {
        gamma_ph,
        duration,
        dt: dt_eff,
        epsilon_trunc,
        samples,
    })
}

/// Closed-form rate `gamma_ph (1 + tanh(gamma_ph t))` for the sech target.
pub fn sech_rate(gamma_ph: f64, t: f64) -> f64 {
    gamma_ph * (1.0 + (gamma_ph * t).tanh())
}

/// Emission rate `|psi(t)|^2 / (1 - int_{-inf}^t |psi|^2)` that releases the
/// target shape. The remaining energy is accumulated backwards from `+T`
/// starting from the trailing tail `epsilon_trunc / 2` outside the window.
pub fn target_emission_rate(w: &TargetWaveform) -> Result<Vec<f64>, ShaperError> {
    let n = w.samples.len();
    let tail = 0.5 * w.epsilon_trunc;
    let mut remaining = vec![0.0; n];
    let mut acc = tail;
    remaining[n - 1] = acc;
    for k in (0..n - 1).rev() {
        acc += 0.5 * (w.samples[k].powi(2) + w.samples[k + 1].powi(2)) * w.dt;
        remaining[k] = acc;
    }
    let guard = 0.25 * w.epsilon_trunc;
    w.samples
        .iter()
        .zip(&remaining)
        .enumerate()
        .map(|(k, (psi, rem))| {
            if *rem <= guard {
                Err(ShaperError::TruncationTooAggressive {
                    t: w.t0() + k as f64 * w.dt,
                    remaining: *rem,
                })
            } else {
                Ok(psi * psi / rem)
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    /// Peak of the required emission rate.
    pub required_max: f64,
    /// Largest rate on the table's monotone domain.
    pub available_max: f64,
    /// `available_max - required_max`.
    pub margin: f64,
    /// Amplitude at which the table reaches `available_max`.
    pub limiting_vd: f64,
}

pub fn check_feasibility(
    table: &CalibrationTable,
    w: &TargetWaveform,
) -> Result<FeasibilityReport, ShaperError> {
    let rates = target_emission_rate(w)?;
    let required_max = rates.iter().copied().fold(0.0, f64::max);
    let available_max = table.max_gamma();
    Ok(FeasibilityReport {
        feasible: required_max <= available_max,
        required_max,
        available_max,
        margin: available_max - required_max,
        limiting_vd: table.vd_domain[1],
    })
}

/// Solves `Gamma_f(V_d) = rate` by bisection on the monotone domain for each
/// requested rate.
pub fn invert_amplitude(table: &CalibrationTable, rates: &[f64]) -> Result<Vec<f64>, ShaperError> {
    let v_hi = table.vd_domain[1];
    let available = table.gamma_at(v_hi);
    rates
        .iter()
        .map(|&rate| {
            if !(rate > 0.0) {
                return Ok(0.0);
            }
            if rate > available {
                return Err(ShaperError::Infeasible {
                    required: rate,
                    available,
                });
            }
            let (mut lo, mut hi) = (0.0, v_hi);
            while hi - lo > 1e-9 * v_hi && hi - lo > 1e-7 * hi {
                let mid = 0.5 * (lo + hi);
                if table.gamma_at(mid) < rate {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(0.5 * (lo + hi))
        })
        .collect()
}

/// Drive with `omega_d(t) = omega_d(V_d(t))` from the table and no extra
/// phase; the carrier phase follows from [`DrivePulse::carrier_phase`].
pub fn synthesize(table: &CalibrationTable, vd: &[f64], t0: f64, dt: f64) -> DrivePulse {
    DrivePulse {
        t0,
        dt,
        vd: vd.to_vec(),
        omega_d: vd.iter().map(|v| table.omega_d_at(*v)).collect(),
        phase_offset: vec![0.0; vd.len()],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapedDrive {
    pub pulse: DrivePulse,
    /// Required rate after capping at the calibrated maximum.
    pub rate_target: Vec<f64>,
    pub feasibility: FeasibilityReport,
    /// Number of samples whose required rate was capped.
    pub capped_samples: usize,
}

/// Target rate, feasibility check, table inversion and synthesis in one step.
/// Infeasible designs are rejected; the last few samples near `+T`, where the
/// required rate approaches `2 gamma_ph`, are capped at the calibrated maximum.
pub fn design_drive(table: &CalibrationTable, w: &TargetWaveform) -> Result<ShapedDrive, ShaperError> {
    let feasibility = check_feasibility(table, w)?;
    if !feasibility.feasible {
        return Err(ShaperError::Infeasible {
            required: feasibility.required_max,
            available: feasibility.available_max,
        });
    }
    let mut rates = target_emission_rate(w)?;
    let mut capped_samples = 0;
    for r in rates.iter_mut() {
        if *r > feasibility.available_max {
            *r = feasibility.available_max;
            capped_samples += 1;
        }
    }
    let vd = invert_amplitude(table, &rates)?;
    Ok(ShapedDrive {
        pulse: synthesize(table, &vd, w.t0(), w.dt),
        rate_target: rates,
        feasibility,
        capped_samples,
    })
}

/// `samples * exp(+i (omega_ref - frame_freq) t)`.
pub fn demodulate(w: &PhotonWaveform, omega_ref: f64) -> Vec<Complex64> {
    w.reframed(omega_ref).samples
}

/// `max_t0 |sum a*(t0 - t) a(t)| / sum |a|^2`, with `t0` scanned over all
/// sample-resolution shifts and refined by a parabola through the best three.
pub fn time_symmetry(w: &PhotonWaveform) -> Result<f64, ShaperError> {
    let energy: f64 = w.samples.iter().map(|s| s.norm_sqr()).sum();
    if !(energy > 0.0) {
        return Err(ShaperError::ZeroEnergy);
    }
    let n = w.samples.len();
    let nfft = (2 * n).next_power_of_two();
    let mut fa: Vec<Complex64> = w.samples.clone();
    fa.resize(nfft, Complex64::default());
    let mut fb: Vec<Complex64> = w.samples.iter().map(|s| s.conj()).collect();
    fb.resize(nfft, Complex64::default());
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(nfft);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    let mut conv: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x * y).collect();
    planner.plan_fft_inverse(nfft).process(&mut conv);
    // conv[m] = sum_k a_k conj(a_{m-k}), the overlap for t0 = 2 t_start + m dt
    let scale = 1.0 / (nfft as f64 * energy);
    let c: Vec<f64> = conv[..2 * n - 1].iter().map(|z| z.norm() * scale).collect();
    let (m, best) = c
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
    // no overlap beyond either end, so missing neighbours are zero
    let a = if m > 0 { c[m - 1] } else { 0.0 };
    let cc = c.get(m + 1).copied().unwrap_or(0.0);
    let denom = a - 2.0 * best + cc;
    let refined = if denom < 0.0 {
        best - 0.125 * (a - cc).powi(2) / denom
    } else {
        best
    };
    Ok(refined.min(1.0))
}

/// `int psi_target(t) psi(t) dt` on the target grid; `psi` is interpolated
/// linearly and taken as zero outside its record.
pub fn mode_overlap(target: &TargetWaveform, psi: &PhotonWaveform) -> Complex64 {
    let times = target.times();
    let mut sum = Complex64::default();
    for (k, (t, s)) in times.iter().zip(&target.samples).enumerate() {
        let weight = if k == 0 || k + 1 == times.len() { 0.5 } else { 1.0 };
        sum += psi.at(*t) * (*s * weight);
    }
    sum * target.dt
}

/// `|<psi_target|psi>|^2 / (<psi_target|psi_target> <psi|psi>)`.
pub fn normalized_overlap(target: &TargetWaveform, psi: &PhotonWaveform) -> f64 {
    let e = psi.energy();
    if e <= 0.0 {
        return 0.0;
    }
    mode_overlap(target, psi).norm_sqr() / (target.energy() * e)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseCorrectionOptions {
    /// Maximum number of phase updates.
    pub iterations: usize,
    pub dt_int: f64,
    /// Zero-amplitude tail simulated after the pulse (µs).
    pub ring_down: f64,
    /// Relative amplitude above which the phase is measured.
    pub support_threshold: f64,
    /// Stop once `max|Im psi| / max|psi|` drops below this value.
    pub tolerance: f64,
}

impl Default for PhaseCorrectionOptions {
    fn default() -> Self {
        Self {
            iterations: 2,
            dt_int: 1e-4,
            ring_down: 0.1,
            support_threshold: 0.05,
            tolerance: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCorrection {
    pub pulse: DrivePulse,
    /// Phase updates applied.
    pub iterations: usize,
    /// `max|Im psi| / max|psi|` of the final pulse, demodulated at the target.
    pub residual: f64,
    pub converged: bool,
    /// Residual before each update and after the last one.
    pub history: Vec<f64>,
}

/// Photon mode emitted by `pulse` (followed by a ring-down tail) from `|f0>`.
pub fn emitted_mode(
    d: &DeviceParams,
    pulse: &DrivePulse,
    opts: &PhaseCorrectionOptions,
) -> Result<PhotonWaveform, ShaperError> {
    let extra = (opts.ring_down / pulse.dt).round() as usize;
    Ok(simulate_photon_mode(d, &pulse.padded(extra), opts.dt_int)?.waveform)
}

/// `max|Im| / max|.|` of complex samples.
pub fn imaginary_residual(samples: &[Complex64]) -> f64 {
    let peak = samples.iter().map(|s| s.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return 0.0;
    }
    samples.iter().map(|s| s.im.abs()).fold(0.0, f64::max) / peak
}

/// Unwrapped phase of `samples` on the support where `|s| >= threshold * peak`,
/// held constant before and after it.
pub fn support_phase(samples: &[Complex64], threshold: f64) -> Vec<f64> {
    let peak = samples.iter().map(|s| s.norm()).fold(0.0, f64::max);
    let n = samples.len();
    let mut phase = vec![0.0; n];
    if peak == 0.0 {
        return phase;
    }
    let level = threshold * peak;
    let Some(first) = samples.iter().position(|s| s.norm() >= level) else {
        return phase;
    };
    let last = samples.iter().rposition(|s| s.norm() >= level).unwrap_or(first);
    let mut prev = samples[first].arg();
    phase[first] = prev;
    let mut acc = prev;
    for k in first + 1..=last {
        let p = samples[k].arg();
        let mut delta = p - prev;
        delta -= std::f64::consts::TAU * (delta / std::f64::consts::TAU).round();
        acc += delta;
        phase[k] = acc;
        prev = p;
    }
    let (head, tail) = (phase[first], phase[last]);
    phase[..first].fill(head);
    phase[last + 1..].fill(tail);
    phase
}

/// Repeatedly simulates the pulse, measures the photon phase in the frame of
/// the target frequency and subtracts it from the drive phase. Because the
/// emitted field inherits the phase of the coupling, a drive phase offset
/// `-phi` shifts the photon by `+phi`.
pub fn phase_correct(
    d: &DeviceParams,
    pulse: &DrivePulse,
    target_omega_ph: f64,
    opts: &PhaseCorrectionOptions,
) -> Result<PhaseCorrection, ShaperError> {
    let mut current = pulse.clone();
    let mut history = Vec::new();
    let mut applied = 0;
    loop {
        let mode = emitted_mode(d, &current, opts)?;
        let demod = demodulate(&mode, target_omega_ph);
        if demod.iter().all(|s| s.norm() == 0.0) {
            return Err(ShaperError::ZeroEnergy);
        }
        let residual = imaginary_residual(&demod);
        history.push(residual);
        if residual < opts.tolerance || applied == opts.iterations {
            return Ok(PhaseCorrection {
                pulse: current,
                iterations: applied,
                residual,
                converged: residual < opts.tolerance,
                history,
            });
        }
        let phase = support_phase(&demod, opts.support_threshold);
        for (off, p) in current.phase_offset.iter_mut().zip(&phase) {
            *off -= p;
        }
        applied += 1;
    }
}

/// Figures of merit for an emitted photon relative to its target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonMetrics {
    pub time_symmetry: f64,
    /// `|<psi_target|psi_out>|^2` with both modes normalised.
    pub overlap: f64,
    /// Emitted energy for an `|f0>` start.
    pub efficiency: f64,
    /// Fourier peak of the photon (rad/µs).
    pub omega_peak: f64,
}

pub fn photon_metrics(
    target: &TargetWaveform,
    mode: &PhotonWaveform,
    target_omega_ph: f64,
) -> Result<PhotonMetrics, ShaperError> {
    let demod = mode.reframed(target_omega_ph);
    Ok(PhotonMetrics {
        time_symmetry: time_symmetry(&demod)?,
        overlap: normalized_overlap(target, &demod),
        efficiency: mode.energy(),
        omega_peak: extract_frequency(mode)?.omega,
    })
}
