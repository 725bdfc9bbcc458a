//! Driven three-state master equation in the `{|f0>, |g1>, |g0>}` subspace.
//!
//! The integrator works in the frame where the `|g1>` level is at rest: the
//! `|f0>` level sits at the drive detuning `Delta_d = omega_f0g1 + delta_stark
//! - omega_d(t)` and the coherences with `|g0>` are referenced to the
//! resonator frequency. In that frame `sqrt(kappa) rho_{g1,g0}` is directly the
//! output field `<a_out>` recorded at `frame_freq = omega_r`, using the
//! `exp(-i omega t)` convention for positive frequencies.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{effective_coupling, stark_detuning, DeviceError, DeviceParams};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("integration step {dt_int} us exceeds 0.05/kappa = {limit} us")]
    StepTooLarge { dt_int: f64, limit: f64 },
    #[error("invalid drive pulse: {0}")]
    InvalidPulse(String),
    #[error("state became non-finite at t = {t} us")]
    NonFinite { t: f64 },
    #[error(transparent)]
    Device(#[from] DeviceError),
}

/// Density-matrix entries of the `{|f0>, |g1>, |g0>}` subspace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreeLevelState {
    pub rho_f0f0: f64,
    pub rho_g1g1: f64,
    pub rho_g0g0: f64,
    pub rho_f0g1: Complex64,
    pub rho_f0g0: Complex64,
    pub rho_g1g0: Complex64,
}

impl ThreeLevelState {
    pub fn ground() -> Self {
        Self {
            rho_f0f0: 0.0,
            rho_g1g1: 0.0,
            rho_g0g0: 1.0,
            rho_f0g1: Complex64::new(0.0, 0.0),
            rho_f0g0: Complex64::new(0.0, 0.0),
            rho_g1g0: Complex64::new(0.0, 0.0),
        }
    }

    /// Qubit in `|f>`, resonator empty.
    pub fn excited() -> Self {
        Self {
            rho_f0f0: 1.0,
            rho_g0g0: 0.0,
            ..Self::ground()
        }
    }

    /// `(|g0> + |f0>)/sqrt(2)`.
    pub fn superposition() -> Self {
        Self {
            rho_f0f0: 0.5,
            rho_g0g0: 0.5,
            rho_f0g0: Complex64::new(0.5, 0.0),
            ..Self::ground()
        }
    }

    pub fn trace(&self) -> f64 {
        self.rho_f0f0 + self.rho_g1g1 + self.rho_g0g0
    }

    /// `rho_f0f0 rho_g1g1 - |rho_f0g1|^2`, non-negative for a physical state.
    pub fn positivity_witness(&self) -> f64 {
        self.rho_f0f0 * self.rho_g1g1 - self.rho_f0g1.norm_sqr()
    }

    fn pack(&self, emitted: f64) -> Packed {
        [
            self.rho_f0f0,
            self.rho_g1g1,
            self.rho_g0g0,
            emitted,
            self.rho_f0g1.re,
            self.rho_f0g1.im,
            self.rho_f0g0.re,
            self.rho_f0g0.im,
            self.rho_g1g0.re,
            self.rho_g1g0.im,
        ]
    }

    fn unpack(y: &Packed) -> (Self, f64) {
        (
            Self {
                rho_f0f0: y[0],
                rho_g1g1: y[1],
                rho_g0g0: y[2],
                rho_f0g1: Complex64::new(y[4], y[5]),
                rho_f0g0: Complex64::new(y[6], y[7]),
                rho_g1g0: Complex64::new(y[8], y[9]),
            },
            y[3],
        )
    }
}

/// Sampled drive: amplitude envelope, instantaneous frequency and an extra
/// phase on a uniform grid. The complex drive is
/// `V_d(t) exp(-i (int_0^t omega_d + phase_offset(t)))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrivePulse {
    pub t0: f64,
    pub dt: f64,
    pub vd: Vec<f64>,
    pub omega_d: Vec<f64>,
    pub phase_offset: Vec<f64>,
}

/// Drive parameters at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveSample {
    pub vd: f64,
    pub omega_d: f64,
    pub phase_offset: f64,
}

impl DrivePulse {
    /// Constant-amplitude, constant-frequency pulse of `n` samples.
    pub fn square(t0: f64, dt: f64, n: usize, vd: f64, omega_d: f64) -> Self {
        Self {
            t0,
            dt,
            vd: vec![vd; n],
            omega_d: vec![omega_d; n],
            phase_offset: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.vd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vd.is_empty()
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.dt * (self.len().saturating_sub(1)) as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.t0 + k as f64 * self.dt).collect()
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.dt > 0.0) || !self.dt.is_finite() || !self.t0.is_finite() {
            return Err(DynamicsError::InvalidPulse(format!(
                "sample spacing must be positive, got {}",
                self.dt
            )));
        }
        if self.len() < 2 {
            return Err(DynamicsError::InvalidPulse("need at least two samples".into()));
        }
        if self.omega_d.len() != self.len() || self.phase_offset.len() != self.len() {
            return Err(DynamicsError::InvalidPulse(
                "amplitude, frequency and phase arrays differ in length".into(),
            ));
        }
        let finite = self
            .vd
            .iter()
            .chain(&self.omega_d)
            .chain(&self.phase_offset)
            .all(|v| v.is_finite());
        if !finite {
            return Err(DynamicsError::InvalidPulse("non-finite sample".into()));
        }
        if let Some(v) = self.vd.iter().find(|v| **v < 0.0) {
            return Err(DynamicsError::InvalidPulse(format!("negative amplitude {v}")));
        }
        Ok(())
    }

    /// Linear interpolation of the drive at time `t`, clamped to the ends.
    pub fn at(&self, t: f64) -> DriveSample {
        let n = self.len();
        let x = ((t - self.t0) / self.dt).clamp(0.0, (n - 1) as f64);
        let i = (x.floor() as usize).min(n - 2);
        let f = x - i as f64;
        let lerp = |v: &[f64]| v[i] + f * (v[i + 1] - v[i]);
        DriveSample {
            vd: lerp(&self.vd),
            omega_d: lerp(&self.omega_d),
            phase_offset: lerp(&self.phase_offset),
        }
    }

    /// Carrier phase `-int_{t0}^{t} omega_d` by cumulative trapezoid.
    pub fn carrier_phase(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        out.push(0.0);
        for w in self.omega_d.windows(2) {
            acc -= 0.5 * (w[0] + w[1]) * self.dt;
            out.push(acc);
        }
        out
    }

    /// Complex drive waveform `V_d exp(-i(int omega_d + phase_offset))`.
    pub fn complex_waveform(&self) -> Vec<Complex64> {
        self.carrier_phase()
            .iter()
            .zip(&self.vd)
            .zip(&self.phase_offset)
            .map(|((c, v), p)| Complex64::from_polar(*v, c - p))
            .collect()
    }

    /// Appends `extra` zero-amplitude samples that hold the final frequency
    /// and phase, so the emission can ring down after the drive ends.
    pub fn padded(&self, extra: usize) -> Self {
        let mut p = self.clone();
        let w = *self.omega_d.last().unwrap_or(&0.0);
        let ph = *self.phase_offset.last().unwrap_or(&0.0);
        p.vd.extend(std::iter::repeat_n(0.0, extra));
        p.omega_d.extend(std::iter::repeat_n(w, extra));
        p.phase_offset.extend(std::iter::repeat_n(ph, extra));
        p
    }
}

/// Output field samples `<a_out(t)>` (1/sqrt(µs)) in a frame rotating at
/// `frame_freq`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonWaveform {
    pub t0: f64,
    pub dt: f64,
    pub samples: Vec<Complex64>,
    pub frame_freq: f64,
}

impl PhotonWaveform {
    pub fn times(&self) -> Vec<f64> {
        (0..self.samples.len())
            .map(|k| self.t0 + k as f64 * self.dt)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `int |a_out|^2 dt` (trapezoid).
    pub fn energy(&self) -> f64 {
        trapezoid(self.samples.iter().map(|s| s.norm_sqr()), self.dt)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * factor).collect(),
            ..self.clone()
        }
    }

    /// The same field expressed in a frame rotating at `omega_ref`.
    pub fn reframed(&self, omega_ref: f64) -> Self {
        let shift = omega_ref - self.frame_freq;
        Self {
            samples: self
                .samples
                .iter()
                .enumerate()
                .map(|(k, s)| s * Complex64::from_polar(1.0, shift * (self.t0 + k as f64 * self.dt)))
                .collect(),
            frame_freq: omega_ref,
            ..self.clone()
        }
    }

    /// Linear interpolation of the samples, zero outside the record.
    pub fn at(&self, t: f64) -> Complex64 {
        let n = self.samples.len();
        if n == 0 {
            return Complex64::new(0.0, 0.0);
        }
        let x = (t - self.t0) / self.dt;
        if x < 0.0 || x > (n - 1) as f64 {
            return Complex64::new(0.0, 0.0);
        }
        let i = (x.floor() as usize).min(n.saturating_sub(2));
        if n == 1 {
            return self.samples[0];
        }
        let f = x - i as f64;
        self.samples[i] + (self.samples[i + 1] - self.samples[i]) * f
    }
}

pub(crate) fn trapezoid(values: impl Iterator<Item = f64>, dt: f64) -> f64 {
    let mut sum = 0.0;
    let mut first = None;
    let mut last = 0.0;
    for v in values {
        if first.is_none() {
            first = Some(v);
        }
        sum += v;
        last = v;
    }
    match first {
        None => 0.0,
        Some(f) => (sum - 0.5 * (f + last)) * dt,
    }
}

/// States recorded on the pulse grid together with the emitted-energy ledger
/// `int kappa rho_g1g1 dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t0: f64,
    pub dt: f64,
    pub states: Vec<ThreeLevelState>,
    pub emitted: Vec<f64>,
}

impl Trajectory {
    pub fn last(&self) -> &ThreeLevelState {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn total_emitted(&self) -> f64 {
        *self.emitted.last().unwrap_or(&0.0)
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub trajectory: Trajectory,
    pub waveform: PhotonWaveform,
}

type Packed = [f64; 10];

#[derive(Clone, Copy)]
struct Coefficients {
    g: Complex64,
    detuning: f64,
}

fn coefficients(d: &DeviceParams, s: DriveSample) -> Coefficients {
    let omega = d.transduction_k * s.vd;
    let g = effective_coupling(d, omega);
    Coefficients {
        g: Complex64::from_polar(1.0, -s.phase_offset) * g,
        detuning: d.omega_f0g1() + stark_detuning(d, omega) - s.omega_d,
    }
}

fn rhs(kappa: f64, c: Coefficients, y: &Packed) -> Packed {
    let i = Complex64::i();
    let (ff, gg) = (y[0], y[1]);
    let x = Complex64::new(y[4], y[5]);
    let a = Complex64::new(y[6], y[7]);
    let b = Complex64::new(y[8], y[9]);
    let g = c.g;
    let transfer = 2.0 * (g.conj() * x).im;
    let dx = -i * (c.detuning * x + g * (gg - ff)) - 0.5 * kappa * x;
    let da = -i * (c.detuning * a + g * b);
    let db = -i * g.conj() * a - 0.5 * kappa * b;
    [
        -transfer,
        transfer - kappa * gg,
        kappa * gg,
        kappa * gg,
        dx.re,
        dx.im,
        da.re,
        da.im,
        db.re,
        db.im,
    ]
}

fn axpy(y: &Packed, h: f64, k: &Packed) -> Packed {
    let mut out = *y;
    for (o, kv) in out.iter_mut().zip(k) {
        *o += h * kv;
    }
    out
}

/// Largest integration step accepted for a device, `0.05 / kappa`.
pub fn max_step(d: &DeviceParams) -> f64 {
    0.05 / d.kappa
}

/// Integrates the master equation over the pulse with classical fourth-order
/// Runge-Kutta steps of at most `dt_int`, recording the state, the emitted
/// energy and `<a_out> = sqrt(kappa) rho_{g1,g0}` on every pulse sample.
pub fn integrate(
    d: &DeviceParams,
    pulse: &DrivePulse,
    initial: &ThreeLevelState,
    dt_int: f64,
) -> Result<Simulation, DynamicsError> {
    d.validate()?;
    pulse.validate()?;
    let limit = max_step(d);
    if !(dt_int > 0.0) || dt_int > limit * (1.0 + 1e-12) {
        return Err(DynamicsError::StepTooLarge { dt_int, limit });
    }
    let substeps = (pulse.dt / dt_int).ceil().max(1.0) as usize;
    let h = pulse.dt / substeps as f64;
    let sqrt_kappa = d.kappa.sqrt();
    let n = pulse.len();

    let mut states = Vec::with_capacity(n);
    let mut emitted = Vec::with_capacity(n);
    let mut samples = Vec::with_capacity(n);
    let mut y = initial.pack(0.0);
    let mut record = |y: &Packed| {
        let (s, e) = ThreeLevelState::unpack(y);
        samples.push(s.rho_g1g0 * sqrt_kappa);
        states.push(s);
        emitted.push(e);
    };
    record(&y);

    for k in 0..n - 1 {
        let t_start = pulse.t0 + k as f64 * pulse.dt;
        for j in 0..substeps {
            let t = t_start + j as f64 * h;
            let c0 = coefficients(d, pulse.at(t));
            let c1 = coefficients(d, pulse.at(t + 0.5 * h));
            let c2 = coefficients(d, pulse.at(t + h));
            let k1 = rhs(d.kappa, c0, &y);
            let k2 = rhs(d.kappa, c1, &axpy(&y, 0.5 * h, &k1));
            let k3 = rhs(d.kappa, c1, &axpy(&y, 0.5 * h, &k2));
            let k4 = rhs(d.kappa, c2, &axpy(&y, h, &k3));
            for (idx, v) in y.iter_mut().enumerate() {
                *v += h / 6.0 * (k1[idx] + 2.0 * k2[idx] + 2.0 * k3[idx] + k4[idx]);
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(DynamicsError::NonFinite {
                t: t_start + pulse.dt,
            });
        }
        record(&y);
    }

    Ok(Simulation {
        trajectory: Trajectory {
            t0: pulse.t0,
            dt: pulse.dt,
            states,
            emitted,
        },
        waveform: PhotonWaveform {
            t0: pulse.t0,
            dt: pulse.dt,
            samples,
            frame_freq: d.omega_r,
        },
    })
}

/// Runs the pulse on `(|g0> + |f0>)/sqrt(2)` and rescales the recorded field
/// by `1/rho_f0g0(0)`, giving the single-photon temporal mode `psi_out(t)`
/// that an `|f0>` preparation would emit.
pub fn simulate_photon_mode(
    d: &DeviceParams,
    pulse: &DrivePulse,
    dt_int: f64,
) -> Result<Simulation, DynamicsError> {
    let initial = ThreeLevelState::superposition();
    let mut sim = integrate(d, pulse, &initial, dt_int)?;
    sim.waveform = sim.waveform.scaled(1.0 / initial.rho_f0g0.re);
    Ok(sim)
}

/// Closed-form coherence `rho_{g1,g0}(t)` under a constant drive, expressed
/// in the resonator frame (`delta_g1 = 0`, `delta_f0 = Delta_d`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SquareDriveSolution {
    pub kappa: f64,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub omega_plus: f64,
    pub omega_minus: f64,
    pub c1: Complex64,
    pub c2: Complex64,
    /// Initial coherence and its derivative, used when the two roots merge.
    b0: Complex64,
    db0: Complex64,
}

impl SquareDriveSolution {
    fn degenerate(&self) -> bool {
        let gap = Complex64::new(self.gamma_plus - self.gamma_minus, self.omega_plus - self.omega_minus);
        gap.norm() <= 1e-12 * self.kappa
    }

    /// `rho_{g1,g0}(t) = C1 e^{-(gamma_- + i omega_-) t} + C2 e^{-(gamma_+ + i omega_+) t}`.
    pub fn coherence(&self, t: f64) -> Complex64 {
        let slow = Complex64::new(self.gamma_minus, self.omega_minus);
        if self.degenerate() {
            return (self.b0 + (self.db0 + slow * self.b0) * t) * (-slow * t).exp();
        }
        let fast = Complex64::new(self.gamma_plus, self.omega_plus);
        self.c1 * (-slow * t).exp() + self.c2 * (-fast * t).exp()
    }

    /// Output field `sqrt(kappa) rho_{g1,g0}(t)` in the resonator frame.
    pub fn waveform(&self, t: f64) -> Complex64 {
        self.coherence(t) * self.kappa.sqrt()
    }
}

/// Analytic solution of the `(rho_f0g0, rho_g1g0)` pair for a constant,
/// real coupling `g_eff` and drive detuning `Delta_d`.
///
/// With `X = kappa^2/16 - g^2 - Delta^2/4`, `Y = kappa Delta/4` and
/// `theta = atan2(Y, X)`, the decay rates are
/// `gamma_pm = kappa/4 pm (X^2+Y^2)^{1/4} cos(theta/2)` and the frequencies
/// (relative to the resonator) are `omega_mp = Delta/2 pm (X^2+Y^2)^{1/4} sin(theta/2)`,
/// so the slow branch follows the `|f0>` detuning.
pub fn square_drive_analytic(
    d: &DeviceParams,
    g_eff: f64,
    delta_d: f64,
    rho_f0g0: Complex64,
    rho_g1g0: Complex64,
) -> SquareDriveSolution {
    let kappa = d.kappa;
    let x = kappa * kappa / 16.0 - g_eff * g_eff - delta_d * delta_d / 4.0;
    let y = kappa * delta_d / 4.0;
    let theta = y.atan2(x);
    let r = (x * x + y * y).sqrt().sqrt();
    let (s, c) = (0.5 * theta).sin_cos();
    let gamma_minus = kappa / 4.0 - r * c;
    let gamma_plus = kappa / 4.0 + r * c;
    let omega_minus = delta_d / 2.0 + r * s;
    let omega_plus = delta_d / 2.0 - r * s;

    let i = Complex64::i();
    let b0 = rho_g1g0;
    let db0 = -i * g_eff * rho_f0g0 - 0.5 * kappa * b0;
    let slow = Complex64::new(gamma_minus, omega_minus);
    let fast = Complex64::new(gamma_plus, omega_plus);
    let gap = fast - slow;
    let (c1, c2) = if gap.norm() > 1e-12 * kappa {
        let c1 = (db0 + fast * b0) / gap;
        (c1, b0 - c1)
    } else {
        (b0, Complex64::new(0.0, 0.0))
    };
    SquareDriveSolution {
        kappa,
        gamma_plus,
        gamma_minus,
        omega_plus,
        omega_minus,
        c1,
        c2,
        b0,
        db0,
    }
}

/// Eigenvalues of the resonant population dynamics `(rho_f0f0, rho_g1g1, Im rho_f0g1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RabiEigenvalues {
    pub lambda_1: f64,
    pub lambda_plus: Complex64,
    pub lambda_minus: Complex64,
    /// `g_eff > kappa/4`: the pair acquires imaginary parts.
    pub oscillatory: bool,
}

pub fn rabi_eigenvalues(kappa: f64, g_eff: f64) -> RabiEigenvalues {
    let disc = Complex64::new(kappa * kappa - 16.0 * g_eff * g_eff, 0.0).sqrt();
    RabiEigenvalues {
        lambda_1: -kappa / 2.0,
        lambda_plus: (disc - kappa) / 2.0,
        lambda_minus: (-disc - kappa) / 2.0,
        oscillatory: g_eff.abs() > kappa / 4.0,
    }
}

/// Adiabatic photon emission rate
/// `Gamma_f = kappa g^2 / ((omega_r - omega_ph)^2 + (kappa/2)^2)`.
pub fn emission_rate(d: &DeviceParams, g_eff: f64, omega_ph: f64) -> f64 {
    let det = d.omega_r - omega_ph;
    d.kappa * g_eff * g_eff / (det * det + 0.25 * d.kappa * d.kappa)
}

/// Emission rate estimated from the slow envelope decay, `2 gamma_-`.
pub fn adiabatic_rate_from_envelope(gamma_minus: f64) -> f64 {
    2.0 * gamma_minus
}
