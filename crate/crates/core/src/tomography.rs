//! Single-rail photon tomography in the `{|0>, |1>}` subspace.
//!
//! Quadratures follow `q_theta = (a e^{-i theta} + a^dag e^{i theta}) / sqrt(2)`,
//! so vacuum has `<q^2> = 1/2`. Detection inefficiency is a pure-loss channel
//! of transmissivity `eta`, and reconstruction inverts it on the moments.

use nalgebra::{Matrix4, Matrix4x6};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};
use thiserror::Error;

use crate::dynamics::PhotonWaveform;
use crate::shaper::{mode_overlap, TargetWaveform};

#[derive(Debug, Error)]
pub enum TomographyError {
    #[error("detection efficiency {0} outside (0, 1]")]
    InvalidEfficiency(f64),
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("no samples")]
    Empty,
    #[error("quadrature sets mismatch: {0}")]
    Mismatch(String),
    #[error("missing quadrature phase {0} rad")]
    MissingPhase(f64),
    #[error("target mode energy {0} is not normalised")]
    UnnormalizedTarget(f64),
    #[error("input preparations do not span the Bloch space")]
    SingularPreparations,
}

/// Density matrix of a photonic qubit. `rho10 = <1|rho|0> = <a>`; the other
/// off-diagonal element is its conjugate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonDensityMatrix {
    pub rho00: f64,
    pub rho11: f64,
    pub rho10: Complex64,
}

impl PhotonDensityMatrix {
    pub fn vacuum() -> Self {
        Self::pure(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
    }

    pub fn single_photon() -> Self {
        Self::pure(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0))
    }

    /// `|psi> = c0 |0> + c1 |1>`.
    pub fn pure(c0: Complex64, c1: Complex64) -> Self {
        Self {
            rho00: c0.norm_sqr(),
            rho11: c1.norm_sqr(),
            rho10: c1 * c0.conj(),
        }
    }

    /// `(I + cx X + cy Y + cz Z) / 2`.
    pub fn from_bloch(c: [f64; 3]) -> Self {
        Self {
            rho00: 0.5 * (1.0 + c[2]),
            rho11: 0.5 * (1.0 - c[2]),
            rho10: Complex64::new(0.5 * c[0], 0.5 * c[1]),
        }
    }

    pub fn bloch(&self) -> [f64; 3] {
        [2.0 * self.rho10.re, 2.0 * self.rho10.im, self.rho00 - self.rho11]
    }

    pub fn trace(&self) -> f64 {
        self.rho00 + self.rho11
    }

    /// Pure-loss channel: `rho11 -> eta rho11`, `rho10 -> sqrt(eta) rho10`.
    pub fn attenuated(&self, eta: f64) -> Self {
        Self {
            rho00: 1.0 - eta * self.rho11,
            rho11: eta * self.rho11,
            rho10: self.rho10 * eta.sqrt(),
        }
    }

    pub fn mix(&self, other: &Self, p: f64) -> Self {
        Self {
            rho00: p * self.rho00 + (1.0 - p) * other.rho00,
            rho11: p * self.rho11 + (1.0 - p) * other.rho11,
            rho10: self.rho10 * p + other.rho10 * (1.0 - p),
        }
    }

    fn validate(&self) -> Result<(), TomographyError> {
        let finite = self.rho00.is_finite() && self.rho11.is_finite() && self.rho10.re.is_finite() && self.rho10.im.is_finite();
        if !finite || (self.trace() - 1.0).abs() > 1e-9 {
            return Err(TomographyError::InvalidState(format!(
                "trace {} must be 1",
                self.trace()
            )));
        }
        Ok(())
    }
}

/// Qubit preparation `beta |g> + gamma |f>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Preparation {
    pub label: &'static str,
    pub beta: Complex64,
    pub gamma: Complex64,
}

impl Preparation {
    /// Photonic state an ideal emitter maps this preparation to.
    pub fn ideal_photon(&self) -> PhotonDensityMatrix {
        PhotonDensityMatrix::pure(self.beta, self.gamma)
    }
}

/// `|g>`, `|f>`, `(|g> +- |f>)/sqrt(2)`, `(|g> +- i|f>)/sqrt(2)`.
pub fn six_preparations() -> [Preparation; 6] {
    let r = 1.0 / SQRT_2;
    let c = |re: f64, im: f64| Complex64::new(re, im);
    [
        Preparation { label: "0", beta: c(1.0, 0.0), gamma: c(0.0, 0.0) },
        Preparation { label: "1", beta: c(0.0, 0.0), gamma: c(1.0, 0.0) },
        Preparation { label: "+", beta: c(r, 0.0), gamma: c(r, 0.0) },
        Preparation { label: "-", beta: c(r, 0.0), gamma: c(-r, 0.0) },
        Preparation { label: "+i", beta: c(r, 0.0), gamma: c(0.0, r) },
        Preparation { label: "-i", beta: c(r, 0.0), gamma: c(0.0, -r) },
    ]
}

/// Overlap `c = int psi_target psi_out dt / ||psi_target||` of the emitted
/// mode with the target. `w` must be expressed in the frame of the target
/// frequency.
pub fn mode_amplitude(w: &PhotonWaveform, target: &TargetWaveform) -> Result<Complex64, TomographyError> {
    let e = target.energy();
    if (e - (1.0 - target.epsilon_trunc)).abs() > 1e-3 {
        return Err(TomographyError::UnnormalizedTarget(e));
    }
    Ok(mode_overlap(target, w) / e.sqrt())
}

/// Photonic state captured in the target mode for the preparation `prep`:
/// `rho11 = |gamma c|^2`, `rho10 = beta* gamma c`.
pub fn mode_project(
    w: &PhotonWaveform,
    target: &TargetWaveform,
    prep: &Preparation,
) -> Result<PhotonDensityMatrix, TomographyError> {
    let c = mode_amplitude(w, target)?;
    Ok(project_amplitude(c, prep))
}

pub fn project_amplitude(c: Complex64, prep: &Preparation) -> PhotonDensityMatrix {
    let rho11 = (prep.gamma * c).norm_sqr();
    PhotonDensityMatrix {
        rho00: 1.0 - rho11,
        rho11,
        rho10: prep.beta.conj() * prep.gamma * c,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSamples {
    pub theta: f64,
    pub values: Vec<f64>,
    pub eta: f64,
}

const GRID_POINTS: usize = 4096;
const GRID_HALF_WIDTH: f64 = 6.0;

/// Fock-basis wavefunctions `phi_0`, `phi_1`.
fn phi01(q: f64) -> (f64, f64) {
    let phi0 = PI.powf(-0.25) * (-0.5 * q * q).exp();
    (phi0, SQRT_2 * q * phi0)
}

/// Quadrature distribution of `rho` (no loss applied).
pub fn quadrature_pdf(rho: &PhotonDensityMatrix, theta: f64, q: f64) -> f64 {
    let (p0, p1) = phi01(q);
    let cross = (rho.rho10 * Complex64::from_polar(1.0, -theta)).re;
    rho.rho00 * p0 * p0 + rho.rho11 * p1 * p1 + 2.0 * cross * p0 * p1
}

/// Draws `n` quadrature values of `rho` seen through a detector of efficiency
/// `eta`, by inverting the cumulative distribution tabulated on `[-6, 6]`.
pub fn sample_quadratures(
    rho: &PhotonDensityMatrix,
    theta: f64,
    eta: f64,
    n: usize,
    seed: u64,
) -> Result<QuadratureSamples, TomographyError> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(TomographyError::InvalidEfficiency(eta));
    }
    if n == 0 {
        return Err(TomographyError::Empty);
    }
    rho.validate()?;
    let lossy = rho.attenuated(eta);
    let h = 2.0 * GRID_HALF_WIDTH / (GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..GRID_POINTS).map(|i| -GRID_HALF_WIDTH + i as f64 * h).collect();
    let mut pdf: Vec<f64> = grid.iter().map(|q| quadrature_pdf(&lossy, theta, *q)).collect();
    let peak = pdf.iter().copied().fold(0.0, f64::max);
    if pdf.iter().any(|p| *p < -1e-9 * peak) {
        return Err(TomographyError::InvalidState(
            "quadrature distribution is negative".into(),
        ));
    }
    pdf.iter_mut().for_each(|p| *p = p.max(0.0));
    let mut cdf = Vec::with_capacity(GRID_POINTS);
    let mut acc = 0.0;
    cdf.push(0.0);
    for w in pdf.windows(2) {
        acc += 0.5 * (w[0] + w[1]) * h;
        cdf.push(acc);
    }
    let total = acc;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..n)
        .map(|_| {
            let u = rng.random::<f64>() * total;
            let i = cdf.partition_point(|c| *c <= u).clamp(1, GRID_POINTS - 1) - 1;
            let span = cdf[i + 1] - cdf[i];
            let f = if span > 0.0 { (u - cdf[i]) / span } else { 0.5 };
            grid[i] + f * h
        })
        .collect();
    Ok(QuadratureSamples { theta, values, eta })
}

/// Raw moments `<q^k>`, `k = 1..=8`, of one quadrature set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureMoments {
    pub theta: f64,
    pub eta: f64,
    /// Number of samples; infinite for exact moments.
    pub n: f64,
    pub m: [f64; 9],
}

/// `<q^k>` of the vacuum: `(k-1)!! / 2^(k/2)` for even `k`, zero for odd.
fn vacuum_moment(k: u32) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    let mut v = 1.0;
    let mut j = k as i64 - 1;
    while j > 0 {
        v *= j as f64;
        j -= 2;
    }
    v / 2f64.powi(k as i32 / 2)
}

impl QuadratureMoments {
    pub fn from_samples(s: &QuadratureSamples) -> Result<Self, TomographyError> {
        if s.values.is_empty() {
            return Err(TomographyError::Empty);
        }
        let mut m = [0.0; 9];
        for q in &s.values {
            let mut p = 1.0;
            for slot in m.iter_mut() {
                *slot += p;
                p *= q;
            }
        }
        let n = s.values.len() as f64;
        m.iter_mut().for_each(|v| *v /= n);
        Ok(Self {
            theta: s.theta,
            eta: s.eta,
            n,
            m,
        })
    }

    /// Moments of `rho` after the loss channel, from Gaussian integrals.
    pub fn exact(rho: &PhotonDensityMatrix, theta: f64, eta: f64) -> Self {
        let lossy = rho.attenuated(eta);
        let cross = 2.0 * (lossy.rho10 * Complex64::from_polar(1.0, -theta)).re;
        let mut m = [0.0; 9];
        for (k, slot) in m.iter_mut().enumerate() {
            let k = k as u32;
            *slot = if k % 2 == 0 {
                lossy.rho00 * vacuum_moment(k) + lossy.rho11 * 2.0 * vacuum_moment(k + 2)
            } else {
                cross * SQRT_2 * vacuum_moment(k + 1)
            };
        }
        Self {
            theta,
            eta,
            n: f64::INFINITY,
            m,
        }
    }

    fn var(&self, a: usize) -> f64 {
        (self.m[2 * a] - self.m[a] * self.m[a]).max(0.0)
    }

    fn cov(&self, a: usize, b: usize) -> f64 {
        self.m[a + b] - self.m[a] * self.m[b]
    }
}

/// Reconstructed state with one-sigma statistical errors on the Bloch vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub rho: PhotonDensityMatrix,
    pub bloch: [f64; 3],
    pub bloch_sigma: [f64; 3],
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

/// Linear reconstruction from the `theta = 0` and `theta = pi/2` quadratures,
/// with the loss channel inverted on the first and second moments. No
/// positivity constraint is imposed.
pub fn reconstruct(q0: &QuadratureMoments, q90: &QuadratureMoments) -> Result<Reconstruction, TomographyError> {
    if !close(q0.theta, 0.0) {
        return Err(TomographyError::MissingPhase(0.0));
    }
    if !close(q90.theta, FRAC_PI_2) {
        return Err(TomographyError::MissingPhase(FRAC_PI_2));
    }
    if !close(q0.eta, q90.eta) {
        return Err(TomographyError::Mismatch("efficiencies differ".into()));
    }
    let eta = q0.eta;
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(TomographyError::InvalidEfficiency(eta));
    }
    let first = |m: &QuadratureMoments| m.m[1] / eta.sqrt();
    let second = |m: &QuadratureMoments| (m.m[2] - 0.5 * (1.0 - eta)) / eta;
    let bloch = [
        SQRT_2 * first(q0),
        SQRT_2 * first(q90),
        2.0 - second(q0) - second(q90),
    ];
    let bloch_sigma = [
        SQRT_2 * (q0.var(1) / q0.n).sqrt() / eta.sqrt(),
        SQRT_2 * (q90.var(1) / q90.n).sqrt() / eta.sqrt(),
        (q0.var(2) / q0.n + q90.var(2) / q90.n).sqrt() / eta,
    ];
    Ok(Reconstruction {
        rho: PhotonDensityMatrix::from_bloch(bloch),
        bloch,
        bloch_sigma,
    })
}

/// `<psi|rho|psi>` for `|psi> = c0|0> + c1|1>` (normalised by the caller).
pub fn state_fidelity(rho: &PhotonDensityMatrix, c0: Complex64, c1: Complex64) -> f64 {
    c0.norm_sqr() * rho.rho00 + c1.norm_sqr() * rho.rho11 + 2.0 * (c1.conj() * rho.rho10 * c0).re
}

/// Fidelity of a reconstruction to a pure target, with its statistical error.
pub fn fidelity_with_error(rec: &Reconstruction, target: &PhotonDensityMatrix) -> (f64, f64) {
    let t = target.bloch();
    let f = 0.5 * (1.0 + (0..3).map(|i| t[i] * rec.bloch[i]).sum::<f64>());
    let s = 0.5 * (0..3).map(|i| (t[i] * rec.bloch_sigma[i]).powi(2)).sum::<f64>().sqrt();
    (f, s)
}

/// Quadrature phases used by the fourth-order moment.
pub const FOURTH_MOMENT_PHASES: [f64; 4] = [0.0, FRAC_PI_4, FRAC_PI_2, 3.0 * FRAC_PI_4];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourthMoment {
    /// Value computed from the detected quadratures.
    pub measured: f64,
    /// Loss-corrected `<a^dag a^dag a a>`.
    pub value: f64,
    /// One-sigma statistical error of `value`.
    pub sigma: f64,
    /// Upper bound `value / 2` on the multi-photon probability.
    pub bound: f64,
}

/// `<a^dag a^dag a a> = 1/2 + sum_theta (<q^4>/6 - <q^2>/2)` over the four
/// phases `0, pi/4, pi/2, 3pi/4`. Normally ordered moments of order four scale
/// as `eta^2` under loss, so the detected value is divided by `eta^2`.
pub fn fourth_moment(sets: &[QuadratureMoments]) -> Result<FourthMoment, TomographyError> {
    let mut measured = 0.5;
    let mut var = 0.0;
    let eta = sets.first().ok_or(TomographyError::Empty)?.eta;
    for phase in FOURTH_MOMENT_PHASES {
        let m = sets
            .iter()
            .find(|m| close(m.theta, phase))
            .ok_or(TomographyError::MissingPhase(phase))?;
        if !close(m.eta, eta) {
            return Err(TomographyError::Mismatch("efficiencies differ".into()));
        }
        measured += m.m[4] / 6.0 - m.m[2] / 2.0;
        let v = m.var(4) / 36.0 + m.var(2) / 4.0 - m.cov(4, 2) / 6.0;
        var += v.max(0.0) / m.n;
    }
    let value = measured / (eta * eta);
    Ok(FourthMoment {
        measured,
        value,
        sigma: var.sqrt() / (eta * eta),
        bound: 0.5 * value,
    })
}

/// Pauli transfer matrix `R` with `(1, x, y, z)_out = R (1, x, y, z)_in`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PauliTransferMatrix {
    pub r: [[f64; 4]; 4],
}

impl PauliTransferMatrix {
    pub fn identity() -> Self {
        Self {
            r: [
                [1.0, 0.0, 0.0, 0.0],
                [0.0, 1.0, 0.0, 0.0],
                [0.0, 0.0, 1.0, 0.0],
                [0.0, 0.0, 0.0, 1.0],
            ],
        }
    }

    /// `(Tr[R_ideal^T R] + d) / (d + d^2)` with `d = 2`.
    pub fn process_fidelity(&self, ideal: &Self) -> f64 {
        let d = 2.0;
        let tr: f64 = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .map(|(i, j)| ideal.r[i][j] * self.r[i][j])
            .sum();
        (tr + d) / (d + d * d)
    }
}

fn pauli_column(rho: &PhotonDensityMatrix) -> [f64; 4] {
    let b = rho.bloch();
    [rho.trace(), b[0], b[1], b[2]]
}

/// Least-squares `R = Out In^T (In In^T)^-1` over six input/output pairs, and
/// the process fidelity to the identity channel.
pub fn process_tomography(
    inputs: &[PhotonDensityMatrix; 6],
    outputs: &[PhotonDensityMatrix; 6],
) -> Result<(PauliTransferMatrix, f64), TomographyError> {
    let cols_in: Vec<[f64; 4]> = inputs.iter().map(pauli_column).collect();
    let cols_out: Vec<[f64; 4]> = outputs.iter().map(pauli_column).collect();
    let a = Matrix4x6::from_fn(|r, c| cols_in[c][r]);
    let b = Matrix4x6::from_fn(|r, c| cols_out[c][r]);
    let gram: Matrix4<f64> = a * a.transpose();
    let inv = gram
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .ok_or(TomographyError::SingularPreparations)?;
    if gram.determinant().abs() < 1e-9 {
        return Err(TomographyError::SingularPreparations);
    }
    let r = b * a.transpose() * inv;
    let mut out = [[0.0; 4]; 4];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = r[(i, j)];
        }
    }
    let ptm = PauliTransferMatrix { r: out };
    let fp = ptm.process_fidelity(&PauliTransferMatrix::identity());
    Ok((ptm, fp))
}

/// `W(x, p)` on a grid; rows follow `p_grid`, columns `x_grid`.
pub fn wigner(rho: &PhotonDensityMatrix, x_grid: &[f64], p_grid: &[f64]) -> Vec<Vec<f64>> {
    p_grid
        .iter()
        .map(|p| {
            x_grid
                .iter()
                .map(|x| {
                    let r2 = x * x + p * p;
                    let poly = rho.rho00
                        + rho.rho11 * (2.0 * r2 - 1.0)
                        + 2.0 * SQRT_2 * (rho.rho10.re * x + rho.rho10.im * p);
                    (-r2).exp() * poly / PI
                })
                .collect()
        })
        .collect()
}

/// Seed for quadrature set `index` of a run seeded with `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Sample counts of a tomography run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TomographySettings {
    /// Samples per quadrature used for the reconstruction.
    pub samples: usize,
    /// Samples per phase used for the fourth-order moment.
    pub fourth_moment_samples: usize,
}

impl Default for TomographySettings {
    fn default() -> Self {
        Self {
            samples: 1_000_000,
            fourth_moment_samples: 4_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateTomography {
    pub reconstruction: Reconstruction,
    pub fidelity: f64,
    pub fidelity_sigma: f64,
    pub fourth_moment: FourthMoment,
}

/// Samples the four phases, reconstructs from `0` and `pi/2`, and evaluates
/// the fidelity to `ideal` and the fourth-order moment.
pub fn measure_state(
    rho: &PhotonDensityMatrix,
    ideal: &PhotonDensityMatrix,
    eta: f64,
    settings: &TomographySettings,
    seed: u64,
) -> Result<StateTomography, TomographyError> {
    let n = settings.samples.max(settings.fourth_moment_samples);
    let sets = FOURTH_MOMENT_PHASES
        .iter()
        .enumerate()
        .map(|(k, theta)| {
            let s = sample_quadratures(rho, *theta, eta, n, derive_seed(seed, k as u64))?;
            let head = QuadratureSamples {
                theta: s.theta,
                values: s.values[..settings.samples].to_vec(),
                eta,
            };
            let four = QuadratureSamples {
                values: s.values[..settings.fourth_moment_samples].to_vec(),
                ..head.clone()
            };
            Ok((QuadratureMoments::from_samples(&head)?, QuadratureMoments::from_samples(&four)?))
        })
        .collect::<Result<Vec<_>, TomographyError>>()?;
    let reconstruction = reconstruct(&sets[0].0, &sets[2].0)?;
    let (fidelity, fidelity_sigma) = fidelity_with_error(&reconstruction, ideal);
    let fourth: Vec<QuadratureMoments> = sets.iter().map(|s| s.1).collect();
    Ok(StateTomography {
        reconstruction,
        fidelity,
        fidelity_sigma,
        fourth_moment: fourth_moment(&fourth)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn plus() -> PhotonDensityMatrix {
        PhotonDensityMatrix::pure(c(1.0 / SQRT_2, 0.0), c(1.0 / SQRT_2, 0.0))
    }

    fn ball() -> impl Strategy<Value = [f64; 3]> {
        (0.0f64..=1.0, -1.0f64..=1.0, 0.0..2.0 * PI).prop_map(|(r, z, phi)| {
            let s = (1.0 - z * z).sqrt();
            [r * s * phi.cos(), r * s * phi.sin(), r * z]
        })
    }

    proptest! {
        #[test]
        fn exact_moments_reconstruct_any_state(b in ball(), eta in 0.05f64..=1.0) {
            let rho = PhotonDensityMatrix::from_bloch(b);
            let rec = reconstruct(
                &QuadratureMoments::exact(&rho, 0.0, eta),
                &QuadratureMoments::exact(&rho, FRAC_PI_2, eta),
            )
            .unwrap();
            for i in 0..3 {
                prop_assert!((rec.bloch[i] - b[i]).abs() < 1e-10);
            }
        }

        #[test]
        fn loss_keeps_trace_and_contracts(b in ball(), eta in 0.0f64..=1.0) {
            let rho = PhotonDensityMatrix::from_bloch(b);
            let lossy = rho.attenuated(eta);
            prop_assert!((lossy.trace() - 1.0).abs() < 1e-12);
            prop_assert!((lossy.rho11 - eta * rho.rho11).abs() < 1e-12);
            prop_assert!((lossy.rho10.norm() - eta.sqrt() * rho.rho10.norm()).abs() < 1e-12);
            prop_assert!(lossy.rho00 * lossy.rho11 - lossy.rho10.norm_sqr() > -1e-12);
        }

        #[test]
        fn fourth_moment_vanishes_for_any_qubit_state(b in ball(), eta in 0.05f64..=1.0) {
            let rho = PhotonDensityMatrix::from_bloch(b);
            let sets: Vec<_> = FOURTH_MOMENT_PHASES
                .iter()
                .map(|t| QuadratureMoments::exact(&rho, *t, eta))
                .collect();
            prop_assert!(fourth_moment(&sets).unwrap().value.abs() < 1e-10);
        }

        #[test]
        fn fidelity_is_a_probability(b in ball(), theta in 0.0..PI, phi in 0.0..2.0 * PI) {
            let rho = PhotonDensityMatrix::from_bloch(b);
            let c0 = c((theta / 2.0).cos(), 0.0);
            let c1 = Complex64::from_polar((theta / 2.0).sin(), phi);
            let f = state_fidelity(&rho, c0, c1);
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&f));
            // matches the Bloch-vector form (1 + b.n)/2
            let n = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
            let dot: f64 = (0..3).map(|i| b[i] * n[i]).sum();
            prop_assert!((f - 0.5 * (1.0 + dot)).abs() < 1e-12);
        }

        #[test]
        fn depolarized_outputs_give_process_fidelity(p in 0.0f64..=1.0) {
            let inputs = six_preparations().map(|q| q.ideal_photon());
            let outputs = inputs.map(|r| r.mix(&PhotonDensityMatrix::from_bloch([0.0; 3]), p));
            let (ptm, fp) = process_tomography(&inputs, &outputs).unwrap();
            prop_assert!((ptm.r[0][0] - 1.0).abs() < 1e-12);
            prop_assert!((fp - (1.0 + p) / 2.0).abs() < 1e-12);
        }

        #[test]
        fn derived_seeds_differ(seed in any::<u64>(), i in 0u64..1000) {
            prop_assert_ne!(derive_seed(seed, i), derive_seed(seed, i + 1));
            prop_assert_eq!(derive_seed(seed, i), derive_seed(seed, i));
        }
    }

    #[test]
    fn projection_examples() {
        let preps = six_preparations();
        let one = project_amplitude(c(1.0, 0.0), &preps[1]);
        assert_eq!(one, PhotonDensityMatrix::single_photon());
        let zero = project_amplitude(c(0.3, 0.2), &preps[0]);
        assert_eq!(zero, PhotonDensityMatrix::vacuum());
        let p = project_amplitude(c(0.99f64.sqrt(), 0.0), &preps[2]);
        assert!((p.rho11 - 0.495).abs() < 1e-12);
        assert!((p.rho10.norm() - 0.4975).abs() < 1e-4);
    }

    #[test]
    fn mode_projection_of_target_itself() {
        let target = crate::shaper::sech_target(crate::units::mhz(3.0), 1e-3).unwrap();
        let w = target.as_waveform(0.0);
        let c = mode_amplitude(&w, &target).unwrap();
        assert!((c.norm_sqr() - target.energy()).abs() < 1e-9);
        let bad = crate::shaper::TargetWaveform {
            samples: target.samples.iter().map(|s| 2.0 * s).collect(),
            ..target.clone()
        };
        assert!(mode_amplitude(&w, &bad).is_err());
    }

    #[test]
    fn exact_moments_of_fock_states() {
        let vac = QuadratureMoments::exact(&PhotonDensityMatrix::vacuum(), 0.3, 1.0);
        assert!((vac.m[2] - 0.5).abs() < 1e-15 && (vac.m[4] - 0.75).abs() < 1e-15);
        let one = QuadratureMoments::exact(&PhotonDensityMatrix::single_photon(), 0.3, 1.0);
        assert!((one.m[2] - 1.5).abs() < 1e-15 && (one.m[4] - 3.75).abs() < 1e-15);
        let p = QuadratureMoments::exact(&plus(), 0.0, 1.0);
        assert!((p.m[1] - 1.0 / SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn exact_moments_match_numerical_integration() {
        let rho = PhotonDensityMatrix::pure(c(0.6, 0.0), c(0.0, 0.8)).mix(&PhotonDensityMatrix::vacuum(), 0.7);
        for theta in [0.0, 0.7, 2.0] {
            let ex = QuadratureMoments::exact(&rho, theta, 0.6);
            let lossy = rho.attenuated(0.6);
            let h = 1e-3;
            for k in 0..=8 {
                let num: f64 = (-12_000..=12_000)
                    .map(|i| {
                        let q = i as f64 * h;
                        q.powi(k) * quadrature_pdf(&lossy, theta, q) * h
                    })
                    .sum();
                assert!((num - ex.m[k as usize]).abs() < 1e-9, "k {k}: {num} vs {}", ex.m[k as usize]);
            }
        }
    }

    #[test]
    fn reconstruct_exact_moments() {
        for rho in [PhotonDensityMatrix::vacuum(), PhotonDensityMatrix::single_photon(), plus()] {
            for eta in [1.0, 0.374] {
                let rec = reconstruct(
                    &QuadratureMoments::exact(&rho, 0.0, eta),
                    &QuadratureMoments::exact(&rho, FRAC_PI_2, eta),
                )
                .unwrap();
                let b = rho.bloch();
                for i in 0..3 {
                    assert!((rec.bloch[i] - b[i]).abs() < 1e-12);
                }
            }
        }
        let vac = QuadratureMoments::exact(&PhotonDensityMatrix::vacuum(), 0.0, 1.0);
        assert!(matches!(reconstruct(&vac, &vac), Err(TomographyError::MissingPhase(_))));
    }

    #[test]
    fn fourth_moment_vanishes_in_qubit_subspace() {
        for rho in six_preparations().iter().map(|p| p.ideal_photon()) {
            for eta in [1.0, 0.5] {
                let sets: Vec<_> = FOURTH_MOMENT_PHASES
                    .iter()
                    .map(|t| QuadratureMoments::exact(&rho, *t, eta))
                    .collect();
                let fm = fourth_moment(&sets).unwrap();
                assert!(fm.value.abs() < 1e-12);
            }
        }
        let sets: Vec<_> = FOURTH_MOMENT_PHASES[..3]
            .iter()
            .map(|t| QuadratureMoments::exact(&plus(), *t, 1.0))
            .collect();
        assert!(matches!(fourth_moment(&sets), Err(TomographyError::MissingPhase(_))));
    }

    #[test]
    fn fourth_moment_identity_detects_two_photons() {
        // |2><2| has <a^dag a^dag a a> = 2. Its quadrature moments are
        // <q^2> = 5/2 and <q^4> = 39/4 at every phase.
        let sets: Vec<_> = FOURTH_MOMENT_PHASES
            .iter()
            .map(|t| {
                let mut m = [0.0; 9];
                m[2] = 2.5;
                m[4] = 39.0 / 4.0;
                QuadratureMoments { theta: *t, eta: 1.0, n: f64::INFINITY, m }
            })
            .collect();
        assert!((fourth_moment(&sets).unwrap().value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_statistics() {
        let n = 100_000;
        let vac = sample_quadratures(&PhotonDensityMatrix::vacuum(), 0.4, 1.0, n, 1).unwrap();
        let m = QuadratureMoments::from_samples(&vac).unwrap();
        let se_mean = (0.5 / n as f64).sqrt();
        assert!(m.m[1].abs() < 3.0 * se_mean);
        assert!((m.m[2] - 0.5).abs() < 3.0 * (0.5 / n as f64).sqrt());
        let one = sample_quadratures(&PhotonDensityMatrix::single_photon(), 0.0, 1.0, n, 2).unwrap();
        let m = QuadratureMoments::from_samples(&one).unwrap();
        assert!((m.m[2] - 1.5).abs() < 3.0 * (1.5 / n as f64).sqrt());
        let p = sample_quadratures(&plus(), 0.0, 1.0, n, 3).unwrap();
        let m = QuadratureMoments::from_samples(&p).unwrap();
        assert!((m.m[1] - 1.0 / SQRT_2).abs() < 3.0 * (m.var(1) / n as f64).sqrt());
    }

    #[test]
    fn sampling_is_deterministic_and_validated() {
        let a = sample_quadratures(&plus(), 0.2, 0.5, 1000, 42).unwrap();
        let b = sample_quadratures(&plus(), 0.2, 0.5, 1000, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_quadratures(&plus(), 0.2, 0.5, 1000, 43).unwrap());
        assert!(sample_quadratures(&plus(), 0.0, 0.0, 10, 1).is_err());
        assert!(sample_quadratures(&plus(), 0.0, 1.2, 10, 1).is_err());
        assert!(sample_quadratures(&plus(), 0.0, 1.0, 0, 1).is_err());
        let bad = PhotonDensityMatrix { rho00: 0.7, rho11: 0.7, rho10: c(0.0, 0.0) };
        assert!(sample_quadratures(&bad, 0.0, 1.0, 10, 1).is_err());
    }

    #[test]
    fn fidelity_examples() {
        let one = PhotonDensityMatrix::single_photon();
        assert_eq!(state_fidelity(&one, c(0.0, 0.0), c(1.0, 0.0)), 1.0);
        assert_eq!(state_fidelity(&PhotonDensityMatrix::vacuum(), c(0.0, 0.0), c(1.0, 0.0)), 0.0);
        let r = 1.0 / SQRT_2;
        assert!((state_fidelity(&plus(), c(r, 0.0), c(r, 0.0)) - 1.0).abs() < 1e-12);
        // linear in rho
        let mixed = plus().mix(&one, 0.3);
        let lhs = state_fidelity(&mixed, c(r, 0.0), c(0.0, r));
        let rhs = 0.3 * state_fidelity(&plus(), c(r, 0.0), c(0.0, r)) + 0.7 * state_fidelity(&one, c(r, 0.0), c(0.0, r));
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn process_tomography_examples() {
        let inputs = six_preparations().map(|p| p.ideal_photon());
        let (ptm, fp) = process_tomography(&inputs, &inputs).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((ptm.r[i][j] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        assert!((fp - 1.0).abs() < 1e-12);
        let mixed = [PhotonDensityMatrix::from_bloch([0.0; 3]); 6];
        let (ptm, fp) = process_tomography(&inputs, &mixed).unwrap();
        assert!((ptm.r[0][0] - 1.0).abs() < 1e-12);
        assert!((fp - 0.5).abs() < 1e-12);
        let degenerate = [PhotonDensityMatrix::vacuum(); 6];
        assert!(process_tomography(&degenerate, &inputs).is_err());
    }

    #[test]
    fn wigner_values() {
        let w = wigner(&PhotonDensityMatrix::vacuum(), &[0.0], &[0.0]);
        assert!((w[0][0] - 1.0 / PI).abs() < 1e-15);
        let w = wigner(&PhotonDensityMatrix::single_photon(), &[0.0], &[0.0]);
        assert!((w[0][0] + 1.0 / PI).abs() < 1e-15);
        let grid: Vec<f64> = (0..=200).map(|i| -5.0 + 0.05 * i as f64).collect();
        for rho in six_preparations().iter().map(|p| p.ideal_photon()) {
            let w = wigner(&rho, &grid, &grid);
            let total: f64 = w.iter().flatten().sum::<f64>() * 0.05 * 0.05;
            assert!((total - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn wigner_marginal_is_quadrature_distribution() {
        let rho = PhotonDensityMatrix::pure(c(0.6, 0.0), c(0.48, 0.64));
        let ps: Vec<f64> = (0..=1000).map(|i| -8.0 + 0.016 * i as f64).collect();
        for x in [-1.0, 0.2, 1.3] {
            let w = wigner(&rho, &[x], &ps);
            let marginal: f64 = w.iter().map(|r| r[0]).sum::<f64>() * 0.016;
            assert!((marginal - quadrature_pdf(&rho, 0.0, x)).abs() < 1e-9);
        }
    }
}
