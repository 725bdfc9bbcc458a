//! Circuit parameters and the static circuit-QED formulas: hybridized
//! resonator-filter modes, the reflection spectrum, the drive-induced
//! `|f0>`-`|g1>` coupling, and the emulated drive transduction chain.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::mhz;

#[derive(Debug, Error, PartialEq)]
pub enum DeviceError {
    #[error("resonator linewidth must be positive, got {0} rad/us")]
    NonPositiveKappa(f64),
    #[error("transduction constant must be positive, got {0}")]
    NonPositiveTransduction(f64),
    #[error("anharmonicity must be nonzero")]
    ZeroAnharmonicity,
    #[error("resonator is degenerate with a qubit transition; effective coupling is singular")]
    DegenerateDetuning,
    #[error("filter linewidth must be positive, got {0} rad/us")]
    NonPositiveFilterKappa(f64),
    #[error("resonator-filter coupling must be non-negative, got {0}")]
    NegativeCoupling(f64),
    #[error("drive amplitude must be non-negative, got {0} V")]
    NegativeAmplitude(f64),
    #[error("parameter {0} is not finite")]
    NotFinite(&'static str),
}

/// Fixed circuit parameters of the emitter, all in rad/µs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    /// Qubit `|g>`-`|e>` transition frequency.
    pub omega_ge: f64,
    /// Qubit anharmonicity (negative for a transmon).
    pub alpha: f64,
    /// Effective (hybridized) resonator frequency with the qubit in `|g>`.
    pub omega_r: f64,
    /// Effective resonator linewidth.
    pub kappa: f64,
    /// Qubit-resonator coupling.
    pub g_qr: f64,
    /// Full dispersive shift of the resonator.
    pub chi: f64,
    /// Linear map from AWG amplitude (V) to drive strength (rad/µs per V).
    pub transduction_k: f64,
    /// Quadratic drive-power shift of `|f0>`: `delta = stark_f0 * Omega_d^2`,
    /// in µs/rad so that the product is an angular frequency.
    pub stark_f0: f64,
}

impl DeviceParams {
    /// Drive amplitude at which the emulated transduction chain is anchored.
    pub const ANCHOR_VOLTS: f64 = 1.2;

    /// Emulation of the measured device: qubit at 8.0259 GHz with
    /// -318.5 MHz anharmonicity, resonator at 10.306 GHz with 53.3 MHz
    /// linewidth, -4.5 MHz dispersive shift.
    ///
    /// The transduction constant maps 1.2 V to a 1.7 GHz drive and the
    /// qubit-resonator coupling is chosen so that this drive produces a
    /// 13 MHz effective coupling. The Stark coefficient shifts `|f0>` by
    /// -10 MHz at 1.2 V.
    pub fn measured_device() -> Self {
        let omega_ge = mhz(8025.9);
        let alpha = mhz(-318.5);
        let omega_r = mhz(10306.0);
        let omega_drive_anchor = mhz(1700.0);
        let g_eff_anchor = mhz(13.0);
        let delta = omega_r - omega_ge;
        let g_qr = g_eff_anchor * std::f64::consts::SQRT_2 * delta * (delta - alpha)
            / (alpha.abs() * omega_drive_anchor);
        Self {
            omega_ge,
            alpha,
            omega_r,
            kappa: mhz(53.3),
            g_qr,
            chi: mhz(-4.5),
            transduction_k: omega_drive_anchor / Self::ANCHOR_VOLTS,
            stark_f0: mhz(-10.0) / (omega_drive_anchor * omega_drive_anchor),
        }
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        let fields = [
            ("omega_ge", self.omega_ge),
            ("alpha", self.alpha),
            ("omega_r", self.omega_r),
            ("kappa", self.kappa),
            ("g_qr", self.g_qr),
            ("chi", self.chi),
            ("transduction_k", self.transduction_k),
            ("stark_f0", self.stark_f0),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(DeviceError::NotFinite(name));
            }
        }
        if self.kappa <= 0.0 {
            return Err(DeviceError::NonPositiveKappa(self.kappa));
        }
        if self.transduction_k <= 0.0 {
            return Err(DeviceError::NonPositiveTransduction(self.transduction_k));
        }
        if self.alpha == 0.0 {
            return Err(DeviceError::ZeroAnharmonicity);
        }
        let delta = self.omega_r - self.omega_ge;
        if delta == 0.0 || delta - self.alpha == 0.0 {
            return Err(DeviceError::DegenerateDetuning);
        }
        Ok(())
    }

    /// Frequency of the qubit `|f>` level, `2 omega_ge + alpha`.
    pub fn omega_f(&self) -> f64 {
        2.0 * self.omega_ge + self.alpha
    }

    /// Undriven `|f0>`-`|g1>` transition frequency.
    pub fn omega_f0g1(&self) -> f64 {
        self.omega_f() - self.omega_r
    }

    /// Ratio `g_eff / Omega_d` of the Schrieffer-Wolff coupling.
    pub fn coupling_per_drive(&self) -> f64 {
        let delta = self.omega_r - self.omega_ge;
        self.g_qr * self.alpha / (std::f64::consts::SQRT_2 * delta * (delta - self.alpha))
    }

    /// Drive amplitude (V) that produces the effective coupling `g_eff`.
    pub fn volts_for_coupling(&self, g_eff: f64) -> f64 {
        (g_eff / self.coupling_per_drive()).abs() / self.transduction_k
    }

    /// `|f0>`-`|g1>` coupling magnitude produced by `vd` volts.
    pub fn coupling_at_volts(&self, vd: f64) -> f64 {
        effective_coupling(self, self.transduction_k * vd)
    }
}

/// Effective `|f0>`-`|g1>` coupling produced by a drive of strength `omega_d`:
/// `g alpha Omega_d / (sqrt(2) (omega_r - omega_ge)(omega_r - omega_ge - alpha))`.
///
/// The sign follows the circuit parameters; a transmon (`alpha < 0`) with
/// positive `g` gives a negative coupling.
pub fn effective_coupling(d: &DeviceParams, omega_drive: f64) -> f64 {
    d.coupling_per_drive() * omega_drive
}

/// Emulated AWG-to-drive chain: `Omega_d = transduction_k * V_d`.
pub fn transduce(d: &DeviceParams, vd: f64) -> Result<f64, DeviceError> {
    if vd < 0.0 {
        return Err(DeviceError::NegativeAmplitude(vd));
    }
    Ok(d.transduction_k * vd)
}

/// Drive-power shift added to the `|f0>` detuning, `stark_f0 * Omega_d^2`.
pub fn stark_detuning(d: &DeviceParams, omega_drive: f64) -> f64 {
    d.stark_f0 * omega_drive * omega_drive
}

/// Bare resonator and Purcell-filter parameters (rad/µs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BareResonatorFilterParams {
    /// Bare resonator frequency with the qubit in `|g>`.
    pub omega_r_bare: f64,
    pub omega_f_bare: f64,
    /// Resonator-filter coupling `J`.
    pub j: f64,
    /// External coupling of the filter to the line.
    pub kappa_f: f64,
    /// Full qubit-resonator dispersive shift.
    pub chi: f64,
    /// Impedance-mismatch angle of the measurement line (rad).
    pub theta: f64,
}

impl BareResonatorFilterParams {
    /// Fitted values of the measured device.
    pub fn measured_values() -> Self {
        Self {
            omega_r_bare: mhz(10287.0),
            omega_f_bare: mhz(10179.0),
            j: mhz(84.1),
            kappa_f: mhz(400.0),
            chi: mhz(-4.5),
            theta: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        if !(self.kappa_f > 0.0) {
            return Err(DeviceError::NonPositiveFilterKappa(self.kappa_f));
        }
        if self.j < 0.0 {
            return Err(DeviceError::NegativeCoupling(self.j));
        }
        Ok(())
    }
}

/// A normal mode of the coupled resonator-filter system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridizedMode {
    pub omega: f64,
    pub kappa: f64,
}

/// Frequencies and linewidths of the two hybridized modes, returned as
/// `(plus, minus)`.
///
/// `Xi = ((w_r - w_f) + i kappa_f/2)^2 + 4 J^2`,
/// `w_pm = (w_r + w_f)/2 pm Re sqrt(Xi)/2`, `kappa_pm = kappa_f/2 mp Im sqrt(Xi)`
/// with the principal square root. The plus mode is always the upper one.
pub fn hybridize_modes(
    p: &BareResonatorFilterParams,
) -> Result<(HybridizedMode, HybridizedMode), DeviceError> {
    p.validate()?;
    let detuning = Complex64::new(p.omega_r_bare - p.omega_f_bare, 0.5 * p.kappa_f);
    let xi = detuning * detuning + 4.0 * p.j * p.j;
    let root = xi.sqrt();
    let mean = 0.5 * (p.omega_r_bare + p.omega_f_bare);
    let plus = HybridizedMode {
        omega: mean + 0.5 * root.re,
        kappa: 0.5 * p.kappa_f - root.im,
    };
    let minus = HybridizedMode {
        omega: mean - 0.5 * root.re,
        kappa: 0.5 * p.kappa_f + root.im,
    };
    Ok((plus, minus))
}

/// Reflection coefficient of the resonator-filter system with the resonator
/// at `omega_r` (bare).
fn reflection_at(p: &BareResonatorFilterParams, omega: f64, omega_r: f64) -> Complex64 {
    let i = Complex64::i();
    let num = i * p.kappa_f * (omega - omega_r);
    let den = (Complex64::new(omega - p.omega_f_bare, -0.5 * p.kappa_f)) * (omega - omega_r)
        + p.j * p.j;
    let mismatch = Complex64::from_polar(1.0, p.theta);
    Complex64::new(p.theta.cos(), 0.0) + mismatch * num / den
}

/// `S11` with the qubit in `|g>` (`excited = false`) or `|e>`.
pub fn reflection(p: &BareResonatorFilterParams, omega: f64, excited: bool) -> Complex64 {
    let omega_r = if excited {
        p.omega_r_bare + p.chi
    } else {
        p.omega_r_bare
    };
    reflection_at(p, omega, omega_r)
}

/// `S11,g / S11,e` on a frequency grid.
pub fn reflection_ratio(p: &BareResonatorFilterParams, omega_grid: &[f64]) -> Vec<Complex64> {
    omega_grid
        .iter()
        .map(|&w| reflection(p, w, false) / reflection(p, w, true))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::to_mhz;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn hybridization_keeps_the_trace(
            wr in 9000.0f64..11000.0,
            wf in 9000.0f64..11000.0,
            j in 0.0f64..200.0,
            kf in 1.0f64..500.0,
        ) {
            let p = BareResonatorFilterParams {
                omega_r_bare: mhz(wr),
                omega_f_bare: mhz(wf),
                j: mhz(j),
                kappa_f: mhz(kf),
                chi: 0.0,
                theta: 0.0,
            };
            let (plus, minus) = hybridize_modes(&p).unwrap();
            prop_assert!(plus.omega >= minus.omega);
            prop_assert!((plus.omega + minus.omega - p.omega_r_bare - p.omega_f_bare).abs() < 1e-6);
            prop_assert!((plus.kappa + minus.kappa - p.kappa_f).abs() < 1e-6);
            prop_assert!(plus.kappa >= -1e-9 && minus.kappa >= -1e-9);
        }

        #[test]
        fn matched_line_reflects_everything(w in 9500.0f64..10500.0, excited in any::<bool>()) {
            let p = BareResonatorFilterParams { theta: 0.0, ..BareResonatorFilterParams::measured_values() };
            prop_assert!((reflection(&p, mhz(w), excited).norm() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn coupling_and_stark_scale_with_drive(v in 0.0f64..2.0) {
            let d = DeviceParams::measured_device();
            let omega = d.transduction_k * v;
            prop_assert!((d.coupling_at_volts(v) - effective_coupling(&d, omega)).abs() < 1e-12);
            prop_assert!((effective_coupling(&d, 2.0 * omega) - 2.0 * effective_coupling(&d, omega)).abs() < 1e-9);
            prop_assert!((stark_detuning(&d, 2.0 * omega) - 4.0 * stark_detuning(&d, omega)).abs() < 1e-9);
            prop_assert!((d.volts_for_coupling(d.coupling_at_volts(v)) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn measured_modes() {
        let (plus, minus) = hybridize_modes(&BareResonatorFilterParams::measured_values()).unwrap();
        assert!((to_mhz(plus.omega) - 10306.0).abs() < 0.5, "{}", to_mhz(plus.omega));
        assert!((to_mhz(plus.kappa) - 53.3).abs() < 0.5, "{}", to_mhz(plus.kappa));
        assert!((to_mhz(minus.omega) - 10160.0).abs() < 0.5, "{}", to_mhz(minus.omega));
        assert!((to_mhz(minus.kappa) - 347.0).abs() < 0.5, "{}", to_mhz(minus.kappa));
    }

    #[test]
    fn uncoupled_modes() {
        let p = BareResonatorFilterParams {
            omega_r_bare: mhz(10000.0),
            omega_f_bare: mhz(10000.0),
            j: 0.0,
            kappa_f: mhz(300.0),
            chi: 0.0,
            theta: 0.0,
        };
        let (a, b) = hybridize_modes(&p).unwrap();
        let mut ks = [a.kappa, b.kappa];
        ks.sort_by(f64::total_cmp);
        assert!(ks[0].abs() < 1e-9);
        assert!((ks[1] - p.kappa_f).abs() < 1e-9);
        assert!((a.omega - p.omega_r_bare).abs() < 1e-9);
        assert!((b.omega - p.omega_r_bare).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_filter() {
        let mut p = BareResonatorFilterParams::measured_values();
        p.kappa_f = 0.0;
        assert_eq!(
            hybridize_modes(&p).unwrap_err(),
            DeviceError::NonPositiveFilterKappa(0.0)
        );
    }

    #[test]
    fn reflection_identities() {
        let mut p = BareResonatorFilterParams::measured_values();
        let grid: Vec<f64> = (0..2001).map(|k| mhz(9800.0 + 0.5 * k as f64)).collect();
        for &w in &grid {
            assert!((reflection(&p, w, false).norm() - 1.0).abs() < 1e-12);
        }
        p.chi = 0.0;
        for r in reflection_ratio(&p, &grid) {
            assert!((r - 1.0).norm() < 1e-12);
        }
        let p = BareResonatorFilterParams::measured_values();
        let far = reflection_ratio(&p, &[mhz(2.0e5), mhz(-1.0e5)]);
        for r in far {
            assert!(r.arg().abs() < 1e-3);
        }
    }

    #[test]
    fn measured_device_anchors() {
        let d = DeviceParams::measured_device();
        d.validate().unwrap();
        let omega = transduce(&d, 1.2).unwrap();
        assert!((to_mhz(omega) - 1700.0).abs() < 1e-9);
        assert!((to_mhz(transduce(&d, 0.6).unwrap()) - 850.0).abs() < 1e-9);
        assert_eq!(transduce(&d, 0.0).unwrap(), 0.0);
        assert!(transduce(&d, -0.1).is_err());
        let g = effective_coupling(&d, omega);
        assert!((to_mhz(g.abs()) - 13.0).abs() < 1e-9);
        assert!((d.volts_for_coupling(g) - 1.2).abs() < 1e-12);
    }

    #[test]
    fn coupling_is_linear_and_odd() {
        let d = DeviceParams::measured_device();
        let w = mhz(321.0);
        assert_eq!(effective_coupling(&d, 0.0), 0.0);
        assert_eq!(effective_coupling(&d, 2.0 * w), 2.0 * effective_coupling(&d, w));
        assert_eq!(effective_coupling(&d, -w), -effective_coupling(&d, w));
        // direct evaluation of the Schrieffer-Wolff expression
        let delta = d.omega_r - d.omega_ge;
        let direct = d.g_qr * d.alpha * w / (2f64.sqrt() * delta * (delta - d.alpha));
        assert!((effective_coupling(&d, w) - direct).abs() < 1e-12 * direct.abs());
    }

    #[test]
    fn stark_is_quadratic() {
        let mut d = DeviceParams::measured_device();
        let w = mhz(500.0);
        assert!((stark_detuning(&d, 2.0 * w) - 4.0 * stark_detuning(&d, w)).abs() < 1e-12);
        assert!(stark_detuning(&d, w) < 0.0);
        d.stark_f0 = 0.0;
        assert_eq!(stark_detuning(&d, w), 0.0);
    }

    #[test]
    fn validation() {
        let mut d = DeviceParams::measured_device();
        d.kappa = 0.0;
        assert!(matches!(d.validate(), Err(DeviceError::NonPositiveKappa(_))));
        let mut d = DeviceParams::measured_device();
        d.omega_r = d.omega_ge;
        assert_eq!(d.validate(), Err(DeviceError::DegenerateDetuning));
        let mut d = DeviceParams::measured_device();
        d.alpha = 0.0;
        assert_eq!(d.validate(), Err(DeviceError::ZeroAnharmonicity));
    }
}
