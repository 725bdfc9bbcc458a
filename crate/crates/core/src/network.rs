//! Frequency matching across networks of fixed-frequency emitters and the
//! spectral overlap between a sech photon and a detuned receiver mode.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Network of `n_pairs` links whose resonator frequencies scatter with
/// standard deviation `sigma`; each emitter can retune by `delta_tunable`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub n_pairs: u32,
    pub sigma: f64,
    pub delta_tunable: f64,
    pub gamma_ph: f64,
}

const TWO_OVER_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// Error function, accurate to about 1e-15 absolute.
///
/// Maclaurin series below `|x| = 2.5`, continued fraction for `erfc` above.
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return -erf(-x);
    }
    if x < 2.5 {
        let x2 = x * x;
        let mut term = x;
        let mut sum = x;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= -x2 / n;
            let add = term / (2.0 * n + 1.0);
            sum += add;
            if add.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        TWO_OVER_SQRT_PI * sum
    } else {
        1.0 - erfc_large(x)
    }
}

/// `erfc(x)` for `x >= 2.5` from
/// `sqrt(pi) e^{x^2} erfc(x) = 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))`.
fn erfc_large(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    let mut tail = x;
    for k in (1..=80).rev() {
        tail = x + 0.5 * k as f64 / tail;
    }
    (-x * x).exp() / (PI.sqrt() * tail)
}

/// Probability that all pairs can be tuned into resonance,
/// `erf(delta_tunable / (2 sigma))^N`.
pub fn matching_probability(spec: &NetworkSpec) -> f64 {
    erf(spec.delta_tunable / (2.0 * spec.sigma)).powi(spec.n_pairs as i32)
}

/// Largest frequency spread for which `n` pairs still match with probability
/// `p_min`, found by bisection on `x = delta / (2 sigma)`.
pub fn max_sigma(n: u32, delta_tunable: f64, p_min: f64) -> f64 {
    let per_pair = p_min.powf(1.0 / n as f64);
    if per_pair >= 1.0 {
        // certainty needs an exactly matched network
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0f64, 10.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if erf(mid) < per_pair {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    delta_tunable / (2.0 * 0.5 * (lo + hi))
}

const OVERLAP_HALF_WINDOW: f64 = 40.0;
const OVERLAP_INTERVALS: usize = 20_000;

/// `I = int |psi(t)|^2 e^{-i delta_omega t} dt` for the sech mode
/// `|psi|^2 = (gamma/2) sech^2(gamma t)`, by Simpson quadrature over
/// `|t| <= 40 / gamma`.
pub fn mode_overlap(delta_omega: f64, gamma_ph: f64) -> Complex64 {
    let half = OVERLAP_HALF_WINDOW / gamma_ph;
    let h = 2.0 * half / OVERLAP_INTERVALS as f64;
    let f = |t: f64| {
        let s = 1.0 / (gamma_ph * t).cosh();
        Complex64::from_polar(0.5 * gamma_ph * s * s, -delta_omega * t)
    };
    let mut sum = f(-half) + f(half);
    for k in 1..OVERLAP_INTERVALS {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += f(-half + k as f64 * h) * w;
    }
    sum * (h / 3.0)
}

/// Closed form `x / sinh(x)` with `x = pi delta_omega / (2 gamma)`.
pub fn mode_overlap_closed_form(delta_omega: f64, gamma_ph: f64) -> f64 {
    let x = PI * delta_omega / (2.0 * gamma_ph);
    if x == 0.0 {
        1.0
    } else {
        x / x.sinh()
    }
}

/// Largest `delta_omega / gamma_ph` with `|I| >= level`.
pub fn overlap_threshold(level: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 10.0);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if mode_overlap(mid, 1.0).norm() >= level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Overlap level required between emitter and receiver.
pub const OVERLAP_LEVEL: f64 = 0.99;

/// Maximum emitter-receiver detuning keeping `|I| >= 0.99`.
pub fn fixed_frequency_budget(gamma_ph: f64) -> f64 {
    overlap_threshold(OVERLAP_LEVEL) * gamma_ph
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{mhz, to_mhz};
    use proptest::prelude::*;

    #[test]
    fn erf_reference_values() {
        assert!((erf(2.0) - 0.995_322_265_018_952_7).abs() < 1e-15);
        assert_eq!(erf(0.0), 0.0);
        assert_eq!(erf(f64::INFINITY), 1.0);
        assert_eq!(erf(f64::NEG_INFINITY), -1.0);
    }

    proptest! {
        #[test]
        fn erf_matches_reference(x in -7.0f64..7.0) {
            prop_assert!((erf(x) - libm::erf(x)).abs() < 1e-12);
        }

        #[test]
        fn overlap_numeric_matches_closed_form(r in -3.0f64..3.0, g in 0.5f64..50.0) {
            let i = mode_overlap(r * g, g);
            prop_assert!((i.re - mode_overlap_closed_form(r * g, g)).abs() < 1e-9);
            prop_assert!(i.im.abs() < 1e-9);
            prop_assert!(i.norm() <= 1.0 + 1e-12);
        }

        #[test]
        fn probability_monotonicity(n in 1u32..50, s in 1.0f64..40.0, d in 1.0f64..100.0) {
            let base = NetworkSpec { n_pairs: n, sigma: s, delta_tunable: d, gamma_ph: 1.0 };
            let p = matching_probability(&base);
            let more = NetworkSpec { n_pairs: n + 1, ..base };
            let spread = NetworkSpec { sigma: s * 1.1, ..base };
            let wider = NetworkSpec { delta_tunable: d * 1.1, ..base };
            prop_assert!(matching_probability(&more) <= p);
            prop_assert!(matching_probability(&spread) <= p);
            prop_assert!(matching_probability(&wider) >= p);
        }
    }

    #[test]
    fn matching_probability_examples() {
        let spec = NetworkSpec {
            n_pairs: 1,
            sigma: mhz(10.0),
            delta_tunable: mhz(40.0),
            gamma_ph: mhz(3.0),
        };
        assert!((matching_probability(&spec) - 0.995322).abs() < 1e-6);
        let ten = NetworkSpec { n_pairs: 10, ..spec };
        let oracle = libm::erf(2.0).powi(10);
        assert!((matching_probability(&ten) - oracle).abs() < 1e-12);
        assert!((matching_probability(&ten) - 0.954195).abs() < 1e-6);
        let wide = NetworkSpec { delta_tunable: f64::INFINITY, ..ten };
        assert_eq!(matching_probability(&wide), 1.0);
    }

    #[test]
    fn max_sigma_examples() {
        let s = max_sigma(10, mhz(40.0), 0.5);
        assert!((to_mhz(s) - 15.4).abs() < 0.2);
        let spec = NetworkSpec { n_pairs: 10, sigma: s, delta_tunable: mhz(40.0), gamma_ph: 1.0 };
        assert!((matching_probability(&spec) - 0.5).abs() < 1e-9);
        assert_eq!(max_sigma(10, mhz(80.0), 0.5), 2.0 * s);
        let shrinking: Vec<f64> = [0.5, 0.9, 1.0 - 1e-6, 1.0 - 1e-12]
            .iter()
            .map(|p| max_sigma(1, mhz(40.0), *p))
            .collect();
        assert!(shrinking.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(max_sigma(1, mhz(40.0), 1.0), 0.0);
        assert!(max_sigma(1, 1.0, 0.5) > max_sigma(5, 1.0, 0.5));
    }

    #[test]
    fn overlap_examples() {
        assert!((mode_overlap(0.0, 2.0).re - 1.0).abs() < 1e-12);
        let i = mode_overlap(0.16 * 3.0, 3.0).norm();
        assert!((i - 0.9896).abs() < 1e-4);
        let r = overlap_threshold(OVERLAP_LEVEL);
        assert!((r - 0.156).abs() < 0.005);
        // x / sinh(x) = 0.99 solved by Newton iteration
        let mut x: f64 = 0.25;
        for _ in 0..50 {
            let f = x / x.sinh() - 0.99;
            let df = (x.sinh() - x * x.cosh()) / x.sinh().powi(2);
            x -= f / df;
        }
        assert!((r - 2.0 * x / std::f64::consts::PI).abs() < 1e-9);
        let budget = to_mhz(fixed_frequency_budget(mhz(3.0)));
        assert!((budget - 3.0 * 2.0 * x / std::f64::consts::PI).abs() < 1e-8, "{budget}");
        assert!((budget - 0.48).abs() < 0.015);
        let double = to_mhz(fixed_frequency_budget(mhz(6.0)));
        assert!((double - 2.0 * budget).abs() < 1e-9);
        // even in the detuning
        assert!((mode_overlap(0.7, 1.0) - mode_overlap(-0.7, 1.0)).norm() < 1e-12);
    }
}
