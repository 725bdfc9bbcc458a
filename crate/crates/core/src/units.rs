//! Unit helpers. Frequencies are angular (rad/µs), times are µs.

use std::f64::consts::TAU;

/// Converts an ordinary frequency in MHz to an angular frequency in rad/µs.
#[inline]
pub fn mhz(f: f64) -> f64 {
    TAU * f
}

/// Converts an angular frequency in rad/µs back to MHz.
#[inline]
pub fn to_mhz(omega: f64) -> f64 {
    omega / TAU
}

/// Converts GHz to rad/µs.
#[inline]
pub fn ghz(f: f64) -> f64 {
    mhz(1e3 * f)
}
