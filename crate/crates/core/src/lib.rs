//! Simulation and calibration toolkit for frequency-tunable shaped microwave
//! photons emitted by a fixed-frequency transmon through an off-resonantly
//! driven `|f0>`-`|g1>` Raman transition.
//!
//! The crate is organised along the calibration pipeline:
//!
//! * [`device`]: circuit parameters and static circuit-QED formulas.
//! * [`dynamics`]: three-state master-equation integrator, analytic square-drive
//!   solution and closed-form emission rates.
//! * [`spectroscopy`]: square-pulse emission sweeps, envelope and frequency
//!   extraction, calibration tables.
//! * [`shaper`]: target waveforms, table inversion, drive synthesis, phase
//!   correction and the time-symmetry metric.
//! * [`tomography`]: mode projection, quadrature sampling, state and process
//!   tomography, fourth-order moments, Wigner functions.
//! * [`network`]: frequency-matching yield and fixed-frequency mode overlap.
//! * [`export`]: CSV/JSON artifact formats shared by the command-line tool.
//!
//! All angular frequencies are stored in rad/µs (numerically `2π × MHz`) and
//! all times in µs.

pub mod device;
pub mod dynamics;
pub mod export;
pub mod network;
pub mod shaper;
pub mod spectroscopy;
pub mod tomography;
pub mod units;

pub use device::{BareResonatorFilterParams, DeviceParams, HybridizedMode};
pub use dynamics::{DrivePulse, PhotonWaveform, ThreeLevelState};
pub use shaper::TargetWaveform;
pub use spectroscopy::{CalibrationTable, SweepRecord};
pub use tomography::PhotonDensityMatrix;
