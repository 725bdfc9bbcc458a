//! Calibrate, design, correct and verify photons on the emulated device.

use std::sync::OnceLock;

use shaped_photon::device::DeviceParams;
use shaped_photon::dynamics::{integrate, ThreeLevelState};
use shaped_photon::shaper::{
    demodulate, design_drive, emitted_mode, phase_correct, photon_metrics, sech_target,
    PhaseCorrectionOptions, ShaperError,
};
use shaped_photon::spectroscopy::{build_table, run_sweep, SweepRecord, SweepSettings};
use shaped_photon::units::{mhz, to_mhz};

const TARGETS_MHZ: [f64; 3] = [10280.0, 10300.0, 10320.0];

fn grid(d: &DeviceParams) -> (Vec<f64>, Vec<f64>) {
    let vd = (0..40).map(|i| 1.2 * i as f64 / 39.0).collect();
    let wd = (0..40)
        .map(|i| d.omega_f0g1() + mhz(-50.0 + 100.0 * i as f64 / 39.0))
        .collect();
    (vd, wd)
}

fn sweep_of(d: &DeviceParams) -> Vec<SweepRecord> {
    let (vd, wd) = grid(d);
    run_sweep(d, &vd, &wd, &SweepSettings::default()).unwrap()
}

fn measured_sweep() -> &'static [SweepRecord] {
    static CELL: OnceLock<Vec<SweepRecord>> = OnceLock::new();
    CELL.get_or_init(|| sweep_of(&DeviceParams::measured_device()))
}

/// Device without the drive-power shift, standing in for a stale calibration.
fn unshifted() -> DeviceParams {
    DeviceParams {
        stark_f0: 0.0,
        ..DeviceParams::measured_device()
    }
}

fn unshifted_sweep() -> &'static [SweepRecord] {
    static CELL: OnceLock<Vec<SweepRecord>> = OnceLock::new();
    CELL.get_or_init(|| sweep_of(&unshifted()))
}

#[test]
fn three_targets_end_to_end() {
    let d = DeviceParams::measured_device();
    let target = sech_target(mhz(3.0), 1e-3).unwrap();
    let opts = PhaseCorrectionOptions::default();
    for f in TARGETS_MHZ {
        let table = build_table(measured_sweep(), mhz(f), 1.0).unwrap();
        let drive = design_drive(&table, &target).unwrap();
        assert!(drive.feasibility.feasible);
        assert!(drive
            .pulse
            .vd
            .iter()
            .all(|v| *v >= table.vd_domain[0] && *v <= table.vd_domain[1]));

        let pc = phase_correct(&d, &drive.pulse, mhz(f), &opts).unwrap();
        assert_eq!(pc.pulse.vd, drive.pulse.vd, "phase correction touched amplitudes");
        assert_eq!(pc.pulse.omega_d, drive.pulse.omega_d);

        let mode = emitted_mode(&d, &pc.pulse, &opts).unwrap();
        let m = photon_metrics(&target, &mode, mhz(f)).unwrap();
        assert!(m.time_symmetry >= 0.98, "{f}: s = {}", m.time_symmetry);
        assert!(m.overlap >= 0.99, "{f}: overlap = {}", m.overlap);
        assert!((to_mhz(m.omega_peak) - f).abs() <= 0.1, "{f}: peak {}", to_mhz(m.omega_peak));
        // |f0> start: nearly all of the truncated sech energy is emitted
        let eps = target.epsilon_trunc;
        assert!(m.efficiency >= 1.0 - 2.0 * eps && m.efficiency <= 1.0, "{}", m.efficiency);
    }
}

#[test]
fn resonant_synthesis_matches_target_shape() {
    let d = DeviceParams::measured_device();
    let f = to_mhz(d.omega_r);
    let target = sech_target(mhz(3.0), 1e-3).unwrap();
    let table = build_table(measured_sweep(), d.omega_r, 1.0).unwrap();
    let drive = design_drive(&table, &target).unwrap();
    let mode = emitted_mode(&d, &drive.pulse, &PhaseCorrectionOptions::default()).unwrap();
    let m = photon_metrics(&target, &mode, mhz(f)).unwrap();
    assert!(m.overlap >= 0.99, "{}", m.overlap);
}

#[test]
fn emitted_energy_matches_truncation() {
    let d = DeviceParams::measured_device();
    let target = sech_target(mhz(3.0), 1e-3).unwrap();
    let table = build_table(measured_sweep(), mhz(10300.0), 1.0).unwrap();
    let drive = design_drive(&table, &target).unwrap();
    let padded = drive.pulse.padded(100);
    let tr = integrate(&d, &padded, &ThreeLevelState::excited(), 1e-4).unwrap();
    let e = tr.trajectory.total_emitted();
    assert!(e >= 1.0 - 2.0 * target.epsilon_trunc && e <= 1.0, "{e}");
}

#[test]
fn corrected_pulse_is_a_fixed_point() {
    let d = DeviceParams::measured_device();
    let f = mhz(10300.0);
    let target = sech_target(mhz(3.0), 1e-3).unwrap();
    let table = build_table(measured_sweep(), f, 1.0).unwrap();
    let drive = design_drive(&table, &target).unwrap();
    let opts = PhaseCorrectionOptions::default();
    let pc = phase_correct(&d, &drive.pulse, f, &opts).unwrap();
    assert!(pc.converged);

    let again = phase_correct(&d, &pc.pulse, f, &opts).unwrap();
    assert_eq!(again.iterations, 0);
    assert_eq!(again.pulse, pc.pulse);

    // a forced extra pass moves the phase by a few mrad at most where the
    // photon lives
    let forced = PhaseCorrectionOptions {
        iterations: 1,
        tolerance: 0.0,
        ..opts
    };
    let extra = phase_correct(&d, &pc.pulse, f, &forced).unwrap();
    let mode = emitted_mode(&d, &pc.pulse, &opts).unwrap();
    let amp: Vec<f64> = demodulate(&mode, f).iter().map(|s| s.norm()).collect();
    let peak = amp.iter().fold(0.0f64, |m, a| m.max(*a));
    for (k, (a, b)) in pc.pulse.phase_offset.iter().zip(&extra.pulse.phase_offset).enumerate() {
        if amp[k] >= 0.2 * peak {
            assert!((a - b).abs() < 5e-3, "sample {k}: {} rad", (a - b).abs());
        }
    }
}

#[test]
fn unshifted_resonant_drive_has_constant_frequency() {
    let d = unshifted();
    let target = sech_target(mhz(3.0), 1e-3).unwrap();
    let table = build_table(unshifted_sweep(), d.omega_r, 1.0).unwrap();
    let drive = design_drive(&table, &target).unwrap();
    let (lo, hi) = drive
        .pulse
        .omega_d
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), w| (a.min(*w), b.max(*w)));
    assert!(to_mhz(hi - lo) < 1e-3, "omega_d spread {} MHz", to_mhz(hi - lo));
}

#[test]
fn one_pass_repairs_a_stale_calibration() {
    let d = DeviceParams::measured_device();
    let target = sech_target(mhz(3.0), 1e-3).unwrap();
    let opts = PhaseCorrectionOptions::default();
    let single = PhaseCorrectionOptions {
        iterations: 1,
        tolerance: 0.0,
        ..opts
    };
    for f in TARGETS_MHZ {
        let table = build_table(unshifted_sweep(), mhz(f), 1.0).unwrap();
        let drive = design_drive(&table, &target).unwrap();
        let before = emitted_mode(&d, &drive.pulse, &opts).unwrap();
        let s0 = photon_metrics(&target, &before, mhz(f)).unwrap().time_symmetry;
        assert!(s0 < 0.95, "{f}: uncorrected s = {s0}");
        let pc = phase_correct(&d, &drive.pulse, mhz(f), &single).unwrap();
        assert_eq!(pc.iterations, 1);
        let after = emitted_mode(&d, &pc.pulse, &opts).unwrap();
        let m = photon_metrics(&target, &after, mhz(f)).unwrap();
        assert!(m.time_symmetry > 0.98, "{f}: corrected s = {}", m.time_symmetry);
        // the second default pass settles the frequency
        let full = phase_correct(&d, &drive.pulse, mhz(f), &opts).unwrap();
        let m2 = photon_metrics(&target, &emitted_mode(&d, &full.pulse, &opts).unwrap(), mhz(f)).unwrap();
        assert!(m2.time_symmetry >= m.time_symmetry - 1e-4);
        assert!((to_mhz(m2.omega_peak) - f).abs() <= 0.1);
    }
}

#[test]
fn wide_photon_far_from_resonance_is_rejected() {
    let d = DeviceParams::measured_device();
    let f = d.omega_r + mhz(40.0);
    let table = build_table(measured_sweep(), f, 1.0).unwrap();
    let target = sech_target(mhz(20.0), 1e-3).unwrap();
    match design_drive(&table, &target) {
        Err(ShaperError::Infeasible { required, available }) => assert!(required > available),
        other => panic!("expected rejection, got {other:?}"),
    }
}
