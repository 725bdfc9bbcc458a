//! Run configuration. Every physical quantity carries its unit in the field
//! name; frequencies are ordinary frequencies (`f`, not `2 pi f`).

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use shaped_photon::device::DeviceParams;
use shaped_photon::units::{mhz, to_mhz};

/// Device parameters as stored in a device file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub omega_ge_mhz: f64,
    pub alpha_mhz: f64,
    pub omega_r_mhz: f64,
    pub kappa_mhz: f64,
    pub g_qr_mhz: f64,
    pub chi_mhz: f64,
    /// Drive strength per AWG volt, `Omega_d / 2 pi` in MHz/V.
    pub transduction_mhz_per_v: f64,
    /// `delta_f0 / 2 pi = s (Omega_d / 2 pi)^2` with both in MHz; `s` in 1/MHz.
    pub stark_f0_per_mhz: f64,
}

impl DeviceConfig {
    pub fn from_params(d: &DeviceParams) -> Self {
        Self {
            omega_ge_mhz: to_mhz(d.omega_ge),
            alpha_mhz: to_mhz(d.alpha),
            omega_r_mhz: to_mhz(d.omega_r),
            kappa_mhz: to_mhz(d.kappa),
            g_qr_mhz: to_mhz(d.g_qr),
            chi_mhz: to_mhz(d.chi),
            transduction_mhz_per_v: to_mhz(d.transduction_k),
            stark_f0_per_mhz: mhz(d.stark_f0),
        }
    }

    pub fn to_params(&self) -> DeviceParams {
        DeviceParams {
            omega_ge: mhz(self.omega_ge_mhz),
            alpha: mhz(self.alpha_mhz),
            omega_r: mhz(self.omega_r_mhz),
            kappa: mhz(self.kappa_mhz),
            g_qr: mhz(self.g_qr_mhz),
            chi: mhz(self.chi_mhz),
            transduction_k: mhz(self.transduction_mhz_per_v),
            stark_f0: to_mhz(self.stark_f0_per_mhz),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub vd_min_v: f64,
    pub vd_max_v: f64,
    pub vd_points: usize,
    /// Drive frequencies are `omega_f0g1 + offset`.
    pub drive_offset_min_mhz: f64,
    pub drive_offset_max_mhz: f64,
    pub drive_offset_points: usize,
    pub pulse_len_us: f64,
    pub dt_us: f64,
    pub dt_int_us: f64,
    /// Start of the envelope-fit window; `null` means `10 / kappa`.
    pub discard_us: Option<f64>,
    /// Largest envelope-fit residual admitted into a calibration table.
    pub fit_residual_max: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            vd_min_v: 0.0,
            vd_max_v: 1.2,
            vd_points: 40,
            drive_offset_min_mhz: -50.0,
            drive_offset_max_mhz: 50.0,
            drive_offset_points: 40,
            pulse_len_us: 4.0,
            dt_us: 1e-3,
            dt_int_us: 1e-4,
            discard_us: None,
            fit_residual_max: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignConfig {
    pub dt_us: f64,
    pub phase_iterations: usize,
    pub dt_int_us: f64,
    pub ring_down_us: f64,
    pub support_threshold: f64,
    pub residual_tolerance: f64,
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self {
            dt_us: 1e-3,
            phase_iterations: 2,
            dt_int_us: 1e-4,
            ring_down_us: 0.1,
            support_threshold: 0.05,
            residual_tolerance: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TomographyConfig {
    pub samples: usize,
    pub fourth_moment_samples: usize,
    pub seed: u64,
    pub eta: Vec<f64>,
    pub wigner_points: usize,
    pub wigner_extent: f64,
}

impl Default for TomographyConfig {
    fn default() -> Self {
        Self {
            samples: 1_000_000,
            fourth_moment_samples: 4_000_000,
            seed: 20_240_611,
            eta: vec![1.0, 0.374],
            wigner_points: 61,
            wigner_extent: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingConfig {
    pub n_pairs: Vec<u32>,
    pub delta_min_mhz: f64,
    pub delta_max_mhz: f64,
    pub delta_points: usize,
    pub p_min: f64,
    /// Spread used for the tabulated matching probabilities.
    pub sigma_mhz: f64,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            n_pairs: vec![1, 2, 5, 10, 20, 50, 100],
            delta_min_mhz: 0.0,
            delta_max_mhz: 100.0,
            delta_points: 101,
            p_min: 0.5,
            sigma_mhz: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OverlapConfig {
    /// Largest `delta_omega / gamma_ph` plotted.
    pub ratio_max: f64,
    pub points: usize,
    pub level: f64,
}

impl Default for OverlapConfig {
    fn default() -> Self {
        Self {
            ratio_max: 1.0,
            points: 201,
            level: shaped_photon::network::OVERLAP_LEVEL,
        }
    }
}

/// The JSON document accepted by `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Device file, relative to the config file. Absent means the built-in
    /// emulation of the measured device.
    pub device_file: Option<PathBuf>,
    pub sweep: SweepConfig,
    pub targets_mhz: Vec<f64>,
    pub gamma_ph_mhz: f64,
    pub epsilon_trunc: f64,
    pub design: DesignConfig,
    pub tomography: TomographyConfig,
    pub scaling: ScalingConfig,
    pub overlap: OverlapConfig,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            device_file: None,
            sweep: SweepConfig::default(),
            targets_mhz: vec![10280.0, 10300.0, 10320.0],
            gamma_ph_mhz: 3.0,
            epsilon_trunc: 1e-3,
            design: DesignConfig::default(),
            tomography: TomographyConfig::default(),
            scaling: ScalingConfig::default(),
            overlap: OverlapConfig::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Configuration with the device resolved; this is what gets hashed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub device: DeviceConfig,
    pub sweep: SweepConfig,
    pub targets_mhz: Vec<f64>,
    pub gamma_ph_mhz: f64,
    pub epsilon_trunc: f64,
    pub design: DesignConfig,
    pub tomography: TomographyConfig,
    pub scaling: ScalingConfig,
    pub overlap: OverlapConfig,
    #[serde(skip)]
    pub out_dir: PathBuf,
}

fn positive(name: &str, v: f64) -> Result<()> {
    ensure!(v.is_finite() && v > 0.0, "{name} must be positive, got {v}");
    Ok(())
}

fn finite(name: &str, v: f64) -> Result<()> {
    ensure!(v.is_finite(), "{name} must be finite, got {v}");
    Ok(())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        if let Some(dev) = &cfg.device_file {
            if dev.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.device_file = Some(base.join(dev));
            }
        }
        Ok(cfg)
    }

    pub fn resolve(self) -> Result<Resolved> {
        let device = match &self.device_file {
            None => DeviceConfig::from_params(&DeviceParams::measured_device()),
            Some(p) => {
                ensure!(p.exists(), "device file {} does not exist", p.display());
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading device file {}", p.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing device file {}", p.display()))?
            }
        };
        let r = Resolved {
            device,
            sweep: self.sweep,
            targets_mhz: self.targets_mhz,
            gamma_ph_mhz: self.gamma_ph_mhz,
            epsilon_trunc: self.epsilon_trunc,
            design: self.design,
            tomography: self.tomography,
            scaling: self.scaling,
            overlap: self.overlap,
            out_dir: self.out_dir,
        };
        r.validate()?;
        Ok(r)
    }
}

impl Resolved {
    pub fn device_params(&self) -> DeviceParams {
        self.device.to_params()
    }

    pub fn validate(&self) -> Result<()> {
        if let Err(e) = self.device_params().validate() {
            bail!("invalid device: {e}");
        }
        let s = &self.sweep;
        ensure!(s.vd_points > 0, "sweep grid is empty: vd_points = 0");
        ensure!(s.drive_offset_points > 0, "sweep grid is empty: drive_offset_points = 0");
        finite("sweep.vd_min_v", s.vd_min_v)?;
        finite("sweep.vd_max_v", s.vd_max_v)?;
        ensure!(s.vd_min_v >= 0.0, "sweep.vd_min_v must be non-negative");
        ensure!(s.vd_max_v >= s.vd_min_v, "sweep.vd_max_v is below vd_min_v");
        finite("sweep.drive_offset_min_mhz", s.drive_offset_min_mhz)?;
        finite("sweep.drive_offset_max_mhz", s.drive_offset_max_mhz)?;
        ensure!(
            s.drive_offset_max_mhz >= s.drive_offset_min_mhz,
            "sweep.drive_offset_max_mhz is below drive_offset_min_mhz"
        );
        positive("sweep.pulse_len_us", s.pulse_len_us)?;
        positive("sweep.dt_us", s.dt_us)?;
        positive("sweep.dt_int_us", s.dt_int_us)?;
        positive("sweep.fit_residual_max", s.fit_residual_max)?;
        if let Some(t) = s.discard_us {
            ensure!(t >= 0.0 && t < s.pulse_len_us, "sweep.discard_us outside the pulse");
        }

        ensure!(!self.targets_mhz.is_empty(), "targets_mhz is empty");
        for f in &self.targets_mhz {
            positive("targets_mhz", *f)?;
        }
        positive("gamma_ph_mhz", self.gamma_ph_mhz)?;
        ensure!(
            self.epsilon_trunc > 0.0 && self.epsilon_trunc < 0.1,
            "epsilon_trunc must lie in (0, 0.1), got {}",
            self.epsilon_trunc
        );

        let d = &self.design;
        positive("design.dt_us", d.dt_us)?;
        positive("design.dt_int_us", d.dt_int_us)?;
        ensure!(d.ring_down_us >= 0.0, "design.ring_down_us must be non-negative");
        ensure!(
            d.support_threshold > 0.0 && d.support_threshold < 1.0,
            "design.support_threshold must lie in (0, 1)"
        );
        ensure!(d.residual_tolerance >= 0.0, "design.residual_tolerance must be non-negative");

        let t = &self.tomography;
        ensure!(t.samples >= 2, "tomography.samples must be at least 2");
        ensure!(t.fourth_moment_samples >= 2, "tomography.fourth_moment_samples must be at least 2");
        ensure!(!t.eta.is_empty(), "tomography.eta is empty");
        for e in &t.eta {
            ensure!(*e > 0.0 && *e <= 1.0, "tomography.eta values must lie in (0, 1], got {e}");
        }
        ensure!(t.wigner_points >= 2, "tomography.wigner_points must be at least 2");
        positive("tomography.wigner_extent", t.wigner_extent)?;

        let n = &self.scaling;
        ensure!(!n.n_pairs.is_empty(), "scaling.n_pairs is empty");
        ensure!(n.n_pairs.iter().all(|k| *k > 0), "scaling.n_pairs must be positive");
        ensure!(n.delta_points >= 2, "scaling.delta_points must be at least 2");
        ensure!(n.delta_min_mhz >= 0.0, "scaling.delta_min_mhz must be non-negative");
        ensure!(n.delta_max_mhz > n.delta_min_mhz, "scaling delta range is empty");
        ensure!(n.p_min > 0.0 && n.p_min < 1.0, "scaling.p_min must lie in (0, 1)");
        positive("scaling.sigma_mhz", n.sigma_mhz)?;

        let o = &self.overlap;
        positive("overlap.ratio_max", o.ratio_max)?;
        ensure!(o.points >= 2, "overlap.points must be at least 2");
        ensure!(o.level > 0.0 && o.level < 1.0, "overlap.level must lie in (0, 1)");
        Ok(())
    }

    /// SHA-256 of the canonical JSON form. The output directory is excluded
    /// so identical runs into different directories agree.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex(&Sha256::digest(&bytes))
    }

    /// Hash of the parts that determine the sweep, used to decide whether an
    /// existing sweep can be reused.
    pub fn sweep_hash(&self) -> String {
        let bytes = serde_json::to_vec(&(&self.device, &self.sweep)).expect("config serializes");
        hex(&Sha256::digest(&bytes))
    }

    pub fn vd_grid(&self) -> Vec<f64> {
        linspace(self.sweep.vd_min_v, self.sweep.vd_max_v, self.sweep.vd_points)
    }

    pub fn omega_d_grid(&self) -> Vec<f64> {
        let base = self.device_params().omega_f0g1();
        linspace(
            self.sweep.drive_offset_min_mhz,
            self.sweep.drive_offset_max_mhz,
            self.sweep.drive_offset_points,
        )
        .into_iter()
        .map(|f| base + mhz(f))
        .collect()
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
