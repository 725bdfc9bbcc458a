pub mod design;
pub mod emit;
pub mod network;
pub mod spectroscopy;
pub mod tomography;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use shaped_photon::shaper::{sech_target_on_grid, TargetWaveform};
use shaped_photon::units::mhz;

use crate::config::Resolved;
use crate::output::Output;

pub struct Ctx {
    pub cfg: Resolved,
    pub hash: String,
    pub out_dir: PathBuf,
}

impl Ctx {
    pub fn new(cfg: Resolved) -> Self {
        let hash = cfg.hash();
        let out_dir = cfg.out_dir.clone();
        Self { cfg, hash, out_dir }
    }

    pub fn output(&self, command: &'static str) -> Result<Output> {
        Output::new(&self.out_dir, command, &self.hash)
    }

    pub fn target(&self) -> Result<TargetWaveform> {
        Ok(sech_target_on_grid(
            mhz(self.cfg.gamma_ph_mhz),
            self.cfg.epsilon_trunc,
            self.cfg.design.dt_us,
        )?)
    }
}

/// File-name tag of a target frequency, e.g. `10280` or `10280.5`.
pub fn tag(f_mhz: f64) -> String {
    format!("{f_mhz}")
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags() {
        assert_eq!(tag(10280.0), "10280");
        assert_eq!(tag(10280.5), "10280.5");
    }
}
