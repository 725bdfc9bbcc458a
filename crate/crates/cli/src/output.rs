//! Artifact writing. Every command records the files it wrote, with their
//! SHA-256, in `<command>.manifest.json` next to them; JSON metadata and SVG
//! figures also embed the config hash directly.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use shaped_photon::export::ExportError;

use crate::svg::Figure;

#[derive(Serialize)]
struct ManifestEntry {
    file: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_hash: &'a str,
    files: &'a [ManifestEntry],
}

/// JSON metadata wrapper stamping the producing command and config.
#[derive(Serialize)]
pub struct Stamped<'a, T: Serialize> {
    pub command: &'a str,
    pub config_hash: &'a str,
    #[serde(flatten)]
    pub body: &'a T,
}

pub struct Output {
    dir: PathBuf,
    command: &'static str,
    config_hash: String,
    written: Vec<ManifestEntry>,
}

impl Output {
    pub fn new(dir: &Path, command: &'static str, config_hash: &str) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command,
            config_hash: config_hash.to_string(),
            written: Vec::new(),
        })
    }

    pub fn bytes(&mut self, name: &str, data: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, data).with_context(|| format!("writing {}", path.display()))?;
        let sha256 = Sha256::digest(data).iter().map(|b| format!("{b:02x}")).collect();
        self.written.push(ManifestEntry {
            file: name.to_string(),
            sha256,
        });
        Ok(())
    }

    /// Runs a CSV writer into memory and stores the result.
    pub fn csv<F>(&mut self, name: &str, write: F) -> Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> Result<(), ExportError>,
    {
        let mut buf = Vec::new();
        write(&mut buf).with_context(|| format!("encoding {name}"))?;
        self.bytes(name, &buf)
    }

    /// CSV of preformatted text cells.
    pub fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut wr = csv::Writer::from_writer(Vec::new());
        wr.write_record(header)?;
        for r in rows {
            wr.write_record(r)?;
        }
        let buf = wr.into_inner().map_err(|e| anyhow::anyhow!("encoding {name}: {e}"))?;
        self.bytes(name, &buf)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, body: &T) -> Result<()> {
        let stamped = Stamped {
            command: self.command,
            config_hash: &self.config_hash,
            body,
        };
        let mut buf = serde_json::to_vec_pretty(&stamped)?;
        buf.push(b'\n');
        self.bytes(name, &buf)
    }

    pub fn svg(&mut self, name: &str, fig: &Figure) -> Result<()> {
        self.bytes(name, fig.render().as_bytes())
    }

    /// Writes the manifest; call once at the end of a command.
    pub fn finish(mut self) -> Result<()> {
        let name = format!("{}.manifest.json", self.command);
        let manifest = Manifest {
            command: self.command,
            config_hash: &self.config_hash,
            files: &self.written,
        };
        let mut buf = serde_json::to_vec_pretty(&manifest)?;
        buf.push(b'\n');
        let path = self.dir.join(&name);
        fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
        self.written.clear();
        Ok(())
    }
}
