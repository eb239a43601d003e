//! Output directory with a JSON sidecar next to every CSV.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Serialize)]
struct Sidecar<'a> {
    file: &'a str,
    command: &'a str,
    config_sha256: &'a str,
    seed: u64,
    version: &'a str,
    library_version: &'a str,
}

/// Writes artifacts under one directory, serialized through `&mut self`.
pub struct Output {
    dir: PathBuf,
    command: &'static str,
    config_hash: String,
    seed: u64,
    pub plots: bool,
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl Output {
    pub fn create(
        dir: &Path,
        command: &'static str,
        config_text: &str,
        seed: u64,
        plots: bool,
    ) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command,
            config_hash: sha256_hex(config_text),
            seed,
            plots,
        })
    }

    /// Writes `name` through `fill` and its `name.meta.json` sidecar.
    pub fn csv<F>(&mut self, name: &str, fill: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut Vec<u8>) -> Result<(), CliError>,
    {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        let path = self.dir.join(name);
        fs::write(&path, &buf)?;
        let meta = Sidecar {
            file: name,
            command: self.command,
            config_sha256: &self.config_hash,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION"),
            library_version: simodel::VERSION,
        };
        fs::write(
            self.dir.join(format!("{name}.meta.json")),
            serde_json::to_string_pretty(&meta)? + "\n",
        )?;
        log::info!("wrote {}", path.display());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, serde_json::to_string_pretty(value)? + "\n")?;
        Ok(())
    }

    pub fn svg(&mut self, name: &str, content: String) -> Result<(), CliError> {
        if !self.plots {
            return Ok(());
        }
        let path = self.dir.join(name);
        fs::write(&path, content)?;
        Ok(())
    }
}
