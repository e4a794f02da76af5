//! Provenance manifests: each command writes `<command>.manifest.json`
//! into the output directory recording the checksum of every file it read,
//! the names of the files it wrote, and the settings in force. Contents
//! are fully determined by the inputs, so identical runs produce identical
//! manifests.

use std::collections::BTreeMap;
use std::fs::File;
use std::io;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let mut file = File::open(path)
        .map_err(|e| CliError::Runtime(format!("read {}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    io::copy(&mut file, &mut hasher)
        .map_err(|e| CliError::Runtime(format!("read {}: {e}", path.display())))?;
    let mut hex = String::with_capacity(64);
    for byte in hasher.finalize() {
        hex.push_str(&format!("{byte:02x}"));
    }
    Ok(hex)
}

#[derive(Serialize)]
pub struct Manifest {
    command: String,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
    settings: BTreeMap<String, serde_json::Value>,
}

impl Manifest {
    pub fn new(command: &str) -> Manifest {
        Manifest {
            command: command.to_string(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            settings: BTreeMap::new(),
        }
    }

    /// Records an input file and its content checksum.
    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let sum = sha256_file(path)?;
        self.inputs.insert(path.display().to_string(), sum);
        Ok(())
    }

    pub fn output(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }

    pub fn setting(&mut self, key: &str, value: impl Serialize) {
        let value = serde_json::to_value(value).expect("setting serializes");
        self.settings.insert(key.to_string(), value);
    }

    pub fn write(mut self, out_dir: &Path) -> Result<(), CliError> {
        self.outputs.sort();
        self.outputs.dedup();
        let path = out_dir.join(format!("{}.manifest.json", self.command));
        let json = serde_json::to_string_pretty(&self).expect("manifest serializes");
        std::fs::write(&path, json + "\n")
            .map_err(|e| CliError::Runtime(format!("write {}: {e}", path.display())))
    }
}
