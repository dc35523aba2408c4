//! Run manifests: what was run, with which resolved settings, on which inputs.
//!
//! A manifest holds no timestamps or host details, so rerunning a command
//! reproduces it byte for byte along with the outputs it describes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::files::write_text;
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: BTreeMap<String, Value>,
    pub inputs: BTreeMap<String, InputDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: BTreeMap::new(),
            inputs: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        let value = serde_json::to_value(value).expect("config values serialize");
        self.config.insert(key.to_string(), value);
        self
    }

    pub fn input(&mut self, role: &str, path: &Path, bytes: &[u8]) -> &mut Self {
        self.inputs.insert(
            role.to_string(),
            InputDigest {
                path: path.display().to_string(),
                sha256: sha256_hex(bytes),
            },
        );
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("manifest serializes")
    }

    /// `# {json}`, for commands that report on stdout.
    pub fn comment_line(&self) -> String {
        format!("# {}\n", self.to_json())
    }

    /// Writes `<out>.manifest.json` next to a file output.
    pub fn write_beside(&self, out: &Path) -> Result<PathBuf, CliError> {
        let mut name = out.as_os_str().to_owned();
        name.push(".manifest.json");
        let path = PathBuf::from(name);
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_text(&path, &text)?;
        Ok(path)
    }
}
