//! Run manifests: what was read, what was written, with which settings.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub params: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

impl Manifest {
    pub fn new(command: &'static str) -> Self {
        Self {
            tool: "rosetta",
            version: env!("CARGO_PKG_VERSION"),
            command,
            params: BTreeMap::new(),
            seed: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.params
            .insert(key.to_string(), serde_json::to_value(value).expect("param serializes"));
        self
    }

    pub fn seed(&mut self, seed: u64) -> &mut Self {
        self.seed = Some(seed);
        self
    }

    /// Records a file input under its base name, or every file below a
    /// directory input under `dirname/relative/path`.
    pub fn input(&mut self, path: &Path) -> Result<&mut Self> {
        let base = base_name(path);
        if path.is_dir() {
            let mut files = Vec::new();
            collect_files(path, &mut files)?;
            files.sort();
            for f in files {
                let rel = f.strip_prefix(path).expect("below dir");
                let name = format!("{base}/{}", rel.to_string_lossy().replace('\\', "/"));
                self.inputs.push(FileDigest {
                    path: name,
                    sha256: digest_file(&f)?,
                });
            }
        } else {
            self.inputs.push(FileDigest {
                path: base,
                sha256: digest_file(path)?,
            });
        }
        Ok(self)
    }

    /// Writes `contents` to `out/name` and records it.
    pub fn write(&mut self, out: &Path, name: &str, contents: &[u8]) -> Result<()> {
        let path = out.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(FileDigest {
            path: name.to_string(),
            sha256: hex::encode(Sha256::digest(contents)),
        });
        Ok(())
    }

    /// Records a file some other routine already wrote into `out`.
    pub fn written(&mut self, out: &Path, name: &str) -> Result<()> {
        self.outputs.push(FileDigest {
            path: name.to_string(),
            sha256: digest_file(&out.join(name))?,
        });
        Ok(())
    }

    pub fn finish(mut self, out: &Path) -> Result<()> {
        self.outputs.sort_by(|a, b| a.path.cmp(&b.path));
        let mut text = serde_json::to_string_pretty(&self)?;
        text.push('\n');
        let path = out.join(MANIFEST_FILE);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }
}

fn base_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string_lossy().into_owned())
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

fn digest_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}
