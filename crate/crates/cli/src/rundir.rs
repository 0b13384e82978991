//! Run directories and their manifests.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{io_err, Result};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the run directory, with `/` separators.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub phase: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: String,
    pub seed: u64,
    pub version: String,
    /// Config snapshot, relative to the run directory.
    pub config: String,
    pub parent: Option<String>,
    pub files: Vec<FileEntry>,
    pub timings: Vec<Timing>,
}

impl Manifest {
    pub fn load(run: &Path) -> Result<Self> {
        let path = run.join(MANIFEST);
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text).map_err(|e| crate::CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn file(&self, rel: &str) -> Option<&FileEntry> {
        self.files.iter().find(|f| f.path == rel)
    }
}

/// Output directory of one command invocation.
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
    timings: Vec<Timing>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn list_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()
        .map_err(io_err(dir))?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            list_files(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(io_err(root))?;
        Ok(Self {
            root: root.to_path_buf(),
            timings: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn write(&self, rel: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        std::fs::write(&path, contents).map_err(io_err(&path))?;
        Ok(path)
    }

    pub fn record(&mut self, phase: &str, since: Instant) {
        self.timings.push(Timing {
            phase: phase.to_string(),
            seconds: since.elapsed().as_secs_f64(),
        });
    }

    pub fn push_timing(&mut self, phase: &str, seconds: f64) {
        self.timings.push(Timing {
            phase: phase.to_string(),
            seconds,
        });
    }

    /// Index every file in the directory and write the manifest through a
    /// temporary file and a rename.
    pub fn finish(self, kind: &str, seed: u64, config: &str, parent: Option<&Path>) -> Result<Manifest> {
        let mut paths = Vec::new();
        list_files(&self.root, &mut paths)?;
        let mut files = Vec::new();
        for p in paths {
            let rel = p.strip_prefix(&self.root).expect("listed under root");
            let rel = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
            if rel == MANIFEST || rel.ends_with(".tmp") {
                continue;
            }
            let bytes = std::fs::read(&p).map_err(io_err(&p))?;
            files.push(FileEntry {
                path: rel,
                bytes: bytes.len() as u64,
                sha256: sha256_hex(&bytes),
            });
        }
        let manifest = Manifest {
            kind: kind.to_string(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.to_string(),
            parent: parent.map(|p| p.display().to_string()),
            files,
            timings: self.timings,
        };
        let tmp = self.root.join(format!("{MANIFEST}.tmp"));
        let text = serde_json::to_string_pretty(&manifest).expect("manifest always serializes");
        std::fs::write(&tmp, text).map_err(io_err(&tmp))?;
        let dest = self.root.join(MANIFEST);
        std::fs::rename(&tmp, &dest).map_err(io_err(&dest))?;
        Ok(manifest)
    }
}
