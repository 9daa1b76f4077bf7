//! Per-directory manifest: content hash of every file a stage wrote, plus
//! the hash of the upstream manifest it was derived from. Paths are relative
//! so that moving a directory does not change its digest.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};
use crate::formats::{read_json, write_json};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_FORMAT: &str = "uip-manifest";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    /// Stage that wrote the directory: synth, filter, train or eval.
    pub kind: String,
    pub seed: u64,
    /// Digests of the upstream manifests, in argument order.
    pub sources: Vec<String>,
    pub files: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_hash(path: &Path) -> CliResult<String> {
    Ok(sha256_hex(&std::fs::read(path).map_err(|e| CliError::io(path, e))?))
}

fn relative(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).expect("path under root");
    rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

fn walk(root: &Path, dir: &Path, out: &mut Vec<std::path::PathBuf>) -> CliResult<()> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|e| CliError::io(dir, e)))
        .collect::<CliResult<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            walk(root, &p, out)?;
        } else if p != root.join(MANIFEST_FILE) {
            out.push(p);
        }
    }
    Ok(())
}

impl Manifest {
    /// Hashes every file under `dir` and writes the manifest there.
    pub fn write(dir: &Path, kind: &str, seed: u64, sources: Vec<String>) -> CliResult<Self> {
        let mut paths = Vec::new();
        walk(dir, dir, &mut paths)?;
        let files = paths.iter().map(|p| Ok((relative(dir, p), file_hash(p)?))).collect::<CliResult<_>>()?;
        let m =
            Self { format: MANIFEST_FORMAT.into(), version: MANIFEST_VERSION, kind: kind.into(), seed, sources, files };
        write_json(&dir.join(MANIFEST_FILE), &m)?;
        Ok(m)
    }

    /// Loads the manifest of `dir` and checks it was written by `kind` and
    /// that every listed file is present and unchanged.
    pub fn verify(dir: &Path, kind: &str) -> CliResult<Self> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Err(CliError::Data(format!("{}: missing {MANIFEST_FILE}", dir.display())));
        }
        let m: Manifest = read_json(&path)?;
        if m.format != MANIFEST_FORMAT || m.version != MANIFEST_VERSION {
            return Err(CliError::Data(format!(
                "{}: unsupported manifest {} v{}",
                path.display(),
                m.format,
                m.version
            )));
        }
        if m.kind != kind {
            return Err(CliError::Data(format!(
                "{}: expected a `{kind}` directory, found `{}`",
                dir.display(),
                m.kind
            )));
        }
        for (rel, hash) in &m.files {
            let p = dir.join(rel);
            if !p.exists() {
                return Err(CliError::Data(format!("{}: missing file `{rel}`", dir.display())));
            }
            if &file_hash(&p)? != hash {
                return Err(CliError::Data(format!(
                    "{}: `{rel}` changed since the manifest was written (stale)",
                    dir.display()
                )));
            }
        }
        Ok(m)
    }
}

/// Digest of a directory: the hash of its manifest file.
pub fn digest(dir: &Path) -> CliResult<String> {
    file_hash(&dir.join(MANIFEST_FILE))
}
