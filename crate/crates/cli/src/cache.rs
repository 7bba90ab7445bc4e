//! Content-addressed result cache. An entry is a directory named by the
//! SHA-256 of the canonical inputs, holding the artifacts of one command.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Result;

pub const CACHE_ENV: &str = "COVERLAB_CACHE_DIR";

/// Named output files of one command.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }
}

pub fn key<T: Serialize>(inputs: &T) -> Result<String> {
    let bytes = serde_json::to_vec(inputs)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// `$COVERLAB_CACHE_DIR`, else `<out>/.cache`.
pub fn root(out: &Path) -> PathBuf {
    std::env::var_os(CACHE_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| out.join(".cache"))
}

pub fn load(root: &Path, key: &str, names: &[&str]) -> Option<Artifacts> {
    let dir = root.join(key);
    let mut out = Artifacts::default();
    for name in names {
        out.add(name, fs::read(dir.join(name)).ok()?);
    }
    Some(out)
}

pub fn store(root: &Path, key: &str, artifacts: &Artifacts) -> Result<()> {
    let dest = root.join(key);
    if dest.exists() {
        return Ok(());
    }
    fs::create_dir_all(root)?;
    let tmp = root.join(format!(".tmp-{key}-{}", std::process::id()));
    if tmp.exists() {
        fs::remove_dir_all(&tmp)?;
    }
    fs::create_dir_all(&tmp)?;
    for (name, bytes) in &artifacts.files {
        fs::write(tmp.join(name), bytes)?;
    }
    if fs::rename(&tmp, &dest).is_err() {
        // another process stored the same entry first
        fs::remove_dir_all(&tmp)?;
    }
    Ok(())
}

/// Writes each artifact to a temporary name and renames it into place.
pub fn write_outputs(out: &Path, artifacts: &Artifacts) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    for (name, bytes) in &artifacts.files {
        let path = out.join(name);
        let tmp = out.join(format!(".{name}.tmp-{}", std::process::id()));
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, &path)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_is_stable_and_input_sensitive() {
        let a = key(&("spectrum", 64, 0)).unwrap();
        assert_eq!(a, key(&("spectrum", 64, 0)).unwrap());
        assert_ne!(a, key(&("spectrum", 64, 1)).unwrap());
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn store_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let mut art = Artifacts::default();
        art.add("a.csv", b"x,y\n1,2\n".to_vec());
        store(dir.path(), "k1", &art).unwrap();
        let back = load(dir.path(), "k1", &["a.csv"]).unwrap();
        assert_eq!(back.files, art.files);
        assert!(load(dir.path(), "k1", &["missing.csv"]).is_none());
        assert!(load(dir.path(), "k2", &["a.csv"]).is_none());
    }
}
