//! Run manifests and atomic artifact writes.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

pub fn sha256_file(path: impl AsRef<Path>) -> io::Result<String> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex(&hasher.finalize()))
}

/// Writes `bytes` to a temporary file next to `path`, then renames it into
/// place. Readers see either the old file or the complete new one.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> io::Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRecord {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

/// Provenance of one command invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    /// Effective configuration after merging flags, config file and defaults.
    pub config: serde_json::Value,
    pub inputs: Vec<InputRecord>,
    pub outputs: Vec<PathBuf>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

impl RunManifest {
    pub fn start(command: &str, seed: u64) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config: serde_json::Value::Null,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_unix: unix_now(),
            finished_unix: 0,
        }
    }

    pub fn input(&mut self, role: &str, path: impl AsRef<Path>) -> io::Result<()> {
        let path = path.as_ref();
        self.inputs.push(InputRecord {
            role: role.into(),
            path: path.to_path_buf(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    /// Atomically writes an artifact and records it.
    pub fn output(&mut self, path: impl AsRef<Path>, bytes: &[u8]) -> io::Result<()> {
        write_atomic(path.as_ref(), bytes)?;
        self.outputs.push(path.as_ref().to_path_buf());
        Ok(())
    }

    /// Stamps the finish time and writes the manifest to `path`.
    pub fn finish(mut self, path: impl AsRef<Path>) -> io::Result<()> {
        self.finished_unix = unix_now();
        let mut json = serde_json::to_string_pretty(&self).map_err(io::Error::other)?;
        json.push('\n');
        write_atomic(path, json.as_bytes())
    }
}

/// `<path>.manifest.json`.
pub fn manifest_path(artifact: impl AsRef<Path>) -> PathBuf {
    let mut s = artifact.as_ref().as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_bytes(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn atomic_write_replaces_and_leaves_no_temp_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        assert_eq!(sha256_file(&p).unwrap(), sha256_bytes(b"two"));
    }

    #[test]
    fn manifest_records_inputs_and_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.jsonl");
        std::fs::write(&input, "x").unwrap();
        let mut m = RunManifest::start("stats", 3);
        m.input("data", &input).unwrap();
        let out = dir.path().join("stats.csv");
        m.output(&out, b"a,b\n").unwrap();
        let mp = manifest_path(&out);
        m.finish(&mp).unwrap();
        let back: RunManifest = serde_json::from_slice(&std::fs::read(&mp).unwrap()).unwrap();
        assert_eq!(back.inputs[0].sha256, sha256_bytes(b"x"));
        assert_eq!(back.outputs, vec![out]);
        assert!(back.finished_unix >= back.started_unix);
        assert!(mp.to_string_lossy().ends_with("stats.csv.manifest.json"));
    }
}
