//! Output sets: every file is written through a temporary file and renamed
//! into place, and the set is closed by a manifest with checksums.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    /// Config snapshot in the same format the CLI reads.
    pub config: String,
    pub files: Vec<FileEntry>,
}

pub fn unix_now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

pub fn sha256_hex(data: &[u8]) -> String {
    Sha256::digest(data).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `data` to `path` by renaming a sibling temporary file over it.
pub fn write_atomic(path: &Path, data: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(data)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Collects the files of one run and finishes with the manifest.
pub struct OutputSet {
    dir: PathBuf,
    command: String,
    seed: u64,
    config: String,
    started: u64,
    files: Vec<FileEntry>,
}

impl OutputSet {
    pub fn create(dir: &Path, command: &str, seed: u64, config: String) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            seed,
            config,
            started: unix_now_ms(),
            files: Vec::new(),
        })
    }

    /// Keeps entries from an earlier manifest of the same directory.
    pub fn carry(&mut self, files: Vec<FileEntry>) {
        self.files.extend(files);
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, data: &str) -> std::io::Result<PathBuf> {
        let path = self.dir.join(name);
        write_atomic(&path, data.as_bytes())?;
        self.files.retain(|f| f.name != name);
        self.files.push(FileEntry {
            name: name.to_string(),
            bytes: data.len(),
            sha256: sha256_hex(data.as_bytes()),
        });
        Ok(path)
    }

    pub fn finish(self) -> std::io::Result<RunManifest> {
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.command,
            seed: self.seed,
            started_unix_ms: self.started,
            finished_unix_ms: unix_now_ms(),
            config: self.config,
            files: self.files,
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
        text.push('\n');
        write_atomic(&self.dir.join(MANIFEST), text.as_bytes())?;
        Ok(manifest)
    }
}

pub fn read_manifest(dir: &Path) -> Option<RunManifest> {
    let text = std::fs::read_to_string(dir.join(MANIFEST)).ok()?;
    serde_json::from_str(&text).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_checksums_match_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut set = OutputSet::create(dir.path(), "test", 7, "[run]\n".into()).unwrap();
        set.write("a.txt", "hello\n").unwrap();
        set.write("a.txt", "hello again\n").unwrap();
        let m = set.finish().unwrap();
        assert_eq!(m.files.len(), 1);
        let on_disk = std::fs::read(dir.path().join("a.txt")).unwrap();
        assert_eq!(m.files[0].sha256, sha256_hex(&on_disk));
        assert_eq!(read_manifest(dir.path()).unwrap(), m);
        // no temporaries left behind
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
