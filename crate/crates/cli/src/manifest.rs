//! Run manifests: what went in, what came out, and how long it took.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::fail::{CmdResult, Fail};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub path: PathBuf,
    pub sha256: String,
}

impl Fingerprint {
    pub fn of(path: &Path) -> CmdResult<Self> {
        let bytes =
            std::fs::read(path).map_err(|e| Fail::data(format!("{}: {e}", path.display())))?;
        Ok(Self {
            path: std::fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf()),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }

    /// True when the file still has the recorded contents.
    pub fn matches(&self) -> bool {
        Fingerprint::of(&self.path).is_ok_and(|now| now.sha256 == self.sha256)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub data: BTreeMap<String, Fingerprint>,
    pub artifacts: BTreeMap<String, PathBuf>,
    pub duration_secs: f64,
}

impl Manifest {
    pub fn load(path: &Path) -> CmdResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Fail::config(format!("cannot read manifest {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Fail::config(format!("{}: {e}", path.display())))
    }

    /// Writes next to `path` first and renames, so readers never see half a file.
    pub fn save(&self, path: &Path) -> CmdResult {
        let json = serde_json::to_string_pretty(self).map_err(|e| Fail::other(e.to_string()))?;
        let tmp = path.with_extension("json.tmp");
        let io = |e: std::io::Error| Fail::other(format!("{}: {e}", path.display()));
        let mut f = std::fs::File::create(&tmp).map_err(io)?;
        f.write_all(json.as_bytes()).map_err(io)?;
        f.write_all(b"\n").map_err(io)?;
        f.sync_all().map_err(io)?;
        std::fs::rename(&tmp, path).map_err(io)
    }

    pub fn artifact(&self, key: &str) -> CmdResult<&Path> {
        self.artifacts
            .get(key)
            .map(PathBuf::as_path)
            .ok_or_else(|| Fail::config(format!("manifest has no {key:?} artifact")))
    }

    pub fn input(&self, key: &str) -> CmdResult<&Fingerprint> {
        self.data
            .get(key)
            .ok_or_else(|| Fail::config(format!("manifest has no {key:?} input")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn save_load_and_fingerprint() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("x.csv");
        std::fs::write(&input, "abc").unwrap();
        let fp = Fingerprint::of(&input).unwrap();
        assert_eq!(
            fp.sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert!(fp.matches());

        let m = Manifest {
            tool_version: "0".into(),
            command: "train".into(),
            seed: 3,
            config: BTreeMap::from([("epochs".into(), "2".into())]),
            data: BTreeMap::from([("speeds".into(), fp.clone())]),
            artifacts: BTreeMap::from([("checkpoint".into(), dir.path().join("model.ckpt"))]),
            duration_secs: 0.5,
        };
        let path = dir.path().join("manifest.json");
        m.save(&path).unwrap();
        assert!(!path.with_extension("json.tmp").exists());
        assert_eq!(Manifest::load(&path).unwrap(), m);

        std::fs::write(&input, "abd").unwrap();
        assert!(!fp.matches());
        assert!(m.artifact("history").is_err());
    }
}
