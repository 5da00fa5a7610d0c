//! Artifact collection and the run manifest.
//!
//! Every file a command writes goes through [`Sink`] so its sha256 lands in
//! `manifest.json`. The manifest's `content_hash` covers the schema, command,
//! seed, config digest, versions, and the artifact digests; wall time is
//! recorded next to it but deliberately left out of the hash so reruns with
//! the same config and seed agree bit for bit on everything hashed.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{RunError, RunResult, SCHEMA};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let out = h.finalize();
    let mut s = String::with_capacity(64);
    for b in out {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
    pub versions: BTreeMap<String, String>,
    /// Relative artifact path -> sha256 of the file bytes.
    pub artifacts: BTreeMap<String, String>,
    /// sha256 over the canonical JSON of everything above.
    pub content_hash: String,
    /// Informational only; excluded from `content_hash`.
    pub wall_time_ms: u128,
}

/// The hashed view: field order is fixed by the struct, map keys are sorted
/// by `BTreeMap`, so the serialization is canonical.
#[derive(Serialize)]
struct HashedView<'a> {
    schema: &'a str,
    command: &'a str,
    seed: u64,
    config_sha256: &'a str,
    versions: &'a BTreeMap<String, String>,
    artifacts: &'a BTreeMap<String, String>,
}

pub fn versions() -> BTreeMap<String, String> {
    let mut v = BTreeMap::new();
    v.insert("ccl-cli".to_string(), env!("CARGO_PKG_VERSION").to_string());
    v.insert("ccl-core".to_string(), ccl_core::VERSION.to_string());
    v
}

/// Collects artifacts for one command run rooted at `out`.
pub struct Sink {
    out: PathBuf,
    artifacts: BTreeMap<String, String>,
}

impl Sink {
    pub fn new(out: &Path) -> RunResult<Self> {
        fs::create_dir_all(out)?;
        Ok(Sink { out: out.to_path_buf(), artifacts: BTreeMap::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.out
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    fn record(&mut self, rel: &str, bytes: &[u8]) {
        self.artifacts.insert(rel.to_string(), sha256_hex(bytes));
    }

    pub fn put_bytes(&mut self, rel: &str, bytes: &[u8]) -> RunResult<()> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.record(rel, bytes);
        Ok(())
    }

    pub fn put_json<T: Serialize>(&mut self, rel: &str, value: &T) -> RunResult<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.put_bytes(rel, &bytes)
    }

    /// Hash a file some other writer (the grid serializer) already produced
    /// under the sink root.
    pub fn adopt_file(&mut self, rel: &str) -> RunResult<()> {
        let bytes = fs::read(self.path(rel))?;
        self.record(rel, &bytes);
        Ok(())
    }

    /// Fold a nested sink (one suite item) into this one, prefixing its
    /// artifact paths.
    pub fn absorb(&mut self, prefix: &str, nested: Sink) {
        for (rel, digest) in nested.artifacts {
            self.artifacts.insert(format!("{prefix}/{rel}"), digest);
        }
    }

    /// Write `manifest.json` and return it.
    pub fn finish(
        self,
        command: &str,
        seed: u64,
        config_sha256: &str,
        wall_time_ms: u128,
    ) -> RunResult<Manifest> {
        let versions = versions();
        let hashed = HashedView {
            schema: SCHEMA,
            command,
            seed,
            config_sha256,
            versions: &versions,
            artifacts: &self.artifacts,
        };
        let content_hash = sha256_hex(&serde_json::to_vec(&hashed)?);
        let manifest = Manifest {
            schema: SCHEMA.to_string(),
            command: command.to_string(),
            seed,
            config_sha256: config_sha256.to_string(),
            versions,
            artifacts: self.artifacts,
            content_hash,
            wall_time_ms,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        fs::write(self.out.join("manifest.json"), bytes)?;
        Ok(manifest)
    }
}

pub fn read_manifest(dir: &Path) -> RunResult<Manifest> {
    let bytes = fs::read(dir.join("manifest.json"))
        .map_err(|e| RunError::config(format!("missing manifest in {}: {e}", dir.display())))?;
    Ok(serde_json::from_slice(&bytes)?)
}
