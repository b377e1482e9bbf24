use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

/// Per-stage record: wall time plus the digests of every artifact the stage
/// wrote. Downstream stages verify these digests before consuming a file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub wall_seconds: f64,
    pub outputs: BTreeMap<String, String>,
}

/// Run manifest: configuration hash, seed and completed stages.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub stages: BTreeMap<String, StageRecord>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Option<Manifest>> {
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(path)?;
        let manifest =
            toml::from_str(&text).map_err(|e| Error::Format(format!("bad manifest: {e}")))?;
        Ok(Some(manifest))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Load the manifest for this run, creating it on first use. A manifest
    /// recorded under a different configuration hash or seed is refused.
    pub fn open_or_init(path: &Path, config_hash: &str, seed: u64) -> Result<Manifest> {
        match Manifest::load(path)? {
            Some(m) => {
                if m.config_hash != config_hash {
                    return Err(Error::HashMismatch(format!(
                        "run directory was produced with config hash {} but the active config hashes to {}; \
                         use a fresh --out or restore the original configuration",
                        &m.config_hash[..8.min(m.config_hash.len())],
                        &config_hash[..8]
                    )));
                }
                if m.seed != seed {
                    return Err(Error::HashMismatch(format!(
                        "run directory was produced with seed {} but the active seed is {seed}",
                        m.seed
                    )));
                }
                Ok(m)
            }
            None => Ok(Manifest {
                config_hash: config_hash.to_string(),
                seed,
                stages: BTreeMap::new(),
            }),
        }
    }

    pub fn record_stage(&mut self, name: &str, wall_seconds: f64, outputs: Vec<(String, String)>) {
        self.stages.insert(
            name.to_string(),
            StageRecord {
                wall_seconds,
                outputs: outputs.into_iter().collect(),
            },
        );
    }

    /// Verify that a dependency produced by `stage` still matches its recorded
    /// digest.
    pub fn verify_dependency(&self, stage: &str, dir: &Path, file_name: &str) -> Result<()> {
        let record = self.stages.get(stage).ok_or_else(|| {
            Error::MissingDependency(format!(
                "stage '{stage}' has not run yet; required for {file_name}"
            ))
        })?;
        let recorded = record.outputs.get(file_name).ok_or_else(|| {
            Error::MissingDependency(format!(
                "stage '{stage}' did not record an artifact named {file_name}"
            ))
        })?;
        let path = dir.join(file_name);
        if !path.exists() {
            return Err(Error::MissingDependency(format!(
                "artifact {} is missing; rerun stage '{stage}'",
                path.display()
            )));
        }
        let current = sha256_file(&path)?;
        if &current != recorded {
            return Err(Error::HashMismatch(format!(
                "artifact {} changed since stage '{stage}' recorded it; rerun the stage",
                path.display()
            )));
        }
        Ok(())
    }
}

/// Hex SHA-256 of a file, streamed.
pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = std::fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip_and_hash_guard() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.toml");
        let mut m = Manifest::open_or_init(&path, "abcd1234abcd1234", 7).unwrap();
        m.record_stage(
            "simulate",
            1.25,
            vec![("trajectory.sstj".into(), "ff00".into())],
        );
        m.save(&path).unwrap();

        let again = Manifest::open_or_init(&path, "abcd1234abcd1234", 7).unwrap();
        assert_eq!(again, m);

        assert!(matches!(
            Manifest::open_or_init(&path, "ffffffffffffffff", 7),
            Err(Error::HashMismatch(_))
        ));
        assert!(matches!(
            Manifest::open_or_init(&path, "abcd1234abcd1234", 8),
            Err(Error::HashMismatch(_))
        ));
    }

    #[test]
    fn dependency_verification() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("data.bin");
        std::fs::write(&file, b"hello").unwrap();
        let digest = sha256_file(&file).unwrap();

        let mut m = Manifest::default();
        m.record_stage("simulate", 0.1, vec![("data.bin".into(), digest)]);
        m.verify_dependency("simulate", dir.path(), "data.bin").unwrap();

        // Unknown stage.
        assert!(matches!(
            m.verify_dependency("render", dir.path(), "data.bin"),
            Err(Error::MissingDependency(_))
        ));
        // Stale artifact.
        std::fs::write(&file, b"tampered").unwrap();
        assert!(matches!(
            m.verify_dependency("simulate", dir.path(), "data.bin"),
            Err(Error::HashMismatch(_))
        ));
        // Deleted artifact.
        std::fs::remove_file(&file).unwrap();
        assert!(matches!(
            m.verify_dependency("simulate", dir.path(), "data.bin"),
            Err(Error::MissingDependency(_))
        ));
    }
}
