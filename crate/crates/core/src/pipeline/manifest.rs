//! Run manifest: config snapshot, declared inputs and per-stage output hashes.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ErrorKind, PipelineError, RunConfig};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Running,
    Complete,
    Incomplete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub status: StageStatus,
    pub outputs: Vec<FileHash>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub inputs: Vec<FileHash>,
    pub stages: Vec<StageRecord>,
}

impl RunManifest {
    /// Every output hash, in stage order.
    pub fn output_hashes(&self) -> Vec<&FileHash> {
        self.stages.iter().flat_map(|s| &s.outputs).collect()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Single writer for one output directory.
pub(crate) struct Run {
    dir: PathBuf,
    pub manifest: RunManifest,
    started: Option<Instant>,
}

fn io(stage: &str, path: &Path, e: std::io::Error) -> PipelineError {
    PipelineError::new(stage, ErrorKind::Data, format!("{}: {e}", path.display()))
}

impl Run {
    pub fn create(config: &RunConfig) -> Result<Self, PipelineError> {
        let dir = config.out_dir.clone();
        std::fs::create_dir_all(&dir).map_err(|e| io("output", &dir, e))?;
        let run = Run {
            dir,
            manifest: RunManifest {
                tool: env!("CARGO_PKG_NAME").into(),
                version: env!("CARGO_PKG_VERSION").into(),
                config: config.clone(),
                inputs: vec![],
                stages: vec![],
            },
            started: None,
        };
        run.save()?;
        Ok(run)
    }

    fn save(&self) -> Result<(), PipelineError> {
        let path = self.dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| io("manifest", &path, e))
    }

    fn stage_name(&self) -> &str {
        self.manifest.stages.last().map_or("output", |s| s.name.as_str())
    }

    pub fn declare_input(&mut self, path: &Path) -> Result<(), PipelineError> {
        let bytes = std::fs::read(path).map_err(|e| io("ingest", path, e))?;
        self.manifest.inputs.push(FileHash { path: path.display().to_string(), sha256: sha256_hex(&bytes) });
        self.save()
    }

    /// Records a running stage; the manifest is on disk before its outputs.
    pub fn begin(&mut self, name: &str) -> Result<(), PipelineError> {
        log::info!("stage {name}");
        self.manifest.stages.push(StageRecord { name: name.into(), status: StageStatus::Running, outputs: vec![], seconds: 0.0 });
        self.started = Some(Instant::now());
        self.save()
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), PipelineError> {
        let path = self.dir.join(rel);
        let stage = self.stage_name().to_string();
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| io(&stage, parent, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| io(&stage, &path, e))?;
        let rec = self.manifest.stages.last_mut().expect("write inside a stage");
        rec.outputs.push(FileHash { path: rel.into(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    fn close(&mut self, status: StageStatus) {
        let elapsed = self.started.take().map_or(0.0, |t| t.elapsed().as_secs_f64());
        if let Some(rec) = self.manifest.stages.last_mut() {
            rec.status = status;
            rec.seconds = elapsed;
        }
    }

    pub fn finish(&mut self) -> Result<(), PipelineError> {
        self.close(StageStatus::Complete);
        self.save()
    }

    /// Marks the running stage incomplete; errors while saving are logged only.
    pub fn fail(&mut self) {
        if self.manifest.stages.last().is_some_and(|s| s.status == StageStatus::Running) {
            self.close(StageStatus::Incomplete);
        }
        if let Err(e) = self.save() {
            log::error!("could not save manifest: {e}");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn stage_lifecycle() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::new(1, dir.path());
        cfg.sharpe = Some("x.csv".into());
        let mut run = Run::create(&cfg).unwrap();
        run.begin("a").unwrap();
        let on_disk: RunManifest =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(on_disk.stages[0].status, StageStatus::Running);
        run.write("sub/x.txt", b"abc").unwrap();
        run.finish().unwrap();
        run.begin("b").unwrap();
        run.fail();
        let on_disk: RunManifest =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(on_disk.stages[0].status, StageStatus::Complete);
        assert_eq!(on_disk.stages[0].outputs[0].path, "sub/x.txt");
        assert_eq!(on_disk.stages[1].status, StageStatus::Incomplete);
        assert_eq!(std::fs::read(dir.path().join("sub/x.txt")).unwrap(), b"abc");
    }
}
