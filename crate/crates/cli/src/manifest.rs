//! Run manifests and the output directory that feeds them.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;
use serde_json::Value;
use strainveil_core::frame_io::write_frame;
use strainveil_core::Frame;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct StageTiming {
    pub stage: String,
    pub ms: f64,
}

/// What a run read, how it was configured, and every file it wrote.
/// Output paths are relative to the output directory.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub threads: usize,
    pub inputs: Vec<String>,
    pub config: Value,
    pub summary: Value,
    pub timings_ms: Vec<StageTiming>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &'static str, seed: u64, threads: usize) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            threads,
            inputs: Vec::new(),
            config: Value::Null,
            summary: Value::Null,
            timings_ms: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: impl AsRef<Path>) {
        self.inputs.push(path.as_ref().display().to_string());
    }

    /// Runs `f` and records its wall time under `stage`.
    pub fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings_ms.push(StageTiming {
            stage: stage.to_string(),
            ms: start.elapsed().as_secs_f64() * 1e3,
        });
        out
    }
}

/// Output directory that remembers every file written through it.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> anyhow::Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("cannot create {}", root.display()))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Absolute path for `rel`, creating its parent directory. The file is
    /// recorded as written.
    pub fn claim(&mut self, rel: &str) -> anyhow::Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
        }
        self.written.push(rel.to_string());
        Ok(path)
    }

    pub fn write_bytes(&mut self, rel: &str, bytes: impl AsRef<[u8]>) -> anyhow::Result<()> {
        let path = self.claim(rel)?;
        std::fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))
    }

    pub fn write_frame(&mut self, rel: &str, frame: &Frame) -> anyhow::Result<()> {
        let path = self.claim(rel)?;
        write_frame(&path, frame)?;
        Ok(())
    }

    /// Writes the manifest last so it can list itself.
    pub fn finish(mut self, mut manifest: RunManifest) -> anyhow::Result<RunManifest> {
        self.written.push(MANIFEST_NAME.to_string());
        manifest.outputs = self.written;
        let path = self.root.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("cannot write {}", path.display()))?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_every_written_file() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(&dir.path().join("run")).unwrap();
        out.write_bytes("a.txt", "x").unwrap();
        out.write_bytes("nested/b.txt", "y").unwrap();
        let mut m = RunManifest::new("test", 42, 1);
        m.timed("noop", || ());
        let m = out.finish(m).unwrap();
        assert_eq!(m.outputs, vec!["a.txt", "nested/b.txt", MANIFEST_NAME]);
        for rel in &m.outputs {
            assert!(dir.path().join("run").join(rel).is_file(), "{rel}");
        }
        let json: Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("run").join(MANIFEST_NAME)).unwrap()).unwrap();
        assert_eq!(json["seed"], 42);
        assert_eq!(json["timings_ms"][0]["stage"], "noop");
    }
}
