//! Run bookkeeping: every output goes through [`Run`], which writes the
//! [`RunManifest`] last.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub code_version: String,
    /// `ok`, or `failed: <reason>` when a command stopped after writing outputs.
    pub status: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    /// Output file names relative to the output directory, in write order.
    pub outputs: Vec<String>,
    pub notes: Vec<String>,
    /// Wall-clock seconds per stage. The only field that varies between
    /// otherwise identical runs.
    pub timings_s: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?)
    }
}

pub struct Run {
    dir: PathBuf,
    manifest: RunManifest,
    started: Instant,
}

impl Run {
    pub fn new(command: &str, dir: &Path, config: serde_json::Value) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                code_version: env!("CARGO_PKG_VERSION").to_string(),
                status: "ok".into(),
                config,
                seeds: Vec::new(),
                outputs: Vec::new(),
                notes: Vec::new(),
                timings_s: BTreeMap::new(),
            },
            started: Instant::now(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn seed(&mut self, seed: u64) {
        self.manifest.seeds.push(seed);
    }

    pub fn note(&mut self, note: impl Into<String>) {
        let note = note.into();
        log::warn!("{note}");
        self.manifest.notes.push(note);
    }

    /// Records a file written by other means.
    pub fn register(&mut self, name: &str) {
        self.manifest.outputs.push(name.to_string());
    }

    pub fn write_with(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let mut w = BufWriter::new(File::create(self.path(name))?);
        self.register(name);
        f(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        self.write_with(name, |w| Ok(w.write_all(text.as_bytes())?))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            Ok(w.write_all(b"\n")?)
        })
    }

    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.manifest
            .timings_s
            .insert(stage.to_string(), t.elapsed().as_secs_f64());
        out
    }

    pub fn has_outputs(&self) -> bool {
        !self.manifest.outputs.is_empty()
    }

    pub fn fail(&mut self, reason: &str) {
        self.manifest.status = format!("failed: {reason}");
    }

    /// Writes the manifest and returns it.
    pub fn finish(mut self) -> Result<RunManifest> {
        self.manifest
            .timings_s
            .insert("total".into(), self.started.elapsed().as_secs_f64());
        let mut w = BufWriter::new(File::create(self.dir.join(MANIFEST_NAME))?);
        serde_json::to_writer_pretty(&mut w, &self.manifest)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(self.manifest)
    }
}
