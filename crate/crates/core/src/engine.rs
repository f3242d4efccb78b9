//! Pass execution: streams frames, fans them out to registered calculation
//! plugins, collects result arrays, and captures traceability metadata.
//!
//! Frames in a pass's window union are decoded once and delivered to every
//! active plugin whose phase window contains them. Callbacks to a single
//! plugin are serialized and strictly frame-ordered; a plugin failure is
//! isolated and reported per calc_id while the others complete. I/O
//! corruption aborts the whole run.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::PathBuf;
use std::sync::mpsc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::framearc::{ByteCounter, DatasetManifest, FormatError, FrameStream};
use crate::model::{FrameView, GridMeta, ResultArray};
use crate::scheduler::{self, CalculationRequirements, PassPlan, PlanError};

/// Failure raised by a calculation callback; isolated to that calculation.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct CalcError(pub String);

impl CalcError {
    pub fn new(msg: impl Into<String>) -> Self {
        CalcError(msg.into())
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("duplicate registration of calculation id {0:?}")]
    DuplicateRegistration(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("traceability incomplete: cannot read {path}: {source}")]
    TraceabilityIncomplete {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// The in-process calculation contract. The engine owns delivery order:
/// for a given phase, `on_frame` calls arrive in strictly increasing
/// frame_index order covering exactly the phase's window. Plugins own
/// their own state and never observe each other.
pub trait CalculationPlugin: Send {
    fn id(&self) -> &str;

    /// Configuration string hashed into the traceability block.
    fn fingerprint(&self) -> String {
        self.id().to_string()
    }

    fn requirements(&self) -> CalculationRequirements;

    fn on_pass_start(&mut self, _phase: usize) -> Result<(), CalcError> {
        Ok(())
    }

    fn on_frame(&mut self, phase: usize, frame: &FrameView, grid: &GridMeta)
        -> Result<(), CalcError>;

    fn on_pass_end(&mut self, _phase: usize) -> Result<(), CalcError> {
        Ok(())
    }

    fn finalize(&mut self) -> Result<Vec<ResultArray>, CalcError>;
}

/// Digest of one input file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

/// One presentation-edit record appended by the plot-document tooling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditLogEntry {
    pub field: String,
    pub old: String,
    pub new: String,
    pub timestamp: String,
}

/// Provenance captured automatically for every calculation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Traceability {
    pub engine_version: String,
    pub calc_id: String,
    /// SHA-256 of the calculation's configuration fingerprint.
    pub source_hash: String,
    pub inputs: Vec<InputDigest>,
    pub created_utc: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revision: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edits: Vec<EditLogEntry>,
}

/// Outcome of one calculation.
#[derive(Debug)]
pub enum CalcOutcome {
    Success {
        arrays: Vec<ResultArray>,
        traceability: Traceability,
    },
    Failed {
        phase: usize,
        frame_index: Option<u64>,
        message: String,
    },
}

impl CalcOutcome {
    pub fn is_success(&self) -> bool {
        matches!(self, CalcOutcome::Success { .. })
    }
}

/// Everything a run produced.
#[derive(Debug)]
pub struct RunOutcome {
    pub plan: PassPlan,
    pub outcomes: BTreeMap<String, CalcOutcome>,
    /// Bytes read from frame files during pass execution (headers + records).
    pub frame_bytes_read: u64,
    /// Frames decoded per pass.
    pub frames_decoded: Vec<u64>,
}

impl RunOutcome {
    pub fn failures(&self) -> Vec<&str> {
        self.outcomes
            .iter()
            .filter(|(_, o)| !o.is_success())
            .map(|(id, _)| id.as_str())
            .collect()
    }
}

/// Run options.
#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Worker threads; values above 1 enable one decode-ahead thread.
    pub threads: usize,
    /// Fixed ISO-8601 timestamp for traceability (test mode); None = now.
    pub pinned_timestamp: Option<String>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            threads: 1,
            pinned_timestamp: None,
        }
    }
}

fn now_utc() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// SHA-256 of a file's contents, streamed in 64 KiB chunks.
fn sha256_file(path: &PathBuf) -> std::io::Result<(String, u64)> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 64 * 1024];
    let mut total = 0u64;
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        total += n as u64;
    }
    Ok((hex::encode(hasher.finalize()), total))
}

/// Builds the traceability block for one plugin: engine version, hash of the
/// plugin's configuration, and a digest of every manifest file. Requires no
/// action by the plugin author.
pub fn capture_traceability(
    manifest: &DatasetManifest,
    plugin: &dyn CalculationPlugin,
    created_utc: &str,
) -> Result<Traceability, EngineError> {
    let mut inputs = Vec::with_capacity(manifest.files.len());
    for f in &manifest.files {
        let (sha256, bytes) =
            sha256_file(&f.path).map_err(|e| EngineError::TraceabilityIncomplete {
                path: f.path.clone(),
                source: e,
            })?;
        let name = f
            .path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| f.path.display().to_string());
        inputs.push(InputDigest {
            name,
            sha256,
            bytes,
        });
    }
    let source_hash = hex::encode(Sha256::digest(plugin.fingerprint().as_bytes()));
    Ok(Traceability {
        engine_version: env!("CARGO_PKG_VERSION").to_string(),
        calc_id: plugin.id().to_string(),
        source_hash,
        inputs,
        created_utc: created_utc.to_string(),
        revision: None,
        edits: Vec::new(),
    })
}

struct Registered {
    plugin: Box<dyn CalculationPlugin>,
    reqs: CalculationRequirements,
    failed: Option<(usize, Option<u64>, String)>,
}

/// Registry plus executor for calculation plugins.
#[derive(Default)]
pub struct Engine {
    plugins: Vec<Registered>,
}

impl Engine {
    pub fn new() -> Self {
        Engine::default()
    }

    fn deliver(
        &mut self,
        phase: usize,
        frame: &FrameView,
        grid: &GridMeta,
        active: &[(usize, (u64, u64))],
    ) {
        for &(idx, (lo, hi)) in active {
            let p = &mut self.plugins[idx];
            if p.failed.is_some() {
                continue;
            }
            if frame.frame_index >= lo && frame.frame_index < hi {
                if let Err(e) = p.plugin.on_frame(phase, frame, grid) {
                    p.failed = Some((phase, Some(frame.frame_index), e.to_string()));
                }
            }
        }
    }

    pub fn register(&mut self, plugin: Box<dyn CalculationPlugin>) -> Result<(), EngineError> {
        let id = plugin.id().to_string();
        if self.plugins.iter().any(|p| p.plugin.id() == id) {
            return Err(EngineError::DuplicateRegistration(id));
        }
        let reqs = plugin.requirements();
        self.plugins.push(Registered {
            plugin,
            reqs,
            failed: None,
        });
        Ok(())
    }

    pub fn requirements(&self) -> Vec<CalculationRequirements> {
        self.plugins.iter().map(|p| p.reqs.clone()).collect()
    }

    /// Executes the plan pass by pass and returns results plus traceability
    /// per calculation.
    pub fn run(
        &mut self,
        manifest: &DatasetManifest,
        opts: &RunOptions,
    ) -> Result<RunOutcome, EngineError> {
        let reqs = self.requirements();
        let plan = scheduler::plan_passes(&reqs, manifest)?;
        let created = opts
            .pinned_timestamp
            .clone()
            .unwrap_or_else(now_utc);
        // Digests computed before pass 0; an unreadable input aborts the run.
        let traces: Vec<Traceability> = self
            .plugins
            .iter()
            .map(|p| capture_traceability(manifest, p.plugin.as_ref(), &created))
            .collect::<Result<_, _>>()?;

        let counter = ByteCounter::new();
        let grid = manifest.grid.clone();
        let mut frames_decoded = Vec::with_capacity(plan.passes.len());

        for (k, pass) in plan.passes.iter().enumerate() {
            let mut decoded = 0u64;
            // Windows of the active plugins by registry index.
            let mut active: Vec<(usize, (u64, u64))> = Vec::new();
            for (idx, p) in self.plugins.iter_mut().enumerate() {
                if p.failed.is_some() {
                    continue;
                }
                let Some(phase) = p.reqs.phases.get(k) else {
                    continue;
                };
                if let Err(e) = p.plugin.on_pass_start(k) {
                    p.failed = Some((k, None, e.to_string()));
                    continue;
                }
                active.push((idx, phase.window));
            }
            if !active.is_empty() {
                let stream = FrameStream::over_intervals(
                    manifest,
                    pass.frame_window_union.clone(),
                    Some(counter.clone()),
                )?;
                if opts.threads > 1 {
                    // Decode-ahead: one reader thread, bounded channel, so at
                    // most two frames are in flight. Delivery order is the
                    // stream order either way.
                    let (tx, rx) = mpsc::sync_channel::<Result<FrameView, FormatError>>(1);
                    let handle = std::thread::spawn(move || {
                        for item in stream {
                            if tx.send(item).is_err() {
                                break;
                            }
                        }
                    });
                    let mut io_error = None;
                    for item in &rx {
                        match item {
                            Ok(frame) => {
                                decoded += 1;
                                self.deliver(k, &frame, &grid, &active);
                            }
                            Err(e) => {
                                io_error = Some(e);
                                break;
                            }
                        }
                    }
                    drop(rx);
                    let _ = handle.join();
                    if let Some(e) = io_error {
                        return Err(e.into());
                    }
                } else {
                    for item in stream {
                        let frame = item?;
                        decoded += 1;
                        self.deliver(k, &frame, &grid, &active);
                    }
                }
            }
            for &(idx, _) in &active {
                let p = &mut self.plugins[idx];
                if p.failed.is_some() {
                    continue;
                }
                if let Err(e) = p.plugin.on_pass_end(k) {
                    p.failed = Some((k, None, e.to_string()));
                }
            }
            frames_decoded.push(decoded);
        }

        let mut outcomes = BTreeMap::new();
        let last_phase: usize = plan.passes.len().saturating_sub(1);
        for (p, trace) in self.plugins.iter_mut().zip(traces) {
            let id = p.plugin.id().to_string();
            let outcome = if let Some((phase, frame_index, message)) = p.failed.take() {
                CalcOutcome::Failed {
                    phase,
                    frame_index,
                    message,
                }
            } else {
                match p.plugin.finalize() {
                    Ok(arrays) => CalcOutcome::Success {
                        arrays,
                        traceability: trace,
                    },
                    Err(e) => CalcOutcome::Failed {
                        phase: last_phase,
                        frame_index: None,
                        message: e.to_string(),
                    },
                }
            };
            outcomes.insert(id, outcome);
        }
        // Ids are unique by registration, so the map holds every plugin.
        debug_assert_eq!(outcomes.len(), self.plugins.len());

        Ok(RunOutcome {
            plan,
            outcomes,
            frame_bytes_read: counter.get(),
            frames_decoded,
        })
    }
}
