//! Command-line surface: dataset generation, pipeline runs, and plot-document
//! tooling (render / edit / info).
//!
//! Exit codes: 0 success, 1 runtime or calculation failure, 2 usage or
//! configuration error.

mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::calcs::{build_calculation, ChannelSelector};
use crate::engine::{CalcOutcome, Engine, RunOptions};
use crate::model::{Axis, ResultArray};
use crate::plotdoc::{
    self, ArgValue, PlotType, PresentationBlock, PresentationPatch,
};
use crate::render;
use crate::scheduler::{plan_passes, planned_bytes, PassPlan};
use crate::synth::{self, SynthConfig};
use crate::{framearc, scheduler};

pub use config::{CalcEntry, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Command failure with the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Usage / configuration problems -> exit 2.
    Usage(String),
    /// Runtime, data, or calculation failures -> exit 1.
    Runtime(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn runtime(msg: impl Into<String>) -> CliError {
    CliError::Runtime(msg.into())
}

#[derive(Parser)]
#[command(
    name = "seispost",
    version,
    about = "Streaming post-processor for frame-based simulation output"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic frame-archive dataset.
    Gen(GenArgs),
    /// Run a post-processing pipeline from a config file.
    Run(RunArgs),
    /// Render a plot document to SVG.
    Render(RenderArgs),
    /// Batch-edit presentation settings of plot documents in place.
    Edit(EditArgs),
    /// Print a plot document's type, arguments, presentation and provenance.
    Info(InfoArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 4)]
    nx: usize,
    #[arg(long, default_value_t = 4)]
    ny: usize,
    #[arg(long, default_value_t = 8)]
    nz: usize,
    #[arg(long, default_value_t = 64)]
    frames: u64,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    #[arg(long, default_value_t = 0.05)]
    amplitude: f64,
    #[arg(long, default_value_t = 1.0)]
    frequency: f64,
    #[arg(long, default_value_t = 0.0)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory for the .faf files.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 64)]
    frames_per_file: u64,
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration file.
    config: PathBuf,
    /// Print the pass plan and report without reading any frame data.
    #[arg(long)]
    dry_run: bool,
    /// Engine worker threads.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Fixed ISO-8601 timestamp for traceability (test mode).
    #[arg(long)]
    pinned_timestamp: Option<String>,
    /// Omit the timings object from the run report.
    #[arg(long)]
    no_timings: bool,
}

#[derive(Args, Clone)]
struct PresentationArgs {
    #[arg(long)]
    title: Option<String>,
    /// Axis x-limits as "lo,hi".
    #[arg(long)]
    xlim: Option<String>,
    /// Axis y-limits as "lo,hi".
    #[arg(long)]
    ylim: Option<String>,
    #[arg(long)]
    colormap: Option<String>,
    #[arg(long)]
    marker_size: Option<f64>,
    #[arg(long)]
    line_width: Option<f64>,
    #[arg(long)]
    grid_lines: Option<bool>,
}

impl PresentationArgs {
    fn to_patch(&self) -> Result<PresentationPatch, CliError> {
        Ok(PresentationPatch {
            title: self.title.clone(),
            xlim: self.xlim.as_deref().map(parse_pair).transpose()?,
            ylim: self.ylim.as_deref().map(parse_pair).transpose()?,
            colormap_id: self.colormap.clone(),
            marker_size: self.marker_size,
            line_width: self.line_width,
            grid_lines: self.grid_lines,
        })
    }
}

fn parse_pair(s: &str) -> Result<(f64, f64), CliError> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(usage(format!("expected \"lo,hi\", got {s:?}")));
    }
    let lo: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| usage(format!("bad number {:?}", parts[0])))?;
    let hi: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| usage(format!("bad number {:?}", parts[1])))?;
    Ok((lo, hi))
}

#[derive(Args)]
struct RenderArgs {
    /// Plot document to render.
    doc: PathBuf,
    /// Output SVG path.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    presentation: PresentationArgs,
}

#[derive(Args)]
struct EditArgs {
    /// Documents to edit in place (a .bak sibling is written first).
    #[arg(required = true)]
    docs: Vec<PathBuf>,
    #[command(flatten)]
    presentation: PresentationArgs,
    /// Fixed ISO-8601 timestamp for the edit log (test mode).
    #[arg(long)]
    pinned_timestamp: Option<String>,
}

#[derive(Args)]
struct InfoArgs {
    doc: PathBuf,
}

/// Parses argv and dispatches; returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Run(a) => cmd_run(&a),
        Command::Render(a) => cmd_render(&a),
        Command::Edit(a) => cmd_edit(&a),
        Command::Info(a) => cmd_info(&a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn cmd_gen(a: &GenArgs) -> Result<(), CliError> {
    let cfg = SynthConfig {
        nx: a.nx,
        ny: a.ny,
        nz: a.nz,
        frames: a.frames,
        dt: a.dt,
        amplitude: a.amplitude,
        frequency: a.frequency,
        noise_sigma: a.noise_sigma,
        seed: a.seed,
    };
    let manifest = synth::generate(&cfg, &a.out, a.frames_per_file).map_err(|e| match e {
        synth::SynthError::InvalidConfig(m) => usage(m),
        other => runtime(other.to_string()),
    })?;
    println!(
        "generated {} files, grid {}x{}x{}, {} frames, dt {}",
        manifest.files.len(),
        manifest.grid.nx,
        manifest.grid.ny,
        manifest.grid.nz,
        manifest.grid.total_frames,
        manifest.grid.dt
    );
    for f in &manifest.files {
        let (lo, hi) = f.range();
        println!("  {}  frames [{lo}, {hi})", f.path.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct CalcReport {
    status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    message: Option<String>,
    outputs: Vec<String>,
}

#[derive(Serialize)]
struct RunReport {
    dry_run: bool,
    passes: usize,
    planned_bytes: u64,
    frame_bytes_read: u64,
    frames_decoded: Vec<u64>,
    calculations: BTreeMap<String, CalcReport>,
    plots: Vec<String>,
    /// Wall-clock timings; excluded with --no-timings so reports can be
    /// compared byte-wise across runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    timings: Option<BTreeMap<String, f64>>,
}

fn print_plan(plan: &PassPlan, bytes: u64) {
    println!("plan: {} pass(es), planned_bytes {}", plan.passes.len(), bytes);
    for (k, pass) in plan.passes.iter().enumerate() {
        let calcs: Vec<String> = pass
            .active
            .iter()
            .map(|(id, phase)| format!("{id}#{phase}"))
            .collect();
        println!("  pass {k}: calcs [{}]", calcs.join(", "));
        for f in &pass.files {
            println!(
                "    {}  frames [{}, {})",
                f.path.display(),
                f.first_frame,
                f.first_frame + f.frame_count
            );
        }
    }
}

fn cmd_run(a: &RunArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let cfg = config::load(&a.config).map_err(usage)?;
    let paths = cfg.dataset_files().map_err(usage)?;
    let manifest = framearc::validate_manifest(&paths).map_err(|e| runtime(e.to_string()))?;
    std::fs::create_dir_all(&cfg.output)
        .map_err(|e| runtime(format!("cannot create {}: {e}", cfg.output.display())))?;

    // Plugins are constructed up front; a bad kind or selector is a config
    // error regardless of dry-run.
    let mut engine = Engine::new();
    for entry in &cfg.calcs {
        let selector = match (entry.ix, entry.iy) {
            (Some(ix), Some(iy)) => Some(ChannelSelector { ix, iy }),
            (None, None) => None,
            _ => {
                return Err(usage(format!(
                    "calculation {:?}: ix and iy must be given together",
                    entry.name
                )))
            }
        };
        let plugin = build_calculation(&entry.kind, &entry.name, &manifest.grid, selector)
            .map_err(|e| usage(e.to_string()))?;
        engine
            .register(plugin)
            .map_err(|e| usage(e.to_string()))?;
    }

    let plan = plan_passes(&engine.requirements(), &manifest)
        .map_err(|e| usage(e.to_string()))?;
    let plan_bytes = planned_bytes(&plan, &manifest.grid);
    print_plan(&plan, plan_bytes);

    let setup_s = started.elapsed().as_secs_f64();
    if a.dry_run {
        let calculations = cfg
            .calcs
            .iter()
            .map(|c| {
                (
                    c.name.clone(),
                    CalcReport {
                        status: "planned".into(),
                        message: None,
                        outputs: Vec::new(),
                    },
                )
            })
            .collect();
        let report = RunReport {
            dry_run: true,
            passes: plan.passes.len(),
            planned_bytes: plan_bytes,
            frame_bytes_read: 0,
            frames_decoded: Vec::new(),
            calculations,
            plots: Vec::new(),
            timings: timings(a, setup_s, 0.0),
        };
        write_report(&cfg.output, &report)?;
        return Ok(());
    }

    let opts = RunOptions {
        threads: a.threads.max(1),
        pinned_timestamp: a.pinned_timestamp.clone(),
    };
    let run_started = Instant::now();
    let outcome = engine
        .run(&manifest, &opts)
        .map_err(|e| runtime(e.to_string()))?;
    let run_s = run_started.elapsed().as_secs_f64();

    let created = a
        .pinned_timestamp
        .clone()
        .unwrap_or_else(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
    let mut calculations: BTreeMap<String, CalcReport> = BTreeMap::new();
    let mut plots: Vec<String> = Vec::new();
    let mut any_failed = false;
    for entry in &cfg.calcs {
        let report = match outcome.outcomes.get(&entry.name) {
            Some(CalcOutcome::Success {
                arrays,
                traceability,
            }) => {
                let mut outputs = Vec::new();
                if let Some(plot_type) = entry.plot {
                    let path = write_plot(
                        &cfg.output,
                        entry,
                        plot_type,
                        arrays,
                        traceability.clone(),
                        manifest.grid.dt,
                        &created,
                    )?;
                    plots.push(path.display().to_string());
                    outputs.push(path.display().to_string());
                }
                CalcReport {
                    status: "ok".into(),
                    message: None,
                    outputs,
                }
            }
            Some(CalcOutcome::Failed {
                phase,
                frame_index,
                message,
            }) => {
                any_failed = true;
                let at = match frame_index {
                    Some(f) => format!("phase {phase}, frame {f}"),
                    None => format!("phase {phase}"),
                };
                CalcReport {
                    status: "failed".into(),
                    message: Some(format!("{at}: {message}")),
                    outputs: Vec::new(),
                }
            }
            None => CalcReport {
                status: "missing".into(),
                message: Some("no outcome recorded".into()),
                outputs: Vec::new(),
            },
        };
        calculations.insert(entry.name.clone(), report);
    }

    let report = RunReport {
        dry_run: false,
        passes: outcome.plan.passes.len(),
        planned_bytes: plan_bytes,
        frame_bytes_read: outcome.frame_bytes_read,
        frames_decoded: outcome.frames_decoded.clone(),
        calculations,
        plots,
        timings: timings(a, setup_s, run_s),
    };
    write_report(&cfg.output, &report)?;
    println!(
        "run complete: {} pass(es), {} bytes of frame data read",
        report.passes, report.frame_bytes_read
    );
    if any_failed {
        return Err(runtime(format!(
            "calculation failure(s): {}",
            outcome.failures().join(", ")
        )));
    }
    Ok(())
}

fn timings(a: &RunArgs, setup_s: f64, run_s: f64) -> Option<BTreeMap<String, f64>> {
    if a.no_timings {
        return None;
    }
    let mut t = BTreeMap::new();
    t.insert("setup_seconds".to_string(), setup_s);
    t.insert("run_seconds".to_string(), run_s);
    Some(t)
}

fn write_report(out_dir: &Path, report: &RunReport) -> Result<(), CliError> {
    let path = out_dir.join("run_report.json");
    let mut json =
        serde_json::to_string_pretty(report).map_err(|e| runtime(e.to_string()))?;
    json.push('\n');
    std::fs::write(&path, json)
        .map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))?;
    println!("report: {}", path.display());
    Ok(())
}

/// Builds and stores the plot document for one calculation's plot request.
fn write_plot(
    out_dir: &Path,
    entry: &CalcEntry,
    plot_type: PlotType,
    arrays: &[ResultArray],
    traceability: crate::engine::Traceability,
    dt: f64,
    created: &str,
) -> Result<PathBuf, CliError> {
    // Overrides from the config section are authoring choices, not post-hoc
    // edits, so they go straight into the block without an edit log.
    let mut presentation = PresentationBlock::default();
    apply_overrides(&mut presentation, &entry.presentation);
    presentation
        .validate()
        .map_err(|e| usage(format!("calculation {:?}: {e}", entry.name)))?;

    let first = arrays
        .first()
        .ok_or_else(|| runtime(format!("calculation {:?} produced no arrays", entry.name)))?;
    let args: Vec<(String, ArgValue)> = match plot_type {
        PlotType::Layer => {
            let layer = entry.layer_index.unwrap_or(0);
            let sliced = first
                .slice_axis(Axis::Z, layer)
                .and_then(|a| a.slice_axis(Axis::T, 0))
                .map_err(|e| usage(format!("calculation {:?}: {e}", entry.name)))?;
            vec![("values".to_string(), ArgValue::Array(sliced))]
        }
        PlotType::Channel => {
            if arrays.len() < 2 {
                return Err(usage(format!(
                    "calculation {:?}: channel plot needs dx and dy arrays",
                    entry.name
                )));
            }
            vec![
                ("dx".to_string(), ArgValue::Array(arrays[0].clone())),
                ("dy".to_string(), ArgValue::Array(arrays[1].clone())),
            ]
        }
        PlotType::Time | PlotType::Waterfall => vec![
            ("values".to_string(), ArgValue::Array(first.clone())),
            ("dt".to_string(), ArgValue::Real(dt)),
        ],
    };
    let doc = plotdoc::build_document(plot_type, args, presentation, traceability, created)
        .map_err(|e| usage(format!("calculation {:?}: {e}", entry.name)))?;
    let path = out_dir.join(format!("{}.plotdoc", entry.name));
    plotdoc::store(&doc, &path).map_err(|e| runtime(e.to_string()))?;
    Ok(path)
}

fn apply_overrides(p: &mut PresentationBlock, patch: &PresentationPatch) {
    if let Some(t) = &patch.title {
        p.title = t.clone();
    }
    if let Some(lim) = patch.xlim {
        p.axis_limits.x = Some(lim);
    }
    if let Some(lim) = patch.ylim {
        p.axis_limits.y = Some(lim);
    }
    if let Some(c) = &patch.colormap_id {
        p.colormap_id = c.clone();
    }
    if let Some(m) = patch.marker_size {
        p.marker_size = m;
    }
    if let Some(w) = patch.line_width {
        p.line_width = w;
    }
    if let Some(g) = patch.grid_lines {
        p.grid_lines = g;
    }
}

fn cmd_render(a: &RenderArgs) -> Result<(), CliError> {
    let patch = a.presentation.to_patch()?;
    let mut doc = plotdoc::restore(&a.doc).map_err(|e| runtime(e.to_string()))?;
    for w in &doc.warnings {
        eprintln!("warning: {w}");
    }
    if !patch.is_empty() {
        // Presentation-only overrides for this render; the document on disk
        // is untouched.
        let stamp = doc.created_utc.clone();
        plotdoc::apply_patch(&mut doc, &patch, &stamp)
            .map_err(|e| usage(e.to_string()))?;
    }
    render::render_to_file(&doc, &a.out).map_err(|e| runtime(e.to_string()))?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn payload_sha256(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| runtime(format!("cannot read {}: {e}", path.display())))?;
    let range = plotdoc::payload_range(&bytes).map_err(|e| runtime(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(&bytes[range])))
}

fn cmd_edit(a: &EditArgs) -> Result<(), CliError> {
    let patch = a.presentation.to_patch()?;
    if patch.is_empty() {
        return Err(usage("no presentation changes given"));
    }
    let timestamp = a
        .pinned_timestamp
        .clone()
        .unwrap_or_else(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
    for doc_path in &a.docs {
        let before = payload_sha256(doc_path)?;
        let bak = doc_path.with_extension(match doc_path.extension() {
            Some(e) => format!("{}.bak", e.to_string_lossy()),
            None => "bak".to_string(),
        });
        std::fs::copy(doc_path, &bak)
            .map_err(|e| runtime(format!("cannot write {}: {e}", bak.display())))?;
        plotdoc::edit_presentation(doc_path, &patch, &timestamp)
            .map_err(|e| runtime(e.to_string()))?;
        let after = payload_sha256(doc_path)?;
        if before != after {
            return Err(runtime(format!(
                "payload changed while editing {} — restored copy at {}",
                doc_path.display(),
                bak.display()
            )));
        }
        println!("edited {} (backup {})", doc_path.display(), bak.display());
    }
    Ok(())
}

fn cmd_info(a: &InfoArgs) -> Result<(), CliError> {
    let doc = plotdoc::restore(&a.doc).map_err(|e| runtime(e.to_string()))?;
    println!("plot_type: {}", doc.plot_type);
    println!("format_version: {}", doc.format_version);
    println!("created_utc: {}", doc.created_utc);
    for w in &doc.warnings {
        println!("warning: {w}");
    }
    println!("args:");
    for (name, value) in &doc.args {
        match value {
            ArgValue::Array(arr) => {
                let [sx, sy, sz, st] = arr.shape();
                println!(
                    "  {name}: array {:?} shape ({sx}, {sy}, {sz}, {st}) units {:?}",
                    arr.name(),
                    arr.units()
                );
            }
            ArgValue::Real(v) => println!("  {name}: real {v}"),
            ArgValue::Int(v) => println!("  {name}: int {v}"),
            ArgValue::Str(v) => println!("  {name}: str {v:?}"),
        }
    }
    let pres =
        serde_json::to_string_pretty(&doc.presentation).map_err(|e| runtime(e.to_string()))?;
    println!("presentation: {pres}");
    let trace =
        serde_json::to_string_pretty(&doc.traceability).map_err(|e| runtime(e.to_string()))?;
    println!("traceability: {trace}");
    Ok(())
}

// Planning helper reused by integration tests: a dry plan for a config.
#[doc(hidden)]
pub fn plan_for_config(
    cfg: &RunConfig,
) -> Result<(PassPlan, u64), CliError> {
    let paths = cfg.dataset_files().map_err(usage)?;
    let manifest = framearc::validate_manifest(&paths).map_err(|e| runtime(e.to_string()))?;
    let mut engine = Engine::new();
    for entry in &cfg.calcs {
        let selector = match (entry.ix, entry.iy) {
            (Some(ix), Some(iy)) => Some(ChannelSelector { ix, iy }),
            _ => None,
        };
        let plugin = build_calculation(&entry.kind, &entry.name, &manifest.grid, selector)
            .map_err(|e| usage(e.to_string()))?;
        engine.register(plugin).map_err(|e| usage(e.to_string()))?;
    }
    let plan = scheduler::plan_passes(&engine.requirements(), &manifest)
        .map_err(|e| usage(e.to_string()))?;
    let bytes = planned_bytes(&plan, &manifest.grid);
    Ok((plan, bytes))
}
