//! The plot-document container (`.plotdoc`): a stored plot is its type id,
//! normalized named arguments, data payload, presentation block, and
//! traceability block.
//!
//! File layout: magic `PLOTDOC1` (8 bytes), u32 little-endian header length,
//! UTF-8 JSON header with lexicographically ordered keys, then the payload —
//! the argument arrays concatenated as little-endian f64, referenced from
//! the header by (offset, len). Identical documents are byte-identical, so
//! store -> restore -> store is a fixed point.
//!
//! Restoring looks the type up in a registry and passes the stored names
//! through a per-type migration table, so documents written by version 1
//! keep restoring under later signature revisions.

pub mod colormap;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::engine::{EditLogEntry, Traceability};
use crate::model::{make_result, ResultArray};

pub const MAGIC: &[u8; 8] = b"PLOTDOC1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PlotDocError {
    #[error("not a plotdoc file: bad magic in {0}")]
    NotAPlotdoc(String),
    #[error("unknown plot type {0:?}")]
    UnknownPlotType(String),
    #[error("unknown argument {name:?} for {plot_type}; valid: {valid}")]
    UnknownArgument {
        plot_type: String,
        name: String,
        valid: String,
    },
    #[error("missing required argument {name:?} for {plot_type}")]
    MissingArgument { plot_type: String, name: String },
    #[error("argument {name:?} has kind {got}, expected {expected}")]
    WrongKind {
        name: String,
        expected: &'static str,
        got: &'static str,
    },
    #[error("corrupt document: {0}")]
    Corruption(String),
    #[error("unknown colormap {0:?}")]
    UnknownColormap(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("data is immutable: {0:?} is not a presentation field")]
    ImmutabilityViolation(String),
    #[error("invalid presentation: {0}")]
    InvalidPresentation(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> PlotDocError {
    PlotDocError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// The four plot types.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotType {
    Layer,
    Channel,
    Time,
    Waterfall,
}

impl PlotType {
    pub const ALL: [PlotType; 4] = [
        PlotType::Layer,
        PlotType::Channel,
        PlotType::Time,
        PlotType::Waterfall,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PlotType::Layer => "layer",
            PlotType::Channel => "channel",
            PlotType::Time => "time",
            PlotType::Waterfall => "waterfall",
        }
    }

    pub fn parse(s: &str) -> Result<PlotType, PlotDocError> {
        match s {
            "layer" => Ok(PlotType::Layer),
            "channel" => Ok(PlotType::Channel),
            "time" => Ok(PlotType::Time),
            "waterfall" => Ok(PlotType::Waterfall),
            other => Err(PlotDocError::UnknownPlotType(other.to_string())),
        }
    }
}

impl fmt::Display for PlotType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A named-argument value.
#[derive(Debug, Clone, PartialEq)]
pub enum ArgValue {
    Real(f64),
    Int(i64),
    Str(String),
    Array(ResultArray),
}

impl ArgValue {
    fn kind_name(&self) -> &'static str {
        match self {
            ArgValue::Real(_) => "real",
            ArgValue::Int(_) => "int",
            ArgValue::Str(_) => "string",
            ArgValue::Array(_) => "array",
        }
    }

    pub fn as_array(&self) -> Option<&ResultArray> {
        match self {
            ArgValue::Array(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_real(&self) -> Option<f64> {
        match self {
            ArgValue::Real(v) => Some(*v),
            ArgValue::Int(v) => Some(*v as f64),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            ArgValue::Int(v) => Some(*v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgKind {
    Real,
    Int,
    Str,
    Array,
}

impl ArgKind {
    fn name(self) -> &'static str {
        match self {
            ArgKind::Real => "real",
            ArgKind::Int => "int",
            ArgKind::Str => "string",
            ArgKind::Array => "array",
        }
    }

    fn matches(self, v: &ArgValue) -> bool {
        matches!(
            (self, v),
            (ArgKind::Real, ArgValue::Real(_))
                | (ArgKind::Int, ArgValue::Int(_))
                | (ArgKind::Str, ArgValue::Str(_))
                | (ArgKind::Array, ArgValue::Array(_))
        )
    }
}

/// One entry of a plot type's signature. Required args have no default.
#[derive(Debug, Clone, Copy)]
pub struct ArgSpec {
    pub name: &'static str,
    pub kind: ArgKind,
    pub required: bool,
    pub default: Option<f64>,
}

const fn req(name: &'static str, kind: ArgKind) -> ArgSpec {
    ArgSpec {
        name,
        kind,
        required: true,
        default: None,
    }
}

const fn opt(name: &'static str, kind: ArgKind, default: f64) -> ArgSpec {
    ArgSpec {
        name,
        kind,
        required: false,
        default: Some(default),
    }
}

/// What a deprecated name migrates to.
#[derive(Debug, Clone, Copy)]
pub enum Migration {
    Rename(&'static str),
    DropWithWarning,
}

const LAYER_SIG: [ArgSpec; 1] = [req("values", ArgKind::Array)];
const CHANNEL_SIG: [ArgSpec; 3] = [
    req("dx", ArgKind::Array),
    req("dy", ArgKind::Array),
    opt("frame", ArgKind::Int, -1.0),
];
const TIME_SIG: [ArgSpec; 2] = [req("values", ArgKind::Array), opt("dt", ArgKind::Real, 1.0)];
const WATERFALL_SIG: [ArgSpec; 2] = [req("values", ArgKind::Array), opt("dt", ArgKind::Real, 1.0)];

/// Ordered signature for a plot type; args serialize in this order.
pub fn signature(plot_type: PlotType) -> &'static [ArgSpec] {
    match plot_type {
        PlotType::Layer => &LAYER_SIG,
        PlotType::Channel => &CHANNEL_SIG,
        PlotType::Time => &TIME_SIG,
        PlotType::Waterfall => &WATERFALL_SIG,
    }
}

/// Deprecated-name table per plot type.
pub fn migrations(plot_type: PlotType) -> &'static [(&'static str, Migration)] {
    match plot_type {
        PlotType::Channel => &[
            ("delta_x", Migration::Rename("dx")),
            ("delta_y", Migration::Rename("dy")),
            ("style", Migration::DropWithWarning),
        ],
        _ => &[
            ("data", Migration::Rename("values")),
            ("style", Migration::DropWithWarning),
        ],
    }
}

fn valid_names(plot_type: PlotType) -> String {
    signature(plot_type)
        .iter()
        .map(|s| s.name)
        .collect::<Vec<_>>()
        .join(", ")
}

/// Per-axis presentation limits; min must be below max.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AxisLimits {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<(f64, f64)>,
}

fn default_colormap() -> String {
    colormap::COOLWARM.to_string()
}

fn default_marker_size() -> f64 {
    1.0
}

fn default_line_width() -> f64 {
    1.5
}

fn default_grid_lines() -> bool {
    true
}

/// Presentation settings; mutable via `edit_presentation` while the data
/// payload stays untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresentationBlock {
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub axis_limits: AxisLimits,
    #[serde(default = "default_colormap")]
    pub colormap_id: String,
    #[serde(default = "default_marker_size")]
    pub marker_size: f64,
    #[serde(default = "default_line_width")]
    pub line_width: f64,
    #[serde(default = "default_grid_lines")]
    pub grid_lines: bool,
}

impl Default for PresentationBlock {
    fn default() -> Self {
        PresentationBlock {
            title: String::new(),
            axis_limits: AxisLimits::default(),
            colormap_id: default_colormap(),
            marker_size: default_marker_size(),
            line_width: default_line_width(),
            grid_lines: default_grid_lines(),
        }
    }
}

impl PresentationBlock {
    pub fn validate(&self) -> Result<(), PlotDocError> {
        for (axis, lim) in [("x", self.axis_limits.x), ("y", self.axis_limits.y)] {
            if let Some((lo, hi)) = lim {
                if !(lo < hi) {
                    return Err(PlotDocError::InvalidPresentation(format!(
                        "{axis} axis limits ({lo}, {hi}) need min < max"
                    )));
                }
            }
        }
        if !(self.marker_size > 0.0) {
            return Err(PlotDocError::InvalidPresentation(
                "marker_size must be > 0".into(),
            ));
        }
        if !(self.line_width > 0.0) {
            return Err(PlotDocError::InvalidPresentation(
                "line_width must be > 0".into(),
            ));
        }
        Ok(())
    }
}

/// A restored (or to-be-stored) plot document.
#[derive(Debug, Clone)]
pub struct PlotDocument {
    pub format_version: u32,
    pub plot_type: PlotType,
    /// Signature-ordered named arguments.
    pub args: Vec<(String, ArgValue)>,
    pub presentation: PresentationBlock,
    pub traceability: Traceability,
    pub created_utc: String,
    /// Migration warnings collected while restoring; not serialized.
    pub warnings: Vec<String>,
}

impl PlotDocument {
    pub fn arg(&self, name: &str) -> Option<&ArgValue> {
        self.args.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    /// Scalar arg or its signature default.
    pub fn real_arg(&self, name: &str) -> Option<f64> {
        if let Some(v) = self.arg(name) {
            return v.as_real();
        }
        signature(self.plot_type)
            .iter()
            .find(|s| s.name == name)
            .and_then(|s| s.default)
    }
}

/// Builds a validated document from named args supplied in any order.
pub fn build_document(
    plot_type: PlotType,
    args: Vec<(String, ArgValue)>,
    presentation: PresentationBlock,
    traceability: Traceability,
    created_utc: &str,
) -> Result<PlotDocument, PlotDocError> {
    presentation.validate()?;
    let sig = signature(plot_type);
    let mut supplied: BTreeMap<String, ArgValue> = BTreeMap::new();
    for (name, value) in args {
        if !sig.iter().any(|s| s.name == name) {
            return Err(PlotDocError::UnknownArgument {
                plot_type: plot_type.to_string(),
                name,
                valid: valid_names(plot_type),
            });
        }
        supplied.insert(name, value);
    }
    let mut ordered = Vec::new();
    for spec in sig {
        match supplied.remove(spec.name) {
            Some(value) => {
                if !spec.kind.matches(&value) {
                    return Err(PlotDocError::WrongKind {
                        name: spec.name.to_string(),
                        expected: spec.kind.name(),
                        got: value.kind_name(),
                    });
                }
                ordered.push((spec.name.to_string(), value));
            }
            None if spec.required => {
                return Err(PlotDocError::MissingArgument {
                    plot_type: plot_type.to_string(),
                    name: spec.name.to_string(),
                });
            }
            None => {}
        }
    }
    Ok(PlotDocument {
        format_version: FORMAT_VERSION,
        plot_type,
        args: ordered,
        presentation,
        traceability,
        created_utc: created_utc.to_string(),
        warnings: Vec::new(),
    })
}

/// Serializes a document to the canonical byte form.
pub fn to_bytes(doc: &PlotDocument) -> Result<Vec<u8>, PlotDocError> {
    let mut payload: Vec<u8> = Vec::new();
    let mut args_json = Vec::new();
    for (name, value) in &doc.args {
        let entry = match value {
            ArgValue::Real(v) => json!({"kind": "real", "name": name, "value": v}),
            ArgValue::Int(v) => json!({"kind": "int", "name": name, "value": v}),
            ArgValue::Str(v) => json!({"kind": "string", "name": name, "value": v}),
            ArgValue::Array(a) => {
                let offset = payload.len();
                for v in a.values() {
                    payload.extend_from_slice(&v.to_le_bytes());
                }
                json!({
                    "array_name": a.name(),
                    "dtype": "f64",
                    "kind": "array",
                    "len": a.len(),
                    "name": name,
                    "offset": offset,
                    "shape": a.shape(),
                    "units": a.units(),
                })
            }
        };
        args_json.push(entry);
    }
    let header = json!({
        "args": args_json,
        "created_utc": doc.created_utc,
        "format_version": doc.format_version,
        "plot_type": doc.plot_type.as_str(),
        "presentation": serde_json::to_value(&doc.presentation)
            .map_err(|e| PlotDocError::Corruption(e.to_string()))?,
        "traceability": serde_json::to_value(&doc.traceability)
            .map_err(|e| PlotDocError::Corruption(e.to_string()))?,
    });
    // serde_json maps are BTree-backed, so key order is lexicographic and
    // the serialized header is canonical.
    let header_bytes =
        serde_json::to_vec(&header).map_err(|e| PlotDocError::Corruption(e.to_string()))?;
    let mut out = Vec::with_capacity(12 + header_bytes.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_bytes);
    out.extend_from_slice(&payload);
    Ok(out)
}

/// Byte range of the payload inside a serialized document, for
/// data-immutability checks.
pub fn payload_range(bytes: &[u8]) -> Result<std::ops::Range<usize>, PlotDocError> {
    if bytes.len() < 12 || &bytes[0..8] != MAGIC {
        return Err(PlotDocError::NotAPlotdoc("<bytes>".into()));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let start = 12 + header_len;
    if start > bytes.len() {
        return Err(PlotDocError::Corruption("header length out of bounds".into()));
    }
    Ok(start..bytes.len())
}

fn get_str<'a>(obj: &'a Value, key: &str) -> Result<&'a str, PlotDocError> {
    obj.get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| PlotDocError::Corruption(format!("missing string field {key:?}")))
}

/// Parses the canonical byte form back into a document, applying the
/// migration table for the document's plot type.
pub fn from_bytes(bytes: &[u8]) -> Result<PlotDocument, PlotDocError> {
    let payload_start = payload_range(bytes)?.start;
    let header: Value = serde_json::from_slice(&bytes[12..payload_start])
        .map_err(|e| PlotDocError::Corruption(format!("header is not valid JSON: {e}")))?;
    let version = header
        .get("format_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| PlotDocError::Corruption("missing format_version".into()))?;
    if version < 1 {
        return Err(PlotDocError::Corruption(format!(
            "unsupported format_version {version}"
        )));
    }
    let plot_type = PlotType::parse(get_str(&header, "plot_type")?)?;
    let created_utc = get_str(&header, "created_utc")?.to_string();
    let presentation: PresentationBlock =
        serde_json::from_value(header.get("presentation").cloned().unwrap_or(Value::Null))
            .map_err(|e| PlotDocError::Corruption(format!("bad presentation block: {e}")))?;
    presentation.validate()?;
    let traceability: Traceability =
        serde_json::from_value(header.get("traceability").cloned().unwrap_or(Value::Null))
            .map_err(|e| PlotDocError::Corruption(format!("bad traceability block: {e}")))?;

    let payload = &bytes[payload_start..];
    let sig = signature(plot_type);
    let mut warnings = Vec::new();
    let mut named: Vec<(String, ArgValue)> = Vec::new();
    let entries = header
        .get("args")
        .and_then(Value::as_array)
        .ok_or_else(|| PlotDocError::Corruption("missing args list".into()))?;
    for entry in entries {
        let mut name = get_str(entry, "name")?.to_string();
        // Migration table: deprecated names are renamed or dropped with a
        // warning before signature validation.
        if !sig.iter().any(|s| s.name == name) {
            match migrations(plot_type)
                .iter()
                .find(|(old, _)| *old == name)
            {
                Some((old, Migration::Rename(new))) => {
                    warnings.push(format!("argument {old:?} renamed to {new:?}"));
                    name = new.to_string();
                }
                Some((old, Migration::DropWithWarning)) => {
                    warnings.push(format!("argument {old:?} is no longer supported; dropped"));
                    continue;
                }
                None => {
                    return Err(PlotDocError::UnknownArgument {
                        plot_type: plot_type.to_string(),
                        name,
                        valid: valid_names(plot_type),
                    });
                }
            }
        }
        let kind = get_str(entry, "kind")?;
        let value = match kind {
            "real" => ArgValue::Real(
                entry
                    .get("value")
                    .and_then(Value::as_f64)
                    .ok_or_else(|| PlotDocError::Corruption(format!("bad real {name:?}")))?,
            ),
            "int" => ArgValue::Int(
                entry
                    .get("value")
                    .and_then(Value::as_i64)
                    .ok_or_else(|| PlotDocError::Corruption(format!("bad int {name:?}")))?,
            ),
            "string" => ArgValue::Str(get_str(entry, "value")?.to_string()),
            "array" => {
                let offset = entry
                    .get("offset")
                    .and_then(Value::as_u64)
                    .ok_or_else(|| PlotDocError::Corruption(format!("bad offset for {name:?}")))?
                    as usize;
                let len = entry
                    .get("len")
                    .and_then(Value::as_u64)
                    .ok_or_else(|| PlotDocError::Corruption(format!("bad len for {name:?}")))?
                    as usize;
                let shape_v = entry
                    .get("shape")
                    .and_then(Value::as_array)
                    .ok_or_else(|| PlotDocError::Corruption(format!("bad shape for {name:?}")))?;
                if shape_v.len() != 4 {
                    return Err(PlotDocError::Corruption(format!(
                        "shape of {name:?} must have 4 axes"
                    )));
                }
                let mut shape = [0usize; 4];
                for (i, s) in shape_v.iter().enumerate() {
                    shape[i] = s.as_u64().ok_or_else(|| {
                        PlotDocError::Corruption(format!("bad shape for {name:?}"))
                    })? as usize;
                }
                let byte_end = offset
                    .checked_add(len.checked_mul(8).ok_or_else(|| {
                        PlotDocError::Corruption(format!("len overflow for {name:?}"))
                    })?)
                    .ok_or_else(|| {
                        PlotDocError::Corruption(format!("offset overflow for {name:?}"))
                    })?;
                if byte_end > payload.len() {
                    return Err(PlotDocError::Corruption(format!(
                        "payload descriptor of {name:?} out of bounds: needs {byte_end} of {} bytes",
                        payload.len()
                    )));
                }
                let mut values = Vec::with_capacity(len);
                for i in 0..len {
                    let o = offset + 8 * i;
                    values.push(f64::from_le_bytes(payload[o..o + 8].try_into().unwrap()));
                }
                let array_name = entry
                    .get("array_name")
                    .and_then(Value::as_str)
                    .unwrap_or(&name);
                let units = entry.get("units").and_then(Value::as_str).unwrap_or("");
                ArgValue::Array(make_result(array_name, units, shape, values).map_err(|e| {
                    PlotDocError::Corruption(format!("array {name:?}: {e}"))
                })?)
            }
            other => {
                return Err(PlotDocError::Corruption(format!(
                    "unknown arg kind {other:?}"
                )))
            }
        };
        named.push((name, value));
    }
    let mut doc = build_document(plot_type, named, presentation, traceability, &created_utc)?;
    doc.format_version = FORMAT_VERSION;
    doc.warnings = warnings;
    Ok(doc)
}

/// Stores a document; returns the byte count written.
pub fn store(doc: &PlotDocument, path: &Path) -> Result<u64, PlotDocError> {
    let bytes = to_bytes(doc)?;
    std::fs::write(path, &bytes).map_err(|e| io_err(path, e))?;
    Ok(bytes.len() as u64)
}

/// Restores a document from disk.
pub fn restore(path: &Path) -> Result<PlotDocument, PlotDocError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.len() < 12 || &bytes[0..8] != MAGIC {
        return Err(PlotDocError::NotAPlotdoc(path.display().to_string()));
    }
    from_bytes(&bytes)
}

/// Partial presentation update; unset fields stay untouched.
#[derive(Debug, Clone, Default)]
pub struct PresentationPatch {
    pub title: Option<String>,
    pub xlim: Option<(f64, f64)>,
    pub ylim: Option<(f64, f64)>,
    pub colormap_id: Option<String>,
    pub marker_size: Option<f64>,
    pub line_width: Option<f64>,
    pub grid_lines: Option<bool>,
}

impl PresentationPatch {
    pub fn is_empty(&self) -> bool {
        self.title.is_none()
            && self.xlim.is_none()
            && self.ylim.is_none()
            && self.colormap_id.is_none()
            && self.marker_size.is_none()
            && self.line_width.is_none()
            && self.grid_lines.is_none()
    }
}

/// Presentation field names accepted by `edit_presentation`; anything else
/// is a data change and is rejected.
pub const PRESENTATION_FIELDS: [&str; 7] = [
    "title",
    "xlim",
    "ylim",
    "colormap",
    "marker_size",
    "line_width",
    "grid_lines",
];

fn fmt_opt_pair(v: Option<(f64, f64)>) -> String {
    match v {
        Some((a, b)) => format!("({a}, {b})"),
        None => "none".into(),
    }
}

/// Applies a presentation patch to a document in place on disk. The payload
/// byte range is untouched; traceability gains one edit-log entry per
/// changed field.
pub fn edit_presentation(
    path: &Path,
    patch: &PresentationPatch,
    timestamp: &str,
) -> Result<PlotDocument, PlotDocError> {
    let mut doc = restore(path)?;
    apply_patch(&mut doc, patch, timestamp)?;
    store(&doc, path)?;
    Ok(doc)
}

/// Patch application shared by the file-level editor and the CLI.
pub fn apply_patch(
    doc: &mut PlotDocument,
    patch: &PresentationPatch,
    timestamp: &str,
) -> Result<(), PlotDocError> {
    let p = &mut doc.presentation;
    let mut edits: Vec<EditLogEntry> = Vec::new();
    let mut log = |field: &str, old: String, new: String| {
        if old != new {
            edits.push(EditLogEntry {
                field: field.to_string(),
                old,
                new,
                timestamp: timestamp.to_string(),
            });
        }
    };
    if let Some(t) = &patch.title {
        log("title", p.title.clone(), t.clone());
        p.title = t.clone();
    }
    if let Some(lim) = patch.xlim {
        log("xlim", fmt_opt_pair(p.axis_limits.x), fmt_opt_pair(Some(lim)));
        p.axis_limits.x = Some(lim);
    }
    if let Some(lim) = patch.ylim {
        log("ylim", fmt_opt_pair(p.axis_limits.y), fmt_opt_pair(Some(lim)));
        p.axis_limits.y = Some(lim);
    }
    if let Some(c) = &patch.colormap_id {
        log("colormap", p.colormap_id.clone(), c.clone());
        p.colormap_id = c.clone();
    }
    if let Some(m) = patch.marker_size {
        log("marker_size", p.marker_size.to_string(), m.to_string());
        p.marker_size = m;
    }
    if let Some(w) = patch.line_width {
        log("line_width", p.line_width.to_string(), w.to_string());
        p.line_width = w;
    }
    if let Some(g) = patch.grid_lines {
        log("grid_lines", p.grid_lines.to_string(), g.to_string());
        p.grid_lines = g;
    }
    p.validate()?;
    doc.traceability.edits.extend(edits);
    Ok(())
}
