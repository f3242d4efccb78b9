//! Bit-exact reader/writer for the multi-file binary frame-archive format
//! (`.faf`).
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! header (84 bytes):
//!   magic        8  ASCII "FRAMEARC"
//!   version      u32 = 1
//!   nx, ny, nz   u32 each
//!   total_frames u64
//!   first_frame  u64
//!   frame_count  u64
//!   dt           f64
//!   reserved     28 zero bytes
//! frame record (16 + 24*N bytes, N = nx*ny*nz):
//!   frame_index  u64
//!   time         f64
//!   positions    3*N f32
//!   velocities   3*N f32
//! ```
//!
//! Records are fixed-size, so a frame inside a file is reachable with one
//! seek: offset = 84 + (i - first_frame) * record_size.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use thiserror::Error;

use crate::model::{FrameView, GridMeta};

pub const MAGIC: &[u8; 8] = b"FRAMEARC";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: u64 = 84;

/// Fixed record size for a grid of N bricks.
pub fn record_len(brick_count: usize) -> u64 {
    16 + 24 * brick_count as u64
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("not a framearc file: bad magic in {path}")]
    NotAFramearc { path: PathBuf },
    #[error("unsupported framearc version {version} in {path} (expected {VERSION})")]
    UnsupportedVersion { path: PathBuf, version: u32 },
    #[error("truncated file {path}: expected {expected} bytes, found {actual}")]
    Truncated {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },
    #[error("format construction error: {0}")]
    Construction(String),
    #[error("mixed dataset: {path} disagrees with {other} on {field}")]
    MixedDataset {
        path: PathBuf,
        other: PathBuf,
        field: &'static str,
    },
    #[error("invalid manifest: {reason} at frame {frame}")]
    ManifestInvalid { reason: String, frame: u64 },
    #[error("corrupt record in {path}: expected frame {expected}, found {actual}")]
    Corruption {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },
    #[error("window [{lo}, {hi}) outside dataset of {total} frames")]
    WindowOutOfRange { lo: u64, hi: u64, total: u64 },
    #[error("empty manifest: no input files")]
    EmptyManifest,
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> FormatError {
    FormatError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Decoded per-file header.
#[derive(Debug, Clone, PartialEq)]
pub struct FileHeader {
    pub version: u32,
    pub nx: u32,
    pub ny: u32,
    pub nz: u32,
    pub total_frames: u64,
    pub first_frame: u64,
    pub frame_count: u64,
    pub dt: f64,
}

impl FileHeader {
    pub fn brick_count(&self) -> usize {
        self.nx as usize * self.ny as usize * self.nz as usize
    }

    pub fn record_len(&self) -> u64 {
        record_len(self.brick_count())
    }

    /// Exact on-disk size of a file with this header.
    pub fn file_len(&self) -> u64 {
        HEADER_LEN + self.frame_count * self.record_len()
    }

    fn encode(&self) -> [u8; HEADER_LEN as usize] {
        let mut buf = [0u8; HEADER_LEN as usize];
        buf[0..8].copy_from_slice(MAGIC);
        buf[8..12].copy_from_slice(&self.version.to_le_bytes());
        buf[12..16].copy_from_slice(&self.nx.to_le_bytes());
        buf[16..20].copy_from_slice(&self.ny.to_le_bytes());
        buf[20..24].copy_from_slice(&self.nz.to_le_bytes());
        buf[24..32].copy_from_slice(&self.total_frames.to_le_bytes());
        buf[32..40].copy_from_slice(&self.first_frame.to_le_bytes());
        buf[40..48].copy_from_slice(&self.frame_count.to_le_bytes());
        buf[48..56].copy_from_slice(&self.dt.to_le_bytes());
        // bytes 56..84 reserved, zero
        buf
    }

    fn decode(path: &Path, buf: &[u8; HEADER_LEN as usize]) -> Result<FileHeader, FormatError> {
        if &buf[0..8] != MAGIC {
            return Err(FormatError::NotAFramearc {
                path: path.to_path_buf(),
            });
        }
        let version = u32::from_le_bytes(buf[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(FormatError::UnsupportedVersion {
                path: path.to_path_buf(),
                version,
            });
        }
        let h = FileHeader {
            version,
            nx: u32::from_le_bytes(buf[12..16].try_into().unwrap()),
            ny: u32::from_le_bytes(buf[16..20].try_into().unwrap()),
            nz: u32::from_le_bytes(buf[20..24].try_into().unwrap()),
            total_frames: u64::from_le_bytes(buf[24..32].try_into().unwrap()),
            first_frame: u64::from_le_bytes(buf[32..40].try_into().unwrap()),
            frame_count: u64::from_le_bytes(buf[40..48].try_into().unwrap()),
            dt: f64::from_le_bytes(buf[48..56].try_into().unwrap()),
        };
        if h.frame_count < 1 {
            return Err(FormatError::Construction(format!(
                "{}: frame_count must be >= 1",
                path.display()
            )));
        }
        if h.first_frame + h.frame_count > h.total_frames {
            return Err(FormatError::Construction(format!(
                "{}: frame range [{}, {}) exceeds total_frames {}",
                path.display(),
                h.first_frame,
                h.first_frame + h.frame_count,
                h.total_frames
            )));
        }
        Ok(h)
    }
}

/// One frame's raw payload as stored on disk (32-bit floats).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub frame_index: u64,
    pub time: f64,
    pub positions: Vec<f32>,
    pub velocities: Vec<f32>,
}

/// Shared bytes-read counter, incremented by readers as payload bytes are
/// consumed. Seeking is free.
#[derive(Debug, Clone, Default)]
pub struct ByteCounter(Arc<AtomicU64>);

impl ByteCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&self, n: u64) {
        self.0.fetch_add(n, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.0.store(0, Ordering::Relaxed);
    }
}

/// Writes a complete `.faf` file; returns the byte count written.
pub fn write_file(
    path: &Path,
    header: &FileHeader,
    frames: &[FrameRecord],
) -> Result<u64, FormatError> {
    if frames.is_empty() || header.frame_count < 1 {
        return Err(FormatError::Construction(
            "a framearc file must hold at least one frame".into(),
        ));
    }
    if frames.len() as u64 != header.frame_count {
        return Err(FormatError::Construction(format!(
            "header claims {} frames but {} were supplied",
            header.frame_count,
            frames.len()
        )));
    }
    if header.first_frame + header.frame_count > header.total_frames {
        return Err(FormatError::Construction(format!(
            "frame range [{}, {}) exceeds total_frames {}",
            header.first_frame,
            header.first_frame + header.frame_count,
            header.total_frames
        )));
    }
    let n = header.brick_count();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&header.encode()).map_err(|e| io_err(path, e))?;
    let mut written = HEADER_LEN;
    for (i, fr) in frames.iter().enumerate() {
        let expected_index = header.first_frame + i as u64;
        if fr.frame_index != expected_index {
            return Err(FormatError::Construction(format!(
                "record {i} has frame_index {} (expected {expected_index})",
                fr.frame_index
            )));
        }
        if fr.positions.len() != 3 * n || fr.velocities.len() != 3 * n {
            return Err(FormatError::Construction(format!(
                "record {i} payload length {}/{} does not match 3*N = {}",
                fr.positions.len(),
                fr.velocities.len(),
                3 * n
            )));
        }
        w.write_all(&fr.frame_index.to_le_bytes())
            .map_err(|e| io_err(path, e))?;
        w.write_all(&fr.time.to_le_bytes())
            .map_err(|e| io_err(path, e))?;
        for v in &fr.positions {
            w.write_all(&v.to_le_bytes()).map_err(|e| io_err(path, e))?;
        }
        for v in &fr.velocities {
            w.write_all(&v.to_le_bytes()).map_err(|e| io_err(path, e))?;
        }
        written += header.record_len();
    }
    w.flush().map_err(|e| io_err(path, e))?;
    Ok(written)
}

/// Reads and validates the 84-byte header of a `.faf` file.
pub fn read_header(path: &Path) -> Result<FileHeader, FormatError> {
    let mut file = File::open(path).map_err(|e| io_err(path, e))?;
    let actual = file.metadata().map_err(|e| io_err(path, e))?.len();
    if actual < HEADER_LEN {
        return Err(FormatError::Truncated {
            path: path.to_path_buf(),
            expected: HEADER_LEN,
            actual,
        });
    }
    let mut buf = [0u8; HEADER_LEN as usize];
    file.read_exact(&mut buf).map_err(|e| io_err(path, e))?;
    FileHeader::decode(path, &buf)
}

/// One file of a dataset, with its validated header.
#[derive(Debug, Clone)]
pub struct ManifestFile {
    pub path: PathBuf,
    pub header: FileHeader,
}

impl ManifestFile {
    /// Half-open frame range covered by this file.
    pub fn range(&self) -> (u64, u64) {
        (
            self.header.first_frame,
            self.header.first_frame + self.header.frame_count,
        )
    }
}

/// Ordered, validated file list covering exactly `[0, total_frames)`.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub files: Vec<ManifestFile>,
    pub grid: GridMeta,
}

/// Reads every header, checks cross-file consistency and coverage, and
/// returns the manifest sorted by first_frame.
pub fn validate_manifest(paths: &[PathBuf]) -> Result<DatasetManifest, FormatError> {
    if paths.is_empty() {
        return Err(FormatError::EmptyManifest);
    }
    let mut files = Vec::with_capacity(paths.len());
    for path in paths {
        let header = read_header(path)?;
        let expected = header.file_len();
        let actual = std::fs::metadata(path).map_err(|e| io_err(path, e))?.len();
        if actual != expected {
            return Err(FormatError::Truncated {
                path: path.clone(),
                expected,
                actual,
            });
        }
        files.push(ManifestFile {
            path: path.clone(),
            header,
        });
    }
    let first = files[0].clone();
    for f in &files[1..] {
        let h = &f.header;
        let g = &first.header;
        let field = if (h.nx, h.ny, h.nz) != (g.nx, g.ny, g.nz) {
            Some("grid dimensions")
        } else if h.total_frames != g.total_frames {
            Some("total_frames")
        } else if h.dt.to_bits() != g.dt.to_bits() {
            Some("dt")
        } else {
            None
        };
        if let Some(field) = field {
            return Err(FormatError::MixedDataset {
                path: f.path.clone(),
                other: first.path.clone(),
                field,
            });
        }
    }
    files.sort_by_key(|f| f.header.first_frame);
    let total = first.header.total_frames;
    let mut next = 0u64;
    for f in &files {
        let (lo, hi) = f.range();
        if lo > next {
            return Err(FormatError::ManifestInvalid {
                reason: format!("coverage gap before {}", f.path.display()),
                frame: next,
            });
        }
        if lo < next {
            return Err(FormatError::ManifestInvalid {
                reason: format!("overlapping coverage at {}", f.path.display()),
                frame: lo,
            });
        }
        next = hi;
    }
    if next != total {
        return Err(FormatError::ManifestInvalid {
            reason: format!("coverage ends before total_frames {total}"),
            frame: next,
        });
    }
    let grid = GridMeta::new(
        first.header.nx as usize,
        first.header.ny as usize,
        first.header.nz as usize,
        total,
        first.header.dt,
    )
    .map_err(|e| FormatError::Construction(e.to_string()))?;
    Ok(DatasetManifest { files, grid })
}

/// Streams frames from a manifest over a set of disjoint, ascending,
/// half-open frame intervals. Each file intersecting the intervals is opened
/// exactly once; frames outside the intervals are skipped by seeking.
/// Memory held at any instant is one record buffer plus the frame being
/// yielded.
pub struct FrameStream {
    files: Vec<ManifestFile>,
    intervals: Vec<(u64, u64)>,
    grid: GridMeta,
    counter: Option<ByteCounter>,
    record_buf: Vec<u8>,
    file_idx: usize,
    interval_idx: usize,
    reader: Option<BufReader<File>>,
    /// Next frame index to read from the open file, or None when the reader
    /// is not positioned.
    cursor: Option<u64>,
}

impl FrameStream {
    /// Single-window stream over `[window.0, window.1)`.
    pub fn new(
        manifest: &DatasetManifest,
        window: (u64, u64),
        counter: Option<ByteCounter>,
    ) -> Result<FrameStream, FormatError> {
        let intervals = if window.0 < window.1 {
            vec![window]
        } else {
            vec![]
        };
        Self::over_intervals(manifest, intervals, counter)
    }

    /// Stream over a pre-merged interval list (disjoint, ascending).
    pub fn over_intervals(
        manifest: &DatasetManifest,
        intervals: Vec<(u64, u64)>,
        counter: Option<ByteCounter>,
    ) -> Result<FrameStream, FormatError> {
        let total = manifest.grid.total_frames;
        for &(lo, hi) in &intervals {
            if lo >= hi || hi > total {
                return Err(FormatError::WindowOutOfRange { lo, hi, total });
            }
        }
        let n = manifest.grid.brick_count();
        Ok(FrameStream {
            files: manifest.files.clone(),
            intervals,
            grid: manifest.grid.clone(),
            counter,
            record_buf: vec![0u8; record_len(n) as usize],
            file_idx: 0,
            interval_idx: 0,
            reader: None,
            cursor: None,
        })
    }

    fn count_bytes(&self, n: u64) {
        if let Some(c) = &self.counter {
            c.add(n);
        }
    }

    /// Next frame index wanted, advancing past exhausted intervals.
    fn next_wanted(&mut self, at_least: u64) -> Option<u64> {
        while self.interval_idx < self.intervals.len() {
            let (lo, hi) = self.intervals[self.interval_idx];
            let want = lo.max(at_least);
            if want < hi {
                return Some(want);
            }
            self.interval_idx += 1;
        }
        None
    }

    fn read_frame(&mut self, want: u64) -> Result<FrameView, FormatError> {
        // Advance to the file holding `want`.
        loop {
            let f = &self.files[self.file_idx];
            let (lo, hi) = f.range();
            if want < hi {
                debug_assert!(want >= lo);
                break;
            }
            self.file_idx += 1;
            self.reader = None;
            self.cursor = None;
        }
        let f = &self.files[self.file_idx];
        let path = f.path.clone();
        let record_size = f.header.record_len();
        if self.reader.is_none() {
            let file = File::open(&path).map_err(|e| io_err(&path, e))?;
            let mut reader = BufReader::new(file);
            let mut hbuf = [0u8; HEADER_LEN as usize];
            reader.read_exact(&mut hbuf).map_err(|e| io_err(&path, e))?;
            self.count_bytes(HEADER_LEN);
            let header = FileHeader::decode(&path, &hbuf)?;
            if header != f.header {
                return Err(FormatError::Corruption {
                    path,
                    expected: f.header.first_frame,
                    actual: header.first_frame,
                });
            }
            self.reader = Some(reader);
            self.cursor = Some(f.header.first_frame);
        }
        let reader = self.reader.as_mut().unwrap();
        if self.cursor != Some(want) {
            let offset = HEADER_LEN + (want - f.header.first_frame) * record_size;
            reader
                .seek(SeekFrom::Start(offset))
                .map_err(|e| io_err(&path, e))?;
        }
        match reader.read_exact(&mut self.record_buf) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
                return Err(FormatError::Truncated {
                    path,
                    expected: f.header.file_len(),
                    actual: std::fs::metadata(&f.path).map(|m| m.len()).unwrap_or(0),
                });
            }
            Err(e) => return Err(io_err(&path, e)),
        }
        self.count_bytes(record_size);
        self.cursor = Some(want + 1);
        let buf = &self.record_buf;
        let frame_index = u64::from_le_bytes(buf[0..8].try_into().unwrap());
        if frame_index != want {
            return Err(FormatError::Corruption {
                path,
                expected: want,
                actual: frame_index,
            });
        }
        let time = f64::from_le_bytes(buf[8..16].try_into().unwrap());
        let n = self.grid.brick_count();
        let mut positions = Vec::with_capacity(3 * n);
        let mut velocities = Vec::with_capacity(3 * n);
        let mut off = 16;
        for _ in 0..3 * n {
            positions.push(f32::from_le_bytes(buf[off..off + 4].try_into().unwrap()) as f64);
            off += 4;
        }
        for _ in 0..3 * n {
            velocities.push(f32::from_le_bytes(buf[off..off + 4].try_into().unwrap()) as f64);
            off += 4;
        }
        Ok(FrameView {
            frame_index,
            time,
            positions,
            velocities,
        })
    }
}

impl Iterator for FrameStream {
    type Item = Result<FrameView, FormatError>;

    fn next(&mut self) -> Option<Self::Item> {
        let at_least = self.cursor.unwrap_or(0);
        let want = self.next_wanted(at_least.min(u64::MAX))?;
        // The wanted frame may sit before the cursor only when intervals
        // were exhausted; intervals are ascending so this cannot happen.
        let frame = self.read_frame(want);
        if frame.is_ok() {
            // Consume `want` from the current interval.
            let (_, hi) = self.intervals[self.interval_idx];
            if want + 1 >= hi {
                self.interval_idx += 1;
            } else {
                self.intervals[self.interval_idx].0 = want + 1;
            }
        }
        Some(frame)
    }
}

/// Ordered stream of the frames in `window` (half-open).
pub fn iter_frames(
    manifest: &DatasetManifest,
    window: (u64, u64),
    counter: Option<ByteCounter>,
) -> Result<FrameStream, FormatError> {
    if window.0 > window.1 || window.1 > manifest.grid.total_frames {
        return Err(FormatError::WindowOutOfRange {
            lo: window.0,
            hi: window.1,
            total: manifest.grid.total_frames,
        });
    }
    FrameStream::new(manifest, window, counter)
}
