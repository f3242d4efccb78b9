//! Shared helpers for the integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use seispost::framearc::{self, DatasetManifest, FileHeader, FrameRecord, VERSION};
use seispost::synth::{self, SynthConfig};

/// A small default synthetic configuration; override fields as needed.
pub fn synth_config() -> SynthConfig {
    SynthConfig {
        nx: 3,
        ny: 2,
        nz: 4,
        frames: 16,
        dt: 0.01,
        amplitude: 0.05,
        frequency: 2.0,
        noise_sigma: 0.0,
        seed: 7,
    }
}

/// Generates a dataset under `dir` and returns the validated manifest.
pub fn make_dataset(dir: &Path, cfg: &SynthConfig, frames_per_file: u64) -> DatasetManifest {
    synth::generate(cfg, dir, frames_per_file).expect("synth generate")
}

/// Writes a hand-built single-grid dataset: one file per (first, count) pair.
pub fn write_split(
    dir: &Path,
    n: usize,
    total: u64,
    dt: f64,
    splits: &[(u64, u64)],
    value_of: impl Fn(u64, usize) -> f32,
) -> Vec<PathBuf> {
    let mut paths = Vec::new();
    for (i, &(first, count)) in splits.iter().enumerate() {
        let header = FileHeader {
            version: VERSION,
            nx: n as u32,
            ny: 1,
            nz: 1,
            total_frames: total,
            first_frame: first,
            frame_count: count,
            dt,
        };
        let mut records = Vec::new();
        for f in first..first + count {
            let positions: Vec<f32> = (0..3 * n).map(|c| value_of(f, c)).collect();
            let velocities: Vec<f32> = (0..3 * n).map(|c| -value_of(f, c)).collect();
            records.push(FrameRecord {
                frame_index: f,
                time: f as f64 * dt,
                positions,
                velocities,
            });
        }
        let path = dir.join(format!("part_{i:03}.faf"));
        framearc::write_file(&path, &header, &records).expect("write_file");
        paths.push(path);
    }
    paths
}

/// Simple deterministic value generator for hand-built frames.
pub fn checker(frame: u64, component: usize) -> f32 {
    (frame as f32) * 100.0 + component as f32
}
