//! Pass planning: the minimal number of sequential sweeps over the dataset
//! for a set of multi-phase calculations, opening only the files a pass
//! actually needs.
//!
//! Phase k of every calculation shares pass k. Under the one-sweep-per-phase
//! model this yields max-phase-count passes, which is minimal, so planning
//! needs no search.

use std::path::PathBuf;

use thiserror::Error;

use crate::framearc::{record_len, DatasetManifest, HEADER_LEN};
use crate::model::GridMeta;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("calculation {calc_id}: window [{lo}, {hi}) invalid for dataset of {total} frames")]
    InvalidWindow {
        calc_id: String,
        lo: u64,
        hi: u64,
        total: u64,
    },
    #[error("calculation {calc_id} declares no phases")]
    NoPhases { calc_id: String },
}

/// What one phase of a calculation needs from the stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseSpec {
    /// Half-open frame interval.
    pub window: (u64, u64),
    pub needs_positions: bool,
    pub needs_velocities: bool,
}

impl PhaseSpec {
    pub fn full(total_frames: u64, positions: bool, velocities: bool) -> Self {
        PhaseSpec {
            window: (0, total_frames),
            needs_positions: positions,
            needs_velocities: velocities,
        }
    }
}

/// The ordered phase list of one calculation. Phase p+1 may only run after
/// phase p completed a full sweep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CalculationRequirements {
    pub calc_id: String,
    pub phases: Vec<PhaseSpec>,
}

/// One file opened by a pass, with its frame range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PassFile {
    pub path: PathBuf,
    pub first_frame: u64,
    pub frame_count: u64,
}

/// One sequential sweep: the active (calc, phase) pairs, the files to open
/// in ascending frame order, and the merged union of active windows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pass {
    pub active: Vec<(String, usize)>,
    pub files: Vec<PassFile>,
    /// Disjoint ascending half-open intervals.
    pub frame_window_union: Vec<(u64, u64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PassPlan {
    pub passes: Vec<Pass>,
}

impl PassPlan {
    pub fn pass_count(&self) -> usize {
        self.passes.len()
    }
}

/// Merges intervals into a disjoint ascending list.
pub fn merge_intervals(mut intervals: Vec<(u64, u64)>) -> Vec<(u64, u64)> {
    intervals.retain(|&(lo, hi)| lo < hi);
    intervals.sort();
    let mut merged: Vec<(u64, u64)> = Vec::with_capacity(intervals.len());
    for (lo, hi) in intervals {
        match merged.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => merged.push((lo, hi)),
        }
    }
    merged
}

fn intersect_len(a: (u64, u64), b: (u64, u64)) -> u64 {
    let lo = a.0.max(b.0);
    let hi = a.1.min(b.1);
    hi.saturating_sub(lo)
}

/// Plans the pass schedule for a requirement set over a manifest.
///
/// Pass k contains phase k of every calculation with more than k phases;
/// its file list is exactly those manifest files whose range intersects the
/// union of active windows, ascending.
pub fn plan_passes(
    reqs: &[CalculationRequirements],
    manifest: &DatasetManifest,
) -> Result<PassPlan, PlanError> {
    let total = manifest.grid.total_frames;
    for r in reqs {
        if r.phases.is_empty() {
            return Err(PlanError::NoPhases {
                calc_id: r.calc_id.clone(),
            });
        }
        for p in &r.phases {
            let (lo, hi) = p.window;
            if lo >= hi || hi > total {
                return Err(PlanError::InvalidWindow {
                    calc_id: r.calc_id.clone(),
                    lo,
                    hi,
                    total,
                });
            }
        }
    }
    let pass_count = reqs.iter().map(|r| r.phases.len()).max().unwrap_or(0);
    let mut passes = Vec::with_capacity(pass_count);
    for k in 0..pass_count {
        let mut active = Vec::new();
        let mut windows = Vec::new();
        for r in reqs {
            if let Some(p) = r.phases.get(k) {
                active.push((r.calc_id.clone(), k));
                windows.push(p.window);
            }
        }
        let union = merge_intervals(windows);
        let files = manifest
            .files
            .iter()
            .filter(|f| {
                let range = f.range();
                union.iter().any(|&w| intersect_len(range, w) > 0)
            })
            .map(|f| PassFile {
                path: f.path.clone(),
                first_frame: f.header.first_frame,
                frame_count: f.header.frame_count,
            })
            .collect();
        passes.push(Pass {
            active,
            files,
            frame_window_union: union,
        });
    }
    Ok(PassPlan { passes })
}

/// Total bytes a plan will read: per pass, one header per opened file plus
/// one record per frame in the intersection of the file's range with the
/// window union.
pub fn planned_bytes(plan: &PassPlan, grid: &GridMeta) -> u64 {
    let record_size = record_len(grid.brick_count());
    let mut bytes = 0u64;
    for pass in &plan.passes {
        for f in &pass.files {
            bytes += HEADER_LEN;
            let range = (f.first_frame, f.first_frame + f.frame_count);
            let frames: u64 = pass
                .frame_window_union
                .iter()
                .map(|&w| intersect_len(range, w))
                .sum();
            bytes += frames * record_size;
        }
    }
    bytes
}

/// Frames decoded per pass (size of the window union).
pub fn planned_frames(plan: &PassPlan) -> Vec<u64> {
    plan.passes
        .iter()
        .map(|p| p.frame_window_union.iter().map(|&(lo, hi)| hi - lo).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_handles_overlap_and_adjacency() {
        assert_eq!(
            merge_intervals(vec![(4, 8), (0, 2), (2, 5), (9, 9)]),
            vec![(0, 8)]
        );
        assert_eq!(
            merge_intervals(vec![(0, 2), (3, 4)]),
            vec![(0, 2), (3, 4)]
        );
    }
}
