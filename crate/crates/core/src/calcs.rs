//! Built-in calculations exercising the plugin contract; one feeds each
//! plot type. Displacements are measured from the first frame of the window,
//! so a static dataset yields zeros everywhere.

use thiserror::Error;

use crate::engine::{CalcError, CalculationPlugin};
use crate::model::{make_result, FrameView, GridMeta, ResultArray};
use crate::scheduler::{CalculationRequirements, PhaseSpec};

#[derive(Debug, Error)]
pub enum CalcSetupError {
    #[error("invalid selector ({ix}, {iy}) for grid {nx}x{ny}")]
    InvalidSelector {
        ix: usize,
        iy: usize,
        nx: usize,
        ny: usize,
    },
    #[error("unknown calculation kind {0:?}")]
    UnknownKind(String),
}

/// Column coordinates for channel-wise calculations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelSelector {
    pub ix: usize,
    pub iy: usize,
}

impl ChannelSelector {
    pub fn validate(&self, grid: &GridMeta) -> Result<(), CalcSetupError> {
        if self.ix >= grid.nx || self.iy >= grid.ny {
            return Err(CalcSetupError::InvalidSelector {
                ix: self.ix,
                iy: self.iy,
                nx: grid.nx,
                ny: grid.ny,
            });
        }
        Ok(())
    }
}

fn norm3(dx: f64, dy: f64, dz: f64) -> f64 {
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Per-brick peak displacement magnitude over time, shape (nx, ny, nz, 1).
pub struct PeakDisplacement {
    id: String,
    grid: GridMeta,
    first: Option<Vec<f64>>,
    peaks: Vec<f64>,
}

impl PeakDisplacement {
    pub fn new(id: &str, grid: GridMeta) -> Self {
        let n = grid.brick_count();
        PeakDisplacement {
            id: id.to_string(),
            grid,
            first: None,
            peaks: vec![0.0; n],
        }
    }
}

impl CalculationPlugin for PeakDisplacement {
    fn id(&self) -> &str {
        &self.id
    }

    fn requirements(&self) -> CalculationRequirements {
        CalculationRequirements {
            calc_id: self.id.clone(),
            phases: vec![PhaseSpec::full(self.grid.total_frames, true, false)],
        }
    }

    fn on_frame(&mut self, _phase: usize, frame: &FrameView, grid: &GridMeta)
        -> Result<(), CalcError> {
        let first = self
            .first
            .get_or_insert_with(|| frame.positions.clone());
        for b in 0..grid.brick_count() {
            let d = norm3(
                frame.positions[3 * b] - first[3 * b],
                frame.positions[3 * b + 1] - first[3 * b + 1],
                frame.positions[3 * b + 2] - first[3 * b + 2],
            );
            if d > self.peaks[b] {
                self.peaks[b] = d;
            }
        }
        Ok(())
    }

    fn finalize(&mut self) -> Result<Vec<ResultArray>, CalcError> {
        let g = &self.grid;
        let arr = make_result(
            &self.id,
            "m",
            [g.nx, g.ny, g.nz, 1],
            std::mem::take(&mut self.peaks),
        )
        .map_err(|e| CalcError::new(e.to_string()))?;
        Ok(vec![arr])
    }
}

/// X and Y displacement of one vertical column against the first frame,
/// two arrays dx, dy of shape (1, 1, nz, T).
pub struct ChannelDistortion {
    id: String,
    grid: GridMeta,
    sel: ChannelSelector,
    first: Option<Vec<f64>>,
    dx: Vec<f64>,
    dy: Vec<f64>,
}

impl ChannelDistortion {
    pub fn new(
        id: &str,
        grid: GridMeta,
        sel: ChannelSelector,
    ) -> Result<Self, CalcSetupError> {
        sel.validate(&grid)?;
        let len = grid.nz * grid.total_frames as usize;
        Ok(ChannelDistortion {
            id: id.to_string(),
            grid,
            sel,
            first: None,
            dx: vec![0.0; len],
            dy: vec![0.0; len],
        })
    }
}

impl CalculationPlugin for ChannelDistortion {
    fn id(&self) -> &str {
        &self.id
    }

    fn fingerprint(&self) -> String {
        format!("{} ix={} iy={}", self.id, self.sel.ix, self.sel.iy)
    }

    fn requirements(&self) -> CalculationRequirements {
        CalculationRequirements {
            calc_id: self.id.clone(),
            phases: vec![PhaseSpec::full(self.grid.total_frames, true, false)],
        }
    }

    fn on_frame(&mut self, _phase: usize, frame: &FrameView, grid: &GridMeta)
        -> Result<(), CalcError> {
        let first = self
            .first
            .get_or_insert_with(|| frame.positions.clone());
        let t = frame.frame_index as usize;
        for iz in 0..grid.nz {
            let b = grid.brick_index(self.sel.ix, self.sel.iy, iz);
            // (1,1,nz,T) layout is z-fastest within a time step.
            let o = iz + grid.nz * t;
            self.dx[o] = frame.positions[3 * b] - first[3 * b];
            self.dy[o] = frame.positions[3 * b + 1] - first[3 * b + 1];
        }
        Ok(())
    }

    fn finalize(&mut self) -> Result<Vec<ResultArray>, CalcError> {
        let g = &self.grid;
        let shape = [1, 1, g.nz, g.total_frames as usize];
        let dx = make_result(&format!("{}_dx", self.id), "m", shape, std::mem::take(&mut self.dx))
            .map_err(|e| CalcError::new(e.to_string()))?;
        let dy = make_result(&format!("{}_dy", self.id), "m", shape, std::mem::take(&mut self.dy))
            .map_err(|e| CalcError::new(e.to_string()))?;
        Ok(vec![dx, dy])
    }
}

/// Root-mean-square velocity magnitude over all bricks per time step,
/// shape (1, 1, 1, T).
pub struct RmsVelocity {
    id: String,
    grid: GridMeta,
    values: Vec<f64>,
}

impl RmsVelocity {
    pub fn new(id: &str, grid: GridMeta) -> Self {
        let t = grid.total_frames as usize;
        RmsVelocity {
            id: id.to_string(),
            grid,
            values: vec![0.0; t],
        }
    }
}

impl CalculationPlugin for RmsVelocity {
    fn id(&self) -> &str {
        &self.id
    }

    fn requirements(&self) -> CalculationRequirements {
        CalculationRequirements {
            calc_id: self.id.clone(),
            phases: vec![PhaseSpec::full(self.grid.total_frames, false, true)],
        }
    }

    fn on_frame(&mut self, _phase: usize, frame: &FrameView, grid: &GridMeta)
        -> Result<(), CalcError> {
        let n = grid.brick_count();
        let mut sum = 0.0;
        for b in 0..n {
            let v = frame.velocity(b);
            sum += v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        }
        self.values[frame.frame_index as usize] = (sum / n as f64).sqrt();
        Ok(())
    }

    fn finalize(&mut self) -> Result<Vec<ResultArray>, CalcError> {
        let t = self.grid.total_frames as usize;
        let arr = make_result(&self.id, "m/s", [1, 1, 1, t], std::mem::take(&mut self.values))
            .map_err(|e| CalcError::new(e.to_string()))?;
        Ok(vec![arr])
    }
}

/// Per-brick peak displacement normalized by the global peak, computed in
/// two phases: phase 0 finds the global maximum D*, phase 1 re-reads the
/// window and divides per-brick peaks by it. If D* = 0 all values are 0.
pub struct NormalizedPeak {
    id: String,
    grid: GridMeta,
    first: Option<Vec<f64>>,
    global_max: f64,
    peaks: Vec<f64>,
}

impl NormalizedPeak {
    pub fn new(id: &str, grid: GridMeta) -> Self {
        let n = grid.brick_count();
        NormalizedPeak {
            id: id.to_string(),
            grid,
            first: None,
            global_max: 0.0,
            peaks: vec![0.0; n],
        }
    }
}

impl CalculationPlugin for NormalizedPeak {
    fn id(&self) -> &str {
        &self.id
    }

    fn requirements(&self) -> CalculationRequirements {
        let full = PhaseSpec::full(self.grid.total_frames, true, false);
        CalculationRequirements {
            calc_id: self.id.clone(),
            phases: vec![full.clone(), full],
        }
    }

    fn on_frame(&mut self, phase: usize, frame: &FrameView, grid: &GridMeta)
        -> Result<(), CalcError> {
        let first = self
            .first
            .get_or_insert_with(|| frame.positions.clone());
        for b in 0..grid.brick_count() {
            let d = norm3(
                frame.positions[3 * b] - first[3 * b],
                frame.positions[3 * b + 1] - first[3 * b + 1],
                frame.positions[3 * b + 2] - first[3 * b + 2],
            );
            match phase {
                0 => {
                    if d > self.global_max {
                        self.global_max = d;
                    }
                }
                _ => {
                    if d > self.peaks[b] {
                        self.peaks[b] = d;
                    }
                }
            }
        }
        Ok(())
    }

    fn finalize(&mut self) -> Result<Vec<ResultArray>, CalcError> {
        let g = &self.grid;
        let mut values = std::mem::take(&mut self.peaks);
        if self.global_max > 0.0 {
            for v in values.iter_mut() {
                *v /= self.global_max;
            }
        } else {
            values.iter_mut().for_each(|v| *v = 0.0);
        }
        let arr = make_result(&self.id, "", [g.nx, g.ny, g.nz, 1], values)
            .map_err(|e| CalcError::new(e.to_string()))?;
        Ok(vec![arr])
    }
}

/// Diagnostic calculation that fails deliberately partway through the
/// stream (at frame 2, or the first frame of shorter datasets). Exists so
/// failure reporting and isolation can be exercised end to end from the
/// command line.
pub struct FaultProbe {
    id: String,
    grid: GridMeta,
}

impl FaultProbe {
    pub fn new(id: &str, grid: GridMeta) -> Self {
        FaultProbe {
            id: id.to_string(),
            grid,
        }
    }
}

impl CalculationPlugin for FaultProbe {
    fn id(&self) -> &str {
        &self.id
    }

    fn requirements(&self) -> CalculationRequirements {
        CalculationRequirements {
            calc_id: self.id.clone(),
            phases: vec![PhaseSpec::full(self.grid.total_frames, true, false)],
        }
    }

    fn on_frame(&mut self, _phase: usize, frame: &FrameView, _grid: &GridMeta)
        -> Result<(), CalcError> {
        let fail_at = 2.min(self.grid.total_frames - 1);
        if frame.frame_index >= fail_at {
            return Err(CalcError::new("fault probe tripped"));
        }
        Ok(())
    }

    fn finalize(&mut self) -> Result<Vec<ResultArray>, CalcError> {
        Err(CalcError::new("fault probe produces no results"))
    }
}

/// Builds a built-in calculation by kind name; selector params apply to
/// `channel_distortion` only.
pub fn build_calculation(
    kind: &str,
    id: &str,
    grid: &GridMeta,
    selector: Option<ChannelSelector>,
) -> Result<Box<dyn CalculationPlugin>, CalcSetupError> {
    match kind {
        "peak_displacement" => Ok(Box::new(PeakDisplacement::new(id, grid.clone()))),
        "channel_distortion" => {
            let sel = selector.unwrap_or(ChannelSelector { ix: 0, iy: 0 });
            Ok(Box::new(ChannelDistortion::new(id, grid.clone(), sel)?))
        }
        "rms_velocity" => Ok(Box::new(RmsVelocity::new(id, grid.clone()))),
        "normalized_peak" => Ok(Box::new(NormalizedPeak::new(id, grid.clone()))),
        "fault_probe" => Ok(Box::new(FaultProbe::new(id, grid.clone()))),
        other => Err(CalcSetupError::UnknownKind(other.to_string())),
    }
}

/// Kinds accepted by `build_calculation`.
pub const CALC_KINDS: [&str; 4] = [
    "peak_displacement",
    "channel_distortion",
    "rms_velocity",
    "normalized_peak",
];
