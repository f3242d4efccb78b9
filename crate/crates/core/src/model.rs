//! Grid, frame, and 4-axis result-array types shared by every other module.
//!
//! Result arrays carry a fixed axis order of three spatial dimensions
//! followed by time, `(x, y, z, t)`, with x-fastest linear layout. Reductions
//! collapse axes to size 1 and mark them as collapsed.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised by the in-memory model types.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("size mismatch: shape {shape:?} implies {expected} values, got {actual}")]
    SizeMismatch {
        shape: [usize; 4],
        expected: usize,
        actual: usize,
    },
    #[error("invalid reduction: axis {axis} is already collapsed")]
    InvalidReduction { axis: Axis },
    #[error("invalid reduction: no axes given")]
    EmptyReduction,
    #[error("index {index} out of bounds for axis {axis} of extent {extent}")]
    IndexOutOfBounds {
        axis: Axis,
        index: usize,
        extent: usize,
    },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("frame data length {actual} does not match 3*N = {expected}")]
    FrameLenMismatch { expected: usize, actual: usize },
}

/// One of the four standardized axes: three spatial, then time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
    T,
}

impl Axis {
    pub const ALL: [Axis; 4] = [Axis::X, Axis::Y, Axis::Z, Axis::T];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
            Axis::T => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
            Axis::T => "t",
        }
    }

    pub fn parse(s: &str) -> Option<Axis> {
        match s {
            "x" => Some(Axis::X),
            "y" => Some(Axis::Y),
            "z" => Some(Axis::Z),
            "t" => Some(Axis::T),
            _ => None,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Brick-lattice dimensions, frame count, and timestep; the shared context
/// for all data in a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub total_frames: u64,
    /// Seconds per frame.
    pub dt: f64,
}

impl GridMeta {
    pub fn new(
        nx: usize,
        ny: usize,
        nz: usize,
        total_frames: u64,
        dt: f64,
    ) -> Result<Self, ModelError> {
        if nx < 1 || ny < 1 || nz < 1 {
            return Err(ModelError::InvalidGrid(format!(
                "brick counts must be >= 1, got {nx}x{ny}x{nz}"
            )));
        }
        if total_frames < 1 {
            return Err(ModelError::InvalidGrid("total_frames must be >= 1".into()));
        }
        if !(dt > 0.0) {
            return Err(ModelError::InvalidGrid(format!("dt must be > 0, got {dt}")));
        }
        Ok(GridMeta {
            nx,
            ny,
            nz,
            total_frames,
            dt,
        })
    }

    /// Total brick count N = nx * ny * nz.
    pub fn brick_count(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    /// Linear brick index, x-fastest: ix + nx*(iy + ny*iz).
    pub fn brick_index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        debug_assert!(ix < self.nx && iy < self.ny && iz < self.nz);
        ix + self.nx * (iy + self.ny * iz)
    }
}

/// One time-step's decoded positions and velocities as flat float sequences,
/// brick-major with component order x, y, z.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameView {
    pub frame_index: u64,
    pub time: f64,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
}

impl FrameView {
    pub fn new(
        frame_index: u64,
        time: f64,
        positions: Vec<f64>,
        velocities: Vec<f64>,
        grid: &GridMeta,
    ) -> Result<Self, ModelError> {
        let expected = 3 * grid.brick_count();
        for len in [positions.len(), velocities.len()] {
            if len != expected {
                return Err(ModelError::FrameLenMismatch {
                    expected,
                    actual: len,
                });
            }
        }
        Ok(FrameView {
            frame_index,
            time,
            positions,
            velocities,
        })
    }

    /// Position of brick `b` as an (x, y, z) triple.
    pub fn position(&self, b: usize) -> [f64; 3] {
        [
            self.positions[3 * b],
            self.positions[3 * b + 1],
            self.positions[3 * b + 2],
        ]
    }

    /// Velocity of brick `b` as an (x, y, z) triple.
    pub fn velocity(&self, b: usize) -> [f64; 3] {
        [
            self.velocities[3 * b],
            self.velocities[3 * b + 1],
            self.velocities[3 * b + 2],
        ]
    }
}

/// Standardized 4-axis (x, y, z, t) float array with collapse flags.
///
/// Values are stored x-fastest, then y, z, t. A collapsed axis has size 1
/// and marks that a reduction removed it.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultArray {
    name: String,
    units: String,
    shape: [usize; 4],
    collapsed: [bool; 4],
    values: Vec<f64>,
}

/// Builds a `ResultArray`, deriving collapse flags from size-1 axes.
pub fn make_result(
    name: &str,
    units: &str,
    shape: [usize; 4],
    values: Vec<f64>,
) -> Result<ResultArray, ModelError> {
    let expected: usize = shape.iter().product();
    if shape.iter().any(|&s| s < 1) || expected != values.len() {
        return Err(ModelError::SizeMismatch {
            shape,
            expected,
            actual: values.len(),
        });
    }
    let collapsed = [
        shape[0] == 1,
        shape[1] == 1,
        shape[2] == 1,
        shape[3] == 1,
    ];
    Ok(ResultArray {
        name: name.to_string(),
        units: units.to_string(),
        shape,
        collapsed,
        values,
    })
}

impl ResultArray {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn units(&self) -> &str {
        &self.units
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn collapsed(&self) -> [bool; 4] {
        self.collapsed
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Linear index for coordinates (i, j, k, l), x-fastest.
    pub fn offset(&self, c: [usize; 4]) -> usize {
        c[0] + self.shape[0] * (c[1] + self.shape[1] * (c[2] + self.shape[2] * c[3]))
    }

    pub fn get(&self, c: [usize; 4]) -> f64 {
        self.values[self.offset(c)]
    }

    /// Maximum over the given axes; reduced axes collapse to size 1.
    pub fn reduce_max(&self, axes: &[Axis]) -> Result<ResultArray, ModelError> {
        if axes.is_empty() {
            return Err(ModelError::EmptyReduction);
        }
        let mut reduce = [false; 4];
        for &a in axes {
            if self.collapsed[a.index()] {
                return Err(ModelError::InvalidReduction { axis: a });
            }
            reduce[a.index()] = true;
        }
        let mut out_shape = self.shape;
        let mut out_collapsed = self.collapsed;
        for i in 0..4 {
            if reduce[i] {
                out_shape[i] = 1;
                out_collapsed[i] = true;
            }
        }
        let out_len: usize = out_shape.iter().product();
        let mut out = vec![f64::NEG_INFINITY; out_len];
        for (lin, &v) in self.values.iter().enumerate() {
            let c = self.coords(lin);
            let oc = [
                if reduce[0] { 0 } else { c[0] },
                if reduce[1] { 0 } else { c[1] },
                if reduce[2] { 0 } else { c[2] },
                if reduce[3] { 0 } else { c[3] },
            ];
            let oi = oc[0] + out_shape[0] * (oc[1] + out_shape[1] * (oc[2] + out_shape[2] * oc[3]));
            if v > out[oi] {
                out[oi] = v;
            }
        }
        Ok(ResultArray {
            name: self.name.clone(),
            units: self.units.clone(),
            shape: out_shape,
            collapsed: out_collapsed,
            values: out,
        })
    }

    /// Selects the hyperplane at `index` along `axis`; the axis collapses.
    pub fn slice_axis(&self, axis: Axis, index: usize) -> Result<ResultArray, ModelError> {
        let ai = axis.index();
        if index >= self.shape[ai] {
            return Err(ModelError::IndexOutOfBounds {
                axis,
                index,
                extent: self.shape[ai],
            });
        }
        let mut out_shape = self.shape;
        out_shape[ai] = 1;
        let mut out_collapsed = self.collapsed;
        out_collapsed[ai] = true;
        let out_len: usize = out_shape.iter().product();
        let mut out = Vec::with_capacity(out_len);
        for lin in 0..self.values.len() {
            let c = self.coords(lin);
            if c[ai] == index {
                out.push(self.values[lin]);
            }
        }
        Ok(ResultArray {
            name: self.name.clone(),
            units: self.units.clone(),
            shape: out_shape,
            collapsed: out_collapsed,
            values: out,
        })
    }

    fn coords(&self, mut lin: usize) -> [usize; 4] {
        let mut c = [0usize; 4];
        for i in 0..4 {
            c[i] = lin % self.shape[i];
            lin /= self.shape[i];
        }
        c
    }
}
