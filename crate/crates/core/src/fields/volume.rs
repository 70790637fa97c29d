use crate::error::{Error, Result};
use crate::fields::Grid3;
use crate::par;

/// What the per-voxel scalar means.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarKind {
    /// Image intensity.
    Intensity,
    /// Local volume-change ratio of a transformation.
    Jacobian,
    /// Integer segmentation label.
    Label,
}

impl ScalarKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScalarKind::Intensity => "intensity",
            ScalarKind::Jacobian => "jacobian",
            ScalarKind::Label => "label",
        }
    }
}

/// One real value per voxel, x-fastest linear order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarVolume {
    grid: Grid3,
    kind: ScalarKind,
    data: Vec<f64>,
}

impl ScalarVolume {
    pub fn new(grid: Grid3, kind: ScalarKind, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "volume data length {} does not match grid voxel count {}",
                data.len(),
                grid.len()
            )));
        }
        if kind == ScalarKind::Label {
            validate_labels(&data)?;
        }
        Ok(Self { grid, kind, data })
    }

    pub fn constant(grid: Grid3, kind: ScalarKind, value: f64) -> Self {
        Self { grid, kind, data: vec![value; grid.len()] }
    }

    pub fn zeros(grid: Grid3, kind: ScalarKind) -> Self {
        Self::constant(grid, kind, 0.0)
    }

    /// Build from a per-voxel function of (i, j, k).
    pub fn from_fn<F>(grid: Grid3, kind: ScalarKind, f: F) -> Self
    where
        F: Fn(usize, usize, usize) -> f64 + Sync,
    {
        let mut data = vec![0.0; grid.len()];
        par::fill_indexed(&mut data, |idx| {
            let (i, j, k) = grid.coords(idx);
            f(i, j, k)
        });
        Self { grid, kind, data }
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn kind(&self) -> ScalarKind {
        self.kind
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.grid.index(i, j, k)]
    }

    /// Reinterpret with a different kind; label conversion re-validates.
    pub fn into_kind(self, kind: ScalarKind) -> Result<Self> {
        if kind == ScalarKind::Label {
            validate_labels(&self.data)?;
        }
        Ok(Self { kind, ..self })
    }

    pub fn mean(&self) -> f64 {
        par::sum_indexed(self.data.len(), |i| self.data[i]) / self.data.len() as f64
    }

    pub fn min_max(&self) -> (f64, f64) {
        let max = par::max_indexed(self.data.len(), |i| self.data[i]);
        let min = -par::max_indexed(self.data.len(), |i| -self.data[i]);
        (min, max)
    }

    pub fn all_finite(&self) -> bool {
        par::count_indexed(self.data.len(), |i| !self.data[i].is_finite()) == 0
    }
}

fn validate_labels(data: &[f64]) -> Result<()> {
    const MAX_EXACT: f64 = 9.007_199_254_740_992e15; // 2^53
    let bad = par::count_indexed(data.len(), |i| {
        let v = data[i];
        !(v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= MAX_EXACT)
    });
    if bad > 0 {
        Err(Error::InvalidArgument(format!(
            "label volume contains {bad} values that are not exact non-negative integers"
        )))
    } else {
        Ok(())
    }
}
