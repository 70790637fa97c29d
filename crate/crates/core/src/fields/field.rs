use crate::error::{Error, Result};
use crate::fields::Grid3;
use crate::par;

/// Semantic tag of a three-component voxel field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// A map of the grid onto itself, phi(p) = p + u(p).
    Transformation,
    /// Offsets u(p) = phi(p) - p.
    Displacement,
    /// Stationary velocity whose flow yields a transformation.
    Velocity,
    /// Rotation components extracted from a transformation.
    Curl,
}

impl FieldKind {
    pub fn name(&self) -> &'static str {
        match self {
            FieldKind::Transformation => "transformation",
            FieldKind::Displacement => "displacement",
            FieldKind::Velocity => "velocity",
            FieldKind::Curl => "curl",
        }
    }
}

/// Three real components per voxel, in voxel units, x-fastest order.
///
/// Transformation fields store their *offsets from the identity map*, not
/// absolute positions; `value_at` materializes phi(p) = p + u(p) on demand.
/// This makes transformation <-> displacement conversion a pure retag (exact
/// both ways) and keeps positions out of the arithmetic everywhere else.
/// All other kinds store their values directly.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid3,
    kind: FieldKind,
    data: Vec<[f64; 3]>,
}

impl VectorField {
    /// The identity transformation: phi(i,j,k) = (i,j,k).
    pub fn identity(grid: Grid3) -> Self {
        Self { grid, kind: FieldKind::Transformation, data: vec![[0.0; 3]; grid.len()] }
    }

    pub fn zeros(grid: Grid3, kind: FieldKind) -> Self {
        Self { grid, kind, data: vec![[0.0; 3]; grid.len()] }
    }

    /// Wrap raw component storage: offsets for transformations, plain values
    /// otherwise.
    pub fn from_raw(grid: Grid3, kind: FieldKind, data: Vec<[f64; 3]>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "field data length {} does not match grid voxel count {}",
                data.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, kind, data })
    }

    /// Build from a per-voxel function giving the *stored* components
    /// (offsets for transformations).
    pub fn from_fn_raw<F>(grid: Grid3, kind: FieldKind, f: F) -> Self
    where
        F: Fn(usize, usize, usize) -> [f64; 3] + Sync,
    {
        let mut data = vec![[0.0; 3]; grid.len()];
        par::fill_indexed(&mut data, |idx| {
            let (i, j, k) = grid.coords(idx);
            f(i, j, k)
        });
        Self { grid, kind, data }
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    /// Stored components (offsets for transformation fields).
    pub fn raw(&self) -> &[[f64; 3]] {
        &self.data
    }

    pub fn raw_mut(&mut self) -> &mut [[f64; 3]] {
        &mut self.data
    }

    #[inline]
    pub(crate) fn raw_at(&self, idx: usize) -> [f64; 3] {
        self.data[idx]
    }

    /// Semantic value at a voxel: phi(p) for transformations, the stored
    /// components for every other kind.
    #[inline]
    pub fn value_at(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        let v = self.data[self.grid.index(i, j, k)];
        match self.kind {
            FieldKind::Transformation => [v[0] + i as f64, v[1] + j as f64, v[2] + k as f64],
            _ => v,
        }
    }

    /// Offset from identity at a voxel. For displacement and transformation
    /// fields this is u(p); other kinds have no identity part, so it is the
    /// stored value.
    #[inline]
    pub fn offset_at(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        self.data[self.grid.index(i, j, k)]
    }

    /// Retag a transformation as the displacement u = phi - id. Exact.
    pub fn into_displacement(self) -> Result<Self> {
        match self.kind {
            FieldKind::Transformation | FieldKind::Displacement => {
                Ok(Self { kind: FieldKind::Displacement, ..self })
            }
            k => Err(Error::InvalidKind { expected: "transformation or displacement", got: k.name() }),
        }
    }

    /// Retag a displacement as the transformation phi = id + u. Exact.
    pub fn into_transformation(self) -> Result<Self> {
        match self.kind {
            FieldKind::Transformation | FieldKind::Displacement => {
                Ok(Self { kind: FieldKind::Transformation, ..self })
            }
            k => Err(Error::InvalidKind { expected: "transformation or displacement", got: k.name() }),
        }
    }

    /// Same components under a different tag (velocity -> displacement etc.).
    pub fn retag(self, kind: FieldKind) -> Self {
        Self { kind, ..self }
    }

    /// Component-wise negation of the stored data.
    pub fn negated(&self) -> Self {
        let mut data = vec![[0.0; 3]; self.data.len()];
        par::fill_indexed(&mut data, |i| {
            let v = self.data[i];
            [-v[0], -v[1], -v[2]]
        });
        Self { grid: self.grid, kind: self.kind, data }
    }

    /// Largest |component| over the stored data.
    pub fn max_abs_component(&self) -> f64 {
        par::max_indexed(self.data.len(), |i| {
            let v = self.data[i];
            v[0].abs().max(v[1].abs()).max(v[2].abs())
        })
    }

    /// Mean Euclidean norm of the stored components; for transformation
    /// fields this is the mean voxel distance from the identity map.
    pub fn mean_offset_magnitude(&self) -> f64 {
        let n = self.data.len();
        par::sum_indexed(n, |i| {
            let v = self.data[i];
            (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
        }) / n as f64
    }

    pub fn all_finite(&self) -> bool {
        par::count_indexed(self.data.len(), |i| {
            let v = self.data[i];
            !(v[0].is_finite() && v[1].is_finite() && v[2].is_finite())
        }) == 0
    }

    pub(crate) fn ensure_kind(&self, expected: FieldKind) -> Result<()> {
        if self.kind == expected {
            Ok(())
        } else {
            Err(Error::InvalidKind { expected: expected.name(), got: self.kind.name() })
        }
    }
}
