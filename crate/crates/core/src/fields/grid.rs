use crate::error::{Error, Result};

/// Regular 3-D voxel lattice: per-axis sample counts plus physical voxel
/// spacing in millimetres. All field math in this crate runs in voxel
/// coordinates; spacing only enters mm-denominated reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid3 {
    nx: usize,
    ny: usize,
    nz: usize,
    sx: f64,
    sy: f64,
    sz: f64,
}

impl Grid3 {
    /// Grid with unit (1 mm) spacing. Each axis needs at least two samples
    /// so finite differences are defined everywhere.
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        Self::with_spacing(nx, ny, nz, 1.0, 1.0, 1.0)
    }

    pub fn with_spacing(nx: usize, ny: usize, nz: usize, sx: f64, sy: f64, sz: f64) -> Result<Self> {
        if nx < 2 || ny < 2 || nz < 2 {
            return Err(Error::InvalidGrid(format!(
                "each axis needs at least 2 voxels, got {nx}x{ny}x{nz}"
            )));
        }
        for s in [sx, sy, sz] {
            if !s.is_finite() || s <= 0.0 {
                return Err(Error::InvalidGrid(format!("spacing must be positive, got {s}")));
            }
        }
        Ok(Self { nx, ny, nz, sx, sy, sz })
    }

    /// Cube grid with unit spacing, for tests and synthetic data.
    pub fn cube(n: usize) -> Result<Self> {
        Self::new(n, n, n)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.nx, self.ny, self.nz)
    }

    pub fn spacing(&self) -> (f64, f64, f64) {
        (self.sx, self.sy, self.sz)
    }

    /// Total voxel count.
    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees at least 8 voxels
    }

    /// Linear index of voxel (i, j, k); x is the fastest axis.
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny && k < self.nz);
        i + self.nx * (j + self.ny * k)
    }

    /// Inverse of [`Grid3::index`].
    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let i = idx % self.nx;
        let rest = idx / self.nx;
        (i, rest % self.ny, rest / self.ny)
    }

    /// True on the outermost one-voxel shell.
    #[inline]
    pub fn is_boundary(&self, i: usize, j: usize, k: usize) -> bool {
        i == 0 || j == 0 || k == 0 || i == self.nx - 1 || j == self.ny - 1 || k == self.nz - 1
    }

    /// Same dimensions and spacing up to a small relative tolerance.
    /// Spacing passes through 32-bit storage on disk, so exact comparison
    /// would spuriously reject volumes read back from files.
    pub fn compatible(&self, other: &Grid3) -> bool {
        const TOL: f64 = 1e-5;
        let close = |a: f64, b: f64| (a - b).abs() <= TOL * a.abs().max(b.abs()).max(1.0);
        self.dims() == other.dims()
            && close(self.sx, other.sx)
            && close(self.sy, other.sy)
            && close(self.sz, other.sz)
    }

    pub(crate) fn ensure_compatible(&self, other: &Grid3, what: &str) -> Result<()> {
        if self.compatible(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{what}: {:?}/{:?} vs {:?}/{:?}",
                self.dims(),
                self.spacing(),
                other.dims(),
                other.spacing()
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_axes_and_spacing() {
        assert!(Grid3::new(1, 4, 4).is_err());
        assert!(Grid3::new(4, 4, 1).is_err());
        assert!(Grid3::with_spacing(4, 4, 4, 0.0, 1.0, 1.0).is_err());
        assert!(Grid3::with_spacing(4, 4, 4, 1.0, -2.0, 1.0).is_err());
        assert!(Grid3::with_spacing(4, 4, 4, 1.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn index_roundtrip() {
        let g = Grid3::new(3, 4, 5).unwrap();
        for idx in 0..g.len() {
            let (i, j, k) = g.coords(idx);
            assert_eq!(g.index(i, j, k), idx);
        }
    }

    #[test]
    fn compatible_tolerates_f32_spacing() {
        let a = Grid3::with_spacing(4, 4, 4, 0.3, 1.0, 1.0).unwrap();
        let b = Grid3::with_spacing(4, 4, 4, 0.3f32 as f64, 1.0, 1.0).unwrap();
        assert!(a.compatible(&b));
        let c = Grid3::with_spacing(4, 4, 4, 0.4, 1.0, 1.0).unwrap();
        assert!(!a.compatible(&c));
    }
}
