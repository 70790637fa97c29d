//! PNG slice export: grayscale for scalar volumes, per-component RGB for
//! vector fields. Normalization is min-max over the exported slice, so the
//! images are for inspection, not quantitative readout.

use std::path::Path;

use diffeo_core::fields::{ScalarVolume, VectorField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceAxis {
    X,
    Y,
    Z,
}

impl std::str::FromStr for SliceAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "x" | "X" => Ok(Self::X),
            "y" | "Y" => Ok(Self::Y),
            "z" | "Z" => Ok(Self::Z),
            other => Err(format!("axis must be x, y or z, got '{other}'")),
        }
    }
}

type PixelLookup = Box<dyn Fn(usize, usize, usize) -> (usize, usize, usize)>;

/// Slice dims (width, height, along-axis length) plus the (i,j,k) lookup
/// for a pixel (col, row) at the given slice index.
fn slice_geometry(
    dims: (usize, usize, usize),
    axis: SliceAxis,
) -> ((usize, usize, usize), PixelLookup) {
    let (nx, ny, nz) = dims;
    match axis {
        SliceAxis::X => ((ny, nz, nx), Box::new(|c, r, s| (s, c, r))),
        SliceAxis::Y => ((nx, nz, ny), Box::new(|c, r, s| (c, s, r))),
        SliceAxis::Z => ((nx, ny, nz), Box::new(|c, r, s| (c, r, s))),
    }
}

fn to_u8(v: f64, min: f64, max: f64) -> u8 {
    if max > min {
        (255.0 * (v - min) / (max - min)).round().clamp(0.0, 255.0) as u8
    } else {
        0
    }
}

pub fn save_volume_slice(
    vol: &ScalarVolume,
    axis: SliceAxis,
    index: usize,
    path: &Path,
) -> Result<(), String> {
    let ((w, h, n), map) = slice_geometry(vol.grid().dims(), axis);
    if index >= n {
        return Err(format!("slice index {index} out of range (axis has {n})"));
    }
    let mut values = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            let (i, j, k) = map(c, r, index);
            values[r * w + c] = vol.at(i, j, k);
        }
    }
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let img = image::GrayImage::from_fn(w as u32, h as u32, |c, r| {
        image::Luma([to_u8(values[r as usize * w + c as usize], min, max)])
    });
    img.save(path).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

/// Vector fields render their semantic values (positions for
/// transformations) with each component min-max normalized into R, G, B.
pub fn save_field_slice(
    field: &VectorField,
    axis: SliceAxis,
    index: usize,
    path: &Path,
) -> Result<(), String> {
    let ((w, h, n), map) = slice_geometry(field.grid().dims(), axis);
    if index >= n {
        return Err(format!("slice index {index} out of range (axis has {n})"));
    }
    let mut values = vec![[0.0; 3]; w * h];
    for r in 0..h {
        for c in 0..w {
            let (i, j, k) = map(c, r, index);
            values[r * w + c] = field.value_at(i, j, k);
        }
    }
    let mut min = [f64::INFINITY; 3];
    let mut max = [f64::NEG_INFINITY; 3];
    for v in &values {
        for ch in 0..3 {
            min[ch] = min[ch].min(v[ch]);
            max[ch] = max[ch].max(v[ch]);
        }
    }
    let img = image::RgbImage::from_fn(w as u32, h as u32, |c, r| {
        let v = values[r as usize * w + c as usize];
        image::Rgb([
            to_u8(v[0], min[0], max[0]),
            to_u8(v[1], min[1], max[1]),
            to_u8(v[2], min[2], max[2]),
        ])
    });
    img.save(path).map_err(|e| format!("cannot write {}: {e}", path.display()))
}
