//! Multi-channel feature stacks: an intensity image combined with the
//! Jacobian determinant and the three curl components of one or more
//! transformations, exported as a 4-D file plus a JSON sidecar naming the
//! channels. Moving-side stacks take the geometry of a single field;
//! fixed-side stacks take the channel-wise mean over a set of fields.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::average;
use crate::diffgeo;
use crate::error::{Error, Result};
use crate::fields::{Grid3, ScalarKind, ScalarVolume, VectorField};
use crate::nifti;

pub const CHANNEL_NAMES: [&str; 5] = ["img", "jd", "cv1", "cv2", "cv3"];

/// Ordered multi-channel volume; all channels share one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    grid: Grid3,
    channels: Vec<ScalarVolume>,
    names: Vec<String>,
}

impl FeatureStack {
    pub fn new(channels: Vec<ScalarVolume>, names: Vec<String>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::EmptyInput("feature stack needs at least one channel"));
        }
        if channels.len() != names.len() {
            return Err(Error::InvalidArgument(format!(
                "{} channels but {} names",
                channels.len(),
                names.len()
            )));
        }
        let grid = *channels[0].grid();
        for c in &channels {
            grid.ensure_compatible(c.grid(), "feature stack")?;
        }
        Ok(Self { grid, channels, names })
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn channels(&self) -> &[ScalarVolume] {
        &self.channels
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

fn geometry_channels(phi: &VectorField) -> Result<[ScalarVolume; 4]> {
    let jd = diffgeo::jacobian_determinant(phi)?;
    let cv = diffgeo::curl(phi)?;
    let grid = *phi.grid();
    let comp = |c: usize| {
        let data = cv.raw().iter().map(|v| v[c]).collect();
        ScalarVolume::new(grid, ScalarKind::Intensity, data)
    };
    Ok([jd, comp(0)?, comp(1)?, comp(2)?])
}

/// Five channels for a moving subject: image plus the geometry of its own
/// transformation. Channels 2-5 are exactly the extraction-module outputs.
pub fn moving_stack(image: &ScalarVolume, phi: &VectorField) -> Result<FeatureStack> {
    image.grid().ensure_compatible(phi.grid(), "moving_stack")?;
    let [jd, c1, c2, c3] = geometry_channels(phi)?;
    FeatureStack::new(
        vec![image.clone(), jd, c1, c2, c3],
        CHANNEL_NAMES.iter().map(|s| s.to_string()).collect(),
    )
}

/// Five channels for the fixed side: image plus channel-wise means of the
/// geometry over all supplied transformations.
pub fn fixed_stack(image: &ScalarVolume, phis: &[VectorField]) -> Result<FeatureStack> {
    if phis.is_empty() {
        return Err(Error::EmptyInput("fixed_stack needs at least one field"));
    }
    for phi in phis {
        image.grid().ensure_compatible(phi.grid(), "fixed_stack")?;
    }
    let monitor = average::average_monitor(phis)?;
    let grid = *image.grid();
    let comp = |c: usize| {
        let data = monitor.g0().raw().iter().map(|v| v[c]).collect();
        ScalarVolume::new(grid, ScalarKind::Intensity, data)
    };
    let jd = monitor.f0().clone().into_kind(ScalarKind::Jacobian)?;
    FeatureStack::new(
        vec![image.clone(), jd, comp(0)?, comp(1)?, comp(2)?],
        CHANNEL_NAMES.iter().map(|s| s.to_string()).collect(),
    )
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    channels: Vec<String>,
}

/// Sidecar path: the stack path with `.nii`/`.nii.gz` replaced by `.json`.
pub fn sidecar_path(stack_path: &Path) -> PathBuf {
    let name = stack_path.file_name().and_then(|n| n.to_str()).unwrap_or("stack");
    let stem = name
        .strip_suffix(".nii.gz")
        .or_else(|| name.strip_suffix(".nii"))
        .unwrap_or(name);
    stack_path.with_file_name(format!("{stem}.json"))
}

/// Write the stack as a 4-D float32 file and its channel-name sidecar.
pub fn export_stack(stack: &FeatureStack, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let channels: Vec<&[f64]> = stack.channels.iter().map(|c| c.data()).collect();
    nifti::write_stack_nd(&stack.grid, &channels, path)?;
    let sidecar = Sidecar { channels: stack.names.clone() };
    let json = serde_json::to_string_pretty(&sidecar)?;
    std::fs::write(sidecar_path(path), json)?;
    Ok(())
}

/// Read back a stack written by [`export_stack`]. Channel names come from
/// the sidecar; a missing sidecar yields numbered names.
pub fn read_stack(path: impl AsRef<Path>) -> Result<FeatureStack> {
    let path = path.as_ref();
    let (grid, raw_channels) = nifti::read_stack_nd(path)?;
    let names = match std::fs::read_to_string(sidecar_path(path)) {
        Ok(text) => serde_json::from_str::<Sidecar>(&text)?.channels,
        Err(_) => (0..raw_channels.len()).map(|i| format!("ch{i}")).collect(),
    };
    if names.len() != raw_channels.len() {
        return Err(Error::InvalidArgument(format!(
            "sidecar names {} channels, file has {}",
            names.len(),
            raw_channels.len()
        )));
    }
    let channels = raw_channels
        .into_iter()
        .map(|data| ScalarVolume::new(grid, ScalarKind::Intensity, data))
        .collect::<Result<Vec<_>>>()?;
    FeatureStack::new(channels, names)
}
