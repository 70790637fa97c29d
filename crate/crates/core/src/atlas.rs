//! Iterative unbiased template construction.
//!
//! Every candidate template starts as one of the subjects. Each outer
//! iteration registers the candidate to all subjects, averages the
//! resulting transformations, warps the candidate by the average, and
//! repeats until the average transformation is close to the identity. The
//! returned template is the candidate with the smallest final deviation.

use serde::Serialize;

use crate::average;
use crate::error::{Error, Result};
use crate::fields::{warp, ScalarVolume, VectorField};
use crate::register::{self, RegistrationOptions};
use crate::varsolve::SolveOptions;

#[derive(Debug, Clone, Serialize)]
pub struct AtlasOptions {
    /// Deviation threshold, in voxels, on the mean displacement magnitude
    /// of the average transformation.
    pub epsilon: f64,
    pub max_outer_iters: usize,
    pub registration: RegistrationOptions,
    pub solve: SolveOptions,
    /// Run the procedure for one candidate index only (the cheap variant);
    /// `None` runs every subject as a candidate.
    pub single_candidate: Option<usize>,
    /// Keep the per-iteration average transformations in the report (for
    /// file export by callers).
    pub collect_average_fields: bool,
}

impl Default for AtlasOptions {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            max_outer_iters: 5,
            registration: RegistrationOptions::default(),
            solve: SolveOptions::default(),
            single_candidate: None,
            collect_average_fields: false,
        }
    }
}

/// One collected average transformation (see
/// [`AtlasOptions::collect_average_fields`]).
#[derive(Debug, Clone)]
pub struct AverageFieldRecord {
    pub iteration: usize,
    pub candidate: usize,
    pub field: VectorField,
}

#[derive(Debug, Clone, Serialize)]
pub struct AtlasReport {
    /// Candidate indices that were evolved (all subjects unless restricted).
    pub candidates: Vec<usize>,
    /// `deviations[t][c]` is the mean voxel displacement of candidate
    /// `candidates[c]`'s average transformation at outer iteration t.
    pub deviations: Vec<Vec<f64>>,
    /// Index (into the subject list) of the returned template.
    pub chosen: usize,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip)]
    pub average_fields: Vec<AverageFieldRecord>,
}

/// Build a template volume from two or more subjects on a shared grid.
/// Deterministic given inputs and options.
pub fn build_atlas(
    subjects: &[ScalarVolume],
    opts: &AtlasOptions,
) -> Result<(ScalarVolume, AtlasReport)> {
    if subjects.len() < 2 {
        return Err(Error::EmptyInput("atlas construction needs at least 2 subjects"));
    }
    let grid = *subjects[0].grid();
    for s in subjects {
        grid.ensure_compatible(s.grid(), "build_atlas")?;
    }
    if !(opts.epsilon.is_finite() && opts.epsilon > 0.0) || opts.max_outer_iters == 0 {
        return Err(Error::InvalidArgument("atlas options out of range".into()));
    }

    let candidates: Vec<usize> = match opts.single_candidate {
        Some(i) if i >= subjects.len() => {
            return Err(Error::InvalidArgument(format!(
                "candidate index {i} out of range for {} subjects",
                subjects.len()
            )));
        }
        Some(i) => vec![i],
        None => (0..subjects.len()).collect(),
    };

    let mut templates: Vec<ScalarVolume> =
        candidates.iter().map(|&i| subjects[i].clone()).collect();
    let mut deviations: Vec<Vec<f64>> = Vec::new();
    let mut average_fields = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for outer in 0..opts.max_outer_iters {
        let mut row = Vec::with_capacity(templates.len());
        for (c, template) in templates.iter_mut().enumerate() {
            // Register the candidate to every subject, in index order.
            let mut fields = Vec::with_capacity(subjects.len());
            for subject in subjects {
                let (_, phi, _) = register::register(template, subject, &opts.registration)?;
                fields.push(phi);
            }
            let (avg, _) = average::average_transformations(&fields, &opts.solve)?;
            row.push(avg.mean_offset_magnitude());
            *template = warp(template, &avg)?;
            if opts.collect_average_fields {
                average_fields.push(AverageFieldRecord {
                    iteration: outer + 1,
                    candidate: candidates[c],
                    field: avg,
                });
            }
        }
        iterations += 1;
        let worst = row.iter().cloned().fold(0.0f64, f64::max);
        deviations.push(row);
        if worst < opts.epsilon {
            converged = true;
            break;
        }
    }

    // Smallest final deviation wins; ties break toward the lower index.
    let last = deviations.last().expect("at least one iteration ran");
    let best = last
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(c, _)| c)
        .unwrap_or(0);

    let report = AtlasReport {
        candidates: candidates.clone(),
        deviations,
        chosen: candidates[best],
        iterations,
        converged,
        average_fields,
    };
    Ok((templates[best].clone(), report))
}
