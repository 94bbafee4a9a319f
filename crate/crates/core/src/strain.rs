//! Circumferential strain ε = ΔR / R on the reference cloud.
//!
//! ΔR is the interpolated displacement projected on the reference outward
//! normal; R is the reference local radius. Positive strain means outward
//! normal displacement.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::DisplacementField;
use crate::geometry::{Label, PointCloud};
use crate::surface::LocalSurfaceFrame;

/// Geometry the strain was evaluated on.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Provenance {
    pub sigma_mm: f64,
    pub mu_mm: f64,
    pub seed: u64,
}

/// Per-point strain aligned with the reference cloud.
///
/// Entries with `mask == false` (transition zone) hold NaN.
#[derive(Clone, Debug, PartialEq)]
pub struct StrainField {
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
    pub meta: Provenance,
}

impl StrainField {
    pub fn new(values: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        if values.len() != mask.len() {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: mask.len(),
            });
        }
        Ok(StrainField {
            values,
            mask,
            meta: Provenance::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Values at masked-true points, in index order.
    pub fn masked_values(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .map(|(&v, _)| v)
            .collect()
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn with_provenance(mut self, meta: Provenance) -> Self {
        self.meta = meta;
        self
    }

    /// Global sign flip, for reporting under the opposite convention.
    pub fn negated(&self) -> Self {
        StrainField {
            values: self.values.iter().map(|v| -v).collect(),
            mask: self.mask.clone(),
            meta: self.meta,
        }
    }
}

/// Strain of `field` sampled at `eval_cloud`, using reference frames and radii.
///
/// `eval_cloud` must index-correspond to the reference cloud the frames were
/// estimated on. Transition-zone points are masked out. Any analyzed point
/// outside the grid fails the whole evaluation.
pub fn compute_strain(
    eval_cloud: &PointCloud,
    ref_frames: &[LocalSurfaceFrame],
    field: &DisplacementField,
    ref_labels: &[Label],
) -> Result<StrainField> {
    let n = eval_cloud.len();
    for len in [ref_frames.len(), ref_labels.len()] {
        if len != n {
            return Err(Error::LengthMismatch { left: n, right: len });
        }
    }
    let pts = eval_cloud.points();
    let evaluated: Vec<Option<Result<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            if ref_labels[i] != Label::Wall {
                return None;
            }
            let frame = &ref_frames[i];
            Some(
                field
                    .interpolate(&pts[i])
                    .map(|u| u.dot(&frame.normal) / frame.radius_mm),
            )
        })
        .collect();
    let mut values = Vec::with_capacity(n);
    let mut mask = Vec::with_capacity(n);
    let mut outside = Vec::new();
    for (i, e) in evaluated.into_iter().enumerate() {
        match e {
            None => {
                values.push(f64::NAN);
                mask.push(false);
            }
            Some(Ok(v)) => {
                values.push(v);
                mask.push(true);
            }
            Some(Err(_)) => {
                outside.push(i);
                values.push(f64::NAN);
                mask.push(false);
            }
        }
    }
    if !outside.is_empty() {
        return Err(Error::PointsOutsideGrid { indices: outside });
    }
    StrainField::new(values, mask)
}

/// Element-wise `a − b` on the joint mask.
pub fn strain_difference(a: &StrainField, b: &StrainField) -> Result<StrainField> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let mask: Vec<bool> = a.mask.iter().zip(&b.mask).map(|(x, y)| *x && *y).collect();
    let values = a
        .values
        .iter()
        .zip(&b.values)
        .zip(&mask)
        .map(|((x, y), &m)| if m { x - y } else { f64::NAN })
        .collect();
    Ok(StrainField {
        values,
        mask,
        meta: a.meta,
    })
}

/// Number of analyzed points whose radius was clamped.
pub fn low_curvature_count(frames: &[LocalSurfaceFrame], mask: &[bool]) -> usize {
    frames
        .iter()
        .zip(mask)
        .filter(|(f, &m)| m && f.low_curvature)
        .count()
}
