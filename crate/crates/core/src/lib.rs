//! Local circumferential wall strain on surface point clouds.
//!
//! The pipeline estimates a local frame (outward normal, two tangents) and a
//! radius of curvature at every point of a reference wall, interpolates a
//! gridded displacement field at the wall, and reports strain as the
//! normal displacement divided by the local radius. Perturbed walls are
//! produced by Gaussian offsets along the reference normals, and the
//! resulting strain is scored against the reference strain with
//! identity-line R², NRMSE, peak and percentile indicators.
//!
//! Analytic phantoms in [`phantom`] provide closed-form ground truth for the
//! numerical kernels.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod field;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod perturb;
pub mod phantom;
pub mod rng;
pub mod strain;
pub mod surface;

pub use error::{Error, Result};
pub use field::{decompose, DecomposedDisplacement, DisplacementField};
pub use geometry::{centroid, Label, Neighbor, NeighborIndex, PointCloud};
pub use metrics::{
    build_report, identity_fit, peak, percentile, AgreementReport, IdentityFit, NrmseNorm,
};
pub use perturb::{perturb, run_sweep, PerturbationSpec, SweepConfig, SweepLayout, SweepOutcome};
pub use phantom::{analytic_strain, make_field, make_phantom_cloud, FieldKind, FieldSpec, PhantomKind, PhantomSpec};
pub use strain::{compute_strain, strain_difference, Provenance, StrainField};
pub use surface::{estimate_all_frames, LocalSurfaceFrame, SurfaceFitParams};

/// 3D position in millimetres, patient (R, A, S) axes.
pub type Point = nalgebra::Point3<f64>;
/// 3-vector in millimetres or a unit direction.
pub type Vec3 = nalgebra::Vector3<f64>;
