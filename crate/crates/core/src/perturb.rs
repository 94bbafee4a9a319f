//! Gaussian normal-direction perturbation of the wall and (σ, μ) sweeps.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::DisplacementField;
use crate::geometry::PointCloud;
use crate::metrics::{build_report_with, AgreementReport, NrmseNorm};
use crate::rng::{derive_seed, stream_rng, DOMAIN_PERTURB, DOMAIN_SWEEP};
use crate::strain::{compute_strain, Provenance, StrainField};
use crate::surface::LocalSurfaceFrame;

/// Typical aneurysm wall thickness; perturbation grids step in multiples of it.
pub const WALL_THICKNESS_MM: f64 = 1.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerturbationSpec {
    /// Perturbation magnitude (standard deviation), mm.
    pub sigma_mm: f64,
    /// Bias, mm; positive is outward.
    pub mu_mm: f64,
    pub seed: u64,
    pub wall_thickness_mm: f64,
}

impl PerturbationSpec {
    pub fn new(sigma_mm: f64, mu_mm: f64, seed: u64) -> Self {
        PerturbationSpec {
            sigma_mm,
            mu_mm,
            seed,
            wall_thickness_mm: WALL_THICKNESS_MM,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_mm >= 0.0 && self.sigma_mm.is_finite()) {
            return Err(Error::InvalidParams("sigma_mm must be finite and ≥ 0".into()));
        }
        if !self.mu_mm.is_finite() {
            return Err(Error::InvalidParams("mu_mm must be finite".into()));
        }
        if !(self.wall_thickness_mm > 0.0 && self.wall_thickness_mm.is_finite()) {
            return Err(Error::InvalidParams("wall_thickness_mm must be positive".into()));
        }
        Ok(())
    }

    /// (σ, μ) in wall thicknesses.
    pub fn in_wall_thicknesses(&self) -> (f64, f64) {
        (
            self.sigma_mm / self.wall_thickness_mm,
            self.mu_mm / self.wall_thickness_mm,
        )
    }

    /// Normal offset for point `i`: δ ~ N(μ, σ²) from the stream `(seed, i)`.
    pub fn offset(&self, i: usize) -> f64 {
        if self.sigma_mm == 0.0 {
            return self.mu_mm;
        }
        let z: f64 = StandardNormal.sample(&mut stream_rng(DOMAIN_PERTURB, self.seed, i as u64));
        self.mu_mm + self.sigma_mm * z
    }

    pub fn offsets(&self, n: usize) -> Vec<f64> {
        (0..n).into_par_iter().map(|i| self.offset(i)).collect()
    }
}

/// Move every point along its reference normal by its drawn offset.
pub fn perturb(ref_cloud: &PointCloud, ref_frames: &[LocalSurfaceFrame], spec: &PerturbationSpec) -> Result<PointCloud> {
    spec.validate()?;
    if ref_frames.len() != ref_cloud.len() {
        return Err(Error::LengthMismatch {
            left: ref_cloud.len(),
            right: ref_frames.len(),
        });
    }
    let points = ref_cloud
        .points()
        .par_iter()
        .zip(ref_frames)
        .enumerate()
        .map(|(i, (p, f))| {
            let d = spec.offset(i);
            if d == 0.0 {
                *p
            } else {
                p + f.normal * d
            }
        })
        .collect();
    ref_cloud.with_points(points)
}

/// How sweep cells are laid out.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepLayout {
    /// Every σ paired with every μ.
    #[default]
    Grid,
    /// Three one-dimensional scans: σ at μ = 0; μ at σ = 0; μ at σ = one wall
    /// thickness.
    Scenarios,
}

/// Which scan a cell belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Grid,
    /// σ scan, μ = 0.
    Magnitude,
    /// μ scan, σ = 0.
    Offset,
    /// μ scan, σ = one wall thickness.
    Biased,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub sigma_list_mm: Vec<f64>,
    pub mu_list_mm: Vec<f64>,
    pub seed: u64,
    pub realizations: usize,
    pub wall_thickness_mm: f64,
    pub layout: SweepLayout,
    pub nrmse_norm: NrmseNorm,
    /// Flip the sign of every strain before scoring (reporting convention).
    pub negate: bool,
}

impl Default for SweepConfig {
    /// σ from 0 to six wall thicknesses, μ from −6 to +6 wall thicknesses, in
    /// one-thickness steps.
    fn default() -> Self {
        Self::with_thickness(WALL_THICKNESS_MM)
    }
}

impl SweepConfig {
    pub fn with_thickness(t: f64) -> Self {
        SweepConfig {
            sigma_list_mm: default_sigma_list(t),
            mu_list_mm: default_mu_list(t),
            seed: 0,
            realizations: 1,
            wall_thickness_mm: t,
            layout: SweepLayout::Grid,
            nrmse_norm: NrmseNorm::Range,
            negate: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.sigma_list_mm.is_empty() || self.mu_list_mm.is_empty() {
            return bad("sigma and mu lists must be nonempty");
        }
        if self.sigma_list_mm.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return bad("sigma values must be finite and ≥ 0");
        }
        if self.mu_list_mm.iter().any(|m| !m.is_finite()) {
            return bad("mu values must be finite");
        }
        if self.realizations == 0 {
            return bad("realizations must be ≥ 1");
        }
        if !(self.wall_thickness_mm > 0.0 && self.wall_thickness_mm.is_finite()) {
            return bad("wall_thickness_mm must be positive");
        }
        Ok(())
    }

    /// Cells in output order.
    pub fn cells(&self) -> Vec<(Scenario, f64, f64)> {
        match self.layout {
            SweepLayout::Grid => self
                .sigma_list_mm
                .iter()
                .flat_map(|&s| self.mu_list_mm.iter().map(move |&m| (Scenario::Grid, s, m)))
                .collect(),
            SweepLayout::Scenarios => {
                let mut out: Vec<_> = self
                    .sigma_list_mm
                    .iter()
                    .map(|&s| (Scenario::Magnitude, s, 0.0))
                    .collect();
                out.extend(self.mu_list_mm.iter().map(|&m| (Scenario::Offset, 0.0, m)));
                out.extend(
                    self.mu_list_mm
                        .iter()
                        .map(|&m| (Scenario::Biased, self.wall_thickness_mm, m)),
                );
                out
            }
        }
    }

    pub fn cell_seed(&self, cell: usize, realization: usize) -> u64 {
        derive_seed(&[DOMAIN_SWEEP, self.seed, cell as u64, realization as u64])
    }
}

pub fn default_sigma_list(t: f64) -> Vec<f64> {
    (0..=6).map(|k| k as f64 * t).collect()
}

pub fn default_mu_list(t: f64) -> Vec<f64> {
    (-6..=6).map(|k| k as f64 * t).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub enum CellOutcome {
    Done {
        strain: StrainField,
        report: AgreementReport,
    },
    Failed {
        /// Analyzed points that left the displacement grid.
        outside: Vec<usize>,
        message: String,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellResult {
    pub scenario: Scenario,
    pub sigma_mm: f64,
    pub mu_mm: f64,
    pub realization: usize,
    pub seed: u64,
    pub outcome: CellOutcome,
}

impl CellResult {
    pub fn report(&self) -> Option<&AgreementReport> {
        match &self.outcome {
            CellOutcome::Done { report, .. } => Some(report),
            CellOutcome::Failed { .. } => None,
        }
    }

    pub fn failed(&self) -> bool {
        matches!(self.outcome, CellOutcome::Failed { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutcome {
    pub ground_truth: StrainField,
    pub cells: Vec<CellResult>,
}

/// Perturb, recompute strain with reference frames, and score against ground
/// truth for every cell and realization.
///
/// Cells whose perturbed points leave the grid are reported as failed; the
/// sweep itself only fails when ground truth cannot be computed.
pub fn run_sweep(
    ref_cloud: &PointCloud,
    ref_frames: &[LocalSurfaceFrame],
    field: &DisplacementField,
    config: &SweepConfig,
) -> Result<SweepOutcome> {
    config.validate()?;
    let mut ground_truth = compute_strain(ref_cloud, ref_frames, field, ref_cloud.labels())?;
    if config.negate {
        ground_truth = ground_truth.negated();
    }
    let jobs: Vec<(usize, usize, Scenario, f64, f64)> = config
        .cells()
        .into_iter()
        .enumerate()
        .flat_map(|(c, (sc, s, m))| (0..config.realizations).map(move |r| (c, r, sc, s, m)))
        .collect();
    let cells = jobs
        .into_par_iter()
        .map(|(cell, realization, scenario, sigma_mm, mu_mm)| {
            let seed = config.cell_seed(cell, realization);
            let spec = PerturbationSpec {
                sigma_mm,
                mu_mm,
                seed,
                wall_thickness_mm: config.wall_thickness_mm,
            };
            let outcome = evaluate_cell(ref_cloud, ref_frames, field, &ground_truth, &spec, config);
            CellResult {
                scenario,
                sigma_mm,
                mu_mm,
                realization,
                seed,
                outcome,
            }
        })
        .collect();
    Ok(SweepOutcome { ground_truth, cells })
}

fn evaluate_cell(
    ref_cloud: &PointCloud,
    ref_frames: &[LocalSurfaceFrame],
    field: &DisplacementField,
    ground_truth: &StrainField,
    spec: &PerturbationSpec,
    config: &SweepConfig,
) -> CellOutcome {
    let attempt = || -> Result<(StrainField, AgreementReport)> {
        let cloud = perturb(ref_cloud, ref_frames, spec)?;
        let mut strain = compute_strain(&cloud, ref_frames, field, ref_cloud.labels())?;
        if config.negate {
            strain = strain.negated();
        }
        let strain = strain.with_provenance(Provenance {
            sigma_mm: spec.sigma_mm,
            mu_mm: spec.mu_mm,
            seed: spec.seed,
        });
        let report = build_report_with(ground_truth, &strain, config.nrmse_norm)?;
        Ok((strain, report))
    };
    match attempt() {
        Ok((strain, report)) => CellOutcome::Done { strain, report },
        Err(e) => CellOutcome::Failed {
            message: e.to_string(),
            outside: match e {
                Error::PointsOutsideGrid { indices } => indices,
                _ => Vec::new(),
            },
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Point, Vec3};

    fn sphere(n: usize, r: f64, c: Point) -> (PointCloud, Vec<LocalSurfaceFrame>) {
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        let mut pts = Vec::new();
        let mut frames = Vec::new();
        for i in 0..n {
            let z = 1.0 - (2 * i + 1) as f64 / n as f64;
            let rho = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            let dir = Vec3::new(rho * phi.cos(), rho * phi.sin(), z);
            pts.push(c + dir * r);
            frames.push(LocalSurfaceFrame::from_normal(dir, Vec3::x(), r, false));
        }
        (PointCloud::from_points(pts).unwrap(), frames)
    }

    #[test]
    fn zero_spec_is_noop() {
        let (cloud, frames) = sphere(500, 25.0, Point::new(1.0, 2.0, 3.0));
        let out = perturb(&cloud, &frames, &PerturbationSpec::new(0.0, 0.0, 99)).unwrap();
        assert_eq!(out, cloud);
    }

    #[test]
    fn pure_offset_on_sphere() {
        let c = Point::new(-4.0, 0.5, 10.0);
        let (cloud, frames) = sphere(2000, 25.0, c);
        let out = perturb(&cloud, &frames, &PerturbationSpec::new(0.0, 1.5, 1)).unwrap();
        for p in out.points() {
            assert!(((p - c).norm() - 26.5).abs() < 1e-9);
        }
    }

    #[test]
    fn moments_match_spec() {
        let n = 29_661;
        let spec = PerturbationSpec::new(1.5, 0.0, 2024);
        let d = spec.offsets(n);
        let mean = d.iter().sum::<f64>() / n as f64;
        let sd = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!(mean.abs() < 3.0 * 1.5 / (n as f64).sqrt(), "{mean}");
        assert!((sd - 1.5).abs() < 0.05 * 1.5, "{sd}");
    }

    #[test]
    fn offsets_depend_only_on_seed_and_index() {
        let spec = PerturbationSpec::new(2.0, -1.0, 7);
        let all = spec.offsets(100);
        for i in [0, 13, 99] {
            assert_eq!(all[i], spec.offset(i));
        }
        let other = PerturbationSpec::new(2.0, -1.0, 8).offsets(100);
        assert_ne!(all, other);
    }

    #[test]
    fn zero_sigma_commutes_with_translation() {
        let (cloud, frames) = sphere(300, 10.0, Point::origin());
        let t = Vec3::new(3.25, -1.5, 8.0);
        let moved = PointCloud::from_points(cloud.points().iter().map(|p| p + t).collect()).unwrap();
        let spec = PerturbationSpec::new(0.0, -2.0, 3);
        let a = perturb(&cloud, &frames, &spec).unwrap();
        let b = perturb(&moved, &frames, &spec).unwrap();
        for (p, q) in a.points().iter().zip(b.points()) {
            assert!(((p + t) - q).norm() < 1e-12);
        }
    }

    #[test]
    fn invalid_spec_rejected() {
        let (cloud, frames) = sphere(10, 1.0, Point::origin());
        assert!(perturb(&cloud, &frames, &PerturbationSpec::new(-1.0, 0.0, 0)).is_err());
        assert!(perturb(&cloud, &frames[..5], &PerturbationSpec::new(1.0, 0.0, 0)).is_err());
    }

    #[test]
    fn default_grids() {
        let c = SweepConfig::default();
        assert_eq!(c.sigma_list_mm, vec![0.0, 1.5, 3.0, 4.5, 6.0, 7.5, 9.0]);
        assert_eq!(c.mu_list_mm.len(), 13);
        assert_eq!(c.mu_list_mm[0], -9.0);
        assert_eq!(c.mu_list_mm[12], 9.0);
        assert_eq!(c.cells().len(), 91);
        let s = SweepConfig {
            layout: SweepLayout::Scenarios,
            ..c
        };
        let cells = s.cells();
        assert_eq!(cells.len(), 7 + 13 + 13);
        assert!(cells[20..].iter().all(|c| c.1 == 1.5));
    }

    fn affine_field() -> DisplacementField {
        let a = nalgebra::Matrix3::new(0.02, 0.004, 0.0, -0.003, 0.01, 0.002, 0.0, 0.005, 0.03);
        DisplacementField::from_fn([28, 28, 28], [2.0; 3], [-27.0; 3], |p| a * p.coords + Vec3::new(0.1, 0.0, -0.2))
            .unwrap()
    }

    #[test]
    fn single_cell_sweep_is_perfect() {
        let (cloud, frames) = sphere(800, 12.0, Point::origin());
        let cfg = SweepConfig {
            sigma_list_mm: vec![0.0],
            mu_list_mm: vec![0.0],
            ..SweepConfig::default()
        };
        let out = run_sweep(&cloud, &frames, &affine_field(), &cfg).unwrap();
        assert_eq!(out.cells.len(), 1);
        let r = out.cells[0].report().unwrap();
        assert_eq!((r.r_squared, r.nrmse), (1.0, 0.0));
        match &out.cells[0].outcome {
            CellOutcome::Done { strain, .. } => assert_eq!(strain.values, out.ground_truth.values),
            _ => unreachable!(),
        }
    }

    #[test]
    fn sweep_flags_cells_leaving_grid() {
        let (cloud, frames) = sphere(400, 12.0, Point::origin());
        let cfg = SweepConfig {
            sigma_list_mm: vec![0.0],
            mu_list_mm: vec![0.0, 40.0],
            ..SweepConfig::default()
        };
        let out = run_sweep(&cloud, &frames, &affine_field(), &cfg).unwrap();
        assert!(!out.cells[0].failed());
        match &out.cells[1].outcome {
            CellOutcome::Failed { outside, .. } => assert_eq!(outside.len(), 400),
            _ => panic!("expected failure"),
        }
    }

    #[test]
    fn scenario_sweeps_have_expected_sizes() {
        let (cloud, frames) = sphere(300, 5.0, Point::origin());
        let field = affine_field();
        let a = SweepConfig {
            mu_list_mm: vec![0.0],
            ..SweepConfig::default()
        };
        assert_eq!(run_sweep(&cloud, &frames, &field, &a).unwrap().cells.len(), 7);
        let c = SweepConfig {
            sigma_list_mm: vec![1.5],
            ..SweepConfig::default()
        };
        let out = run_sweep(&cloud, &frames, &field, &c).unwrap();
        assert_eq!(out.cells.len(), 13);
        let mus: Vec<f64> = out.cells.iter().map(|c| c.mu_mm).collect();
        assert_eq!(mus, default_mu_list(1.5));
    }
}
