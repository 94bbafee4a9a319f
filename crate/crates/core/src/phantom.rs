//! Analytic phantoms with closed-form strain.
//!
//! Spheres are sampled on a Fibonacci lattice, cylinders on rings that are
//! uniform in angle and height. Radial displacement fields on these shapes
//! have ε = m / R exactly.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Unit};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::DisplacementField;
use crate::geometry::{Label, PointCloud};
use crate::rng::{derive_seed, DOMAIN_PHANTOM};
use crate::strain::StrainField;
use crate::{Point, Vec3};

/// Largest offset a sweep applies (six wall thicknesses).
pub const MAX_SWEEP_OFFSET_MM: f64 = 9.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PhantomKind {
    Sphere,
    Cylinder { length_mm: f64, axis: Unit<Vec3> },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhantomSpec {
    pub kind: PhantomKind,
    pub radius_mm: f64,
    pub center: Point,
    pub n_points: usize,
    /// Points within this distance of the phantom's ends are labelled
    /// transition zone. For spheres the "end" is the south pole (−S).
    pub transition_band_mm: f64,
    pub seed: u64,
}

impl PhantomSpec {
    pub fn sphere(radius_mm: f64, n_points: usize) -> Self {
        PhantomSpec {
            kind: PhantomKind::Sphere,
            radius_mm,
            center: Point::origin(),
            n_points,
            transition_band_mm: 0.0,
            seed: 0,
        }
    }

    pub fn cylinder(radius_mm: f64, length_mm: f64, n_points: usize) -> Self {
        PhantomSpec {
            kind: PhantomKind::Cylinder {
                length_mm,
                axis: Vec3::z_axis(),
            },
            radius_mm,
            center: Point::origin(),
            n_points,
            transition_band_mm: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if !(self.radius_mm > 0.0 && self.radius_mm.is_finite()) {
            return bad("radius must be positive");
        }
        if self.n_points < 100 {
            return bad("phantoms need at least 100 points");
        }
        if !(self.transition_band_mm >= 0.0) {
            return bad("transition band must be ≥ 0");
        }
        if let PhantomKind::Cylinder { length_mm, .. } = self.kind {
            if !(length_mm > 0.0 && length_mm.is_finite()) {
                return bad("cylinder length must be positive");
            }
        }
        Ok(())
    }

    /// Axis-aligned bounds of the analytic surface.
    pub fn bounds(&self) -> (Point, Point) {
        let half = match self.kind {
            PhantomKind::Sphere => Vec3::repeat(self.radius_mm),
            PhantomKind::Cylinder { length_mm, axis } => Vec3::from_fn(|k, _| {
                let a = axis[k].abs();
                a * length_mm / 2.0 + self.radius_mm * (1.0 - a * a).max(0.0).sqrt()
            }),
        };
        (self.center - half, self.center + half)
    }

    /// Outward unit normal of the analytic surface at `p`.
    pub fn analytic_normal(&self, p: &Point) -> Vec3 {
        match self.kind {
            PhantomKind::Sphere => (p - self.center).normalize(),
            PhantomKind::Cylinder { axis, .. } => {
                let d = p - self.center;
                (d - axis.into_inner() * axis.dot(&d)).normalize()
            }
        }
    }
}

fn basis(axis: &Unit<Vec3>) -> (Vec3, Vec3) {
    let a = axis.into_inner();
    let helper = if a.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let e1 = (helper - a * a.dot(&helper)).normalize();
    (e1, a.cross(&e1))
}

/// Sample the phantom surface.
pub fn make_phantom_cloud(spec: &PhantomSpec) -> Result<PointCloud> {
    spec.validate()?;
    let n = spec.n_points;
    let phase = (derive_seed(&[DOMAIN_PHANTOM, spec.seed]) >> 11) as f64 / (1u64 << 53) as f64 * TAU;
    let golden = PI * (3.0 - 5f64.sqrt());
    let r = spec.radius_mm;
    let band = spec.transition_band_mm;
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    match spec.kind {
        PhantomKind::Sphere => {
            for i in 0..n {
                let z = 1.0 - (2 * i + 1) as f64 / n as f64;
                let rho = (1.0 - z * z).sqrt();
                let phi = golden * i as f64 + phase;
                let p = spec.center + Vec3::new(rho * phi.cos(), rho * phi.sin(), z) * r;
                let height_above_pole = (z + 1.0) * r;
                labels.push(if height_above_pole < band {
                    Label::Transition
                } else {
                    Label::Wall
                });
                points.push(p);
            }
        }
        PhantomKind::Cylinder { length_mm, axis } => {
            let (e1, e2) = basis(&axis);
            let rings = ((n as f64 * length_mm / (TAU * r)).sqrt().round() as usize).clamp(1, n);
            for ring in 0..rings {
                let lo = ring * n / rings;
                let hi = (ring + 1) * n / rings;
                let count = hi - lo;
                let h = -length_mm / 2.0 + length_mm * (ring as f64 + 0.5) / rings as f64;
                for j in 0..count {
                    let a = TAU * j as f64 / count as f64 + golden * ring as f64 + phase;
                    let p = spec.center + axis.into_inner() * h + (e1 * a.cos() + e2 * a.sin()) * r;
                    let to_end = length_mm / 2.0 - h.abs();
                    labels.push(if to_end < band { Label::Transition } else { Label::Wall });
                    points.push(p);
                }
            }
        }
    }
    Ok(PointCloud::new(points, labels)?.with_id(match spec.kind {
        PhantomKind::Sphere => "phantom:sphere",
        PhantomKind::Cylinder { .. } => "phantom:cylinder",
    }))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FieldKind {
    /// `u = m (x − c)⊥ / |(x − c)⊥|`, where ⊥ removes the component along
    /// `axis` when one is given. Zero on the center (or axis) itself.
    ConstantRadial {
        magnitude_mm: f64,
        center: Point,
        axis: Option<Unit<Vec3>>,
    },
    /// `u = (m / R₀) (x − c)⊥`: magnitude `m` at distance `R₀`.
    LinearRadial {
        magnitude_mm: f64,
        reference_radius_mm: f64,
        center: Point,
        axis: Option<Unit<Vec3>>,
    },
    /// `u = A x + b`.
    Affine { matrix: Matrix3<f64>, offset: Vec3 },
}

impl FieldKind {
    /// Radial field matched to a phantom's center (and axis for cylinders).
    pub fn constant_radial_for(phantom: &PhantomSpec, magnitude_mm: f64) -> Self {
        FieldKind::ConstantRadial {
            magnitude_mm,
            center: phantom.center,
            axis: phantom_axis(phantom),
        }
    }

    pub fn linear_radial_for(phantom: &PhantomSpec, magnitude_mm: f64) -> Self {
        FieldKind::LinearRadial {
            magnitude_mm,
            reference_radius_mm: phantom.radius_mm,
            center: phantom.center,
            axis: phantom_axis(phantom),
        }
    }

    pub fn eval(&self, x: &Point) -> Vec3 {
        let perp = |center: &Point, axis: &Option<Unit<Vec3>>| {
            let d = x - center;
            match axis {
                Some(a) => d - a.into_inner() * a.dot(&d),
                None => d,
            }
        };
        match self {
            FieldKind::ConstantRadial {
                magnitude_mm,
                center,
                axis,
            } => {
                let d = perp(center, axis);
                let len = d.norm();
                if len == 0.0 {
                    Vec3::zeros()
                } else {
                    d * (*magnitude_mm / len)
                }
            }
            FieldKind::LinearRadial {
                magnitude_mm,
                reference_radius_mm,
                center,
                axis,
            } => perp(center, axis) * (*magnitude_mm / *reference_radius_mm),
            FieldKind::Affine { matrix, offset } => matrix * x.coords + offset,
        }
    }
}

fn phantom_axis(phantom: &PhantomSpec) -> Option<Unit<Vec3>> {
    match phantom.kind {
        PhantomKind::Sphere => None,
        PhantomKind::Cylinder { axis, .. } => Some(axis),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub origin_mm: [f64; 3],
}

impl GridSpec {
    /// Minimum coverage margin around a phantom: the largest sweep offset
    /// plus three voxels.
    pub fn required_margin(spacing_mm: f64) -> f64 {
        MAX_SWEEP_OFFSET_MM + 3.0 * spacing_mm
    }

    /// Isotropic grid covering `phantom` with `extra_mm` beyond the required
    /// margin.
    pub fn covering(phantom: &PhantomSpec, spacing_mm: f64, extra_mm: f64) -> Self {
        let (lo, hi) = phantom.bounds();
        let margin = Self::required_margin(spacing_mm) + extra_mm.max(0.0);
        let mut dims = [0; 3];
        let mut origin = [0.0; 3];
        for a in 0..3 {
            let start = ((lo[a] - margin) / spacing_mm).floor() * spacing_mm;
            let end = hi[a] + margin;
            dims[a] = (((end - start) / spacing_mm).ceil() as usize + 1).max(2);
            origin[a] = start;
        }
        GridSpec {
            dims,
            spacing_mm: [spacing_mm; 3],
            origin_mm: origin,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldSpec {
    pub kind: FieldKind,
    pub grid: GridSpec,
}

/// Fill the grid with the analytic field.
///
/// Fails unless the grid covers `phantom` with the required margin on every
/// side.
pub fn make_field(spec: &FieldSpec, phantom: &PhantomSpec) -> Result<DisplacementField> {
    let (lo, hi) = phantom.bounds();
    let g = &spec.grid;
    for a in 0..3 {
        let margin = GridSpec::required_margin(g.spacing_mm[a]);
        let first = g.origin_mm[a];
        let last = g.origin_mm[a] + (g.dims[a].max(1) - 1) as f64 * g.spacing_mm[a];
        if first > lo[a] - margin || last < hi[a] + margin {
            return Err(Error::GridTooSmall(format!(
                "axis {a}: grid [{first}, {last}] vs required [{}, {}]",
                lo[a] - margin,
                hi[a] + margin
            )));
        }
    }
    DisplacementField::from_fn(g.dims, g.spacing_mm, g.origin_mm, |p| spec.kind.eval(p))
}

/// Closed-form strain ε = m / R for radial fields matched to the phantom.
pub fn analytic_strain(phantom: &PhantomSpec, field: &FieldSpec) -> Result<StrainField> {
    let FieldKind::ConstantRadial {
        magnitude_mm,
        center,
        axis,
    } = field.kind
    else {
        return Err(Error::NoClosedForm);
    };
    let matched = center == phantom.center
        && match (phantom.kind, axis) {
            (PhantomKind::Sphere, None) => true,
            (PhantomKind::Cylinder { axis: pa, .. }, Some(fa)) => (pa.into_inner() - fa.into_inner()).norm() < 1e-12,
            _ => false,
        };
    if !matched {
        return Err(Error::NoClosedForm);
    }
    let cloud = make_phantom_cloud(phantom)?;
    let eps = magnitude_mm / phantom.radius_mm;
    let mask: Vec<bool> = cloud.labels().iter().map(|&l| l == Label::Wall).collect();
    let values = mask.iter().map(|&m| if m { eps } else { f64::NAN }).collect();
    StrainField::new(values, mask)
}
