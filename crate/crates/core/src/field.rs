//! Regular-grid displacement fields.
//!
//! Grids are addressed by voxel centers, with `origin_mm` at the center of
//! voxel `(0, 0, 0)`. Axis and component order are (R, A, S). Voxel `(i, j, k)`
//! is stored at `i + nx * (j + ny * k)`.

use crate::error::{Error, Result};
use crate::surface::LocalSurfaceFrame;
use crate::{Point, Vec3};

/// Slack (in voxel units) for points that sit on the outer voxel-center planes
/// but land a rounding error outside them.
const EDGE_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementField {
    dims: [usize; 3],
    spacing_mm: [f64; 3],
    origin_mm: [f64; 3],
    data: Vec<Vec3>,
}

impl DisplacementField {
    pub fn new(dims: [usize; 3], spacing_mm: [f64; 3], origin_mm: [f64; 3], data: Vec<Vec3>) -> Result<Self> {
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::InvalidField("dims must be ≥ 2".into()));
        }
        if spacing_mm.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidField("spacing must be positive and finite".into()));
        }
        if origin_mm.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidField("origin must be finite".into()));
        }
        let expected = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::InvalidField("grid too large".into()))?;
        if data.len() != expected {
            return Err(Error::InvalidField(format!(
                "expected {expected} vectors, found {}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidField("non-finite displacement".into()));
        }
        Ok(DisplacementField {
            dims,
            spacing_mm,
            origin_mm,
            data,
        })
    }

    /// Sample `f` at every voxel center.
    pub fn from_fn(
        dims: [usize; 3],
        spacing_mm: [f64; 3],
        origin_mm: [f64; 3],
        f: impl Fn(&Point) -> Vec3,
    ) -> Result<Self> {
        let total = dims.iter().product::<usize>();
        let mut data = Vec::with_capacity(total);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let p = Point::new(
                        origin_mm[0] + i as f64 * spacing_mm[0],
                        origin_mm[1] + j as f64 * spacing_mm[1],
                        origin_mm[2] + k as f64 * spacing_mm[2],
                    );
                    data.push(f(&p));
                }
            }
        }
        Self::new(dims, spacing_mm, origin_mm, data)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing_mm(&self) -> [f64; 3] {
        self.spacing_mm
    }

    pub fn origin_mm(&self) -> [f64; 3] {
        self.origin_mm
    }

    pub fn data(&self) -> &[Vec3] {
        &self.data
    }

    pub fn voxel(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.data[i + self.dims[0] * (j + self.dims[1] * k)]
    }

    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> Point {
        Point::new(
            self.origin_mm[0] + i as f64 * self.spacing_mm[0],
            self.origin_mm[1] + j as f64 * self.spacing_mm[1],
            self.origin_mm[2] + k as f64 * self.spacing_mm[2],
        )
    }

    /// Lower and upper voxel-center corners.
    pub fn bounds(&self) -> (Point, Point) {
        (
            self.voxel_center(0, 0, 0),
            self.voxel_center(self.dims[0] - 1, self.dims[1] - 1, self.dims[2] - 1),
        )
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.locate(p).is_some()
    }

    /// Cell index and fractional offset along each axis.
    fn locate(&self, p: &Point) -> Option<([usize; 3], [f64; 3])> {
        let mut cell = [0usize; 3];
        let mut frac = [0f64; 3];
        for a in 0..3 {
            let f = (p[a] - self.origin_mm[a]) / self.spacing_mm[a];
            let top = (self.dims[a] - 1) as f64;
            if !(f >= -EDGE_SLACK && f <= top + EDGE_SLACK) {
                return None;
            }
            let f = f.clamp(0.0, top);
            let c = (f.floor() as usize).min(self.dims[a] - 2);
            cell[a] = c;
            frac[a] = f - c as f64;
        }
        Some((cell, frac))
    }

    /// Trilinear interpolation from the 8 surrounding voxel centers.
    pub fn interpolate(&self, p: &Point) -> Result<Vec3> {
        let ([i, j, k], [tx, ty, tz]) = self.locate(p).ok_or(Error::OutsideGrid)?;
        let lerp = |a: Vec3, b: Vec3, t: f64| a * (1.0 - t) + b * t;
        let c00 = lerp(self.voxel(i, j, k), self.voxel(i + 1, j, k), tx);
        let c10 = lerp(self.voxel(i, j + 1, k), self.voxel(i + 1, j + 1, k), tx);
        let c01 = lerp(self.voxel(i, j, k + 1), self.voxel(i + 1, j, k + 1), tx);
        let c11 = lerp(self.voxel(i, j + 1, k + 1), self.voxel(i + 1, j + 1, k + 1), tx);
        let c0 = lerp(c00, c10, ty);
        let c1 = lerp(c01, c11, ty);
        Ok(lerp(c0, c1, tz))
    }

    /// Voxel-wise map, same geometry.
    pub fn map(&self, f: impl Fn(&Vec3) -> Vec3) -> Result<Self> {
        Self::new(self.dims, self.spacing_mm, self.origin_mm, self.data.iter().map(f).collect())
    }
}

/// Displacement split into the outward-normal part and the tangential part.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecomposedDisplacement {
    /// Signed, positive along the outward normal.
    pub delta_r_mm: f64,
    /// Components along (tangent1, tangent2).
    pub tangential_mm: [f64; 2],
}

pub fn decompose(u: &Vec3, frame: &LocalSurfaceFrame) -> DecomposedDisplacement {
    DecomposedDisplacement {
        delta_r_mm: u.dot(&frame.normal),
        tangential_mm: [u.dot(&frame.tangent1), u.dot(&frame.tangent2)],
    }
}
