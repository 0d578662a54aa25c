//! Flat Gaussians and their triangle-soup encoding.
//!
//! A flat Gaussian keeps one of its three scales pinned at [`FLAT_SCALE`]; the
//! corresponding rotation column `r0` is the kernel's normal and the two live
//! axes `r1`, `r2` carry the scales `s1`, `s2`. Each Gaussian maps to one
//! triangle `[m, m + s1 r1, m + s2 r2]` and back.

use nalgebra::{Isometry3, Matrix3, Rotation3, UnitQuaternion, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Scale of the flattened axis.
pub const FLAT_SCALE: f64 = 1e-8;

/// Squared triangle area below this fraction of the squared max-edge-length
/// squared counts as degenerate.
pub const DEGENERACY_RATIO: f64 = 1e-12;

const UNIT_QUATERNION_TOLERANCE: f64 = 1e-6;

/// Spherical-harmonics color coefficients in the usual scene-file layout:
/// three DC terms plus the flattened higher-order bands.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ShColor {
    pub dc: [f64; 3],
    pub rest: Vec<f64>,
}

/// Non-geometric per-Gaussian data. Edits carry it through untouched.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Appearance {
    pub opacity: f64,
    pub color: ShColor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatGaussian {
    pub center: Vec3,
    pub rotation: UnitQuaternion<f64>,
    /// Scales along `r1` and `r2`; the scale along `r0` is [`FLAT_SCALE`].
    pub scales: [f64; 2],
    pub appearance: Appearance,
}

impl FlatGaussian {
    pub fn new(
        center: Vec3,
        rotation: UnitQuaternion<f64>,
        scales: [f64; 2],
        appearance: Appearance,
    ) -> Self {
        Self {
            center,
            rotation,
            scales,
            appearance,
        }
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    /// The flattened axis, i.e. the first rotation column.
    pub fn normal(&self) -> Vec3 {
        self.rotation_matrix().column(0).into_owned()
    }

    /// Rotation columns `[r0, r1, r2]`.
    pub fn axes(&self) -> [Vec3; 3] {
        let r = self.rotation_matrix();
        [
            r.column(0).into_owned(),
            r.column(1).into_owned(),
            r.column(2).into_owned(),
        ]
    }

    /// `R S Sᵀ Rᵀ` with `S = diag(ε, s1, s2)`.
    pub fn covariance(&self) -> Matrix3<f64> {
        let r = self.rotation_matrix();
        let s = Matrix3::from_diagonal(&Vec3::new(FLAT_SCALE, self.scales[0], self.scales[1]));
        r * s * s.transpose() * r.transpose()
    }

    /// Checks the type invariants, returning a human-readable reason on failure.
    pub fn check(&self) -> std::result::Result<(), String> {
        if !self.center.iter().all(|c| c.is_finite()) {
            return Err("center is not finite".into());
        }
        let q = self.rotation.as_ref().coords;
        if !q.iter().all(|c| c.is_finite()) {
            return Err("rotation is not finite".into());
        }
        if (q.norm() - 1.0).abs() > UNIT_QUATERNION_TOLERANCE {
            return Err(format!("rotation quaternion has norm {}", q.norm()));
        }
        for (i, s) in self.scales.iter().enumerate() {
            if !(s.is_finite() && *s > 0.0) {
                return Err(format!(
                    "scale s{} = {s} must be finite and positive",
                    i + 1
                ));
            }
        }
        let a = &self.appearance;
        if !(0.0..=1.0).contains(&a.opacity) {
            return Err(format!("opacity {} outside [0, 1]", a.opacity));
        }
        if !a
            .color
            .dc
            .iter()
            .chain(&a.color.rest)
            .all(|c| c.is_finite())
        {
            return Err("color coefficients are not finite".into());
        }
        Ok(())
    }

    /// Applies a rigid motion to the geometric part.
    pub fn transformed(&self, motion: &Isometry3<f64>) -> Self {
        Self {
            center: motion.transform_point(&self.center.into()).coords,
            rotation: motion.rotation * self.rotation,
            scales: self.scales,
            appearance: self.appearance.clone(),
        }
    }
}

pub fn gaussian_normal(g: &FlatGaussian) -> Vec3 {
    g.normal()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoupTriangle {
    pub vertices: [Vec3; 3],
}

impl SoupTriangle {
    pub fn new(v0: Vec3, v1: Vec3, v2: Vec3) -> Self {
        Self {
            vertices: [v0, v1, v2],
        }
    }

    pub fn centroid(&self) -> Vec3 {
        (self.vertices[0] + self.vertices[1] + self.vertices[2]) / 3.0
    }

    pub fn is_degenerate(&self) -> bool {
        let [a, b, c] = &self.vertices;
        is_degenerate(a, b, c)
    }

    pub fn map(&self, f: impl Fn(&Vec3) -> Vec3) -> Self {
        Self {
            vertices: self.vertices.each_ref().map(f),
        }
    }

    pub fn transformed(&self, motion: &Isometry3<f64>) -> Self {
        self.map(|v| motion.transform_point(&(*v).into()).coords)
    }
}

/// Scale-invariant degeneracy test: `|e1 × e2|² <= ratio · (max |e|²)²`.
/// Non-finite vertices also count as degenerate.
pub fn is_degenerate(a: &Vec3, b: &Vec3, c: &Vec3) -> bool {
    let e1 = b - a;
    let e2 = c - a;
    let e3 = c - b;
    let cross = e1.cross(&e2).norm_squared();
    let max_edge = e1
        .norm_squared()
        .max(e2.norm_squared())
        .max(e3.norm_squared());
    !(cross.is_finite() && max_edge.is_finite()) || cross <= DEGENERACY_RATIO * max_edge * max_edge
}

/// Disconnected triangles, one per Gaussian, with a parallel table of
/// appearance records.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleSoup {
    triangles: Vec<SoupTriangle>,
    attributes: Vec<Appearance>,
}

impl TriangleSoup {
    pub fn new(triangles: Vec<SoupTriangle>, attributes: Vec<Appearance>) -> Result<Self> {
        if triangles.len() != attributes.len() {
            return Err(Error::CountMismatch {
                geometry: triangles.len(),
                sidecar: attributes.len(),
            });
        }
        Ok(Self {
            triangles,
            attributes,
        })
    }

    pub fn triangles(&self) -> &[SoupTriangle] {
        &self.triangles
    }

    pub fn attributes(&self) -> &[Appearance] {
        &self.attributes
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn into_parts(self) -> (Vec<SoupTriangle>, Vec<Appearance>) {
        (self.triangles, self.attributes)
    }

    pub fn with_triangles(self, triangles: Vec<SoupTriangle>) -> Result<Self> {
        Self::new(triangles, self.attributes)
    }
}

pub fn encode_gaussian(g: &FlatGaussian) -> SoupTriangle {
    let [_, r1, r2] = g.axes();
    let m = g.center;
    SoupTriangle::new(m, m + r1 * g.scales[0], m + r2 * g.scales[1])
}

/// Geometry of a decoded triangle: center, rotation and the two live scales.
pub fn decode_triangle(tri: &SoupTriangle) -> Option<(Vec3, UnitQuaternion<f64>, [f64; 2])> {
    if tri.is_degenerate() {
        return None;
    }
    let [v0, v1, v2] = tri.vertices;
    let e1 = v1 - v0;
    let e2 = v2 - v0;

    let mut r0 = e1.cross(&e2).normalize();
    let r1 = e1.normalize();
    let r2 = (e2 - r1 * e2.dot(&r1)).normalize();
    if r0.dot(&r1.cross(&r2)) < 0.0 {
        r0 = -r0;
    }

    let basis = Matrix3::from_columns(&[r0, r1, r2]);
    let rotation = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(basis));
    Some((v0, rotation, [e1.norm(), e2.dot(&r2)]))
}

pub fn encode_soup(gaussians: &[FlatGaussian]) -> Result<TriangleSoup> {
    let triangles = gaussians
        .par_iter()
        .enumerate()
        .map(|(index, g)| {
            g.check()
                .map_err(|reason| Error::InvalidGaussian { index, reason })?;
            Ok(encode_gaussian(g))
        })
        .collect::<Vec<Result<_>>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let attributes = gaussians.iter().map(|g| g.appearance.clone()).collect();
    TriangleSoup::new(triangles, attributes)
}

pub fn decode_soup(soup: &TriangleSoup) -> Result<Vec<FlatGaussian>> {
    let geometry = soup
        .triangles
        .par_iter()
        .enumerate()
        .map(|(index, tri)| decode_triangle(tri).ok_or(Error::DegenerateTriangle { index }))
        .collect::<Vec<Result<_>>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(geometry
        .into_iter()
        .zip(&soup.attributes)
        .map(|((center, rotation, scales), appearance)| {
            FlatGaussian::new(center, rotation, scales, appearance.clone())
        })
        .collect())
}
