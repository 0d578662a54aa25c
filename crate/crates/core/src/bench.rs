//! Edit-time scaling benchmark on synthetic meshes.
//!
//! A torus is tessellated at several resolutions, twisted about its axis to
//! produce the edited mesh, and a fixed soup sampled from the surface is
//! propagated against each pair. The timed span covers everything an edit
//! costs: pair validation, index construction and propagation.

use std::f64::consts::TAU;
use std::time::{Duration, Instant};

use nalgebra::{Matrix3, Rotation3, UnitQuaternion};

use crate::error::Result;
use crate::meshio::{sample_surface, validate_edit_pair, IndexedMesh};
use crate::model::{encode_soup, Appearance, FlatGaussian, ShColor, TriangleSoup, Vec3};
use crate::propagate::{propagate_soup, AssociationReport};
use crate::spatial::CentroidIndex;

/// Face counts of the reference resolution sweep.
pub const REFERENCE_FACE_COUNTS: [usize; 5] = [120_778, 512_304, 1_188_712, 2_101_122, 3_334_984];

pub const DEFAULT_SOUP_SIZE: usize = 100_000;

const MAJOR_RADIUS: f64 = 1.0;
const MINOR_RADIUS: f64 = 0.35;

/// Torus in the xy-plane with `2k × k` quads split into `4k²` triangles.
pub fn torus(k: usize) -> IndexedMesh {
    let k = k.max(3);
    let (nu, nv) = (2 * k, k);
    let mut vertices = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = TAU * i as f64 / nu as f64;
        for j in 0..nv {
            let v = TAU * j as f64 / nv as f64;
            let ring = MAJOR_RADIUS + MINOR_RADIUS * v.cos();
            vertices.push(Vec3::new(
                ring * u.cos(),
                ring * u.sin(),
                MINOR_RADIUS * v.sin(),
            ));
        }
    }
    let at = |i: usize, j: usize| ((i % nu) * nv + (j % nv)) as u32;
    let mut faces = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            let (a, b, c, d) = (at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    IndexedMesh::new(vertices, faces).expect("torus tessellation is valid")
}

/// Torus whose face count is closest to `faces`.
pub fn torus_with_faces(faces: usize) -> IndexedMesh {
    torus(((faces as f64 / 4.0).sqrt().round()) as usize)
}

/// Rotates every vertex about the z axis by `radians_per_unit · z`.
pub fn twist(mesh: &IndexedMesh, radians_per_unit: f64) -> IndexedMesh {
    mesh.map_vertices(|v| Rotation3::from_axis_angle(&Vec3::z_axis(), radians_per_unit * v.z) * v)
}

/// Flat Gaussians lying on the surface, each aligned with the face it was drawn from.
pub fn surface_gaussians(
    mesh: &IndexedMesh,
    n: usize,
    scale: f64,
    seed: u64,
) -> Result<Vec<FlatGaussian>> {
    let samples = sample_surface(mesh, n, seed)?;
    let mut gaussians = Vec::with_capacity(n);
    for (i, s) in samples.iter().enumerate() {
        let face = mesh.face(s.face_id)?;
        let tangent = (face.vertices[1] - face.vertices[0]).normalize();
        let bitangent = s.normal.cross(&tangent);
        let frame = Matrix3::from_columns(&[s.normal, tangent, bitangent]);
        let rotation =
            UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(frame));
        let shade = (i % 17) as f64 / 16.0 - 0.5;
        gaussians.push(FlatGaussian::new(
            s.point,
            rotation,
            [scale, 0.6 * scale],
            Appearance {
                opacity: 0.25,
                color: ShColor {
                    dc: [shade, -shade, 0.5 * shade],
                    rest: Vec::new(),
                },
            },
        ));
    }
    Ok(gaussians)
}

pub fn synthetic_soup(n: usize, seed: u64) -> Result<TriangleSoup> {
    let base = torus_with_faces(REFERENCE_FACE_COUNTS[0]);
    let spacing = (base.area() / n.max(1) as f64).sqrt();
    encode_soup(&surface_gaussians(&base, n, 0.5 * spacing, seed)?)
}

/// Validation, index build and propagation, timed together.
pub fn timed_edit(
    soup: &TriangleSoup,
    original: &IndexedMesh,
    edited: &IndexedMesh,
) -> Result<(Duration, TriangleSoup, AssociationReport)> {
    let start = Instant::now();
    validate_edit_pair(original, edited)?;
    let index = CentroidIndex::build(original)?;
    let (out, report) = propagate_soup(soup, original, edited, &index)?;
    Ok((start.elapsed(), out, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub vertices: usize,
    pub faces: usize,
    pub triangles: usize,
    /// Median over the repetitions.
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub face_counts: Vec<usize>,
    pub soup_size: usize,
    pub repeats: usize,
    pub twist: f64,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            face_counts: REFERENCE_FACE_COUNTS.to_vec(),
            soup_size: DEFAULT_SOUP_SIZE,
            repeats: 3,
            twist: 1.5,
            seed: 0,
        }
    }
}

pub fn run(config: &BenchConfig, mut progress: impl FnMut(&BenchRow)) -> Result<Vec<BenchRow>> {
    let soup = synthetic_soup(config.soup_size, config.seed)?;
    let mut rows = Vec::with_capacity(config.face_counts.len());
    for &target in &config.face_counts {
        let original = torus_with_faces(target);
        let edited = twist(&original, config.twist);
        let mut times: Vec<f64> = (0..config.repeats.max(1))
            .map(|_| timed_edit(&soup, &original, &edited).map(|(t, _, _)| t.as_secs_f64()))
            .collect::<Result<_>>()?;
        times.sort_by(f64::total_cmp);
        let row = BenchRow {
            vertices: original.vertex_count(),
            faces: original.face_count(),
            triangles: soup.len(),
            seconds: times[times.len() / 2],
        };
        progress(&row);
        rows.push(row);
    }
    Ok(rows)
}
