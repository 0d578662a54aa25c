//! Propagating mesh edits onto a triangle soup.
//!
//! Every soup triangle is tied to the original face whose centroid is nearest
//! to the triangle's centroid. Both the original and the edited version of
//! that face get a right-handed orthonormal frame (first edge, normal, and
//! their cross product, rooted at the first vertex); the triangle is then
//! moved by `v ↦ U'Uᵀ (v − w0) + w0'`.

use std::fmt;
use std::io::Write;

use nalgebra::Matrix3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::meshio::{validate_edit_pair, IndexedMesh, MeshFace};
use crate::model::{SoupTriangle, TriangleSoup, Vec3};
use crate::spatial::CentroidIndex;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceFrame {
    /// Columns `u0` (edge), `u1` (normal), `u2 = u0 × u1`.
    pub basis: Matrix3<f64>,
    pub origin: Vec3,
}

impl FaceFrame {
    pub fn new(face: &MeshFace) -> Result<Self> {
        if face.is_degenerate() {
            return Err(Error::DegenerateFace { face: face.face_id });
        }
        let [w0, w1, w2] = face.vertices;
        let e1 = w1 - w0;
        let e2 = w2 - w0;
        let u0 = e1.normalize();
        let u1 = e1.cross(&e2).normalize();
        let u2 = u0.cross(&u1);
        Ok(Self {
            basis: Matrix3::from_columns(&[u0, u1, u2]),
            origin: w0,
        })
    }
}

pub fn face_frame(face: &MeshFace) -> Result<FaceFrame> {
    FaceFrame::new(face)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EditTransform {
    pub rotation: Matrix3<f64>,
    pub from_origin: Vec3,
    pub to_origin: Vec3,
}

impl EditTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            from_origin: Vec3::zeros(),
            to_origin: Vec3::zeros(),
        }
    }

    /// `U' Uᵀ`, the inverse of an orthonormal basis being its transpose.
    pub fn between(from: &FaceFrame, to: &FaceFrame) -> Self {
        Self {
            rotation: to.basis * from.basis.transpose(),
            from_origin: from.origin,
            to_origin: to.origin,
        }
    }

    #[inline]
    pub fn apply_point(&self, v: &Vec3) -> Vec3 {
        self.rotation * (v - self.from_origin) + self.to_origin
    }

    pub fn apply(&self, triangle: &SoupTriangle) -> SoupTriangle {
        triangle.map(|v| self.apply_point(v))
    }
}

pub fn edit_transform(original: &MeshFace, edited: &MeshFace) -> Result<EditTransform> {
    Ok(EditTransform::between(
        &FaceFrame::new(original)?,
        &FaceFrame::new(edited)?,
    ))
}

pub fn apply_edit(triangle: &SoupTriangle, xf: &EditTransform) -> SoupTriangle {
    xf.apply(triangle)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AssociationFlag {
    Ok,
    /// The associated original face is degenerate; the triangle is left in place.
    DegenerateOriginal,
    /// The edited face is degenerate; the triangle is left in place.
    DegenerateEdited,
}

impl AssociationFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::DegenerateOriginal => "degenerate_original",
            Self::DegenerateEdited => "degenerate_edited",
        }
    }
}

impl fmt::Display for AssociationFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Association {
    pub triangle: usize,
    pub face_id: usize,
    /// Distance between the triangle centroid and the face centroid.
    pub distance: f64,
    pub flag: AssociationFlag,
}

/// Per-triangle association records, ordered by triangle index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AssociationReport {
    pub associations: Vec<Association>,
}

impl AssociationReport {
    pub fn len(&self) -> usize {
        self.associations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.associations.is_empty()
    }

    pub fn skipped(&self) -> impl Iterator<Item = &Association> {
        self.associations
            .iter()
            .filter(|a| a.flag != AssociationFlag::Ok)
    }

    pub fn distinct_faces(&self) -> usize {
        let mut ids: Vec<usize> = self.associations.iter().map(|a| a.face_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    /// Line-oriented human summary.
    pub fn summary(&self) -> String {
        let count = |flag| self.associations.iter().filter(|a| a.flag == flag).count();
        let max_distance = self
            .associations
            .iter()
            .map(|a| a.distance)
            .fold(0.0f64, f64::max);
        let mean_distance = if self.is_empty() {
            0.0
        } else {
            self.associations.iter().map(|a| a.distance).sum::<f64>() / self.len() as f64
        };
        let mut s = String::new();
        s.push_str(&format!("triangles: {}\n", self.len()));
        s.push_str(&format!("faces used: {}\n", self.distinct_faces()));
        s.push_str(&format!("moved: {}\n", count(AssociationFlag::Ok)));
        s.push_str(&format!(
            "skipped (degenerate original face): {}\n",
            count(AssociationFlag::DegenerateOriginal)
        ));
        s.push_str(&format!(
            "skipped (degenerate edited face): {}\n",
            count(AssociationFlag::DegenerateEdited)
        ));
        s.push_str(&format!("mean centroid distance: {mean_distance}\n"));
        s.push_str(&format!("max centroid distance: {max_distance}\n"));
        s
    }

    /// Tab-separated table: `triangle face distance flag`, with a header row.
    pub fn write_table(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "triangle\tface\tdistance\tflag")?;
        for a in &self.associations {
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                a.triangle, a.face_id, a.distance, a.flag
            )?;
        }
        Ok(())
    }
}

/// Moves every soup triangle with the edit of its nearest original face.
///
/// `index` must have been built over `original`. Attributes pass through
/// untouched and the output keeps the input order.
pub fn propagate_soup(
    soup: &TriangleSoup,
    original: &IndexedMesh,
    edited: &IndexedMesh,
    index: &CentroidIndex,
) -> Result<(TriangleSoup, AssociationReport)> {
    let pair = validate_edit_pair(original, edited)?;
    if index.len() != original.face_count() {
        return Err(Error::IndexMeshMismatch {
            indexed: index.len(),
            mesh: original.face_count(),
        });
    }

    let results = soup
        .triangles()
        .par_iter()
        .enumerate()
        .map(|(i, tri)| {
            let hit = index
                .nearest(&tri.centroid())
                .map_err(|_| Error::NonFinite {
                    what: "soup triangle".into(),
                    indices: vec![i],
                })?;
            let from = pair.original().face(hit.face_id)?;
            let to = pair.edited().face(hit.face_id)?;
            let (moved, flag) = match (FaceFrame::new(&from), FaceFrame::new(&to)) {
                (Ok(a), Ok(b)) => (
                    EditTransform::between(&a, &b).apply(tri),
                    AssociationFlag::Ok,
                ),
                (Err(_), _) => (*tri, AssociationFlag::DegenerateOriginal),
                (Ok(_), Err(_)) => (*tri, AssociationFlag::DegenerateEdited),
            };
            let record = Association {
                triangle: i,
                face_id: hit.face_id,
                distance: hit.distance,
                flag,
            };
            Ok((moved, record))
        })
        .collect::<Vec<Result<_>>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let (triangles, associations): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let out = TriangleSoup::new(triangles, soup.attributes().to_vec())?;
    Ok((out, AssociationReport { associations }))
}
