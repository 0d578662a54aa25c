//! Indexed triangle meshes: file codecs, edit-pair validation, centroids and
//! area-weighted surface sampling.
//!
//! Two on-disk formats are understood, chosen by extension:
//!
//! * `.obj`: `v x y z` and `f a b c ...` statements with 1-based (or negative,
//!   relative) indices; `a/b/c` index groups use the first entry; polygons are
//!   fan-triangulated; `#` comments and all other statements are ignored.
//! * `.ply`: binary little-endian, a `vertex` element with `x`, `y`, `z` and a
//!   `face` element with a `vertex_indices` list. Meshes are written with
//!   `double` coordinates and `uchar`/`int` index lists.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{is_degenerate, Vec3};
use crate::ply::{self, Element, PayloadCursor, Property, PropertyKind, ScalarType};

/// Sample count used for mesh-based initialization.
pub const DEFAULT_SAMPLE_COUNT: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct IndexedMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
}

/// One face with its vertex positions resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshFace {
    pub vertices: [Vec3; 3],
    pub face_id: usize,
}

impl MeshFace {
    pub fn centroid(&self) -> Vec3 {
        (self.vertices[0] + self.vertices[1] + self.vertices[2]) / 3.0
    }

    pub fn is_degenerate(&self) -> bool {
        let [a, b, c] = &self.vertices;
        is_degenerate(a, b, c)
    }

    pub fn area(&self) -> f64 {
        let [a, b, c] = &self.vertices;
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    /// Unit normal following the counter-clockwise winding; zero for a collapsed face.
    pub fn normal(&self) -> Vec3 {
        let [a, b, c] = &self.vertices;
        (b - a)
            .cross(&(c - a))
            .try_normalize(0.0)
            .unwrap_or_else(Vec3::zeros)
    }
}

impl IndexedMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<Self> {
        if faces.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let bad: Vec<usize> = vertices
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.iter().all(|c| c.is_finite()))
            .map(|(i, _)| i)
            .collect();
        if !bad.is_empty() {
            return Err(Error::NonFinite {
                what: "mesh vertex".into(),
                indices: bad,
            });
        }
        for (face, f) in faces.iter().enumerate() {
            if let Some(&index) = f.iter().find(|&&i| i as usize >= vertices.len()) {
                return Err(Error::IndexOutOfRange {
                    face,
                    index: index as usize,
                    count: vertices.len(),
                });
            }
        }
        Ok(Self { vertices, faces })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face(&self, face_id: usize) -> Result<MeshFace> {
        let f = self.faces.get(face_id).ok_or(Error::FaceOutOfRange {
            face: face_id,
            count: self.faces.len(),
        })?;
        Ok(self.face_unchecked(face_id, f))
    }

    fn face_unchecked(&self, face_id: usize, f: &[u32; 3]) -> MeshFace {
        MeshFace {
            vertices: f.map(|i| self.vertices[i as usize]),
            face_id,
        }
    }

    pub fn iter_faces(&self) -> impl ExactSizeIterator<Item = MeshFace> + '_ {
        self.faces
            .iter()
            .enumerate()
            .map(|(id, f)| self.face_unchecked(id, f))
    }

    /// Same topology with every vertex mapped through `f`.
    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> Self {
        Self {
            vertices: self.vertices.iter().map(f).collect(),
            faces: self.faces.clone(),
        }
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    pub fn diagonal(&self) -> f64 {
        let (lo, hi) = self.bounds();
        (hi - lo).norm()
    }

    pub fn area(&self) -> f64 {
        self.iter_faces().map(|f| f.area()).sum()
    }
}

pub fn face_centroid(mesh: &IndexedMesh, face_id: usize) -> Result<Vec3> {
    Ok(mesh.face(face_id)?.centroid())
}

/// An original/edited mesh pair whose faces correspond one-to-one by position.
#[derive(Debug, Clone, Copy)]
pub struct EditPair<'a> {
    original: &'a IndexedMesh,
    edited: &'a IndexedMesh,
}

impl<'a> EditPair<'a> {
    pub fn original(&self) -> &'a IndexedMesh {
        self.original
    }

    pub fn edited(&self) -> &'a IndexedMesh {
        self.edited
    }
}

/// Accepts the pair iff both meshes share the same face list; only vertex
/// positions may differ.
pub fn validate_edit_pair<'a>(
    original: &'a IndexedMesh,
    edited: &'a IndexedMesh,
) -> Result<EditPair<'a>> {
    if original.face_count() != edited.face_count() {
        return Err(Error::FaceCountMismatch {
            original: original.face_count(),
            edited: edited.face_count(),
        });
    }
    if let Some((face, (a, b))) = original
        .faces
        .iter()
        .zip(&edited.faces)
        .enumerate()
        .find(|(_, (a, b))| a != b)
    {
        return Err(Error::TopologyMismatch {
            face,
            original: *a,
            edited: *b,
        });
    }
    Ok(EditPair { original, edited })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceSample {
    pub point: Vec3,
    pub face_id: usize,
    pub normal: Vec3,
}

/// Draws `n` points uniformly over the surface: faces by area, then the
/// square-root barycentric warp inside the face. Deterministic per seed.
pub fn sample_surface(mesh: &IndexedMesh, n: usize, seed: u64) -> Result<Vec<SurfaceSample>> {
    let mut cumulative = Vec::with_capacity(mesh.face_count());
    let mut total = 0.0;
    for face in mesh.iter_faces() {
        total += face.area();
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::ZeroArea);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let last = mesh.face_count() - 1;
    let samples = (0..n)
        .map(|_| {
            let target = rng.random::<f64>() * total;
            // Zero-area faces can never be picked: their upper bound equals the previous one.
            let face_id = cumulative.partition_point(|&c| c <= target).min(last);
            let a = rng.random::<f64>();
            let b = rng.random::<f64>();
            let root = a.sqrt();
            let face = mesh.face_unchecked(face_id, &mesh.faces[face_id]);
            let [w0, w1, w2] = face.vertices;
            let point = w0 * (1.0 - root) + w1 * (root * (1.0 - b)) + w2 * (root * b);
            SurfaceSample {
                point,
                face_id,
                normal: face.normal(),
            }
        })
        .collect();
    Ok(samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("obj") => Ok(Self::Obj),
            Some("ply") => Ok(Self::Ply),
            _ => Err(Error::parse(
                path.display().to_string(),
                "file name",
                "unsupported mesh extension (expected .obj or .ply)",
            )),
        }
    }
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<IndexedMesh> {
    let path = path.as_ref();
    let format = MeshFormat::from_path(path)?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let context = path.display().to_string();
    match format {
        MeshFormat::Obj => read_obj(&mut reader, &context),
        MeshFormat::Ply => read_ply(&mut reader, &context),
    }
}

pub fn save_mesh(mesh: &IndexedMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let format = MeshFormat::from_path(path)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    match format {
        MeshFormat::Obj => write_obj(mesh, &mut out),
        MeshFormat::Ply => write_ply(mesh, &mut out),
    }
    .and_then(|_| out.flush())
    .map_err(|e| Error::io(path, e))
}

pub fn read_obj(reader: &mut impl BufRead, context: &str) -> Result<IndexedMesh> {
    let (vertices, faces) = read_obj_raw(reader, context)?;
    IndexedMesh::new(vertices, faces)
}

/// Vertex and face lists without the non-empty/finite checks of [`IndexedMesh`].
pub(crate) fn read_obj_raw(
    reader: &mut impl BufRead,
    context: &str,
) -> Result<(Vec<Vec3>, Vec<[u32; 3]>)> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut polygon: Vec<u32> = Vec::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line
            .map_err(|e| Error::parse(context, format!("line {}", line_no + 1), e.to_string()))?;
        let loc = || format!("line {}", line_no + 1);
        let line = line.split('#').next().unwrap_or("");
        let mut words = line.split_whitespace();
        match words.next() {
            Some("v") => {
                let mut xyz = [0.0; 3];
                for c in xyz.iter_mut() {
                    *c = words
                        .next()
                        .and_then(|w| w.parse::<f64>().ok())
                        .ok_or_else(|| {
                            Error::parse(context, loc(), "vertex needs three numbers")
                        })?;
                }
                vertices.push(Vec3::from(xyz));
            }
            Some("f") => {
                polygon.clear();
                for word in words {
                    let first = word.split('/').next().unwrap_or("");
                    let raw: i64 = first.parse().map_err(|_| {
                        Error::parse(context, loc(), format!("bad face index '{word}'"))
                    })?;
                    let index = match raw {
                        0 => {
                            return Err(Error::parse(
                                context,
                                loc(),
                                "face index 0 (indices are 1-based)",
                            ))
                        }
                        r if r > 0 => r - 1,
                        r => vertices.len() as i64 + r,
                    };
                    if index < 0 || index >= vertices.len() as i64 {
                        return Err(Error::IndexOutOfRange {
                            face: faces.len(),
                            index: index.max(0) as usize,
                            count: vertices.len(),
                        });
                    }
                    polygon.push(index as u32);
                }
                if polygon.len() < 3 {
                    return Err(Error::parse(
                        context,
                        loc(),
                        "face needs at least three vertices",
                    ));
                }
                for k in 1..polygon.len() - 1 {
                    faces.push([polygon[0], polygon[k], polygon[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok((vertices, faces))
}

pub fn write_obj(mesh: &IndexedMesh, out: &mut impl Write) -> std::io::Result<()> {
    write_obj_raw(&mesh.vertices, &mesh.faces, out)
}

pub(crate) fn write_obj_raw(
    vertices: &[Vec3],
    faces: &[[u32; 3]],
    out: &mut impl Write,
) -> std::io::Result<()> {
    for v in vertices {
        writeln!(out, "v {} {} {}", v.x, v.y, v.z)?;
    }
    for f in faces {
        writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}

pub fn read_ply(reader: &mut impl BufRead, context: &str) -> Result<IndexedMesh> {
    let (vertices, faces) = read_ply_raw(reader, context)?;
    IndexedMesh::new(vertices, faces)
}

pub(crate) fn read_ply_raw(
    reader: &mut impl BufRead,
    context: &str,
) -> Result<(Vec<Vec3>, Vec<[u32; 3]>)> {
    let header = ply::read_header(reader, context)?;
    let mut payload = Vec::new();
    reader
        .read_to_end(&mut payload)
        .map_err(|e| Error::parse(context, "payload", e.to_string()))?;
    let mut cursor = PayloadCursor::new(&payload, context);

    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut values = Vec::new();
    for element in &header.elements {
        match element.name.as_str() {
            "vertex" => {
                let axes = ["x", "y", "z"].map(|n| element.property_index(n));
                let [Some(ix), Some(iy), Some(iz)] = axes else {
                    return Err(Error::parse(
                        context,
                        "header",
                        "vertex element lacks x/y/z",
                    ));
                };
                vertices.reserve(element.count);
                for record in 0..element.count {
                    let mut p = Vec3::zeros();
                    cursor.record(element, record, &mut values, |i, v| {
                        if i == ix {
                            p.x = v[0];
                        } else if i == iy {
                            p.y = v[0];
                        } else if i == iz {
                            p.z = v[0];
                        }
                        Ok(())
                    })?;
                    vertices.push(p);
                }
            }
            "face" => {
                let list = element
                    .property_index("vertex_indices")
                    .or_else(|| element.property_index("vertex_index"))
                    .ok_or_else(|| {
                        Error::parse(context, "header", "face element lacks vertex_indices")
                    })?;
                faces.reserve(element.count);
                for record in 0..element.count {
                    cursor.record(element, record, &mut values, |i, v| {
                        if i != list {
                            return Ok(());
                        }
                        if v.len() < 3 {
                            return Err(Error::parse(
                                context,
                                format!("face record {record}"),
                                "face needs at least three vertices",
                            ));
                        }
                        if let Some(&bad) = v.iter().find(|&&x| x < 0.0) {
                            return Err(Error::parse(
                                context,
                                format!("face record {record}"),
                                format!("negative vertex index {bad}"),
                            ));
                        }
                        for k in 1..v.len() - 1 {
                            faces.push([v[0] as u32, v[k] as u32, v[k + 1] as u32]);
                        }
                        Ok(())
                    })?;
                }
            }
            _ => {
                for record in 0..element.count {
                    cursor.record(element, record, &mut values, |_, _| Ok(()))?;
                }
            }
        }
    }
    for (face, f) in faces.iter().enumerate() {
        if let Some(&index) = f.iter().find(|&&i| i as usize >= vertices.len()) {
            return Err(Error::IndexOutOfRange {
                face,
                index: index as usize,
                count: vertices.len(),
            });
        }
    }
    Ok((vertices, faces))
}

pub fn write_ply(mesh: &IndexedMesh, out: &mut impl Write) -> std::io::Result<()> {
    write_ply_raw(&mesh.vertices, &mesh.faces, out)
}

pub(crate) fn write_ply_raw(
    vertices: &[Vec3],
    faces: &[[u32; 3]],
    out: &mut impl Write,
) -> std::io::Result<()> {
    let elements = [
        Element {
            name: "vertex".into(),
            count: vertices.len(),
            properties: ["x", "y", "z"]
                .iter()
                .map(|n| ply::scalar(n, ScalarType::F64))
                .collect(),
        },
        Element {
            name: "face".into(),
            count: faces.len(),
            properties: vec![Property {
                name: "vertex_indices".into(),
                kind: PropertyKind::List {
                    count: ScalarType::U8,
                    item: ScalarType::I32,
                },
            }],
        },
    ];
    ply::write_header(out, &elements)?;
    for v in vertices {
        for c in v.iter() {
            out.write_all(&c.to_le_bytes())?;
        }
    }
    for f in faces {
        out.write_all(&[3u8])?;
        for &i in f {
            out.write_all(&(i as i32).to_le_bytes())?;
        }
    }
    Ok(())
}
