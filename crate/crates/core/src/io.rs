//! Scene and soup persistence.
//!
//! Scenes use the customary splatting point-cloud layout: a binary
//! little-endian PLY `vertex` element of 32-bit floats named
//! `x y z nx ny nz f_dc_0..2 f_rest_* opacity scale_0..2 rot_0..3`, with
//! opacity stored as a logit, scales as natural logarithms and the rotation as
//! a scalar-first quaternion. Normals are written as zeros and ignored on read.
//!
//! Soups are stored as a mesh file (`.obj` or `.ply`) holding `3N` vertices and
//! the disconnected faces `(3i, 3i+1, 3i+2)`, plus a tab-separated sidecar at
//! `<stem>.attrs.tsv` with the columns `index opacity f_dc_0..2 f_rest_*`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Quaternion, Rotation3, UnitQuaternion};

use crate::error::{Error, Result};
use crate::meshio::{self, MeshFormat};
use crate::model::{
    Appearance, FlatGaussian, ShColor, SoupTriangle, TriangleSoup, Vec3, FLAT_SCALE,
};
use crate::ply::{self, Element, ScalarType};

/// Opacities are clamped into `[OPACITY_CLAMP, 1 − OPACITY_CLAMP]` before the logit.
pub const OPACITY_CLAMP: f64 = 1e-6;

/// Loaded Gaussians whose smallest-to-middle scale ratio exceeds this are reported.
pub const FLATNESS_RATIO_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlattenReport {
    /// `(index, smallest / middle scale)` for every poorly flat input kernel.
    pub poorly_flat: Vec<(usize, f64)>,
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    let p = p.clamp(OPACITY_CLAMP, 1.0 - OPACITY_CLAMP);
    (p / (1.0 - p)).ln()
}

/// Raw per-record values of a scene file, already activated except for the
/// flattening step.
#[derive(Debug, Clone, PartialEq)]
pub struct RawKernel {
    pub center: Vec3,
    pub rotation: UnitQuaternion<f64>,
    pub scales: [f64; 3],
    pub appearance: Appearance,
}

/// Drops the smallest scale and rotates the columns cyclically so the
/// flattened axis becomes column 0 (a cyclic permutation keeps `det = +1`).
/// Returns the Gaussian and the smallest-to-middle scale ratio.
pub fn flatten(raw: &RawKernel) -> (FlatGaussian, f64) {
    let s = raw.scales;
    let k = (0..3).fold(0, |best, i| if s[i] < s[best] { i } else { best });
    let order = [k, (k + 1) % 3, (k + 2) % 3];
    let r = raw.rotation.to_rotation_matrix().into_inner();
    let columns = order.map(|i| r.column(i).into_owned());
    let rotation = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(
        Matrix3::from_columns(&columns),
    ));
    let live = [s[order[1]], s[order[2]]];
    let ratio = s[k] / live[0].min(live[1]);
    let g = FlatGaussian::new(raw.center, rotation, live, raw.appearance.clone());
    (g, ratio)
}

struct SceneLayout {
    position: [usize; 3],
    dc: [usize; 3],
    rest: Vec<usize>,
    opacity: usize,
    scale: [usize; 3],
    rot: [usize; 4],
}

impl SceneLayout {
    fn from_element(element: &Element, context: &str) -> Result<Self> {
        let find = |name: String| {
            element.property_index(&name).ok_or_else(|| {
                Error::parse(context, "header", format!("missing property '{name}'"))
            })
        };
        let many = |prefix: &str, n: usize| -> Result<Vec<usize>> {
            (0..n).map(|i| find(format!("{prefix}{i}"))).collect()
        };
        let mut rest = Vec::new();
        while let Some(i) = element.property_index(&format!("f_rest_{}", rest.len())) {
            rest.push(i);
        }
        Ok(Self {
            position: [find("x".into())?, find("y".into())?, find("z".into())?],
            dc: many("f_dc_", 3)?.try_into().unwrap(),
            rest,
            opacity: find("opacity".into())?,
            scale: many("scale_", 3)?.try_into().unwrap(),
            rot: many("rot_", 4)?.try_into().unwrap(),
        })
    }
}

/// Reads a scene file into raw kernels (activations applied, not yet flattened).
pub fn read_scene_raw(reader: &mut impl BufRead, context: &str) -> Result<Vec<RawKernel>> {
    let header = ply::read_header(reader, context)?;
    let element = header
        .element("vertex")
        .ok_or_else(|| Error::parse(context, "header", "no vertex element"))?;
    if header.elements[0].name != "vertex" {
        return Err(Error::parse(
            context,
            "header",
            "vertex must be the first element",
        ));
    }
    let record_size = element
        .fixed_record_size()
        .ok_or_else(|| Error::parse(context, "header", "vertex element has list properties"))?;
    let layout = SceneLayout::from_element(element, context)?;
    let types: Vec<ScalarType> = element
        .properties
        .iter()
        .map(|p| match p.kind {
            ply::PropertyKind::Scalar(t) => t,
            ply::PropertyKind::List { .. } => unreachable!(),
        })
        .collect();
    let mut offsets = Vec::with_capacity(types.len());
    let mut at = 0;
    for t in &types {
        offsets.push(at);
        at += t.size();
    }

    let payload = ply::read_records(reader, element.count, record_size, context, "vertex")?;
    let mut kernels = Vec::with_capacity(element.count);
    let mut non_finite = Vec::new();
    let mut values = vec![0.0; types.len()];
    for (index, record) in payload.chunks_exact(record_size).enumerate() {
        for (i, v) in values.iter_mut().enumerate() {
            *v = types[i].read(&record[offsets[i]..]);
        }
        if values.iter().any(|v| !v.is_finite()) {
            non_finite.push(index);
            continue;
        }
        let get = |i: usize| values[i];
        let q = Quaternion::new(
            get(layout.rot[0]),
            get(layout.rot[1]),
            get(layout.rot[2]),
            get(layout.rot[3]),
        );
        if q.norm() == 0.0 {
            return Err(Error::InvalidGaussian {
                index,
                reason: "rotation quaternion is zero".into(),
            });
        }
        kernels.push(RawKernel {
            center: Vec3::new(
                get(layout.position[0]),
                get(layout.position[1]),
                get(layout.position[2]),
            ),
            rotation: UnitQuaternion::from_quaternion(q),
            scales: layout.scale.map(|i| get(i).exp()),
            appearance: Appearance {
                opacity: logistic(get(layout.opacity)),
                color: ShColor {
                    dc: layout.dc.map(get),
                    rest: layout.rest.iter().map(|&i| get(i)).collect(),
                },
            },
        });
    }
    if !non_finite.is_empty() {
        return Err(Error::NonFinite {
            what: "scene record field".into(),
            indices: non_finite,
        });
    }
    Ok(kernels)
}

pub fn read_scene(
    reader: &mut impl BufRead,
    context: &str,
) -> Result<(Vec<FlatGaussian>, FlattenReport)> {
    let raw = read_scene_raw(reader, context)?;
    let mut report = FlattenReport::default();
    let mut gaussians = Vec::with_capacity(raw.len());
    for (index, kernel) in raw.iter().enumerate() {
        let (g, ratio) = flatten(kernel);
        if ratio > FLATNESS_RATIO_LIMIT {
            report.poorly_flat.push((index, ratio));
        }
        if !(g.scales[0] > 0.0 && g.scales[1] > 0.0) {
            return Err(Error::InvalidGaussian {
                index,
                reason: "live scales underflow to zero".into(),
            });
        }
        gaussians.push(g);
    }
    Ok((gaussians, report))
}

pub fn write_scene(gaussians: &[FlatGaussian], out: &mut impl Write) -> Result<()> {
    for (index, g) in gaussians.iter().enumerate() {
        g.check()
            .map_err(|reason| Error::InvalidGaussian { index, reason })?;
    }
    let rest_len = gaussians
        .first()
        .map_or(0, |g| g.appearance.color.rest.len());
    if let Some(index) = gaussians
        .iter()
        .position(|g| g.appearance.color.rest.len() != rest_len)
    {
        return Err(Error::InvalidGaussian {
            index,
            reason: format!(
                "has {} higher-order color coefficients, expected {rest_len} like the first kernel",
                gaussians[index].appearance.color.rest.len()
            ),
        });
    }

    let mut names: Vec<String> = [
        "x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    names.extend((0..rest_len).map(|i| format!("f_rest_{i}")));
    names.extend(
        [
            "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    let element = Element {
        name: "vertex".into(),
        count: gaussians.len(),
        properties: names
            .iter()
            .map(|n| ply::scalar(n, ScalarType::F32))
            .collect(),
    };

    let io = |e| Error::io("<scene output>", e);
    ply::write_header(out, &[element]).map_err(io)?;
    let mut record: Vec<f32> = Vec::with_capacity(names.len());
    let flat_log = FLAT_SCALE.ln();
    for g in gaussians {
        record.clear();
        let q = g.rotation.quaternion();
        let a = &g.appearance;
        record.extend(g.center.iter().map(|&c| c as f32));
        record.extend([0.0f32; 3]);
        record.extend(a.color.dc.iter().map(|&c| c as f32));
        record.extend(a.color.rest.iter().map(|&c| c as f32));
        record.push(logit(a.opacity) as f32);
        record.extend([flat_log, g.scales[0].ln(), g.scales[1].ln()].map(|c| c as f32));
        record.extend([q.w, q.i, q.j, q.k].map(|c| c as f32));
        for v in &record {
            out.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    Ok(())
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<(Vec<FlatGaussian>, FlattenReport)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_scene(&mut BufReader::new(file), &path.display().to_string())
}

pub fn save_scene(gaussians: &[FlatGaussian], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_scene(gaussians, &mut out).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Sidecar path for a soup geometry file: `<stem>.attrs.tsv`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("attrs.tsv")
}

pub fn write_attributes(attributes: &[Appearance], out: &mut impl Write) -> std::io::Result<()> {
    let rest_len = attributes
        .iter()
        .map(|a| a.color.rest.len())
        .max()
        .unwrap_or(0);
    write!(out, "index\topacity\tf_dc_0\tf_dc_1\tf_dc_2")?;
    for i in 0..rest_len {
        write!(out, "\tf_rest_{i}")?;
    }
    writeln!(out)?;
    for (i, a) in attributes.iter().enumerate() {
        write!(out, "{i}\t{}", a.opacity)?;
        for c in a.color.dc.iter().chain(&a.color.rest) {
            write!(out, "\t{c}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn read_attributes(reader: &mut impl BufRead, context: &str) -> Result<Vec<Appearance>> {
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => line.map_err(|e| Error::parse(context, "line 1", e.to_string()))?,
        None => return Err(Error::parse(context, "line 1", "missing header row")),
    };
    let columns: Vec<&str> = header.split('\t').collect();
    if columns.len() < 5 || columns[..5] != ["index", "opacity", "f_dc_0", "f_dc_1", "f_dc_2"] {
        return Err(Error::parse(
            context,
            "line 1",
            "expected columns index, opacity, f_dc_0..2",
        ));
    }
    let mut out = Vec::new();
    for (n, line) in lines {
        let loc = format!("line {}", n + 1);
        let line = line.map_err(|e| Error::parse(context, &loc, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 5 {
            return Err(Error::parse(
                context,
                &loc,
                "row has fewer than five columns",
            ));
        }
        let index: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse(context, &loc, "index is not an integer"))?;
        if index != out.len() {
            return Err(Error::parse(
                context,
                &loc,
                format!("expected index {}, found {index}", out.len()),
            ));
        }
        let numbers: Vec<f64> = fields[1..]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::parse(context, &loc, format!("bad number '{f}'")))
            })
            .collect::<Result<_>>()?;
        out.push(Appearance {
            opacity: numbers[0],
            color: ShColor {
                dc: [numbers[1], numbers[2], numbers[3]],
                rest: numbers[4..].to_vec(),
            },
        });
    }
    Ok(out)
}

pub fn save_soup(soup: &TriangleSoup, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let format = MeshFormat::from_path(path)?;
    let vertices: Vec<Vec3> = soup.triangles().iter().flat_map(|t| t.vertices).collect();
    let faces: Vec<[u32; 3]> = (0..soup.len() as u32)
        .map(|i| [3 * i, 3 * i + 1, 3 * i + 2])
        .collect();

    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    match format {
        MeshFormat::Obj => meshio::write_obj_raw(&vertices, &faces, &mut out),
        MeshFormat::Ply => meshio::write_ply_raw(&vertices, &faces, &mut out),
    }
    .and_then(|_| out.flush())
    .map_err(|e| Error::io(path, e))?;

    let side = sidecar_path(path);
    let file = File::create(&side).map_err(|e| Error::io(&side, e))?;
    let mut out = BufWriter::new(file);
    write_attributes(soup.attributes(), &mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(&side, e))
}

/// Checks that faces are exactly `(3i, 3i+1, 3i+2)` over `3N` vertices.
pub fn soup_from_raw(vertices: &[Vec3], faces: &[[u32; 3]]) -> Result<Vec<SoupTriangle>> {
    for (face, f) in faces.iter().enumerate() {
        let base = 3 * face as u32;
        if *f != [base, base + 1, base + 2] {
            return Err(Error::SharedVertices { face });
        }
    }
    if vertices.len() != 3 * faces.len() {
        return Err(Error::SharedVertices { face: faces.len() });
    }
    Ok(vertices
        .chunks_exact(3)
        .map(|c| SoupTriangle::new(c[0], c[1], c[2]))
        .collect())
}

pub fn load_soup(path: impl AsRef<Path>) -> Result<TriangleSoup> {
    let path = path.as_ref();
    let format = MeshFormat::from_path(path)?;
    let context = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let (vertices, faces) = match format {
        MeshFormat::Obj => meshio::read_obj_raw(&mut reader, &context)?,
        MeshFormat::Ply => meshio::read_ply_raw(&mut reader, &context)?,
    };
    let bad: Vec<usize> = vertices
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.iter().all(|c| c.is_finite()))
        .map(|(i, _)| i / 3)
        .collect();
    if !bad.is_empty() {
        return Err(Error::NonFinite {
            what: "soup triangle".into(),
            indices: bad,
        });
    }
    let triangles = soup_from_raw(&vertices, &faces)?;

    let side = sidecar_path(path);
    let file = File::open(&side).map_err(|e| Error::io(&side, e))?;
    let attributes = read_attributes(&mut BufReader::new(file), &side.display().to_string())?;
    TriangleSoup::new(triangles, attributes)
}
