//! Deterministic orthographic previewer for flat Gaussians.
//!
//! Each Gaussian's live axes are projected onto the image plane, giving a 2×2
//! pixel-space covariance `A diag(s1², s2²) Aᵀ`. Kernels are composited back to
//! front (farthest first, equal depths in input order) with
//! `C ← w c + (1 − w) C`, where `w = σ exp(−d²/2)` inside Mahalanobis radius 3.
//! There is no near plane: everything in the view volume's footprint is drawn.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{Isometry3, Matrix3, Rotation3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{FlatGaussian, Vec3};

/// Zeroth spherical-harmonic band constant, `sqrt(1 / (4π))`.
pub const SH_C0: f64 = 0.282_094_791_773_878_14;

/// Mahalanobis radius beyond which a footprint contributes nothing.
pub const FOOTPRINT_CUTOFF: f64 = 3.0;

const MIN_FOOTPRINT_DET: f64 = 1e-12;
const ROWS_PER_BAND: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrthoCamera {
    pub position: Vec3,
    /// Columns: image right, image up, and the backward direction (opposite
    /// to the viewing direction), forming a proper rotation.
    pub orientation: Rotation3<f64>,
    pub view_width: f64,
    pub view_height: f64,
    pub width: usize,
    pub height: usize,
}

impl OrthoCamera {
    /// Camera at `position` looking along `forward`, with `up` projected to
    /// be orthogonal to it.
    pub fn look_along(
        position: Vec3,
        forward: Vec3,
        up: Vec3,
        view: (f64, f64),
        pixels: (usize, usize),
    ) -> Result<Self> {
        let f = forward
            .try_normalize(1e-12)
            .ok_or_else(|| Error::DegenerateCamera("viewing direction is zero".into()))?;
        let u = (up - f * up.dot(&f)).try_normalize(1e-9).ok_or_else(|| {
            Error::DegenerateCamera("up vector is parallel to the viewing direction".into())
        })?;
        let r = f.cross(&u);
        let camera = Self {
            position,
            orientation: Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[r, u, -f])),
            view_width: view.0,
            view_height: view.1,
            width: pixels.0,
            height: pixels.1,
        };
        camera.check()?;
        Ok(camera)
    }

    pub fn right(&self) -> Vec3 {
        self.orientation.matrix().column(0).into_owned()
    }

    pub fn up(&self) -> Vec3 {
        self.orientation.matrix().column(1).into_owned()
    }

    pub fn forward(&self) -> Vec3 {
        -self.orientation.matrix().column(2).into_owned()
    }

    pub fn transformed(&self, motion: &Isometry3<f64>) -> Self {
        Self {
            position: motion.transform_point(&self.position.into()).coords,
            orientation: motion.rotation.to_rotation_matrix() * self.orientation,
            ..*self
        }
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::DegenerateCamera(m.into()));
        if self.width == 0 || self.height == 0 {
            return bad("image size must be positive");
        }
        if !(self.view_width.is_finite() && self.view_width > 0.0)
            || !(self.view_height.is_finite() && self.view_height > 0.0)
        {
            return bad("view extents must be finite and positive");
        }
        if !self.position.iter().all(|c| c.is_finite()) {
            return bad("position is not finite");
        }
        let m = self.orientation.matrix();
        if !m.iter().all(|c| c.is_finite())
            || (m.transpose() * m - Matrix3::identity()).abs().max() > 1e-6
            || (m.determinant() - 1.0).abs() > 1e-6
        {
            return bad("orientation is not a rotation");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// Row-major RGB in `[0, 1]`.
    pub pixels: Vec<[f64; 3]>,
}

impl Image {
    pub fn filled(width: usize, height: usize, color: [f64; 3]) -> Self {
        Self {
            width,
            height,
            pixels: vec![color; width * height],
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.pixels.iter().flat_map(|p| p.map(quantize)).collect()
    }

    /// Binary PPM (`P6`, maxval 255).
    pub fn write_ppm(&self, out: &mut impl Write) -> std::io::Result<()> {
        write!(out, "P6\n{} {}\n255\n", self.width, self.height)?;
        out.write_all(&self.to_bytes())
    }

    pub fn read_ppm(reader: &mut impl BufRead, context: &str) -> Result<Self> {
        let mut tokens = Vec::new();
        while tokens.len() < 4 {
            let mut line = String::new();
            let n = reader
                .read_line(&mut line)
                .map_err(|e| Error::parse(context, "header", e.to_string()))?;
            if n == 0 {
                return Err(Error::parse(context, "header", "unexpected end of file"));
            }
            let line = line.split('#').next().unwrap_or("");
            tokens.extend(line.split_whitespace().map(str::to_owned));
        }
        if tokens[0] != "P6" || tokens.len() != 4 {
            return Err(Error::parse(
                context,
                "header",
                "expected a binary P6 header on separate lines",
            ));
        }
        let dims: Vec<usize> = tokens[1..]
            .iter()
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::parse(context, "header", format!("bad number '{t}'")))
            })
            .collect::<Result<_>>()?;
        if dims[2] != 255 {
            return Err(Error::parse(
                context,
                "header",
                "only maxval 255 is supported",
            ));
        }
        let (width, height) = (dims[0], dims[1]);
        let mut bytes = vec![0u8; width * height * 3];
        reader
            .read_exact(&mut bytes)
            .map_err(|e| Error::parse(context, "pixel data", e.to_string()))?;
        let pixels = bytes
            .chunks_exact(3)
            .map(|c| [c[0], c[1], c[2]].map(|b| b as f64 / 255.0))
            .collect();
        Ok(Self {
            width,
            height,
            pixels,
        })
    }
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn write_image(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    image
        .write_ppm(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Image::read_ppm(&mut BufReader::new(file), &path.display().to_string())
}

/// DC color coefficients to RGB.
pub fn dc_to_rgb(dc: &[f64; 3]) -> [f64; 3] {
    dc.map(|c| (0.5 + SH_C0 * c).clamp(0.0, 1.0))
}

/// Screen-space footprint of one Gaussian.
#[derive(Debug, Clone, Copy)]
struct Splat {
    /// Center in continuous pixel coordinates (pixel `i` spans `[i, i+1)`).
    center: [f64; 2],
    /// Inverse covariance, `[a, b, c]` for `[[a, b], [b, c]]`.
    conic: [f64; 3],
    x_range: (usize, usize),
    y_range: (usize, usize),
    opacity: f64,
    color: [f64; 3],
}

fn project(g: &FlatGaussian, camera: &OrthoCamera) -> Option<Splat> {
    let sx = camera.width as f64 / camera.view_width;
    let sy = camera.height as f64 / camera.view_height;
    let (right, up) = (camera.right(), camera.up());
    let rel = g.center - camera.position;
    let center = [
        (right.dot(&rel) + 0.5 * camera.view_width) * sx,
        (0.5 * camera.view_height - up.dot(&rel)) * sy,
    ];

    let [_, r1, r2] = g.axes();
    // Pixel-space images of the two scaled axes.
    let a1 = [
        right.dot(&r1) * sx * g.scales[0],
        -up.dot(&r1) * sy * g.scales[0],
    ];
    let a2 = [
        right.dot(&r2) * sx * g.scales[1],
        -up.dot(&r2) * sy * g.scales[1],
    ];
    let cxx = a1[0] * a1[0] + a2[0] * a2[0];
    let cxy = a1[0] * a1[1] + a2[0] * a2[1];
    let cyy = a1[1] * a1[1] + a2[1] * a2[1];
    let det = cxx * cyy - cxy * cxy;
    if !(det > MIN_FOOTPRINT_DET) || !center.iter().all(|c| c.is_finite()) {
        return None;
    }
    let conic = [cyy / det, -cxy / det, cxx / det];

    let rx = FOOTPRINT_CUTOFF * cxx.sqrt();
    let ry = FOOTPRINT_CUTOFF * cyy.sqrt();
    let range = |c: f64, r: f64, n: usize| -> Option<(usize, usize)> {
        let lo = (c - r - 0.5).ceil().max(0.0);
        let hi = (c + r - 0.5).floor().min(n as f64 - 1.0);
        (lo <= hi).then_some((lo as usize, hi as usize + 1))
    };
    Some(Splat {
        center,
        conic,
        x_range: range(center[0], rx, camera.width)?,
        y_range: range(center[1], ry, camera.height)?,
        opacity: g.appearance.opacity,
        color: dc_to_rgb(&g.appearance.color.dc),
    })
}

impl Splat {
    #[inline]
    fn weight(&self, px: f64, py: f64) -> f64 {
        let dx = px - self.center[0];
        let dy = py - self.center[1];
        let [a, b, c] = self.conic;
        let d2 = a * dx * dx + 2.0 * b * dx * dy + c * dy * dy;
        if d2 > FOOTPRINT_CUTOFF * FOOTPRINT_CUTOFF {
            0.0
        } else {
            self.opacity * (-0.5 * d2).exp()
        }
    }
}

/// Back-to-front order: farthest first, equal depths by input index.
fn depth_order(gaussians: &[FlatGaussian], camera: &OrthoCamera) -> Vec<usize> {
    let forward = camera.forward();
    let depth: Vec<f64> = gaussians
        .iter()
        .map(|g| forward.dot(&(g.center - camera.position)))
        .collect();
    let mut order: Vec<usize> = (0..gaussians.len()).collect();
    order.sort_by(|&a, &b| depth[b].total_cmp(&depth[a]).then(a.cmp(&b)));
    order
}

pub fn render(
    gaussians: &[FlatGaussian],
    camera: &OrthoCamera,
    background: [f64; 3],
) -> Result<Image> {
    camera.check()?;
    let splats: Vec<Splat> = depth_order(gaussians, camera)
        .into_iter()
        .filter_map(|i| project(&gaussians[i], camera))
        .collect();

    let mut image = Image::filled(camera.width, camera.height, background);
    let width = camera.width;
    image
        .pixels
        .par_chunks_mut(width * ROWS_PER_BAND)
        .enumerate()
        .for_each(|(band, rows)| {
            let y0 = band * ROWS_PER_BAND;
            let y1 = y0 + rows.len() / width;
            for s in &splats {
                let ys = s.y_range.0.max(y0)..s.y_range.1.min(y1);
                for y in ys {
                    let py = y as f64 + 0.5;
                    let row = &mut rows[(y - y0) * width..(y - y0 + 1) * width];
                    for (x, px) in row
                        .iter_mut()
                        .enumerate()
                        .take(s.x_range.1)
                        .skip(s.x_range.0)
                    {
                        let w = s.weight(x as f64 + 0.5, py);
                        if w > 0.0 {
                            for (c, &sc) in px.iter_mut().zip(&s.color) {
                                *c = w * sc + (1.0 - w) * *c;
                            }
                        }
                    }
                }
            }
        });
    Ok(image)
}
