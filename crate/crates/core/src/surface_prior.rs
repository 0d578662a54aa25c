//! Analytic signed distance fields and the surface-alignment terms built on them.
//!
//! Shapes are described in a small line-oriented text format:
//!
//! ```text
//! # comments start with '#'
//! combine union                      # or: intersection (default union)
//! sphere center=0,0,0 radius=1
//! box center=0,0,0 half=1,1,1
//! plane normal=0,0,1 offset=0        # f(x) = n·x - offset, n is normalized
//! ```

use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::Vec3;

/// Default sharpness of the bell opacity, in inverse scene units.
pub const DEFAULT_BETA: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticSdf {
    Sphere {
        center: Vec3,
        radius: f64,
    },
    Box {
        center: Vec3,
        half_extents: Vec3,
    },
    /// `f(x) = normal · x − offset`; `normal` has unit length.
    Plane {
        normal: Vec3,
        offset: f64,
    },
    Union(Vec<AnalyticSdf>),
    Intersection(Vec<AnalyticSdf>),
}

impl AnalyticSdf {
    pub fn sphere(center: Vec3, radius: f64) -> Self {
        Self::Sphere { center, radius }
    }

    pub fn cuboid(center: Vec3, half_extents: Vec3) -> Self {
        Self::Box {
            center,
            half_extents,
        }
    }

    pub fn plane(normal: Vec3, offset: f64) -> Self {
        Self::Plane {
            normal: normal.normalize(),
            offset,
        }
    }

    /// Signed distance: negative inside, positive outside.
    pub fn eval(&self, x: &Vec3) -> f64 {
        match self {
            Self::Sphere { center, radius } => (x - center).norm() - radius,
            Self::Box {
                center,
                half_extents,
            } => {
                let q = (x - center).abs() - half_extents;
                let outside = q.sup(&Vec3::zeros()).norm();
                let inside = q.max().min(0.0);
                outside + inside
            }
            Self::Plane { normal, offset } => normal.dot(x) - offset,
            Self::Union(parts) => parts
                .iter()
                .map(|s| s.eval(x))
                .fold(f64::INFINITY, f64::min),
            Self::Intersection(parts) => parts
                .iter()
                .map(|s| s.eval(x))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Closed-form gradient, defined wherever the field is differentiable.
    /// At kinks, one of the one-sided gradients is returned.
    pub fn gradient(&self, x: &Vec3) -> Vec3 {
        match self {
            Self::Sphere { center, .. } => {
                (x - center).try_normalize(0.0).unwrap_or_else(Vec3::zeros)
            }
            Self::Box {
                center,
                half_extents,
            } => {
                let p = x - center;
                let q = p.abs() - half_extents;
                let sign = p.map(|c| if c < 0.0 { -1.0 } else { 1.0 });
                if q.max() > 0.0 {
                    let outside = q.sup(&Vec3::zeros());
                    outside.component_mul(&sign) / outside.norm()
                } else {
                    let axis = q.imax();
                    let mut g = Vec3::zeros();
                    g[axis] = sign[axis];
                    g
                }
            }
            Self::Plane { normal, .. } => *normal,
            Self::Union(parts) => Self::pick(parts, x, |a, b| a < b),
            Self::Intersection(parts) => Self::pick(parts, x, |a, b| a > b),
        }
    }

    fn pick(parts: &[AnalyticSdf], x: &Vec3, better: impl Fn(f64, f64) -> bool) -> Vec3 {
        let mut best: Option<(&AnalyticSdf, f64)> = None;
        for s in parts {
            let d = s.eval(x);
            if best.is_none_or(|(_, b)| better(d, b)) {
                best = Some((s, d));
            }
        }
        best.map_or_else(Vec3::zeros, |(s, _)| s.gradient(x))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, context: &str) -> Result<Self> {
        let mut shapes = Vec::new();
        let mut intersect = false;
        for (n, raw) in text.lines().enumerate() {
            let loc = format!("line {}", n + 1);
            let line = raw.split('#').next().unwrap_or("").trim();
            let mut words = line.split_whitespace();
            let Some(keyword) = words.next() else {
                continue;
            };
            if keyword == "combine" {
                intersect = match (words.next(), words.next()) {
                    (Some("union"), None) => false,
                    (Some("intersection"), None) => true,
                    _ => {
                        return Err(Error::parse(
                            context,
                            &loc,
                            "combine expects union or intersection",
                        ))
                    }
                };
                continue;
            }
            let params: Vec<(&str, &str)> = words
                .map(|w| {
                    w.split_once('=').ok_or_else(|| {
                        Error::parse(context, &loc, format!("expected key=value, got '{w}'"))
                    })
                })
                .collect::<Result<_>>()?;
            let get = |key: &str| {
                params
                    .iter()
                    .find(|(k, _)| *k == key)
                    .map(|(_, v)| *v)
                    .ok_or_else(|| Error::parse(context, &loc, format!("{keyword} needs '{key}='")))
            };
            let scalar = |key: &str| -> Result<f64> {
                let v = get(key)?;
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| {
                        Error::parse(context, &loc, format!("'{key}' is not a finite number"))
                    })
            };
            let vector = |key: &str| -> Result<Vec3> {
                parse_vec3(get(key)?).ok_or_else(|| {
                    Error::parse(
                        context,
                        &loc,
                        format!("'{key}' must be three comma-separated numbers"),
                    )
                })
            };
            match keyword {
                "sphere" => {
                    let radius = scalar("radius")?;
                    if radius <= 0.0 {
                        return Err(Error::parse(context, &loc, "radius must be positive"));
                    }
                    shapes.push(Self::sphere(vector("center")?, radius));
                }
                "box" => {
                    let half = vector("half")?;
                    if half.iter().any(|h| *h <= 0.0) {
                        return Err(Error::parse(context, &loc, "half extents must be positive"));
                    }
                    shapes.push(Self::cuboid(vector("center")?, half));
                }
                "plane" => {
                    let normal = vector("normal")?;
                    if normal.norm() == 0.0 {
                        return Err(Error::parse(context, &loc, "plane normal must be non-zero"));
                    }
                    shapes.push(Self::plane(normal, scalar("offset")?));
                }
                other => {
                    return Err(Error::parse(
                        context,
                        &loc,
                        format!("unknown shape '{other}'"),
                    ))
                }
            }
        }
        match shapes.len() {
            0 => Err(Error::parse(context, "end of file", "no shapes defined")),
            1 => Ok(shapes.pop().unwrap()),
            _ if intersect => Ok(Self::Intersection(shapes)),
            _ => Ok(Self::Union(shapes)),
        }
    }
}

impl FromStr for AnalyticSdf {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s, "sdf")
    }
}

/// Parses `x,y,z` into a finite vector.
pub fn parse_vec3(s: &str) -> Option<Vec3> {
    let mut it = s
        .split(',')
        .map(|c| c.trim().parse::<f64>().ok().filter(|x| x.is_finite()));
    let v = Vec3::new(it.next()??, it.next()??, it.next()??);
    it.next().is_none().then_some(v)
}

pub fn sdf_eval(sdf: &AnalyticSdf, x: &Vec3) -> f64 {
    sdf.eval(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpacityParams {
    beta: f64,
    /// Scale the bell by 4 so that its peak is 1 instead of 1/4.
    pub normalize: bool,
}

impl OpacityParams {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidParameter {
                name: "beta",
                message: format!("{beta} must be finite and positive"),
            });
        }
        Ok(Self {
            beta,
            normalize: false,
        })
    }

    pub fn normalized(mut self, normalize: bool) -> Self {
        self.normalize = normalize;
        self
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl Default for OpacityParams {
    fn default() -> Self {
        Self {
            beta: DEFAULT_BETA,
            normalize: false,
        }
    }
}

/// `exp(−βx) / (1 + exp(−βx))²`, evaluated as `e / (1 + e)²` with
/// `e = exp(−β|x|) ≤ 1` so nothing overflows.
pub fn bell_opacity(distance: f64, params: &OpacityParams) -> f64 {
    let e = (-(params.beta * distance).abs()).exp();
    let bell = e / ((1.0 + e) * (1.0 + e));
    if params.normalize {
        4.0 * bell
    } else {
        bell
    }
}

/// Opacity of a kernel centered at `x`: the bell applied to the signed distance.
pub fn surface_opacity(sdf: &AnalyticSdf, x: &Vec3, params: &OpacityParams) -> f64 {
    bell_opacity(sdf.eval(x), params)
}

const UNIT_TOLERANCE: f64 = 1e-6;

/// `|1 − |n·∇f||`. The gradient is used as given, without normalization.
pub fn normal_loss(normal: &Vec3, grad: &Vec3) -> Result<f64> {
    let len = normal.norm();
    if !((len - 1.0).abs() <= UNIT_TOLERANCE) {
        return Err(Error::InvalidParameter {
            name: "normal",
            message: format!("expected unit length, got {len}"),
        });
    }
    Ok((1.0 - normal.dot(grad).abs()).abs())
}

/// Central differences along each axis.
pub fn finite_diff_grad(sdf: &AnalyticSdf, x: &Vec3, h: f64) -> Result<Vec3> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidParameter {
            name: "step",
            message: format!("{h} must be finite and positive"),
        });
    }
    let mut g = Vec3::zeros();
    for axis in 0..3 {
        let mut plus = *x;
        let mut minus = *x;
        plus[axis] += h;
        minus[axis] -= h;
        g[axis] = (sdf.eval(&plus) - sdf.eval(&minus)) / (2.0 * h);
    }
    Ok(g)
}
