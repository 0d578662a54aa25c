//! Mesh-driven editing of flat Gaussian scenes.
//!
//! Flat Gaussians are encoded as a triangle soup ([`model`]), each soup
//! triangle is tied to the nearest face of a reference mesh ([`spatial`]), and
//! edits of that mesh are carried over to the soup through per-face frames
//! ([`propagate`]). Decoding the soup yields the edited Gaussians.
//!
//! [`surface_prior`] holds the surface-alignment terms used when fitting such
//! scenes (SDF-conditioned opacity and the normal regularizer) over analytic
//! signed distance fields, [`render`] a small orthographic previewer, and
//! [`io`]/[`meshio`] the file codecs.

// `!(x > 0.0)` is used on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod io;
pub mod meshio;
pub mod model;
mod ply;
pub mod propagate;
pub mod render;
pub mod spatial;
pub mod surface_prior;

pub use error::{Error, ErrorClass, Result};
pub use meshio::{IndexedMesh, MeshFace};
pub use model::{Appearance, FlatGaussian, ShColor, SoupTriangle, TriangleSoup, Vec3, FLAT_SCALE};
pub use propagate::{AssociationReport, EditTransform, FaceFrame};
pub use spatial::CentroidIndex;
pub use surface_prior::{AnalyticSdf, OpacityParams};
