use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error classes, used by the command-line front end to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Io,
    Validation,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: parse error at {location}: {message}")]
    Parse {
        context: String,
        location: String,
        message: String,
    },

    #[error("face {face} references vertex {index}, but only {count} vertices exist")]
    IndexOutOfRange {
        face: usize,
        index: usize,
        count: usize,
    },

    #[error("mesh has no faces")]
    EmptyMesh,

    #[error("gaussian {index}: {reason}")]
    InvalidGaussian { index: usize, reason: String },

    #[error("triangle {index} is degenerate")]
    DegenerateTriangle { index: usize },

    #[error("face {face} is degenerate")]
    DegenerateFace { face: usize },

    #[error("face id {face} out of range for a mesh with {count} faces")]
    FaceOutOfRange { face: usize, count: usize },

    #[error(
        "face count mismatch: original mesh has {original} faces, edited mesh has {edited} \
         (edits must keep the topology fixed)"
    )]
    FaceCountMismatch { original: usize, edited: usize },

    #[error(
        "topology mismatch at face {face}: original {original:?} vs edited {edited:?} \
         (faces must keep their index triples and order)"
    )]
    TopologyMismatch {
        face: usize,
        original: [u32; 3],
        edited: [u32; 3],
    },

    #[error("centroid index was built over {indexed} faces, mesh has {mesh}")]
    IndexMeshMismatch { indexed: usize, mesh: usize },

    #[error("mesh surface area is zero")]
    ZeroArea,

    #[error("soup geometry has {geometry} triangles but the attribute table has {sidecar} rows")]
    CountMismatch { geometry: usize, sidecar: usize },

    #[error("soup face {face} shares vertices; a soup must be disconnected triangles")]
    SharedVertices { face: usize },

    #[error("non-finite {what} at indices {indices:?}")]
    NonFinite { what: String, indices: Vec<usize> },

    #[error("invalid {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("degenerate camera: {0}")]
    DegenerateCamera(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. } => ErrorClass::Io,
            Error::NonFinite { .. } | Error::InvalidParameter { .. } => ErrorClass::Numeric,
            _ => ErrorClass::Validation,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(
        context: impl Into<String>,
        location: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Error::Parse {
            context: context.into(),
            location: location.into(),
            message: message.into(),
        }
    }
}
