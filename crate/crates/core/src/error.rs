use std::path::PathBuf;

use crate::geometry::BoundingBox;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid box [{x_min}, {y_min}, {x_max}, {y_max}]: min must not exceed max and coordinates must be finite")]
    InvalidBox {
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
    },

    #[error("overlap ratio undefined for zero-area box {0:?}")]
    UndefinedRatio(BoundingBox),

    #[error("degenerate box at index {index}: {bbox:?}")]
    DegenerateBox { index: usize, bbox: BoundingBox },

    #[error("confidence {0} outside [0, 1]")]
    InvalidConfidence(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: unsupported raster format ({message})")]
    UnsupportedFormat { path: PathBuf, message: String },

    #[error("frame at ({x}, {y}) with side {tile} exceeds image bounds {width}x{height}")]
    OutOfBoundsFrame {
        x: u32,
        y: u32,
        tile: u32,
        width: u32,
        height: u32,
    },

    #[error("image {width}x{height} is smaller than the minimum cell side {min_cell}")]
    ImageTooSmall {
        width: u32,
        height: u32,
        min_cell: u32,
    },

    #[error("could not sample an annotated frame for image {image_id} ({split}) within {attempts} attempts")]
    InsufficientAnnotatedArea {
        image_id: String,
        split: String,
        attempts: usize,
    },

    #[error("frame index {0} is not part of the frame plan")]
    UnknownFrameIndex(usize),

    #[error("backend failed on frame {frame_index}: {message}")]
    BackendFailure { frame_index: usize, message: String },

    #[error("manifest mismatch: {0}")]
    ManifestMismatch(String),

    #[error("{path}:{line}: schema violation: {message}")]
    SchemaViolation {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("oracle accepts at most {max} detections, got {got}")]
    InputTooLarge { got: usize, max: usize },

    #[error("class {0} has no ground truth instances")]
    ClassAbsent(u32),

    #[error("image encoding failed: {0}")]
    Encode(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
