use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("requested {requested} neighbours but only {available} points are available")]
    InsufficientNeighbors { requested: usize, available: usize },
    #[error("{count} point(s) with non-finite coordinates")]
    NonFiniteCoordinate { count: usize },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated body: expected {expected} points, read {read}")]
    TruncatedBody { expected: usize, read: usize },
    #[error("unsupported property `{0}`")]
    UnsupportedProperty(String),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("malformed body: {0}")]
    MalformedBody(String),
    #[error("quaternion norm {norm} is not 1")]
    NonUnitQuaternion { norm: f64 },
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("point cloud has zero horizontal extent along {axis}")]
    DegenerateExtent { axis: char },
    #[error("point ({x}, {y}) lies outside the cloth")]
    PointOutsideCloth { x: f64, y: f64 },

    #[error("cell size must be positive, got {0}")]
    InvalidCellSize(f64),
    #[error("raster contains no data cells")]
    AllNoData,
    #[error("no points inside the profile corridor")]
    EmptyCorridor,
    #[error("{count} point(s) are still unlabeled")]
    UnlabeledPointsRemain { count: usize },
    #[error("invalid scene: {0}")]
    InvalidSpec(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
