use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to decode image {path}: {message}")]
    Image { path: PathBuf, message: String },
    #[error("malformed document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("image must be single-channel, got {0}")]
    NotSingleChannel(String),
    #[error("resolution must be positive and finite, got {0}")]
    BadResolution(f64),
    #[error("grid dimensions must be at least 1x1, got {width}x{height}")]
    BadDimensions { width: usize, height: usize },
    #[error("cell buffer has {actual} entries, expected {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("thresholds must satisfy 0 <= free ({free}) < occupied ({occupied}) <= 1")]
    BadThresholds { free: f64, occupied: f64 },
    #[error("r_max must be positive, got {0}")]
    BadRange(f64),
    #[error("angular resolution must be in (0, 2π], got {0}")]
    BadAngularResolution(f64),
    #[error("object {index} has unknown class label {label:?}")]
    UnknownClass { index: usize, label: String },
    #[error("dynamic class {0:?} is not in the class vocabulary")]
    UnknownDynamicClass(String),
    #[error("class vocabulary lists {0:?} more than once")]
    DuplicateClass(String),
    #[error("empty class label in vocabulary")]
    EmptyClass,
    #[error("{what} {index} has a degenerate region (zero or negative area)")]
    DegenerateRegion { what: &'static str, index: usize },
    #[error("room name {0:?} is used more than once")]
    DuplicateRoom(String),
    #[error("room {room:?} has category {category:?} outside the declared categories")]
    UnknownCategory { room: String, category: String },
    #[error("point ({x:.3}, {y:.3}) is outside the grid")]
    OutOfBounds { x: f64, y: f64 },
    #[error("visibility cache: {0}")]
    Cache(String),
    #[error("objects entirely outside the grid: {0}")]
    ObjectsOutsideGrid(String),
}

#[derive(Debug, Error)]
pub enum SensorError {
    #[error("pixel column {column} is outside [0, {width}]")]
    ColumnOutOfRange { column: f64, width: u32 },
    #[error("bounding box is empty: left {left} >= right {right}")]
    EmptyBox { left: f64, right: f64 },
    #[error("invalid camera {id:?}: {reason}")]
    BadCamera { id: String, reason: String },
    #[error("scan has {angles} angles but {ranges} ranges")]
    ScanLength { angles: usize, ranges: usize },
}

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("grid has no free cells to place particles in")]
    NoFreeCells,
    #[error("no room of category {0:?} contains free cells")]
    NoSuchCategory(String),
    #[error("particle count must be at least 1")]
    NoParticles,
    #[error("invalid configuration: {0}")]
    BadConfig(String),
}

#[derive(Debug, Error)]
pub enum SemanticsError {
    #[error("classifier has no training samples")]
    Untrained,
    #[error("feature vector has length {actual}, expected {expected}")]
    FeatureLength { expected: usize, actual: usize },
    #[error("no ground-truth pose covers t = {0:.3}s")]
    MissingGroundTruth(f64),
    #[error("training row {row}: class {label:?} is not in the vocabulary")]
    UnknownTrainingClass { row: usize, label: String },
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("rooms {0} and {1} overlap")]
    OverlappingRooms(usize, usize),
    #[error("door {0} does not lie on any room wall")]
    DoorOffWall(usize),
    #[error("pose ({x:.3}, {y:.3}) is not in free space")]
    PoseInObstacle { x: f64, y: f64 },
    #[error("trajectory leaves free space near ({x:.3}, {y:.3})")]
    TrajectoryBlocked { x: f64, y: f64 },
    #[error("invalid specification: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Map(#[from] MapError),
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("record {index}: {message}")]
    Corrupt { index: usize, message: String },
    #[error("unsupported log schema version {0}")]
    UnsupportedVersion(u32),
    #[error("log has no header record")]
    MissingHeader,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("estimate and ground-truth timelines do not overlap")]
    NoOverlap,
    #[error("invalid convergence criteria: {0}")]
    BadCriteria(String),
    #[error("{what} hash {actual} does not match the log header ({expected})")]
    HashMismatch {
        what: &'static str,
        expected: String,
        actual: String,
    },
}

/// Umbrella error for operations that span modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("i/o on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
