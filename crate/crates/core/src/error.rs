use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed scan file (size % 16 != 0): {len} bytes")]
    MalformedScan { len: u64 },

    #[error("malformed label file (size % 4 != 0): {len} bytes")]
    MalformedLabels { len: u64 },

    #[error("malformed field file: {0}")]
    MalformedField(String),

    #[error("non-finite coordinate in point {index}")]
    NonFinitePoint { index: usize },

    #[error("{what} length {got} does not match point count {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("degenerate point at sensor center")]
    DegeneratePoint,

    #[error("insufficient beam separation: {distinct} distinct inclinations for {k} beams")]
    InsufficientBeamSeparation { distinct: usize, k: usize },

    #[error("beam target count {target} out of range 1..={k}")]
    TargetCountOutOfRange { target: usize, k: usize },

    #[error("partition mismatch: {0}")]
    PartitionMismatch(String),

    #[error("profile length mismatch: m = {m}, counts has {got} entries")]
    ProfileLengthMismatch { m: usize, got: usize },

    #[error("unsupported profile version {0:?}")]
    ProfileVersion(String),

    #[error("malformed profile: {0}")]
    MalformedProfile(String),

    #[error("unlabeled input scan")]
    UnlabeledScan,

    #[error("malformed probability row {row}: {reason}")]
    MalformedProbabilities { row: usize, reason: String },

    #[error("no labeled points")]
    NoLabeledPoints,

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: u16, classes: usize },

    #[error("no valid prototype for accepted classes {0:?}")]
    InvalidPrototype(Vec<u16>),

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
