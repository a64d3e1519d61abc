use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown certainty grade `{0}`")]
    UnknownGrade(String),

    #[error("invalid certainty scheme: {0}")]
    InvalidScheme(String),

    #[error("invalid tiling: {0}")]
    InvalidTiling(String),

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("class count mismatch: {0} vs {1}")]
    ClassCountMismatch(usize, usize),

    #[error("class {class} out of range 0..={max}")]
    ClassOutOfRange { class: usize, max: usize },

    #[error("predicted class 0 (unmodeled) at tile ({row}, {col})")]
    UnmodeledPrediction { row: usize, col: usize },

    #[error("error classification rate needs at least two classes, got {0}")]
    TooFewClasses(usize),

    #[error("boundary pixel ({row}, {col}) invalid: {reason}")]
    InvalidBoundary {
        row: usize,
        col: usize,
        reason: &'static str,
    },

    #[error("empty boundary set")]
    EmptyBoundary,

    #[error("grid {width}x{height} too small, need at least 2x2")]
    GridTooSmall { width: usize, height: usize },

    #[error("invalid GVF configuration: {0}")]
    InvalidGvfConfig(String),

    #[error("GVF diverged at iteration {iteration}")]
    GvfDiverged { iteration: usize },

    #[error("cannot aggregate: {0}")]
    Aggregate(&'static str),

    #[error("invalid synthetic geometry: {0}")]
    InvalidGeometry(String),

    #[error("unmapped pixel value {value} at ({row}, {col})")]
    UnmappedValue { value: u8, row: usize, col: usize },

    #[error("image decoding failed: {0}")]
    Image(#[from] image::ImageError),

    #[error("mapping table: {0}")]
    Csv(#[from] csv::Error),

    #[error("{}", path.display())]
    InFile {
        path: std::path::PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    /// True for failures of the numerical solver rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::GvfDiverged { .. } => true,
            Error::InFile { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
