use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("size error: {0}")]
    Size(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing file: {0}")]
    MissingFile(PathBuf),

    #[error("unsupported format version {found} (supported: {supported})")]
    Version { found: u32, supported: u32 },

    #[error("payload length mismatch: expected {expected} bytes, found {actual} bytes")]
    LengthMismatch { expected: u64, actual: u64 },

    #[error("malformed data: {0}")]
    Data(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no periodicity found: {0}")]
    InsufficientPeriodicity(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("did not converge after {iterations} iterations (residual {residual_m:.6} m)")]
    NotConverged { iterations: usize, residual_m: f64 },

    #[error("time ordering violated: {0}")]
    Ordering(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the `isac` binary: 2 config, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Schema { .. } => 2,
            Error::Size(_)
            | Error::Io { .. }
            | Error::MissingFile(_)
            | Error::Version { .. }
            | Error::LengthMismatch { .. }
            | Error::Data(_)
            | Error::InsufficientData(_)
            | Error::Ordering(_) => 3,
            Error::Geometry(_)
            | Error::InsufficientPeriodicity(_)
            | Error::Numerical(_)
            | Error::Degenerate(_)
            | Error::NotConverged { .. } => 4,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Data(e.to_string())
    }
}
