use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid waveform: {0}")]
    InvalidWaveform(String),
    #[error("degenerate noise: noise power must be positive")]
    DegenerateNoise,
    #[error("degenerate reference: reference signal is all zeros")]
    DegenerateReference,
    #[error("chunk length must be even and at least 2, got {0}")]
    InvalidChunkLength(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("sample rate mismatch: expected {expected} Hz, got {found} Hz")]
    SampleRateMismatch { expected: u32, found: u32 },
    #[error("invalid room geometry: {0}")]
    Geometry(String),
    #[error("empty source list")]
    EmptySources,
    #[error("no enrollment available for speaker {0}")]
    NoEnrollment(String),
    #[error("no outputs to assign")]
    NoOutputs,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{path}:{line}: malformed manifest record: {message}")]
    Manifest {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },
    #[error("corrupted checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("training diverged at step {step}: loss is {loss}")]
    Divergence { step: usize, loss: f64 },
    #[error("missing enrollment for example {0}")]
    MissingEnrollment(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
