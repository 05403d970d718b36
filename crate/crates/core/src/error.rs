use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid quaternion: {0}")]
    InvalidQuaternion(String),

    #[error("degenerate interpolation at joint {joint}: blended vector has zero norm")]
    DegenerateInterpolation { joint: usize },

    #[error("skeleton mismatch: expected `{expected}`, got `{actual}`")]
    SkeletonMismatch { expected: String, actual: String },

    #[error("invalid skeleton: {0}")]
    InvalidSkeleton(String),

    #[error("invalid pose: {0}")]
    InvalidPose(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("stale cache: {0}")]
    StaleCache(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("unknown part `{name}` (valid parts: {})", valid.join(", "))]
    UnknownPart { name: String, valid: Vec<String> },

    #[error("code index {index} out of range for codebook `{codebook}` of size {size}")]
    CodeOutOfRange {
        codebook: String,
        index: usize,
        size: usize,
    },

    #[error("model fingerprint mismatch: latent carries {actual:016x}, model is {expected:016x}")]
    FingerprintMismatch { expected: u64, actual: u64 },

    #[error("training diverged at step {step}: {component} is not finite")]
    TrainingDivergence { step: u64, component: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("checksum mismatch in section `{0}`")]
    Checksum(String),

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
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

    /// True for failures of the numerical machinery rather than of inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::TrainingDivergence { .. }
                | Error::DegenerateInterpolation { .. }
                | Error::StaleCache(_)
        )
    }
}
