use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty body")]
    EmptyBody,
    #[error("polygon is not convex or not in counter-clockwise order")]
    NotConvex,
    #[error("non-finite coordinate in input")]
    NonFinite,
    #[error("grid mismatch: vectors sampled on {0} and {1} directions")]
    GridMismatch(usize, usize),
    #[error("dimension mismatch: kernel expects {expected}, vector has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("polygonal disc approximation needs k >= 3, got {0}")]
    DiscPolygonTooCoarse(usize),
    #[error("invalid kernel parameter: {0}")]
    InvalidKernel(String),
    #[error("subset depth D must satisfy 1 <= D <= n, got D={d}, n={n}")]
    DepthOutOfRange { d: usize, n: usize },
    #[error("sample group too small: need at least 2 vectors per group, got {0}")]
    GroupTooSmall(usize),
    #[error("label counts do not match matrix groups: expected ({m1}, {m2})")]
    BadLabels { m1: usize, m2: usize },
    #[error("not a permutation of 0..{0}")]
    BadPermutation(usize),
    #[error("permutation count s must be >= 1")]
    NoPermutations,
    #[error("split test requires m₁=m₂ divisible by 3")]
    BadSplit,
    #[error("split test requires m/3 >= 8, got m = {0}")]
    SplitTooSmall(usize),
    #[error("empty sample")]
    EmptySample,
    #[error("invalid process parameter: {0}")]
    InvalidProcess(String),
    #[error("nothing to cover")]
    NothingToCover,
    #[error("covering radius must be >= 1 pixel, got {0}")]
    RadiusTooSmall(f64),
    #[error("duplicate centers")]
    DuplicateCenters,
    #[error("insufficient non-neighbouring cells; reduce m or enlarge realisation")]
    InsufficientCells,
    #[error("degenerate empty piece among chosen cells")]
    EmptyPiece,
    #[error("malformed PGM: {0}")]
    MalformedPgm(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
