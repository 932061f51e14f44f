use thiserror::Error;

/// Everything that can go wrong inside the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("volume radius {l} needs a patch with exact_radius >= {required}, patch has {available}")]
    VolumeTooLarge {
        l: usize,
        required: usize,
        available: usize,
    },

    #[error("vertex {vertex} is not in a graph with {vertex_count} vertices")]
    VertexOutOfRange { vertex: usize, vertex_count: usize },

    #[error("enumeration over {size} elements exceeds the cap of {cap}")]
    EnumerationCap { size: usize, cap: usize },

    #[error("event `{0}` is not increasing")]
    NotIncreasing(String),

    #[error("event `{event}` reads element {element} outside its declared dependency set")]
    UndeclaredDependency { event: String, element: usize },

    #[error("disjoint-occurrence search hit a configuration with support {support} > {cap}")]
    SupportTooLarge { support: usize, cap: usize },

    #[error("kernel is not summable on this patch (J0 condition): {0}")]
    NonSummableKernel(String),

    #[error("patch too small: {0}")]
    PatchTooSmall(String),

    #[error("fit window too thin: {reason}; usable points {usable:?}")]
    ThinWindow { reason: String, usable: Vec<f64> },

    #[error("critical scan could not bracket: {0}")]
    NoBracket(String),

    #[error("variant {variant} does not match percolation kind {kind}")]
    VariantMismatch { variant: String, kind: String },

    #[error("malformed graph text at line {line}: {reason}")]
    GraphFormat { line: usize, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
