use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty point cloud")]
    EmptyCloud,
    #[error("k exceeds cloud size (k = {k}, size = {size})")]
    KExceedsCloud { k: usize, size: usize },
    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("degenerate neighborhood at point {index}")]
    DegenerateNeighborhood { index: usize },
    #[error("cannot establish outward orientation")]
    NoOutwardOrientation,
    #[error("no consensus sphere at point {index}")]
    NoConsensus { index: usize },
    #[error("point outside displacement grid")]
    OutsideGrid,
    #[error("points outside displacement grid: {}", format_indices(.indices))]
    PointsOutsideGrid { indices: Vec<usize> },
    #[error("invalid displacement field: {0}")]
    InvalidField(String),
    #[error("data size mismatch: expected {expected} bytes, found {actual}")]
    DataSizeMismatch { expected: usize, actual: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("ground-truth strain is constant")]
    ConstantGroundTruth,
    #[error("no masked points")]
    EmptyMask,
    #[error("quantile must lie in (0, 1), got {0}")]
    InvalidQuantile(f64),
    #[error("no closed form for this phantom and field")]
    NoClosedForm,
    #[error("grid does not cover phantom plus margin: {0}")]
    GridTooSmall(String),
    #[error("missing header")]
    MissingHeader,
    #[error("line {line}: invalid label")]
    InvalidLabel { line: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short machine-readable category, stable across releases.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyCloud | Error::InvalidCloud(_) => "cloud",
            Error::KExceedsCloud { .. } => "neighbors",
            Error::InvalidParams(_) => "params",
            Error::DegenerateNeighborhood { .. }
            | Error::NoOutwardOrientation
            | Error::NoConsensus { .. } => "surface",
            Error::OutsideGrid | Error::PointsOutsideGrid { .. } => "outside-grid",
            Error::InvalidField(_) | Error::DataSizeMismatch { .. } => "field",
            Error::LengthMismatch { .. } => "length",
            Error::ConstantGroundTruth | Error::EmptyMask | Error::InvalidQuantile(_) => "metrics",
            Error::NoClosedForm | Error::GridTooSmall(_) => "phantom",
            Error::MissingHeader | Error::InvalidLabel { .. } | Error::Parse { .. } => "parse",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn format_indices(indices: &[usize]) -> String {
    const SHOWN: usize = 20;
    let mut s = indices
        .iter()
        .take(SHOWN)
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(",");
    if indices.len() > SHOWN {
        s.push_str(&format!(",... ({} total)", indices.len()));
    }
    s
}
