use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("empty input")]
    EmptyInput,
    #[error("truncated binary header")]
    TruncatedHeader,
    #[error("triangle count mismatch: header declares {declared}, file holds {found}")]
    TriangleCountMismatch { declared: u64, found: u64 },
    #[error("unparsable ASCII facet at line {line}: {reason}")]
    UnparsableFacet { line: usize, reason: String },
    #[error("obj face with <3 indices at line {line}")]
    ObjShortFace { line: usize },
    #[error("obj parse error at line {line}: {reason}")]
    ObjSyntax { line: usize, reason: String },
    #[error("mesh contains no usable triangles")]
    EmptyMesh,
    #[error("non-watertight mesh")]
    NonWatertight,
    #[error("open cross-section loop at layer {layer}")]
    OpenLoop { layer: usize },
    #[error("layer {layer} has multiple outer contours or holes")]
    NotSpiralizable { layer: usize },
    #[error("degenerate layer {layer}: empty region")]
    DegenerateLayer { layer: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid toolpath: {0}")]
    InvalidToolpath(String),
    #[error("toolpath json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = GeomError> = std::result::Result<T, E>;
