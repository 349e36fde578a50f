use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported spline order {0} (orders 0-2 are implemented)")]
    UnsupportedOrder(u32),

    #[error("scale {0} is too large to evaluate without overflow")]
    ScaleTooLarge(u32),

    #[error("basis would contain {requested} functions, exceeding the cap of {cap}")]
    BasisTooLarge { requested: u128, cap: usize },

    #[error("state has dimension {got}, basis expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unknown function id {0}")]
    UnknownFunction(u64),

    #[error("function {0} is not wavelet-kind")]
    NotWaveletKind(u64),

    #[error("function {id} has no atom in dimension {dim}")]
    NoAtomInDimension { id: u64, dim: usize },

    #[error("function {id} is already at the scale cap {max_scale} in dimension {dim}")]
    ScaleCapReached { id: u64, dim: usize, max_scale: u32 },

    #[error("relevance decay must lie strictly inside (0, 1), got {0}")]
    InvalidDecay(f64),

    #[error("invalid action {action}: environment has {n_actions} actions")]
    InvalidAction { action: usize, n_actions: usize },

    #[error("environment is terminal; call reset before stepping")]
    TerminalStep,

    #[error("unknown environment {0:?} (expected \"mountain-car\" or \"acrobot\")")]
    UnknownEnvironment(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("grid resolution must be at least 2, got {0}")]
    ResolutionTooSmall(usize),

    #[error("malformed basis file: {0}")]
    BasisParse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
