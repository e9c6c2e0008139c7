use thiserror::Error;

use crate::decomposition::FitFailure;
use crate::field::{Field, GaugeTag};

pub type Result<T> = std::result::Result<T, CmError>;

#[derive(Debug, Error)]
pub enum CmError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("scale λ = {lambda:.6e} outside the resolvable range [{min:.6e}, {max:.6e}]")]
    UnresolvableScale { lambda: f64, min: f64, max: f64 },
    #[error("chirp under-resolved at t = {t}: need n > {required_n} (have {n})")]
    UnderResolvedChirp { t: f64, n: usize, required_n: usize },
    #[error("gauge tag mismatch: expected {expected:?}, found {found:?}")]
    TagMismatch { expected: GaugeTag, found: GaugeTag },
    #[error("non-finite samples in input")]
    NonFinite,
    #[error("need at least {needed} snapshots, got {got}")]
    TooFewSnapshots { needed: usize, got: usize },
    #[error("blow-up reached at t = {t}")]
    BlowUp { t: f64, last_valid: Box<Field> },
    #[error("modulation fit failed: {0}")]
    FitFailed(Box<FitFailure>),
    #[error("small-energy precondition violated: sqrt(E) = {sqrt_energy:.6e} > alpha* |v|_H1 = {bound:.6e}")]
    SmallEnergy { sqrt_energy: f64, bound: f64 },
    #[error("{0}")]
    Format(String),
    #[error("config errors: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
