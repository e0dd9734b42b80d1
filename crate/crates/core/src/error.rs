use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("volume {volume} reaches ISP capacity {capacity}")]
    CapacityExceeded { volume: f64, capacity: f64 },

    #[error("no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("root search did not converge within {0} iterations")]
    MaxIterations(usize),

    #[error("non-finite evaluation at x = {0}")]
    NonFinite(f64),

    #[error("no equilibrium root in (0, {capacity})")]
    NoEquilibriumRoot { capacity: f64 },

    #[error("second-order condition failed at v = {v} (isp term {isp}, cp term {cp})")]
    SecondOrderFailed { v: f64, isp: f64, cp: f64 },

    #[error("negative equilibrium price at v = {v}: p_b = {p_b}, p_s = {p_s}")]
    NegativePrice { v: f64, p_b: f64, p_s: f64 },

    #[error("network is not underused: v = {v} exceeds b_user * xi_cp = {limit}")]
    NotUnderused { v: f64, limit: f64 },

    #[error("equilibrium index {index} out of range ({count} equilibria found)")]
    EquilibriumIndex { index: usize, count: usize },

    #[error("{what} = {value} outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("negative bargaining surplus {0}: cooperation is not beneficial")]
    NegativeSurplus(f64),

    #[error("utility pairs sum to different totals ({pre} vs {post})")]
    InconsistentPairs { pre: f64, post: f64 },

    #[error("P2P volume must be positive")]
    ZeroVolume,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("ISP index {index} out of range for {len} ISPs")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("ISP {index} has negative free-riding volume {volume}")]
    NegativeFreeRiding { index: usize, volume: f64 },

    #[error("free-riding denominator v_p2p(2-beta) - v_s0*alpha = {0} is not positive")]
    NonPositiveFreeRiding(f64),

    #[error("weights sum to {0}, expected 1")]
    WeightSum(f64),

    #[error("empty system: {0}")]
    EmptySystem(&'static str),

    #[error("consistency check failed: {0}")]
    Consistency(String),

    #[error("scenario: {0}")]
    Scenario(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }

    /// Innermost error, skipping pipeline stage annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
