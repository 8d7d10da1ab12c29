use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite coefficient at step {step} (t = {time})")]
    NonFinite { step: usize, time: f64 },

    #[error("implicit stage iteration did not converge at step {step} (t = {time}); reduce dt")]
    NoConvergence { step: usize, time: f64 },

    #[error("time grid mismatch: {0}")]
    GridMismatch(String),

    #[error("rejection sampler exceeded {cap} proposals at n = {n}, alpha = {alpha} (acceptance too low)")]
    ProposalCapExceeded { cap: u64, n: usize, alpha: f64 },

    #[error("oversampling too coarse: {fraction:.3e} of the weighted spectrum sits above half the Nyquist frequency {nyquist:.3}")]
    OversampleTooSmall { nyquist: f64, fraction: f64 },

    #[error("missing trajectory for dyadic scale {0}")]
    MissingTrajectory(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
