use thiserror::Error;

use crate::lattice::Site;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("boundary condition does not resolve exterior site {0}")]
    UnresolvedBoundary(Site),

    #[error("site {0} is not an active site of the window")]
    SiteNotInWindow(Site),

    #[error("configuration is missing site {0}")]
    MissingSite(Site),

    #[error("value {value} at site {site} is not in the {alphabet} alphabet")]
    InvalidSpinValue {
        site: Site,
        value: i8,
        alphabet: &'static str,
    },

    #[error(
        "exact enumeration needs {required} free sites but the cap is {cap} \
         (2^{required} states; raise the cap or use the Monte Carlo backend)"
    )]
    EnumerationCap { required: usize, cap: usize },

    #[error("transfer-matrix range {range} exceeds the cap {cap} (2^{range} states)")]
    TransferRangeCap { range: usize, cap: usize },

    #[error("power iteration did not converge after {iterations} iterations (last relative change {last_change:e})")]
    NoConvergence { iterations: usize, last_change: f64 },

    #[error("conditioning event has probability zero")]
    ZeroProbability,

    #[error("{0}")]
    Degenerate(String),

    #[error("branch `{0}` does not exist at these parameters")]
    NoSuchBranch(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
