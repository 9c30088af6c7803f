use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Schema or configuration is malformed (roles, supports, parameters).
    Schema(String),
    /// Input values violate the declared schema.
    Data(String),
    UnknownAnchor(String),
    PathCapExceeded { count: usize, cap: usize },
    InvalidFolds { k: usize, n: usize },
    InvalidParameter(String),
    /// Normal equations could not be solved; raise the penalty.
    SingularDesign,
    EmptyData,
    PolicyOutsideSupport { time: usize, value: f64 },
    MissingTreatmentLevel { time: usize, level: f64 },
    NoAtRiskUnits { time: usize, fold: usize },
    NoUsablePaths,
    DegenerateVariance,
    NonFinite(String),
    Expression(String),
    MisalignedTables(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Schema(_)
            | Error::InvalidFolds { .. }
            | Error::InvalidParameter(_)
            | Error::Expression(_)
            | Error::PathCapExceeded { .. } => ErrorClass::Config,
            Error::Data(_)
            | Error::UnknownAnchor(_)
            | Error::EmptyData
            | Error::PolicyOutsideSupport { .. }
            | Error::MissingTreatmentLevel { .. }
            | Error::NoAtRiskUnits { .. } => ErrorClass::Data,
            Error::SingularDesign
            | Error::NoUsablePaths
            | Error::DegenerateVariance
            | Error::NonFinite(_)
            | Error::MisalignedTables(_) => ErrorClass::Numerical,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Schema(m) => write!(f, "schema error: {m}"),
            Error::Data(m) => write!(f, "data error: {m}"),
            Error::UnknownAnchor(m) => write!(f, "unregistered anchor: {m}"),
            Error::PathCapExceeded { count, cap } => write!(
                f,
                "{count} mediator paths exceed the cap of {cap}; reduce the horizon or use observed_only"
            ),
            Error::InvalidFolds { k, n } => write!(f, "cannot split {n} units into {k} folds"),
            Error::InvalidParameter(m) => write!(f, "invalid parameter: {m}"),
            Error::SingularDesign => {
                write!(f, "singular design matrix; increase the ridge penalty")
            }
            Error::EmptyData => write!(f, "no observations to fit"),
            Error::PolicyOutsideSupport { time, value } => {
                write!(f, "policy at time {time} produced {value}, outside the treatment support")
            }
            Error::MissingTreatmentLevel { time, level } => write!(
                f,
                "treatment level {level} at time {time} is absent from a training fold"
            ),
            Error::NoAtRiskUnits { time, fold } => write!(
                f,
                "fold {fold} has no uncensored units at time {time} (excessive censoring)"
            ),
            Error::NoUsablePaths => write!(f, "no usable mediator paths"),
            Error::DegenerateVariance => write!(f, "influence values are not finite"),
            Error::NonFinite(m) => write!(f, "non-finite value: {m}"),
            Error::Expression(m) => write!(f, "expression error: {m}"),
            Error::MisalignedTables(m) => write!(f, "misaligned tables: {m}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
