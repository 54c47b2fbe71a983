use thiserror::Error;

use crate::expr::EvalError;
use crate::model::ContextPath;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unresolved parameter `{name}` in context {context}")]
    UnresolvedParameter { name: String, context: ContextPath },
    #[error("cyclic parameter reference: {}", chain.join(" -> "))]
    CyclicParameter { chain: Vec<String> },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("material yield {value} of component `{component}` is outside (0, 1]")]
    YieldOutOfRange { component: String, value: f64 },
    #[error("parts per cycle {value} of operation `{operation}` is below 1")]
    PartsPerCycleOutOfRange { operation: String, value: f64 },
    #[error("scrap rate {value} is outside [0, 1)")]
    ScrapRateOutOfRange { value: f64 },
    #[error("crew size {value} of operation `{operation}` is negative")]
    NegativeCrewSize { operation: String, value: f64 },
    #[error("entity `{entity}` evaluated to {value}, but is not marked as a credit")]
    NegativeCost { entity: String, value: f64 },
    #[error("target cost must be positive, got {0}")]
    NonPositiveTarget(f64),
    #[error("budget must be positive, got {0}")]
    NonPositiveBudget(f64),
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error("unknown {kind} `{id}`")]
    UnknownId { kind: &'static str, id: String },
    #[error("assembly cycle through {}", .0.join(","))]
    AssemblyCycle(Vec<String>),
    #[error("unknown override `{0}`")]
    UnknownOverride(String),
    #[error("override `{name}` is not a finite number")]
    NonFiniteOverride { name: String },
    #[error("benchmark needs at least one rate table")]
    NoRateTables,
    #[error("breakdown shapes differ at {path}")]
    ShapeMismatch { path: String },
    #[error("at {}: {source}", path.join(" > "))]
    At {
        path: Vec<String>,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Prefixes a location segment, merging nested locations.
    pub fn at(self, segment: impl Into<String>) -> Error {
        match self {
            Error::At { mut path, source } => {
                path.insert(0, segment.into());
                Error::At { path, source }
            }
            other => Error::At {
                path: vec![segment.into()],
                source: Box::new(other),
            },
        }
    }

    /// The innermost error, without location wrappers.
    pub fn root_cause(&self) -> &Error {
        match self {
            Error::At { source, .. } => source.root_cause(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
