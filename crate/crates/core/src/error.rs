use crate::expr::ExprError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("evaluation failed at {point:?}: {source}")]
    EvalAt {
        point: Vec<f64>,
        #[source]
        source: Box<Error>,
    },
    #[error("point {0:?} lies outside the field support")]
    OutsideSupport(Vec<f64>),
    #[error("non-positive value {value} at {point:?}")]
    NonPositive { value: f64, point: Vec<f64> },
    #[error("empty region: {0}")]
    EmptyRegion(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at(point: Vec<f64>, source: impl Into<Error>) -> Error {
        Error::EvalAt {
            point,
            source: Box::new(source.into()),
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}
