use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown catalog model `{0}` (expected cox, compound_cox, ou_modulated_cox or joint_jump)")]
    UnknownModel(String),

    #[error("model `{model}`: missing parameter `{key}`")]
    MissingParameter { model: String, key: String },

    #[error("model `{model}`: unknown parameter `{key}`")]
    UnknownParameter { model: String, key: String },

    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParameter { key: String, reason: String },

    #[error(
        "assumption A2 violated: intensity lambda(z={z}) = {lambda} exceeds lambda_bar = {lambda_bar} (nu must stay <= 1)"
    )]
    IntensityExceedsBound { z: f64, lambda: f64, lambda_bar: f64 },

    #[error("invalid mark measure: {0}")]
    InvalidMarkMeasure(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite state at t = {time} ({what})")]
    NonFiniteState { time: f64, what: String },

    #[error("initial density xi0 = {xi0} outside (0, {bound}]")]
    XiOutsideDomain { xi0: f64, bound: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular discrete operator at time index {time_index}, row {row}")]
    SingularSystem { time_index: usize, row: usize },

    #[error(
        "explicit integral term unstable: dt * lambda_tilde * max nu = {product:.4} > 1; use dt <= {max_dt:.6e} (at least {min_steps} time steps)"
    )]
    StabilityBound {
        product: f64,
        max_dt: f64,
        min_steps: usize,
    },

    #[error("probe ({t}, {z:?}, {l}) is not an interior grid node")]
    ProbeOffGrid { t: f64, z: Vec<f64>, l: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
