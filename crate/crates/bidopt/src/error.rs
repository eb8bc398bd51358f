use thiserror::Error;

/// Unified error type for the library and CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("negative bid: {0}")]
    NegativeBid(f64),

    #[error("unsatisfiable supply: target {target} exceeds max volume {max_volume}")]
    UnsatisfiableSupply { target: f64, max_volume: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible instance: campaigns {campaigns:?} cannot be covered by admissible supply")]
    Infeasible { campaigns: Vec<String> },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("oracle enumeration cap exceeded: {states:.3e} states > cap {cap:.3e}")]
    OracleCap { states: f64, cap: f64 },

    #[error("simulator supports step curves only (group {group})")]
    UnsupportedCurve { group: String },
}

impl Error {
    /// Process exit code for the CLI: 2 schema, 3 infeasible, 4 oracle cap,
    /// 5 unsupported curve in the simulator, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Schema(_) => 2,
            Error::Infeasible { .. } | Error::UnsatisfiableSupply { .. } => 3,
            Error::OracleCap { .. } => 4,
            Error::UnsupportedCurve { .. } => 5,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
