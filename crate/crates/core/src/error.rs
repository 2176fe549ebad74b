use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A physical or numerical invariant was violated; `field` names the offending quantity.
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },

    #[error("stability bound violated: dt = {dt:e} exceeds cfl * dz / v_max = {limit:e}")]
    Unstable { dt: f64, limit: f64 },

    #[error("non-finite value in field {field} at z-index {z_index} after {steps} steps")]
    NonFinite {
        field: String,
        z_index: usize,
        steps: u64,
    },

    #[error("resonant singularity: {0}")]
    Singular(String),

    #[error("probe position z = {0} was not recorded")]
    MissingProbe(f64),

    #[error("time {t} outside series range [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("empty sweep")]
    EmptySweep,

    #[error("config parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("plot error: {0}")]
    Plot(String),
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
