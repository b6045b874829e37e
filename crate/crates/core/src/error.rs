use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("{0} is empty")]
    Empty(&'static str),

    #[error("gap of {hours} h starting at {start} exceeds the {max} h fill limit")]
    GapTooLong {
        start: String,
        hours: usize,
        max: usize,
    },

    #[error("gap starting at {0} is not bounded by valid data on both sides")]
    UnboundedGap(String),

    #[error("transaction energy {energy} kWh exceeds EV capacity {capacity} kWh")]
    EnergyExceedsCapacity { energy: f64, capacity: f64 },

    #[error("split infeasible: {0}")]
    SplitInfeasible(String),

    #[error("BESS cannot charge ({charge} kWh) and discharge ({discharge} kWh) in the same step")]
    SimultaneousCharge { charge: f64, discharge: f64 },

    #[error("LP solver failed after {iterations} iterations: {message}")]
    Lp { iterations: usize, message: String },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("no feasible episode window after {0} attempts")]
    EpisodeSampling(usize),

    #[error("k = {k} exceeds the number of profiles ({n})")]
    TooFewProfiles { k: usize, n: usize },

    #[error("cannot place duplicate of transaction `{0}`: no free day available")]
    CalendarFull(String),

    #[error("upper benchmark {mpc} is below lower benchmark {rbpm}")]
    BenchmarkOrder { mpc: f64, rbpm: f64 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
