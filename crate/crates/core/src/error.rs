use thiserror::Error;

/// Errors raised across the library. Pipeline stages wrap these with the
/// name of the failing stage.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("almost-complex structure does not tame the form at sample {sample}")]
    TamingFailure { sample: usize },

    #[error("degenerate two-form at sample {sample} (|det| = {det:e})")]
    DegenerateForm { sample: usize, det: f64 },

    #[error("interpolant degenerate at t = {t}, point {point:?}")]
    InterpolantDegenerate { t: f64, point: Vec<f64> },

    #[error("flow left the chart domain (|z| = {radius})")]
    FlowEscaped { radius: f64 },

    #[error("lattice vector has non-integer entries: {0:?}")]
    NonLatticeVector(Vec<f64>),

    #[error("derivative order {order} exceeds the supported maximum {max}")]
    OrderTooHigh { order: usize, max: usize },

    #[error("grid spacing {spacing} is coarser than the allowed {max}")]
    SpacingTooCoarse { spacing: f64, max: f64 },

    #[error("jet frame determinant {det:e} below floor {floor}")]
    FrameDegenerate { det: f64, floor: f64 },

    #[error("jet has vanishing value part; it lies in the zero stratum")]
    JetInZeroStratum,

    #[error("stratum {stratum} is not defined for (n, m, r) = ({n}, {m}, {r})")]
    UnsupportedStratum { stratum: String, n: usize, m: usize, r: usize },

    #[error("jet is not on stratum {stratum} (defining value {value:e})")]
    NotOnStratum { stratum: String, value: f64 },

    #[error("wedge floor unreachable at center (|Θ wedge| = {wedge:e})")]
    WedgeFloor { wedge: f64 },

    #[error("perturbation |w| = {norm} exceeds the center budget {budget}")]
    BudgetViolation { norm: f64, budget: f64 },

    #[error("empty grid after boundary exclusion")]
    EmptyGrid,

    #[error("budget schedule collapsed at stratum {stratum} (budget {budget:e})")]
    ScheduleCollapse { stratum: String, budget: f64 },

    #[error("zero on a cell edge after maximal refinement near {point:?}")]
    ZeroOnEdge { point: Vec<f64> },

    #[error("Newton iteration failed to converge from seed {seed:?}")]
    NewtonFailed { seed: Vec<f64> },

    #[error("transversality failure: stratum {stratum} has eta_cert = {eta_cert:e}")]
    TransversalityFailure { stratum: String, eta_cert: f64 },

    #[error("oracle disagreement: {0}")]
    OracleDisagreement(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::TransversalityFailure { .. } | Error::ScheduleCollapse { .. } => 2,
            Error::OracleDisagreement(_) => 3,
            Error::Config(_) => 4,
            _ => 1,
        }
    }
}
