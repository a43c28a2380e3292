use thiserror::Error;

/// Errors produced by the toolkit. `is_input_error` distinguishes bad data
/// from numerical failures, which the CLI maps to exit codes 2 and 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("step-count overflow: |rho| = {rho_abs:.3e} over length {length} needs more than {cap} steps")]
    StepOverflow {
        rho_abs: f64,
        length: f64,
        cap: usize,
    },

    #[error("root bracketing failed: found {found} model zeros, needed {needed}")]
    BracketingFailed { found: usize, needed: usize },

    #[error("model characteristic derivative vanishes near rho0 = {rho0:.6}")]
    DegenerateModelZero { rho0: f64 },

    #[error("Newton iteration did not converge from seed lambda = {seed}")]
    NewtonFailed { seed: num_complex::Complex64 },

    #[error("unresolved eigenvalue cluster near lambda = {center}: winding count {winding} exceeds cluster capacity {capacity}")]
    UnresolvedCluster {
        center: num_complex::Complex64,
        winding: i32,
        capacity: usize,
    },

    #[error("contour integration failed near lambda = {lambda}: characteristic function too oscillatory or a zero lies on the contour")]
    ContourFailed { lambda: num_complex::Complex64 },

    #[error("Fourier coefficients of the Cauchy data do not decay; inputs are inconsistent or ODE tolerance is too coarse")]
    NonDecayingCoefficients,

    #[error("Goursat marching blew up at x = {x:.6}")]
    MarchingBlowup { x: f64 },

    #[error("degenerate main-equation row at mu = {mu}: g0 and g1 both vanish")]
    DegenerateRow { mu: num_complex::Complex64 },

    #[error("perturbed eigenvalue {value} matches no reference cluster")]
    UnmatchedEigenvalue { value: num_complex::Complex64 },

    #[error("frequency hypothesis violated: {0}")]
    FrequencyHypothesis(String),

    #[error("mean of the perturbed potential differs from the reference mean by {0:.3e}")]
    MeanNotPreserved(f64),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn stage(stage: &'static str, source: Error) -> Self {
        Error::Stage {
            stage,
            source: Box::new(source),
        }
    }

    /// True for errors caused by malformed or inconsistent input data.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::InvalidInput(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::MeanNotPreserved(_)
            | Error::FrequencyHypothesis(_) => true,
            Error::Stage { source, .. } => source.is_input_error(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
