use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max |M - M†| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("eigensolver did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("columns are not orthonormal (max deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },

    #[error("matrix is not unitary (max |U†U - I| = {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid Hamiltonian ({invariant}): {detail}")]
    InvalidHamiltonian {
        invariant: &'static str,
        detail: String,
    },

    #[error("invalid density state ({invariant}): {detail}")]
    InvalidState {
        invariant: &'static str,
        detail: String,
    },

    #[error("invalid probabilities: {0}")]
    InvalidProbabilities(String),

    #[error("state is not incoherent in the energy basis")]
    NotIncoherent,

    #[error("quasiprobability parameter q = {0} outside [0, 1]")]
    QOutOfRange(f64),

    #[error("logarithm of zero characteristic function")]
    LogOfZero,

    #[error("work {w} outside tabulated utility range [{min}, {max}]")]
    OutOfTabulatedRange { w: f64, min: f64, max: f64 },

    #[error("value {value} outside the range of the utility function")]
    OutOfRange { value: f64 },

    #[error("utility is not differentiable at w = {0}")]
    NonDifferentiable(f64),

    #[error("invalid utility: {0}")]
    InvalidUtility(String),

    #[error("dimension {dim} exceeds the exhaustive-search limit {limit}")]
    DimensionTooLarge { dim: usize, limit: usize },

    #[error("state has fewer than two nonzero populations")]
    DegenerateState,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("no sign change found in [{r_min}, {r_max}]")]
    NoCrossing { r_min: f64, r_max: f64 },

    #[error("S_q is singular")]
    SingularSq,

    #[error("matrix does not admit the affine decomposition: {0}")]
    NotDecomposable(String),

    #[error("no perfect matching in the support of the residual matrix")]
    MatchingFailure,

    #[error("|c| = {abs_c} exceeds sqrt(p(1-p)) = {bound}")]
    CoherenceBoundViolated { abs_c: f64, bound: f64 },

    #[error("invalid range: {0}")]
    InvalidRange(String),

    #[error("states are defined with different Hamiltonians")]
    HamiltonianMismatch,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable code used by the command-line front end.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NotHermitian { .. } => "NOT_HERMITIAN",
            Error::NoConvergence { .. } => "NO_CONVERGENCE",
            Error::NotOrthonormal { .. } => "NOT_ORTHONORMAL",
            Error::NotUnitary { .. } => "NOT_UNITARY",
            Error::DimensionMismatch { .. } => "DIMENSION_MISMATCH",
            Error::InvalidHamiltonian { .. } => "INVALID_HAMILTONIAN",
            Error::InvalidState { .. } => "INVALID_STATE",
            Error::InvalidProbabilities(_) => "INVALID_PROBABILITIES",
            Error::NotIncoherent => "NOT_INCOHERENT",
            Error::QOutOfRange(_) => "Q_OUT_OF_RANGE",
            Error::LogOfZero => "LOG_OF_ZERO",
            Error::OutOfTabulatedRange { .. } => "OUT_OF_TABULATED_RANGE",
            Error::OutOfRange { .. } => "OUT_OF_RANGE",
            Error::NonDifferentiable(_) => "NON_DIFFERENTIABLE",
            Error::InvalidUtility(_) => "INVALID_UTILITY",
            Error::DimensionTooLarge { .. } => "DIMENSION_TOO_LARGE",
            Error::DegenerateState => "DEGENERATE_STATE",
            Error::LengthMismatch { .. } => "LENGTH_MISMATCH",
            Error::NoCrossing { .. } => "NO_CROSSING",
            Error::SingularSq => "SINGULAR_SQ",
            Error::NotDecomposable(_) => "NOT_DECOMPOSABLE",
            Error::MatchingFailure => "MATCHING_FAILURE",
            Error::CoherenceBoundViolated { .. } => "COHERENCE_BOUND_VIOLATED",
            Error::InvalidRange(_) => "INVALID_RANGE",
            Error::HamiltonianMismatch => "HAMILTONIAN_MISMATCH",
            Error::Parse(_) => "PARSE",
            Error::Io(_) => "IO",
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
