use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// Variants fall into three families that the command-line front end maps to
/// distinct exit codes: invalid input ([`Error::is_input`]), size guards
/// ([`Error::is_guard`]) and numerical preconditions (everything else).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("Pauli index {index} out of range for {n} qubits")]
    IndexOutOfRange { index: u64, n: usize },

    #[error("qubit count mismatch: {left} vs {right}")]
    QubitMismatch { left: usize, right: usize },

    #[error("unsupported qubit count {0}")]
    BadQubitCount(usize),

    #[error("invalid Pauli text {0:?}")]
    BadPauliText(String),

    #[error("dense size guard exceeded: {what} needs dimension {dim}, limit {limit}")]
    SizeGuard {
        what: &'static str,
        dim: usize,
        limit: usize,
    },

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("logarithm branch violation: eigenphase {phase:.12} lies within {guard:.1e} of pi")]
    BranchViolation { phase: f64, guard: f64 },

    #[error("grid too coarse: Hermiticity defect {defect:.3e} at grid index {index}")]
    CoarseGrid { defect: f64, index: usize },

    #[error("invalid grid: {0}")]
    BadGrid(String),

    #[error("non-zero identity component {0:.3e}")]
    IdentityComponent(f64),

    #[error("support is not commuting: {0} and {1} anticommute")]
    NonCommutingSupport(String, String),

    #[error("Lie closure exceeded max_dim {max_dim} (partial dimension {partial})")]
    ClosureOverflow { max_dim: usize, partial: usize },

    #[error("empty generator list")]
    NoGenerators,

    #[error("ideal decomposition failed verification after {attempts} attempts: {reason}")]
    DecompositionFailed { attempts: usize, reason: String },

    #[error("incommensurate spectrum: no fundamental period found")]
    Incommensurate,

    #[error("zero generator has no fundamental period")]
    ZeroGenerator,

    #[error("period not resolved for generator {0}")]
    UnresolvedPeriod(usize),

    #[error("invalid period {0}")]
    BadPeriod(f64),

    #[error("invalid density matrix: {0}")]
    BadDensity(String),

    #[error("loss has imaginary part {0:.3e}")]
    ComplexLoss(f64),

    #[error("too few samples: {got} (need at least {min})")]
    TooFewSamples { got: usize, min: usize },

    #[error("unknown metric scheme {0:?}")]
    UnknownScheme(String),

    #[error("invalid metric weight {weight} for index {index}")]
    BadWeight { index: u64, weight: f64 },

    #[error("invalid argument: {0}")]
    Invalid(String),
}

impl Error {
    /// Malformed or inconsistent input.
    pub fn is_input(&self) -> bool {
        matches!(
            self,
            Error::IndexOutOfRange { .. }
                | Error::QubitMismatch { .. }
                | Error::BadQubitCount(_)
                | Error::BadPauliText(_)
                | Error::DimensionMismatch { .. }
                | Error::NoGenerators
                | Error::UnknownScheme(_)
                | Error::BadWeight { .. }
                | Error::BadPeriod(_)
                | Error::BadDensity(_)
                | Error::TooFewSamples { .. }
                | Error::Invalid(_)
        )
    }

    /// A dense-size or dimension budget was exceeded.
    pub fn is_guard(&self) -> bool {
        matches!(self, Error::SizeGuard { .. } | Error::ClosureOverflow { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
