use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("lattice dimensions {m}x{n} too small: both must be at least 2")]
    DimensionTooSmall { m: usize, n: usize },

    #[error("{what} needs {requested} spins, limit is {limit}")]
    SizeLimit {
        what: &'static str,
        requested: usize,
        limit: usize,
    },

    #[error("region is empty")]
    EmptyRegion,

    #[error("region covers every spin")]
    FullRegion,

    #[error("region of {size} spins exceeds the reduced-density limit of {limit}")]
    RegionTooLarge { size: usize, limit: usize },

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("state is not normalized (norm {norm})")]
    Unnormalized { norm: f64 },

    #[error("density matrix has eigenvalue {value} below the negativity floor")]
    NegativeEigenvalue { value: f64 },

    #[error("numerical non-convergence: {0}")]
    NonConvergence(String),

    #[error("unknown Hamiltonian spec: {0}")]
    UnknownSpec(String),

    #[error("coupling array has {found} entries, expected {expected}")]
    CouplingLength { expected: usize, found: usize },

    #[error("non-Hermitian Pauli term (odd X/Z overlap)")]
    NonHermitianTerm,

    #[error("coupling {0} is not finite")]
    NonFiniteCoupling(f64),

    #[error("region does not satisfy the bulk criterion: {0}")]
    RegionCriterion(String),

    #[error("invalid time grid: {0}")]
    TimeGrid(String),

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::UnknownSpec(_) | Error::CouplingLength { .. }
            | Error::NonFiniteCoupling(_)
            | Error::TimeGrid(_) => 2,
            Error::NonConvergence(_) => 3,
            Error::SizeLimit { .. } | Error::RegionTooLarge { .. } | Error::DimensionTooSmall { .. } => 4,
            _ => 1,
        }
    }
}
