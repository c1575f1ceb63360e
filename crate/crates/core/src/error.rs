use std::fmt;

/// Errors shared across the crate.
///
/// Every failure mode carries a human-readable message; the variant encodes
/// the failure class so callers can branch without string matching.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Input outside the mathematical domain of the operation.
    Domain(String),
    /// Wrong number of elements (empty pole list, mismatched lengths).
    Arity(String),
    /// The region kind has no implementation for the requested operation.
    UnsupportedRegion(String),
    /// A branch cut would be crossed or cannot be resolved.
    Branch(String),
    /// An iteration failed to converge within its budget.
    Convergence(String),
    /// A linear solve met a numerically singular matrix.
    Singularity(String),
    /// A computed quantity fell outside its valid numeric range.
    Numerical(String),
    /// A closed loop (or augmented system) is not asymptotically stable.
    Instability(String),
    /// Regression data does not excite all directions.
    RankDeficient(String),
    /// A factorization found lower rank than the requested order.
    Rank(String),
    /// A requested dense object exceeds the size cap.
    Size(String),
    /// Incompatible dimensions between operands.
    Dimension(String),
    /// A matrix is defective or has eigenvalues too close to separate.
    Degenerate(String),
    /// A constructed system is not (strictly) stable.
    Stability(String),
    /// Residue construction failed (pole collision).
    Residue(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(m) => write!(f, "DomainError: {m}"),
            Error::Arity(m) => write!(f, "ArityError: {m}"),
            Error::UnsupportedRegion(m) => write!(f, "UnsupportedRegionError: {m}"),
            Error::Branch(m) => write!(f, "BranchError: {m}"),
            Error::Convergence(m) => write!(f, "ConvergenceError: {m}"),
            Error::Singularity(m) => write!(f, "SingularityError: {m}"),
            Error::Numerical(m) => write!(f, "NumericalError: {m}"),
            Error::Instability(m) => write!(f, "InstabilityError: {m}"),
            Error::RankDeficient(m) => write!(f, "RankDeficientError: {m}"),
            Error::Rank(m) => write!(f, "RankError: {m}"),
            Error::Size(m) => write!(f, "SizeError: {m}"),
            Error::Dimension(m) => write!(f, "DimensionError: {m}"),
            Error::Degenerate(m) => write!(f, "DegenerateError: {m}"),
            Error::Stability(m) => write!(f, "StabilityError: {m}"),
            Error::Residue(m) => write!(f, "ResidueError: {m}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable tag for the variant (used by the CLI error JSON).
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Arity(_) => "arity",
            Error::UnsupportedRegion(_) => "unsupported_region",
            Error::Branch(_) => "branch",
            Error::Convergence(_) => "convergence",
            Error::Singularity(_) => "singularity",
            Error::Numerical(_) => "numerical",
            Error::Instability(_) => "instability",
            Error::RankDeficient(_) => "rank_deficient",
            Error::Rank(_) => "rank",
            Error::Size(_) => "size",
            Error::Dimension(_) => "dimension",
            Error::Degenerate(_) => "degenerate",
            Error::Stability(_) => "stability",
            Error::Residue(_) => "residue",
        }
    }
}
