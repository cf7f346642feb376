use num_complex::Complex64;
use thiserror::Error;

/// Everything that can go wrong inside the toolkit.
///
/// Variant names double as the diagnostic tag printed by the command line
/// front end, so they are kept stable.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("root finder did not converge after {iterations} iterations (max residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("escape radius witness failed at {point} (|p(z)| = {image_modulus}, needed {required})")]
    WitnessFailed {
        point: Complex64,
        image_modulus: f64,
        required: f64,
    },

    #[error("seed {0} does not have a bounded orbit")]
    SeedEscapes(Complex64),

    #[error("seed pixel lies outside its own level-{level} mask; raise the resolution")]
    ResolutionTooCoarse { level: usize },

    #[error("restriction at level {0} is not yet polynomial-like")]
    NotYetPolyLike(usize),

    #[error("restriction at level {level} has degree {degree} < 2")]
    DegenerateRestriction { level: usize, degree: usize },

    #[error("no branch component found up to level {0}")]
    NotFound(usize),

    #[error("base point {point} is within {distance:e} of the post-critical set")]
    PostCritical { point: Complex64, distance: f64 },

    #[error("a preimage sits on a critical point (derivative modulus {0:e})")]
    NearCriticalValue(f64),

    #[error("preimage tree would need {0} leaves, over the budget")]
    LeafBudget(u64),

    #[error("estimates at the bracket ends ({lo}, {hi}) do not straddle zero")]
    NoBracket { lo: f64, hi: f64 },

    #[error("every preimage was pruned by the domain filter")]
    EmptyTree,

    #[error("no preimage of {0} lands in the branch component")]
    EmptyBranch(Complex64),

    #[error("zero has no image under the Zhukovsky map")]
    ZeroInput,

    #[error("interval restriction has degree {0}, expected 2")]
    NotDegreeTwo(usize),

    #[error("a lifted preimage is within {0:e} of a ramification point")]
    RamificationHit(f64),

    #[error("Newton iteration diverged ({0})")]
    NewtonDiverged(String),

    #[error("fixed point {point} has multiplier modulus {multiplier} <= 1")]
    NotRepelling { point: f64, multiplier: f64 },

    #[error("no real solution for parameter a = {0}")]
    NoRealRoot(f64),

    #[error("verification failed: {0}")]
    VerificationFailed(String),
}

impl Error {
    /// Short stable name of the variant.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "InvalidInput",
            Error::NonConvergence { .. } => "NonConvergence",
            Error::WitnessFailed { .. } => "WitnessFailed",
            Error::SeedEscapes(_) => "SeedEscapes",
            Error::ResolutionTooCoarse { .. } => "ResolutionTooCoarse",
            Error::NotYetPolyLike(_) => "NotYetPolyLike",
            Error::DegenerateRestriction { .. } => "DegenerateRestriction",
            Error::NotFound(_) => "NotFound",
            Error::PostCritical { .. } => "PostCritical",
            Error::NearCriticalValue(_) => "NearCriticalValue",
            Error::LeafBudget(_) => "LeafBudget",
            Error::NoBracket { .. } => "NoBracket",
            Error::EmptyTree => "EmptyTree",
            Error::EmptyBranch(_) => "EmptyBranch",
            Error::ZeroInput => "ZeroInput",
            Error::NotDegreeTwo(_) => "NotDegreeTwo",
            Error::RamificationHit(_) => "RamificationHit",
            Error::NewtonDiverged(_) => "NewtonDiverged",
            Error::NotRepelling { .. } => "NotRepelling",
            Error::NoRealRoot(_) => "NoRealRoot",
            Error::VerificationFailed(_) => "VerificationFailed",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
