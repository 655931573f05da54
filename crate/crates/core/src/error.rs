use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty set")]
    EmptySet,

    #[error("orbit escaped the dynamical interval at time {time}")]
    OrbitEscaped { time: u64 },

    #[error("not in Fibonacci regime: no orientation-reversing fixed point with multiplier < -1")]
    NotFibonacciRegime,

    #[error("combinatorics broken at level {level}: {detail}")]
    CombinatoricsBroken { level: usize, detail: String },

    #[error("insufficient precision: {bits} bits cannot resolve depth {depth}")]
    InsufficientPrecision { depth: usize, bits: u32 },

    #[error("combinatorics unreachable: family is not full over the search range")]
    CombinatoricsUnreachable,

    #[error("triple degenerate: gamma must be negative, got {gamma}")]
    TripleDegenerate { gamma: f64 },

    #[error("divergence: no convergence within {steps} steps")]
    Divergence { steps: usize },

    #[error("multiplier not found at level {level}")]
    MultiplierNotFound { level: usize },

    #[error("critical collision: boundary point on the critical value after {retries} retries")]
    CriticalCollision { retries: usize },

    #[error("disjointness violated between return disks {i} and {j}")]
    DisjointnessViolated { i: usize, j: usize },

    #[error("sample outside domain: {x} not in [{lo}, {hi}]")]
    SampleOutsideDomain { x: f64, lo: f64, hi: f64 },

    #[error("quadrature did not converge: achieved tolerance {achieved}")]
    QuadratureNonConvergence { achieved: f64 },

    #[error("code mismatch at level {level}: maps do not share combinatorics to this depth")]
    CodeMismatch { level: usize },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
