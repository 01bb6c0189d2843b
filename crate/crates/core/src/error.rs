use alloc::boxed::Box;
use alloc::string::String;

use crate::irka::IrkaFailure;

/// Which structural invariant of a port-Hamiltonian realization failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructureKind {
    Dimension,
    Skewness,
    Symmetry,
    PositiveSemidefinite,
    PositiveDefinite,
    Conditioning,
}

impl core::fmt::Display for StructureKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let s = match self {
            StructureKind::Dimension => "dimension",
            StructureKind::Skewness => "skewness of J",
            StructureKind::Symmetry => "symmetry",
            StructureKind::PositiveSemidefinite => "positive semidefiniteness of R",
            StructureKind::PositiveDefinite => "positive definiteness of Q",
            StructureKind::Conditioning => "conditioning of the reduced energy matrix",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("E is singular")]
    SingularDescriptor,
    #[error("port-Hamiltonian structure violated: {kind} ({detail})")]
    StructureViolation { kind: StructureKind, detail: String },
    #[error("state transform is singular")]
    SingularTransform,
    #[error("pencil sE - A is singular at s = {re} + {im}i (point index {index:?})")]
    SingularPencil { re: f64, im: f64, index: Option<usize> },
    #[error("reduced pencil W^T E V is singular")]
    SingularReducedPencil,
    #[error("basis is rank deficient (numerical rank {rank} < {expected})")]
    RankDeficient { rank: usize, expected: usize },
    #[error("interpolation data is not closed under conjugation: {0}")]
    NotConjugateClosed(String),
    #[error("invalid interpolation data: {0}")]
    InvalidInterpolationData(String),
    #[error("matrix is not asymptotically stable (spectral abscissa {abscissa:e})")]
    UnstableMatrix { abscissa: f64 },
    #[error("dense size limit exceeded: n = {n} > {limit}")]
    SizeLimitExceeded { n: usize, limit: usize },
    #[error("Schur complement block Q_22 could not be factored")]
    SingularSchurBlock,
    #[error("reduced eigenproblem is numerically defective (eigenvector condition {condition:e})")]
    DefectiveEigenproblem { condition: f64 },
    #[error("reduced model has repeated poles; optimality conditions need distinct poles")]
    RepeatedPoles,
    #[error("iteration did not converge within {} iterations", .0.trace.iterations())]
    MaxIterationsExceeded(Box<IrkaFailure>),
    #[error("iteration trace is not converged")]
    NotConverged,
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("integrator step size underflow at t = {t:e}")]
    StepSizeUnderflow { t: f64 },
    #[error("non-finite state during integration at t = {t:e}")]
    NonFiniteState { t: f64 },
    #[error("eigenvalue computation failed to converge")]
    EigenNoConvergence,
    #[error("numerical factorization failed: {0}")]
    Factorization(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Non-fatal conditions attached to results.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// Reduced energy matrix V^T Q V has condition estimate above 1e12.
    IllConditionedReducedEnergy { condition: f64 },
    /// Hankel singular values drop below the relative tolerance; `rank` is the numerical rank.
    NearNonMinimal { ratio: f64, rank: usize },
    /// A frequency sample was skipped because the pencil was singular there.
    SkippedFrequency { omega: f64 },
    /// Shifts were perturbed before retrying a defective or singular step.
    PerturbedShifts { iteration: usize, reason: String },
    /// An unstructured iterate had eigenvalues in the closed right half-plane.
    UnstableIterate { iteration: usize, abscissa: f64 },
}
