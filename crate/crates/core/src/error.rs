use thiserror::Error;

/// Errors surfaced by meshing, the linear solver and the optimization loop.
#[derive(Debug, Error)]
pub enum Error {
    /// A boundary region selected no nodes.
    #[error("region selects no nodes: {0}")]
    EmptyRegion(String),
    /// A loaded node coincides with the face center, so no tangential
    /// direction can be assigned to it.
    #[error("node {node} coincides with the face center; tangential direction undefined")]
    DegenerateRadius { node: usize },
    /// The constrained stiffness matrix is not positive definite.
    #[error("stiffness system is singular: {0}")]
    SingularSystem(String),
    /// The iterative solver ran out of iterations.
    #[error("solver did not reach tolerance {tol:e} within {iters} iterations (residual {residual:e})")]
    NonConvergence {
        iters: usize,
        tol: f64,
        residual: f64,
    },
    /// `|kappa|` must stay below 2 for the Poisson completion to be admissible.
    #[error("|kappa| must be < 2, got {0}")]
    KappaOutOfRange(f64),
    /// The volumetric compliance block is too ill-conditioned to invert.
    #[error("near-singular compliance block (condition estimate {cond:e})")]
    NearSingular { cond: f64 },
    /// Constraint repair could not reach an admissible state within the
    /// modulus bounds.
    #[error("element {element} cannot be made admissible within the modulus bounds")]
    IrreparableElement { element: usize },
    /// A run configuration failed validation; the message lists every
    /// offending field.
    #[error("invalid configuration:\n{0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
