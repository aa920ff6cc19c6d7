use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("mesh generation: {0}")]
    Generate(String),

    #[error("untagged boundary edges: {}", format_edges(.0))]
    UntaggedEdges(Vec<(usize, usize)>),

    #[error("mesh file {context}: {message}")]
    MeshFile { context: String, message: String },

    #[error("order k = {0} is not supported (k >= 2 required)")]
    UnsupportedOrder(usize),

    #[error("singular local system on cell {cell}: {what}")]
    SingularCell { cell: usize, what: &'static str },

    #[error("permeability {0} is not symmetric positive definite")]
    PermeabilityNotSpd(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("boundary tag `{0}` has no condition")]
    UnresolvedTag(String),

    #[error("edge ({0}, {1}) is not a boundary edge")]
    NotBoundaryEdge(usize, usize),

    #[error(
        "sparse factorization failed: {0}; check the Nitsche penalty and mesh quality, \
         an all-Dirichlet problem also needs the zero-mean pressure constraint"
    )]
    Factorization(String),

    #[error("linear solve residual {residual:.3e} exceeds tolerance {tolerance:.1e}")]
    Residual { residual: f64, tolerance: f64 },

    #[error("convergence study: {0}")]
    Rates(String),

    #[error(transparent)]
    Expr(#[from] crate::dataexpr::ExprError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_edges(edges: &[(usize, usize)]) -> String {
    edges
        .iter()
        .map(|(a, b)| format!("({a}, {b})"))
        .collect::<Vec<_>>()
        .join(", ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
