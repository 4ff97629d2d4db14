use core::fmt;

/// Why an edge was rejected during construction or validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeFault {
    IndexOutOfRange,
    SelfLoop,
    Duplicate,
    NonPositiveLength,
    NegativeConductivity,
    NotFinite,
}

impl fmt::Display for EdgeFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EdgeFault::IndexOutOfRange => "node index out of range",
            EdgeFault::SelfLoop => "self-loop",
            EdgeFault::Duplicate => "duplicate edge",
            EdgeFault::NonPositiveLength => "length must be positive",
            EdgeFault::NegativeConductivity => "conductivity must be nonnegative",
            EdgeFault::NotFinite => "non-finite value",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// The network has no nodes.
    EmptyNetwork,
    /// An edge violates the structural assumptions.
    InvalidEdge {
        edge: (usize, usize),
        fault: EdgeFault,
    },
    /// Array length does not match the object it describes.
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    /// A scalar parameter is outside its admissible range.
    InvalidParameter { name: &'static str, value: f64 },
    /// `|Σ S_i|` exceeds the mass-balance tolerance.
    MassImbalance { defect: f64 },
    /// Some connected component of the positive-conductivity subgraph has a
    /// nonzero net source, so the Kirchhoff system has no solution.
    DisconnectedGraph { components: usize },
    /// An iterative method hit its iteration cap.
    NonConvergence { iterations: usize, residual: f64 },
    /// The metabolic gradient is singular at a zero conductivity (γ < 1).
    ZeroConductivity { edge: (usize, usize) },
    /// No step length satisfies the sufficient-decrease condition.
    LineSearchStall { iteration: usize },
    /// The operation needs a tree topology.
    NotATree,
    /// Subdomain mask selects no cells.
    EmptySubdomain,
    /// The scalar root finder could not bracket a root.
    BisectionFailure { rhs: f64 },
    /// An oracle needs an analytic profile and only samples were supplied.
    MissingAnalyticProfile { what: &'static str },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyNetwork => f.write_str("network has no nodes"),
            Error::InvalidEdge { edge, fault } => {
                write!(f, "edge ({}, {}): {}", edge.0, edge.1, fault)
            }
            Error::DimensionMismatch { what, expected, found } => {
                write!(f, "{what}: expected length {expected}, found {found}")
            }
            Error::InvalidParameter { name, value } => {
                write!(f, "parameter {name} = {value} is out of range")
            }
            Error::MassImbalance { defect } => {
                write!(f, "sources are not balanced (|sum| = {defect:e})")
            }
            Error::DisconnectedGraph { components } => write!(
                f,
                "positive-conductivity subgraph has {components} components and is not source-balanced"
            ),
            Error::NonConvergence { iterations, residual } => write!(
                f,
                "no convergence after {iterations} iterations (residual {residual:e})"
            ),
            Error::ZeroConductivity { edge } => write!(
                f,
                "zero conductivity on edge ({}, {}) makes the gradient singular",
                edge.0, edge.1
            ),
            Error::LineSearchStall { iteration } => {
                write!(f, "line search stalled at iteration {iteration}")
            }
            Error::NotATree => f.write_str("network topology is not a tree"),
            Error::EmptySubdomain => f.write_str("subdomain contains no cells"),
            Error::BisectionFailure { rhs } => {
                write!(f, "cannot bracket a root for right-hand side {rhs:e}")
            }
            Error::MissingAnalyticProfile { what } => {
                write!(f, "{what} must be given as an analytic profile")
            }
        }
    }
}

impl core::error::Error for Error {}
