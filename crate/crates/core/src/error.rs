use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid graph: {0}")]
    Validation(String),

    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),

    #[error("invalid penalty configuration: {0}")]
    Config(String),

    /// An additive penalty reached the singular threshold; the object does not
    /// belong to the family.
    #[error("object infeasible under additive penalty (total penalty {penalty})")]
    InfeasibleObject { penalty: f64 },

    #[error("no time-respecting path between the requested vertices")]
    NoPath,

    #[error("path enumeration exceeded the limit of {limit} paths")]
    EnumerationOverflow { limit: usize },

    /// The inner convex solve stopped without meeting its tolerance. The best
    /// iterate is kept so callers can still inspect it.
    #[error("restricted solve stalled after {iterations} iterations (relative gap {gap:.3e})")]
    InnerNonConvergence { iterations: usize, gap: f64, rho: Vec<f64> },

    #[error("outer iteration budget of {budget} exhausted; modulus lies in [{lower}, {}]", fmt_upper(.upper))]
    BudgetExceeded { budget: usize, lower: f64, upper: Option<f64> },

    #[error("all dual weights vanish; the solve did not converge")]
    DegenerateDuals,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("linear program failed: {0}")]
    Lp(String),
}

fn fmt_upper(upper: &Option<f64>) -> String {
    match upper {
        Some(u) => u.to_string(),
        None => "unknown".to_string(),
    }
}
