use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("argument outside domain: {0}")]
    Domain(String),

    /// A plain-real rising factorial left the representable range; use the
    /// log-domain variant instead.
    #[error("rising factorial ({x})_{n} is not representable as f64")]
    Range { x: f64, n: u32 },

    #[error("recurrence system at site {site} is numerically singular (condition {condition:.3e})")]
    SingularSystem { site: usize, condition: f64 },

    #[error("-r_n has not started decreasing by n = {n_scan}")]
    NotStabilized { n_scan: usize },

    #[error("shifted transition entry {entry} at site {site} is negative ({value:.3e}); lambda below threshold")]
    NegativeEntry {
        site: usize,
        entry: &'static str,
        value: f64,
    },

    #[error("reversibility weight underflows at site {site}")]
    Underflow { site: usize },

    #[error("chain is not positive recurrent (tail mass {tail:.3e} at truncation {truncation})")]
    NotPositiveRecurrent { truncation: usize, tail: f64 },

    #[error("quadrature needs {nodes} nodes, cap is {cap}")]
    DegreeTooLarge { nodes: usize, cap: usize },

    #[error("truncation {size} cannot hold a {t}-step walk from site {origin}")]
    TruncationTooSmall { size: usize, origin: usize, t: u64 },

    #[error("total variation {tv:.6e} still above {epsilon} at t_cap = {t_cap}")]
    NotMixedByCap { t_cap: u64, epsilon: f64, tv: f64 },

    #[error("decay fit needs at least 8 points over 2 decades: {0}")]
    InsufficientRange(String),
}
