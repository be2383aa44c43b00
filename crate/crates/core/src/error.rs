use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("{name} = {value} outside {range}")]
    Domain {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("masses differ: {left} vs {right}")]
    MassMismatch { left: f64, right: f64 },

    #[error("support of the measure is empty above threshold {threshold}")]
    DegenerateMeasure { threshold: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error(
        "control fixed point did not contract: residual {residual:e} after {iterations} \
         iterations, last ratio estimate {ratio}"
    )]
    NonContraction {
        iterations: usize,
        residual: f64,
        ratio: f64,
    },

    #[error("legendre transform failed: {0}")]
    Optimization(String),

    #[error("non-finite hamiltonian at time index {time_index}")]
    BlowUp { time_index: usize },

    #[error("CFL violated: |b|·Δt = {courant:.4} Δx; need at least {required_steps} time steps")]
    Cfl { courant: f64, required_steps: usize },

    #[error("mass conservation violated by {drift:e}")]
    Conservation { drift: f64 },

    #[error("sweep {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, range: &'static str) -> Self {
        Error::Domain { name, value, range }
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::Iteration {
            iteration,
            source: alloc::boxed::Box::new(self),
        }
    }
}
