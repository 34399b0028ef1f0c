use thiserror::Error;

/// Errors raised by the decoherence engine, tagged by the module that produced them.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),

    #[error("config: cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("params: {0}")]
    InvalidParam(String),

    #[error("lattice: ions {0} and {1} occupy the same position")]
    CoincidentIons(usize, usize),

    #[error("lattice: unstable configuration, eigenvalue {eigenvalue:.3e} below -{tolerance:.3e}")]
    UnstableLattice { eigenvalue: f64, tolerance: f64 },

    #[error("lattice: zero-frequency mode has no Lamb-Dicke weight")]
    ZeroFrequencyMode,

    #[error("lattice: {0}")]
    Calibration(String),

    #[error("states: {0}")]
    InvalidMoments(String),

    #[error("states: non-integrable pulse: {0}")]
    Pulse(String),

    #[error("relaxation: correlation integral did not converge: {0}")]
    NonConvergent(String),

    #[error("decoherence: missing moment {0}")]
    MissingMoment(String),

    #[error("decoherence: {0}")]
    Report(String),

    #[error("oracle: {0}")]
    Oracle(String),

    #[error("numerics: {0}")]
    Numerical(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
