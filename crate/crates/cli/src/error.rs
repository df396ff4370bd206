use thiserror::Error;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CERTIFICATE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },

    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{origin}: {message}")]
    Schema { origin: String, message: String },

    #[error("invalid config field `{field}`: {reason}")]
    Invalid { field: String, reason: String },

    #[error("bad override `{spec}`: {reason}")]
    Override { spec: String, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error("invalid LATTICE_WAVE_THREADS value `{0}`")]
    Threads(String),

    #[error(transparent)]
    Core(#[from] lattice_wave::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use lattice_wave::Error as E;
        match self {
            CliError::Core(e) => match e {
                E::NumericAbort { .. } | E::OutOfRange { .. } | E::EnvelopeEscape { .. } | E::BracketFailure(_) => {
                    EXIT_NUMERIC
                }
                E::InvalidParameter { .. } | E::InvalidConfig(_) | E::Domain(_) => EXIT_USAGE,
                E::NoEndemicEquilibrium { .. }
                | E::SubcriticalSpeed { .. }
                | E::Certificate(_)
                | E::NoFront
                | E::InsufficientSamples { .. } => EXIT_CERTIFICATE,
            },
            _ => EXIT_USAGE,
        }
    }
}
