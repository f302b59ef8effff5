use std::fmt;

/// Failure classes, each with its own process exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Numerical(_) => 3,
            Self::Io(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Numerical(m) => write!(f, "numerical failure: {m}"),
            Self::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<bellfield::Error> for CliError {
    fn from(e: bellfield::Error) -> Self {
        use bellfield::Error as E;
        match e {
            E::InvalidSpec(_)
            | E::InvalidScenario(_)
            | E::InvalidSchedule(_)
            | E::DivergentMode
            | E::Capacity { .. }
            | E::InvalidConfiguration(_)
            | E::UnsupportedSector(_)
            | E::InteractingFreeEvolution => Self::Config(e.to_string()),
            E::Io(_) | E::Checkpoint(_) => Self::Io(e.to_string()),
            _ => Self::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
