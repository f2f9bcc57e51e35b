use std::fmt;

/// A command failure, split by the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Bad configuration or inputs; exit code 1.
    Validation(String),
    /// Anything that went wrong after validation; exit code 2.
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    pub fn context(self, what: impl fmt::Display) -> Self {
        match self {
            Failure::Validation(m) => Failure::Validation(format!("{what}: {m}")),
            Failure::Runtime(m) => Failure::Runtime(format!("{what}: {m}")),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(m) => write!(f, "invalid input: {m}"),
            Failure::Runtime(m) => write!(f, "runtime failure: {m}"),
        }
    }
}

impl From<mstcar::Error> for Failure {
    fn from(e: mstcar::Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, Failure>;

pub fn invalid<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Failure::Validation(msg.into()))
}
