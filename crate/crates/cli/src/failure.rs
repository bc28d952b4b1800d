use std::fmt;
use std::process::ExitCode;

use epgpr::Error;

/// Exit codes; each error path has its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Config = 2,
    Solver = 3,
    NoSignature = 4,
    NoRoot = 5,
    NotConverged = 6,
    Io = 7,
}

impl Kind {
    fn label(self) -> &'static str {
        match self {
            Kind::Config => "config",
            Kind::Solver => "solver",
            Kind::NoSignature => "no_ep_signature",
            Kind::NoRoot => "no_root",
            Kind::NotConverged => "not_converged",
            Kind::Io => "io",
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub kind: Kind,
    pub message: String,
}

impl Failure {
    pub fn new(kind: Kind, message: impl Into<String>) -> Self {
        Failure { kind, message: message.into() }
    }

    pub fn config(e: Error) -> Self {
        Failure::new(Kind::Config, e.to_string())
    }

    pub fn config_msg(message: impl Into<String>) -> Self {
        Failure::new(Kind::Config, message)
    }

    pub fn io(e: std::io::Error) -> Self {
        Failure::new(Kind::Io, e.to_string())
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.kind as u8)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let kind = match &e {
            Error::Io(_) => Kind::Io,
            Error::Parse { .. }
            | Error::InvalidOrbit(_)
            | Error::InvalidArgument(_)
            | Error::DimensionMismatch(_)
            | Error::UnsupportedDimension(_)
            | Error::SymmetryViolation { .. }
            | Error::MissingFeatures => Kind::Config,
            Error::NoRootFound { .. } => Kind::NoRoot,
            Error::NotExchanging(_) => Kind::NoSignature,
            _ => Kind::Solver,
        };
        let mut message = e.to_string();
        if matches!(e, Error::NotPositiveDefinite { .. }) {
            message.push_str("; hint: remove duplicate input rows or set --noise-variance above zero");
        }
        Failure { kind, message }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let oneline = self.message.replace('\n', " ");
        write!(f, "error kind={} code={}: {}", self.kind.label(), self.kind as u8, oneline)
    }
}
