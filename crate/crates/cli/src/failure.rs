//! Exit statuses are part of the interface: scripts branch on them.

use std::fmt;
use std::process::ExitCode;

use photoscout::annotations::AlbumError;
use photoscout::synthesis::SynthesisError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Code {
    /// An expectation failed or the target already exists.
    Failed = 1,
    /// Bad flags, files, ids or programs.
    Input = 2,
    /// The model endpoint or the service could not do its part.
    Environment = 3,
}

#[derive(Debug)]
pub struct Failure {
    pub code: Code,
    pub message: String,
}

impl Failure {
    pub fn failed(message: impl Into<String>) -> Self {
        Self { code: Code::Failed, message: message.into() }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self { code: Code::Input, message: message.into() }
    }

    pub fn environment(message: impl Into<String>) -> Self {
        Self { code: Code::Environment, message: message.into() }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code as u8)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<SynthesisError> for Failure {
    fn from(e: SynthesisError) -> Self {
        match e {
            SynthesisError::SketchSourceUnavailable(_) => Self::environment(e.to_string()),
            _ => Self::input(e.to_string()),
        }
    }
}

impl From<AlbumError> for Failure {
    fn from(e: AlbumError) -> Self {
        Self::input(e.to_string())
    }
}

pub type Outcome<T = ()> = Result<T, Failure>;
