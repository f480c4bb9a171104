use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontendError {
    #[error("{line}:{col}: syntax error: {message}")]
    Syntax { line: u32, col: u32, message: String },
    #[error("{line}: unknown identifier `{name}`")]
    UnknownIdentifier { line: u32, name: String },
    #[error("{line}: type error: {message}")]
    Type { line: u32, message: String },
    #[error("{line}: duplicate definition of `{name}`")]
    Duplicate { line: u32, name: String },
}

impl FrontendError {
    pub(crate) fn syntax(line: u32, col: u32, message: impl Into<String>) -> Self {
        FrontendError::Syntax {
            line,
            col,
            message: message.into(),
        }
    }

    pub(crate) fn type_error(line: u32, message: impl Into<String>) -> Self {
        FrontendError::Type {
            line,
            message: message.into(),
        }
    }

    pub fn line(&self) -> u32 {
        match self {
            FrontendError::Syntax { line, .. }
            | FrontendError::UnknownIdentifier { line, .. }
            | FrontendError::Type { line, .. }
            | FrontendError::Duplicate { line, .. } => *line,
        }
    }
}

/// A place expression that does not name a lock.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("expression does not denote a lock-typed place")]
pub struct NotALockPlace;
