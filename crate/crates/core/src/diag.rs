//! Non-fatal findings reported alongside analysis results.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Diagnostic {
    pub severity: Severity,
    pub function: Option<String>,
    pub line: u32,
    pub message: String,
}

impl Diagnostic {
    pub fn warning(function: Option<&str>, line: u32, message: impl Into<String>) -> Diagnostic {
        Diagnostic {
            severity: Severity::Warning,
            function: function.map(str::to_owned),
            line,
            message: message.into(),
        }
    }

    pub fn error(function: Option<&str>, line: u32, message: impl Into<String>) -> Diagnostic {
        Diagnostic {
            severity: Severity::Error,
            ..Diagnostic::warning(function, line, message)
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{}: {kind}: {}", self.line, self.message)?;
        if let Some(func) = &self.function {
            write!(f, " (in `{func}`)")?;
        }
        Ok(())
    }
}
