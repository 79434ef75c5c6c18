use std::fmt::{Debug, Display};

use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("{pointer}: {message}")]
    Validation { pointer: String, message: String },
    #[error("{kind}: {message}")]
    Numerical { kind: String, message: String },
    #[error("usage: {0}")]
    Usage(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl CliError {
    pub fn validation(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Validation {
            pointer: pointer.into(),
            message: message.into(),
        }
    }

    /// Wraps a module error, naming its innermost variant.
    pub fn numerical<E: Debug + Display>(e: E) -> Self {
        CliError::Numerical {
            kind: variant_name(&format!("{e:?}")),
            message: e.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical { .. } => 3,
            _ => 2,
        }
    }

    pub fn to_json(&self) -> Value {
        let body = match self {
            CliError::Validation { pointer, message } => {
                json!({"kind": "validation", "pointer": pointer, "message": message})
            }
            CliError::Numerical { kind, message } => json!({"kind": kind, "message": message}),
            CliError::Usage(m) => json!({"kind": "usage", "message": m}),
            CliError::Io(m) => json!({"kind": "io", "message": m}),
        };
        json!({ "error": body })
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

const WRAPPERS: [&str; 4] = ["Periods", "Weierstrass", "Algebra", "Forms"];

fn variant_name(debug: &str) -> String {
    let mut s = debug;
    loop {
        let end = s
            .find(|c: char| !(c.is_alphanumeric() || c == '_'))
            .unwrap_or(s.len());
        let (name, rest) = s.split_at(end);
        if WRAPPERS.contains(&name) && rest.starts_with('(') {
            s = &rest[1..];
            continue;
        }
        return name.to_string();
    }
}

#[cfg(test)]
mod tests {
    use super::variant_name;

    #[test]
    fn innermost_variant() {
        assert_eq!(
            variant_name("Periods(UnwrapFailure { t: 1 })"),
            "UnwrapFailure"
        );
        assert_eq!(
            variant_name("ChartHitsBadFiber(Complex { re: 0.0 })"),
            "ChartHitsBadFiber"
        );
        assert_eq!(variant_name("GridMismatch"), "GridMismatch");
    }
}
