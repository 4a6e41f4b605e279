//! Crate-wide error type.
//!
//! Errors carry enough context to be actionable from a CLI: parse errors
//! name the offending line, truncation errors name the byte offset, and
//! shape errors name the operation and the mismatched dimensions.

use thiserror::Error;

/// All failure modes surfaced by this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Operand dimensions do not line up for a numeric operation.
    #[error("shape mismatch in {op}: {detail}")]
    Shape {
        /// Operation name, e.g. `"matvec"`.
        op: &'static str,
        /// Human-readable description of the mismatched dimensions.
        detail: String,
    },

    /// An operation that requires a non-empty point set received an empty one.
    #[error("empty point set in {0}")]
    EmptyCloud(&'static str),

    /// A text input could not be parsed; `line` is 1-based.
    #[error("{path}:{line}: parse error: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// A binary or structured input ended earlier than its header promised.
    #[error("{path}: truncated input at byte {offset}: {msg}")]
    Truncated {
        path: String,
        offset: u64,
        msg: String,
    },

    /// A documented API precondition was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A non-finite value (NaN or infinity) was produced or supplied where
    /// finite values are required.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// A checkpoint file is malformed or incompatible.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Underlying file-system error.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Configuration file problem (unknown key, bad value).
    #[error("config error: {0}")]
    Config(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for CLI use.
    ///
    /// `1` usage/configuration, `2` I/O and file-format problems,
    /// `3` numeric or contract violations.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) => 1,
            Error::Io(_) | Error::Parse { .. } | Error::Truncated { .. } | Error::Checkpoint(_) => {
                2
            }
            Error::Shape { .. }
            | Error::EmptyCloud(_)
            | Error::Contract(_)
            | Error::NonFinite(_) => 3,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_partition_error_kinds() {
        assert_eq!(Error::Config("x".into()).exit_code(), 1);
        assert_eq!(
            Error::Io(std::io::Error::new(std::io::ErrorKind::NotFound, "gone")).exit_code(),
            2
        );
        assert_eq!(
            Error::Parse {
                path: "f.obj".into(),
                line: 3,
                msg: "bad float".into()
            }
            .exit_code(),
            2
        );
        assert_eq!(
            Error::Shape {
                op: "matvec",
                detail: "2x3 vs 4".into()
            }
            .exit_code(),
            3
        );
        assert_eq!(Error::NonFinite("loss".into()).exit_code(), 3);
    }

    #[test]
    fn parse_error_message_names_path_and_line() {
        let e = Error::Parse {
            path: "mesh.obj".into(),
            line: 17,
            msg: "expected 3 coordinates".into(),
        };
        let s = e.to_string();
        assert!(s.contains("mesh.obj"));
        assert!(s.contains(":17:"));
    }

    #[test]
    fn truncation_error_names_byte_offset() {
        let e = Error::Truncated {
            path: "c.ply".into(),
            offset: 123,
            msg: "expected 50 vertices, found 10".into(),
        };
        assert!(e.to_string().contains("byte 123"));
    }
}
