//! Command-line front end for `obliq`: training, evaluation, depth sweeps,
//! visualization and manifest replay.
//!
//! | exit code | meaning |
//! |-----------|---------|
//! | 0 | success |
//! | 1 | other failure |
//! | 2 | usage error or invalid argument |
//! | 3 | malformed input (parse, format, model structure) |
//! | 4 | numeric failure during training |
//! | 5 | I/O failure |
//! | 6 | replayed artifacts or inputs differ from the manifest |

pub mod args;
pub mod commands;
pub mod manifest;
pub mod pipeline;
pub mod source;

use std::fmt;

pub const EXIT_OTHER: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;
pub const EXIT_IO: i32 = 5;
pub const EXIT_MISMATCH: i32 = 6;

/// A replay whose inputs or outputs do not match the manifest.
#[derive(Debug)]
pub struct ReproducibilityError(pub String);

impl fmt::Display for ReproducibilityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ReproducibilityError {}

/// Exit code for an error, from the first recognized cause in its chain.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<obliq::Error>() {
            return match e {
                obliq::Error::InvalidArgument(_) => EXIT_USAGE,
                obliq::Error::Structure(_) | obliq::Error::Parse { .. } | obliq::Error::Format(_) => EXIT_PARSE,
                obliq::Error::Numeric(_) => EXIT_NUMERIC,
                obliq::Error::Io(_) => EXIT_IO,
            };
        }
        if cause.is::<ReproducibilityError>() {
            return EXIT_MISMATCH;
        }
        if cause.is::<serde_json::Error>() || cause.is::<csv::Error>() {
            return EXIT_PARSE;
        }
        if cause.is::<std::io::Error>() {
            return EXIT_IO;
        }
    }
    EXIT_OTHER
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_table() {
        let e = anyhow::Error::new(obliq::Error::Numeric("nan".into()));
        assert_eq!(exit_code(&e), EXIT_NUMERIC);
        let e = anyhow::Error::new(obliq::Error::Parse {
            line: 3,
            msg: "x".into(),
        })
        .context("loading");
        assert_eq!(exit_code(&e), EXIT_PARSE);
        let e = anyhow::Error::new(std::io::Error::new(std::io::ErrorKind::NotFound, "gone"));
        assert_eq!(exit_code(&e), EXIT_IO);
        assert_eq!(
            exit_code(&anyhow::Error::new(ReproducibilityError("x".into()))),
            EXIT_MISMATCH
        );
        assert_eq!(exit_code(&anyhow::anyhow!("other")), EXIT_OTHER);
    }
}
