//! Command-line frontend for measured Rényi divergences.

pub mod args;
pub mod commands;
pub mod output;

use mrd::Error;

/// Exit status of a run.
pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED_CHECKS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_) => EXIT_USAGE,
        _ => EXIT_DOMAIN,
    }
}
