//! Command-line front end for the polarization toolkit: scene files on disk,
//! subcommand plumbing, and portable float/integer image formats.

pub mod commands;
pub mod io;
pub mod scene;

pub use commands::{run, Cli};
use polar_core::error::Error;

/// Process exit code for an error: 2 for missing or corrupt inputs, 3 for
/// dimension or precondition violations, 4 for numerical failures.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => 2,
        Error::Dimension(_) | Error::Precondition(_) => 3,
        Error::Numerical(_) => 4,
    }
}
