//! Library half of the `nam` binary: scenario parsing, dispatch to the
//! exact-arithmetic core, report assembly, measure enumeration, and the
//! CSV emitter. Everything here is deterministic: identical inputs produce
//! byte-identical reports.

pub mod csv;
pub mod oracle;
pub mod report;
pub mod runner;
pub mod scenario;

use std::fmt;

/// Default ceiling for enumerations (oracle grids, admissible lattices).
pub const DEFAULT_CAP: usize = 1 << 14;

/// Errors impossible to attribute to a mathematical check: bad files, bad
/// schemas, violated operation preconditions. They map to exit code 2.
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for InputError {}

impl From<nam_core::Error> for InputError {
    fn from(e: nam_core::Error) -> Self {
        InputError(e.to_string())
    }
}

impl From<std::io::Error> for InputError {
    fn from(e: std::io::Error) -> Self {
        InputError(format!("io error: {e}"))
    }
}

impl From<serde_json::Error> for InputError {
    fn from(e: serde_json::Error) -> Self {
        InputError(format!("schema error: {e}"))
    }
}
