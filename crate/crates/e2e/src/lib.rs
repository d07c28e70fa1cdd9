//! Helpers for the acceptance suite in `tests/`.

use std::fmt::Display;
use std::io::Write;

/// Prints one verdict line straight to stderr, bypassing the test
/// harness's output capture, and returns `pass`.
pub fn verdict(criterion: u8, pass: bool, detail: impl Display) -> bool {
    let status = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr().lock(), "criterion {criterion}: {status} ({detail})");
    pass
}
