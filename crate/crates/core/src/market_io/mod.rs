//! Market data in and artifacts out: implied marginals from call quotes,
//! irreducible approximating pairs, convex-order projection, and persisted
//! calibrations.

mod approx;
mod artifact;
mod projection;
mod quotes;

pub use approx::{approximate_irreducible_pair, ApproximatePair};
pub use artifact::{canonical_json, inputs_digest, write_atomic, CalibrationArtifact, FORMAT_VERSION};
pub use projection::{isotonic_regression, project_convex_order, project_on_grid};
pub use quotes::{implied_marginal, smooth_marginal, MaturityQuotes, QuoteSurface};

/// Byte offset of a 1-based `(line, column)` position, clamped to the text.
pub fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let start: usize = text.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum();
    (start + column.saturating_sub(1)).min(text.len())
}
