//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid user-supplied parameter (wavenumber, node counts, ...).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Patch file could not be parsed.
    #[error("patch file parse error at line {line}: {message}")]
    PatchFile { line: usize, message: String },

    /// A patch has a (near-)vanishing Jacobian away from its boundary.
    #[error("patch {patch} is degenerate: jacobian {jacobian:.3e} at (u,v)=({u:.3},{v:.3})")]
    DegeneratePatch {
        patch: usize,
        jacobian: f64,
        u: f64,
        v: f64,
    },

    /// A singular quadrature node coincided with its target point.
    #[error("quadrature node coincides with target {node} on patch {patch}; projection is inconsistent")]
    CoincidentNode { patch: usize, node: usize },

    /// apply_near was asked for a (patch, target) pair with no stored weights.
    #[error("missing precomputed weights for target node {node} on patch {patch}")]
    MissingWeight { patch: usize, node: usize },

    /// Weight cache does not match the requested problem key.
    #[error("cache key mismatch; differing fields: {}", fields.join(", "))]
    CacheMismatch { fields: Vec<String> },

    /// Weight cache failed its integrity check.
    #[error("cache file corrupt: {0}")]
    CacheCorrupt(String),

    #[error("cache i/o error: {0}")]
    CacheIo(#[from] std::io::Error),

    /// The iterative solver produced a non-finite value.
    #[error("solver produced non-finite values at iteration {0}")]
    SolverNonFinite(usize),

    /// The iterative solver ran out of iterations.
    #[error("solver did not converge: relative residual {residual:.3e} after {iterations} iterations")]
    SolverDidNotConverge { residual: f64, iterations: usize },
}
