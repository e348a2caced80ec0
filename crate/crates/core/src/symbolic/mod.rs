//! Simplification and exact-rediscovery checks.

mod equiv;
mod simplify;

pub use equiv::{
    equivalent_up_to_constant, probe_points, EquivalenceError, EquivalenceVerdict, VerdictKind, DEFAULT_TOLERANCE,
    MIN_VALID_POINTS, PROBE_POINTS,
};
pub use simplify::{simplified_node_count, simplify, simplify_logged, Rewrite, Simplified};
