//! Symbolic regression competition toolkit.
//!
//! The crate bundles everything needed to run a small symbolic regression
//! competition end to end:
//!
//! * [`expr`]: expression trees, evaluation, parsing and printing.
//! * [`symbolic`]: simplification and equivalence-up-to-a-constant checks.
//! * [`datagen`]: deterministic generators for the synthetic benchmark tasks
//!   and PMLB-style dataset I/O.
//! * [`engine`]: baseline regressors (tree GP and ordinary least squares).
//! * [`scoring`]: metrics, rank aggregation and critical-difference statistics.
//! * [`realworld`]: time-series preprocessing and trust-score aggregation.
//! * [`harness`]: track orchestration, budgets and report emission.

pub mod datagen;
pub mod engine;
pub mod expr;
pub mod harness;
pub mod realworld;
pub mod scoring;
pub mod special;
pub mod symbolic;

pub(crate) mod serde_f64;

pub use datagen::{Dataset, Difficulty, Task, TaskSpec};
pub use expr::{BinaryOp, EvalReport, Expr, UnaryOp};
pub use symbolic::{EquivalenceVerdict, VerdictKind};
