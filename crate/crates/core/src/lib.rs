//! Genetic programming with preference-based mate choice.
//!
//! Each individual carries two trees: a solution, scored on the fitness
//! cases, and a preference, used only to choose a mate. The crate contains
//! the tree representation, variation and selection operators, the
//! generational engine, the statistical tests used to compare approaches,
//! and an experiment harness that drives full run matrices.

pub mod benchmarks;
pub mod engine;
pub mod error;
pub mod harness;
pub mod individual;
pub mod primitives;
pub mod selection;
pub mod stats;
pub mod streams;
pub mod variation;

pub use benchmarks::{FitnessCases, Problem};
pub use engine::{run, MetricsLog, RunConfig, RunRecord, RunSummary};
pub use error::{Error, Result};
pub use individual::{Individual, Population};
pub use primitives::{ExprTree, Function, Node, PrimitiveSet};
pub use selection::{Approach, CoupleRecord};
