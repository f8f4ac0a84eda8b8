//! Exam timetabling by a reinforcement-learning hyper-heuristic with Great
//! Deluge style move acceptance.
//!
//! Instances use the Toronto `.crs`/`.stu` format. A run builds an initial
//! timetable by largest enrollment, then improves it with four slot-level
//! low-level heuristics chosen by utility and filtered by one of the deluge
//! acceptance criteria.

pub mod acceptance;
pub mod batch;
pub mod driver;
pub mod instance;
pub mod neighborhood;
pub mod selection;
pub mod solution;
pub mod suite;

pub use acceptance::{Acceptance, AcceptanceParams, Variant};
pub use driver::{run_hh, RunConfig, RunError, RunResult};
pub use instance::{parse_toronto, ConflictMatrix, GeneratorParams, ProblemInstance};
pub use solution::{construct_initial_le, BalanceCap, Cost, Timetable};
