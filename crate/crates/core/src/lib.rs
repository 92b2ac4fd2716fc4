//! Optimal power allocation for downlink multi-cluster NOMA.
//!
//! The [`allocator`] module holds the solver: minimum cluster budgets, the
//! closed-form intra-cluster allocation, the reduction of each cluster to a
//! virtual OMA user and bisection water-filling across clusters. [`oracle`]
//! holds slower independent methods used to check it. [`channel`],
//! [`grouping`] and [`harness`] generate random cellular scenarios and run
//! Monte Carlo comparisons of fully SC-SIC, NOMA and FDMA.

pub mod allocator;
pub mod channel;
pub mod error;
pub mod grouping;
pub mod harness;
pub mod model;
pub mod oracle;

pub use allocator::{solve, SolverOptions};
pub use error::{Error, Result};
pub use model::{ClusterInstance, PowerSolution, ProblemInstance, UserChannel};
