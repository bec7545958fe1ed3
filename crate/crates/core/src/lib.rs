//! Core library: certified interval-arithmetic proofs of scalar rate
//! inequalities, exact enumeration of margin-constrained Poisson tables,
//! and local-limit sandwich diagnostics for the conditioned distribution.

pub mod certify;
pub mod cond_dist;
pub mod enclose;
pub mod gof;
pub mod interval;
pub mod numeric;
pub mod sampler;
pub mod scalar;
pub mod tables;

pub use certify::{Budget, Certificate, HIneqMode, Verdict};
pub use cond_dist::{CondModel, SandwichReport, TailsReport};
pub use gof::{GofMode, GofReport};
pub use interval::Interval;
pub use sampler::{McmcOptions, McmcRun, RejectionRun};
pub use tables::{MarginTable, ScanResult, TableError};
