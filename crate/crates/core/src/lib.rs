//! Benchmarking toolkit for feature-based algorithm selection in black-box
//! numerical optimization.
//!
//! The crate is organised along the experiment workflow:
//!
//! * [`archive`] ingests archived optimizer runs (evaluations to target, success, budget).
//! * [`measures`] turns runs into ERT / SP1 and their relative, PAR10-imputed forms.
//! * [`portfolio`] ranks optimizers and builds portfolios by first-improvement local search.
//! * [`sampling`] and [`features`] draw Latin hypercube samples and compute landscape features.
//! * [`selectors`] trains the five selector families on those features.
//! * [`cv`] generates LOIO / LOPO / LOPOAD / RI folds.
//! * [`pipeline`] runs a selection system per instance with honest evaluation accounting.
//! * [`stats`] compares systems with the Wilcoxon rank-sum test.
//! * [`testbed`] provides synthetic functions and toy optimizers so everything runs offline.
//! * [`experiment`] wires the above into the reports written by the command-line tool.

pub mod archive;
pub mod cv;
pub mod experiment;
pub mod features;
pub mod measures;
pub mod pipeline;
pub mod portfolio;
pub mod sampling;
pub mod selectors;
pub mod stats;
pub mod testbed;

mod seed;

pub use archive::{InstanceKey, PerformanceArchive, ProblemKey, RunRecord};
pub use seed::derive_seed;
