//! Synthetic test functions, toy optimizers and archive generation, so that
//! the whole workflow runs without external data.

mod functions;
mod optimizers;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use functions::{make_suite, Family, TestFunction, DOMAIN_RADIUS};
pub use optimizers::{
    nelder_mead, BudgetedEvaluator, Halt, OptimizerKind, RunOutcome, ToyOptimizer, DEFAULT_EPSILON,
};

use crate::archive::{ArchiveError, PerformanceArchive, RunRecord};
use crate::seed::{derive_seed, str_stream};

/// Serializable description of a synthetic suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSpec {
    #[serde(default = "all_families")]
    pub families: Vec<Family>,
    pub dimensions: Vec<usize>,
    pub instances: u32,
    #[serde(default)]
    pub seed: u64,
}

fn all_families() -> Vec<Family> {
    Family::ALL.to_vec()
}

impl SuiteSpec {
    pub fn build(&self) -> Vec<TestFunction> {
        make_suite(&self.families, &self.dimensions, self.instances, self.seed)
    }
}

/// Runs every optimizer once on every instance and records the outcome against
/// the target `f_opt + epsilon`.
pub fn generate_archive(
    suite: &[TestFunction],
    optimizers: &[ToyOptimizer],
    epsilon: f64,
    seed: u64,
) -> Result<PerformanceArchive, ArchiveError> {
    let jobs: Vec<(&ToyOptimizer, &TestFunction)> =
        optimizers.iter().flat_map(|o| suite.iter().map(move |f| (o, f))).collect();
    let records = jobs
        .par_iter()
        .map(|&(opt, f)| {
            let key = f.key();
            let run_seed = derive_seed(
                seed,
                &[str_stream(opt.id()), str_stream(&key.problem.function_id), f.dimension as u64, u64::from(f.instance_id)],
            );
            let out = opt.run(f, &f.bounds(), f.f_opt + epsilon, run_seed);
            RunRecord::new(opt.id(), key, out.evaluations, out.success, opt.budget)
        })
        .collect::<Result<Vec<_>, _>>()?;
    PerformanceArchive::from_records(records)
}

/// The four toy optimizers, each with `budget` evaluations per run.
pub fn default_optimizers(budget: u64) -> Vec<ToyOptimizer> {
    OptimizerKind::ALL.iter().map(|&k| ToyOptimizer::new(k, budget)).collect()
}
