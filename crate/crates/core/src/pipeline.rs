//! Per-instance execution of an algorithm-selection system and system-level scoring.
//!
//! A system run on one instance optionally pre-solves, draws a Latin hypercube
//! sample, computes features, selects a portfolio member and replays that
//! member's archived run. Every evaluation spent along the way is charged to
//! the record, so `total = presolver + sampling + replay` always holds.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::archive::{ArchiveError, InstanceKey, PerformanceArchive, ProblemKey};
use crate::cv::{self, CvError, FoldSpec, Protocol};
use crate::features::{compute_features, FeatureClass, FeatureError, FeatureVector};
use crate::measures::{sp1_of_outcomes, MeasureError, MeasureTable};
use crate::sampling::{
    evaluate_sample, lhs_sample, Bounds, Objective, SampleSet, SamplingError, DEFAULT_REFINE_ITERS,
    DEFAULT_SAMPLE_FACTOR,
};
use crate::selectors::{build_training_set, train, ModelSpec, Selector, SelectorError, SelectorKind};
use crate::seed::{derive_seed, rng, str_stream};
use crate::testbed::{nelder_mead, BudgetedEvaluator, RunOutcome, TestFunction, DEFAULT_EPSILON};

/// Pre-solver evaluations per dimension when no budget is configured.
pub const DEFAULT_PRESOLVER_FACTOR: u64 = 50;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid system configuration: {0}")]
    Config(String),
    #[error("objective of {0} has no known optimum; the pre-solver cannot test for success")]
    NoOptimum(InstanceKey),
    #[error(transparent)]
    Archive(#[from] ArchiveError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Selector(#[from] SelectorError),
    #[error(transparent)]
    Cv(#[from] CvError),
    #[error("instance {0} is not tested by any fold")]
    Untested(InstanceKey),
    #[error("no run values given")]
    Empty,
}

/// Which points the features are computed from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSource {
    #[default]
    XOnly,
    /// The sample joined with every point the pre-solver evaluated (no deduplication).
    XUnionY,
}

/// How a system picks a member.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SelectorChoice {
    Trained(SelectorKind),
    /// Picks the member with the best SP1 on the instance's function, without sampling.
    Oracle,
}

impl fmt::Display for SelectorChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectorChoice::Trained(k) => write!(f, "{k}"),
            SelectorChoice::Oracle => f.write_str("oracle"),
        }
    }
}

impl FromStr for SelectorChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "oracle" {
            return Ok(SelectorChoice::Oracle);
        }
        s.parse().map(SelectorChoice::Trained)
    }
}

impl TryFrom<String> for SelectorChoice {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<SelectorChoice> for String {
    fn from(c: SelectorChoice) -> Self {
        c.to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PresolverConfig {
    /// Evaluation budget; `50 n` when absent.
    pub budget: Option<u64>,
    /// Success target is `f_opt + epsilon`.
    pub epsilon: f64,
}

impl Default for PresolverConfig {
    fn default() -> Self {
        PresolverConfig { budget: None, epsilon: DEFAULT_EPSILON }
    }
}

impl PresolverConfig {
    pub fn budget_for(&self, dimension: usize) -> u64 {
        self.budget.unwrap_or(DEFAULT_PRESOLVER_FACTOR * dimension as u64)
    }
}

fn all_classes() -> Vec<FeatureClass> {
    FeatureClass::ALL.to_vec()
}

fn default_refine() -> usize {
    DEFAULT_REFINE_ITERS
}

/// One algorithm-selection system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub name: String,
    pub members: Vec<String>,
    pub selector: SelectorChoice,
    #[serde(default)]
    pub model: ModelSpec,
    /// Sample size; `50 n` when absent.
    #[serde(default)]
    pub sample_size: Option<usize>,
    #[serde(default = "default_refine")]
    pub refine_iters: usize,
    #[serde(default)]
    pub presolver: Option<PresolverConfig>,
    #[serde(default = "all_classes")]
    pub feature_classes: Vec<FeatureClass>,
    #[serde(default)]
    pub feature_source: FeatureSource,
}

impl SystemConfig {
    pub fn new(name: impl Into<String>, members: Vec<String>, selector: SelectorChoice) -> Self {
        SystemConfig {
            name: name.into(),
            members,
            selector,
            model: ModelSpec::default(),
            sample_size: None,
            refine_iters: DEFAULT_REFINE_ITERS,
            presolver: None,
            feature_classes: all_classes(),
            feature_source: FeatureSource::XOnly,
        }
    }

    pub fn sample_size_for(&self, dimension: usize) -> usize {
        self.sample_size.unwrap_or(DEFAULT_SAMPLE_FACTOR * dimension)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let err = |m: String| Err(PipelineError::Config(m));
        if self.name.is_empty() {
            return err("system name is empty".into());
        }
        if self.members.is_empty() {
            return err(format!("{}: members is empty", self.name));
        }
        let mut m = self.members.clone();
        m.sort();
        m.dedup();
        if m.len() != self.members.len() {
            return err(format!("{}: members contains duplicates", self.name));
        }
        if self.sample_size == Some(0) {
            return err(format!("{}: sample_size must be at least 1", self.name));
        }
        if self.presolver.is_some_and(|p| p.budget == Some(0)) {
            return err(format!("{}: presolver.budget must be at least 1", self.name));
        }
        if self.presolver.is_some_and(|p| !(p.epsilon >= 0.0)) {
            return err(format!("{}: presolver.epsilon must be non-negative", self.name));
        }
        if self.feature_source == FeatureSource::XUnionY && self.presolver.is_none() {
            return err(format!("{}: feature_source x_union_y needs a presolver", self.name));
        }
        if self.feature_classes.is_empty() {
            return err(format!("{}: feature_classes is empty", self.name));
        }
        if let SelectorChoice::Trained(kind) = self.selector {
            if self.members.len() < 2 {
                return err(format!("{}: {kind} needs at least two members", self.name));
            }
        }
        Ok(())
    }
}

/// Evaluation ledger of one system run on one instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemRunRecord {
    pub instance: InstanceKey,
    pub presolver_evals: u64,
    pub presolver_success: bool,
    pub sampling_evals: u64,
    pub selected: Option<String>,
    pub replay_evals: u64,
    pub total_evals: u64,
    pub success: bool,
}

impl SystemRunRecord {
    pub fn ledger_holds(&self) -> bool {
        self.total_evals == self.presolver_evals + self.sampling_evals + self.replay_evals
            && self.total_evals >= 1
            && (!self.presolver_success
                || (self.sampling_evals == 0 && self.replay_evals == 0 && self.selected.is_none()))
    }
}

/// A pluggable pre-solver. It must stop at the first evaluation reaching `target`,
/// never exceed `budget`, and return every evaluated point in `trace`.
pub trait Presolver: Sync {
    fn solve(&self, objective: &dyn Objective, bounds: &Bounds, target: f64, budget: u64, seed: u64) -> RunOutcome;
}

/// The built-in Nelder–Mead pre-solver.
#[derive(Clone, Copy, Debug, Default)]
pub struct NelderMeadPresolver;

impl Presolver for NelderMeadPresolver {
    fn solve(&self, objective: &dyn Objective, bounds: &Bounds, target: f64, budget: u64, seed: u64) -> RunOutcome {
        let mut eval = BudgetedEvaluator::new(objective, target, budget).with_trace();
        let _ = nelder_mead(&mut eval, bounds, &mut rng(seed));
        eval.outcome()
    }
}

/// Per-function best member by SP1 (ties: lexicographically smallest id); functions
/// no member solves map to the smallest id.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleChooser {
    best: BTreeMap<ProblemKey, usize>,
}

impl OracleChooser {
    pub fn new(archive: &PerformanceArchive, members: &[String]) -> Result<Self, PipelineError> {
        let table = MeasureTable::build(archive, members)?;
        let mut sorted: Vec<&String> = members.iter().collect();
        sorted.sort();
        let best = table
            .problems()
            .into_iter()
            .map(|p| {
                let id = table.best_sp1(&p).map(|b| b.optimizer.as_str()).unwrap_or(sorted[0].as_str());
                let index = members.iter().position(|m| m == id).expect("member of the table");
                (p, index)
            })
            .collect();
        Ok(OracleChooser { best })
    }

    pub fn choose(&self, problem: &ProblemKey) -> Option<usize> {
        self.best.get(problem).copied()
    }
}

/// How the selection step of a run is made.
#[derive(Clone, Copy, Debug)]
pub enum Chooser<'a> {
    Trained(&'a Selector),
    Oracle(&'a OracleChooser),
}

impl Chooser<'_> {
    fn needs_features(&self) -> bool {
        matches!(self, Chooser::Trained(_))
    }
}

/// Pre-solver outcome, sample and features of one instance in one run.
struct Observation {
    presolve: Option<RunOutcome>,
    sampling_evals: u64,
    features: Option<FeatureVector>,
}

fn stream(instance: &InstanceKey, tag: u64) -> [u64; 4] {
    [str_stream(&instance.problem.function_id), instance.dimension() as u64, u64::from(instance.instance_id), tag]
}

const PRESOLVE_STREAM: u64 = 1;
const SAMPLE_STREAM: u64 = 2;
const TIE_STREAM: u64 = 3;

/// Pre-solves and, when `want_features`, samples and computes features.
/// Features are computed even when the pre-solver succeeds so that the
/// instance can serve as a training row.
fn observe(
    config: &SystemConfig,
    presolver: &dyn Presolver,
    objective: &dyn Objective,
    bounds: &Bounds,
    instance: &InstanceKey,
    run_seed: u64,
    want_features: bool,
) -> Result<Observation, PipelineError> {
    let n = bounds.dimension();
    let presolve = match &config.presolver {
        Some(p) => {
            let f_opt = objective.optimum_value().ok_or_else(|| PipelineError::NoOptimum(instance.clone()))?;
            let seed = derive_seed(run_seed, &stream(instance, PRESOLVE_STREAM));
            Some(presolver.solve(objective, bounds, f_opt + p.epsilon, p.budget_for(n), seed))
        }
        None => None,
    };
    if !want_features {
        return Ok(Observation { presolve, sampling_evals: 0, features: None });
    }
    let s = config.sample_size_for(n);
    let seed = derive_seed(run_seed, &stream(instance, SAMPLE_STREAM));
    let points = lhs_sample(s, bounds, seed, config.refine_iters)?;
    let sample = evaluate_sample(points, bounds, |x| objective.evaluate(x))?;
    let sample: SampleSet = match (config.feature_source, &presolve) {
        (FeatureSource::XUnionY, Some(out)) if !out.trace.is_empty() => {
            let (pts, vals): (Vec<Vec<f64>>, Vec<f64>) = out.trace.iter().cloned().unzip();
            sample.extended(&pts, &vals)?
        }
        _ => sample,
    };
    let features = compute_features(&sample, &config.feature_classes)?;
    Ok(Observation { presolve, sampling_evals: s as u64, features: Some(features) })
}

fn finish(
    config: &SystemConfig,
    chooser: Chooser,
    archive: &PerformanceArchive,
    instance: &InstanceKey,
    obs: &Observation,
    run_seed: u64,
) -> Result<SystemRunRecord, PipelineError> {
    let (presolver_evals, presolver_success) =
        obs.presolve.as_ref().map(|o| (o.evaluations, o.success)).unwrap_or((0, false));
    if presolver_success {
        let rec = SystemRunRecord {
            instance: instance.clone(),
            presolver_evals,
            presolver_success,
            sampling_evals: 0,
            selected: None,
            replay_evals: 0,
            total_evals: presolver_evals,
            success: true,
        };
        assert!(rec.ledger_holds());
        return Ok(rec);
    }
    let index = match chooser {
        Chooser::Trained(selector) => {
            let fv = obs.features.as_ref().expect("trained choosers observe features");
            selector.select(fv, derive_seed(run_seed, &stream(instance, TIE_STREAM)))?
        }
        Chooser::Oracle(oracle) => oracle
            .choose(&instance.problem)
            .ok_or_else(|| ArchiveError::UnknownProblem(instance.problem.clone()))?,
    };
    let member = &config.members[index];
    let replay = archive.record(member, instance)?;
    let sampling_evals = if chooser.needs_features() { obs.sampling_evals } else { 0 };
    let rec = SystemRunRecord {
        instance: instance.clone(),
        presolver_evals,
        presolver_success,
        sampling_evals,
        selected: Some(member.clone()),
        replay_evals: replay.evaluations,
        total_evals: presolver_evals + sampling_evals + replay.evaluations,
        success: replay.success,
    };
    assert!(rec.ledger_holds(), "evaluation ledger broken for {}", rec.instance);
    Ok(rec)
}

/// Runs the system on one instance with the built-in pre-solver.
pub fn run_instance(
    config: &SystemConfig,
    chooser: Chooser,
    archive: &PerformanceArchive,
    instance: &InstanceKey,
    objective: &dyn Objective,
    bounds: &Bounds,
    run_seed: u64,
) -> Result<SystemRunRecord, PipelineError> {
    run_instance_with(config, &NelderMeadPresolver, chooser, archive, instance, objective, bounds, run_seed)
}

/// [`run_instance`] with a custom pre-solver.
#[allow(clippy::too_many_arguments)]
pub fn run_instance_with(
    config: &SystemConfig,
    presolver: &dyn Presolver,
    chooser: Chooser,
    archive: &PerformanceArchive,
    instance: &InstanceKey,
    objective: &dyn Objective,
    bounds: &Bounds,
    run_seed: u64,
) -> Result<SystemRunRecord, PipelineError> {
    config.validate()?;
    for m in &config.members {
        archive.record(m, instance)?;
    }
    let obs = observe(config, presolver, objective, bounds, instance, run_seed, chooser.needs_features())?;
    finish(config, chooser, archive, instance, &obs, run_seed)
}

/// relSP1 of a system on one function in one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionScore {
    pub run_seed: u64,
    pub problem: ProblemKey,
    pub rel_sp1: f64,
    pub imputed: bool,
}

/// Mean relSP1 over the functions of one dimension in one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMean {
    pub run_seed: u64,
    pub dimension: usize,
    pub mean_rel_sp1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemEvaluation {
    pub system: String,
    pub protocol: Protocol,
    pub records: Vec<(u64, SystemRunRecord)>,
    pub functions: Vec<FunctionScore>,
    pub means: Vec<RunMean>,
}

impl SystemEvaluation {
    /// Per-run means of one dimension, in run order.
    pub fn means_of(&self, dimension: usize) -> Vec<f64> {
        self.means.iter().filter(|m| m.dimension == dimension).map(|m| m.mean_rel_sp1).collect()
    }
}

/// Scores the records of one run: system SP1 per function over its instances,
/// divided by the best member SP1 of the function; undefined values are imputed
/// with ten times the worst member relSP1 of the dimension.
pub fn score_records(
    records: &[SystemRunRecord],
    table: &MeasureTable,
    run_seed: u64,
) -> Result<(Vec<FunctionScore>, Vec<RunMean>), PipelineError> {
    let mut by_problem: BTreeMap<ProblemKey, Vec<(u64, bool)>> = BTreeMap::new();
    for r in records {
        by_problem.entry(r.instance.problem.clone()).or_default().push((r.total_evals, r.success));
    }
    let mut functions = Vec::with_capacity(by_problem.len());
    for (problem, outcomes) in by_problem {
        let sp1 = sp1_of_outcomes(&outcomes)?;
        let rel = match (sp1.value, table.best_sp1(&problem)) {
            (Some(v), Some(best)) => Some(v / best.value),
            _ => None,
        };
        let (rel_sp1, imputed) = match rel {
            Some(v) => (v, false),
            None => {
                let worst = table.worst(problem.dimension).rel_sp1.ok_or(MeasureError::NoWorstValue(problem.dimension))?;
                (10.0 * worst, true)
            }
        };
        functions.push(FunctionScore { run_seed, problem, rel_sp1, imputed });
    }
    let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for f in &functions {
        let e = sums.entry(f.problem.dimension).or_insert((0.0, 0));
        e.0 += f.rel_sp1;
        e.1 += 1;
    }
    let means = sums
        .into_iter()
        .map(|(dimension, (s, c))| RunMean { run_seed, dimension, mean_rel_sp1: s / c as f64 })
        .collect();
    Ok((functions, means))
}

/// Evaluates a system under `protocol` for every run seed.
///
/// Per run, each instance is observed once (pre-solver, sample, features); per
/// fold a selector is trained on the fold's training instances only and applied
/// to its test instances.
pub fn evaluate_system(
    config: &SystemConfig,
    archive: &PerformanceArchive,
    suite: &[TestFunction],
    protocol: Protocol,
    run_seeds: &[u64],
    ri_folds: Option<usize>,
) -> Result<SystemEvaluation, PipelineError> {
    config.validate()?;
    if run_seeds.is_empty() {
        return Err(PipelineError::Empty);
    }
    let keys: Vec<InstanceKey> = suite.iter().map(TestFunction::key).collect();
    for k in &keys {
        for m in &config.members {
            archive.record(m, k)?;
        }
    }
    let table = MeasureTable::build(archive, &config.members)?;
    let oracle = match config.selector {
        SelectorChoice::Oracle => Some(OracleChooser::new(archive, &config.members)?),
        SelectorChoice::Trained(_) => None,
    };

    let per_run = run_seeds
        .par_iter()
        .map(|&run_seed| {
            let folds = cv::folds(protocol, &keys, run_seed, ri_folds)?;
            let want = oracle.is_none();
            let observations = suite
                .par_iter()
                .map(|f| {
                    let key = f.key();
                    observe(config, &NelderMeadPresolver, f, &f.bounds(), &key, run_seed, want).map(|o| (key, o))
                })
                .collect::<Result<BTreeMap<_, _>, PipelineError>>()?;
            let features: BTreeMap<InstanceKey, FeatureVector> = observations
                .iter()
                .filter_map(|(k, o)| o.features.clone().map(|f| (k.clone(), f)))
                .collect();

            let fold_records = folds
                .par_iter()
                .map(|fold| run_fold(config, archive, oracle.as_ref(), fold, &observations, &features, run_seed))
                .collect::<Result<Vec<_>, PipelineError>>()?;
            let mut records: Vec<SystemRunRecord> = fold_records.into_iter().flatten().collect();
            records.sort_by(|a, b| a.instance.cmp(&b.instance));
            if let Some(missing) = keys.iter().find(|k| records.binary_search_by(|r| r.instance.cmp(k)).is_err()) {
                return Err(PipelineError::Untested(missing.clone()));
            }
            let (functions, means) = score_records(&records, &table, run_seed)?;
            Ok((run_seed, records, functions, means))
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;

    let mut eval = SystemEvaluation {
        system: config.name.clone(),
        protocol,
        records: Vec::new(),
        functions: Vec::new(),
        means: Vec::new(),
    };
    for (seed, records, functions, means) in per_run {
        eval.records.extend(records.into_iter().map(|r| (seed, r)));
        eval.functions.extend(functions);
        eval.means.extend(means);
    }
    Ok(eval)
}

fn run_fold(
    config: &SystemConfig,
    archive: &PerformanceArchive,
    oracle: Option<&OracleChooser>,
    fold: &FoldSpec,
    observations: &BTreeMap<InstanceKey, Observation>,
    features: &BTreeMap<InstanceKey, FeatureVector>,
    run_seed: u64,
) -> Result<Vec<SystemRunRecord>, PipelineError> {
    let trained;
    let chooser = match (config.selector, oracle) {
        (SelectorChoice::Trained(kind), _) => {
            let ts = build_training_set(archive, &config.members, cv::training_measure_scope(fold), features)?;
            let seed = derive_seed(run_seed, &[fold.fold_index as u64, fold.dimension.unwrap_or(0) as u64]);
            trained = train(kind, &ts, &config.model, seed)?;
            Chooser::Trained(&trained)
        }
        (SelectorChoice::Oracle, Some(o)) => Chooser::Oracle(o),
        (SelectorChoice::Oracle, None) => unreachable!("oracle built for oracle systems"),
    };
    fold.test
        .iter()
        .map(|k| finish(config, chooser, archive, k, &observations[k], run_seed))
        .collect()
}

/// Number of runs whose mean relSP1 is strictly below the single best solver's.
pub fn n_sbs(system_means: &[f64], sbs_mean: f64) -> Result<usize, PipelineError> {
    if system_means.is_empty() {
        return Err(PipelineError::Empty);
    }
    Ok(system_means.iter().filter(|&&m| m < sbs_mean).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archive::RunRecord;
    use crate::testbed::Family;

    fn key(f: &str, i: u32) -> InstanceKey {
        InstanceKey::new(ProblemKey::new(f, 2).unwrap(), i).unwrap()
    }

    #[test]
    fn n_sbs_counts_strict_improvements() {
        let m = 1.7;
        assert_eq!(n_sbs(&[m; 31], m).unwrap(), 0);
        assert_eq!(n_sbs(&[m * 0.5; 31], m).unwrap(), 31);
        let mixed: Vec<f64> = [vec![0.9 * m; 10], vec![1.1 * m; 21]].concat();
        assert_eq!(n_sbs(&mixed, m).unwrap(), 10);
        assert!(matches!(n_sbs(&[], m), Err(PipelineError::Empty)));
    }

    #[test]
    fn selector_choice_strings() {
        assert_eq!("oracle".parse::<SelectorChoice>(), Ok(SelectorChoice::Oracle));
        assert_eq!(
            "pairwise_regression".parse::<SelectorChoice>(),
            Ok(SelectorChoice::Trained(SelectorKind::PairwiseRegression))
        );
        assert_eq!(serde_json::to_string(&SelectorChoice::Oracle).unwrap(), "\"oracle\"");
        assert!("best".parse::<SelectorChoice>().is_err());
    }

    #[test]
    fn presolver_success_skips_sampling() {
        let f = TestFunction::new(Family::Sphere, 2, 1, 0);
        let k = f.key();
        let archive = PerformanceArchive::from_records(vec![
            RunRecord::new("a", k.clone(), 900, true, 1000).unwrap(),
            RunRecord::new("b", k.clone(), 1000, false, 1000).unwrap(),
        ])
        .unwrap();
        let members = vec!["a".to_string(), "b".to_string()];
        let oracle = OracleChooser::new(&archive, &members).unwrap();
        let mut cfg = SystemConfig::new("nm", members, SelectorChoice::Oracle);
        cfg.presolver = Some(PresolverConfig { budget: Some(1000), ..PresolverConfig::default() });
        let rec = run_instance(&cfg, Chooser::Oracle(&oracle), &archive, &k, &f, &f.bounds(), 1).unwrap();
        assert!(rec.presolver_success && rec.success);
        assert_eq!((rec.sampling_evals, rec.replay_evals, rec.selected), (0, 0, None));
        assert_eq!(rec.total_evals, rec.presolver_evals);
        assert!(rec.presolver_evals <= 1000);
    }

    #[test]
    fn failed_presolve_is_charged() {
        // Budget 100 on Rastrigin fails; the oracle replays member a (900 evaluations).
        let f = TestFunction::new(Family::Rastrigin, 2, 1, 0);
        let k = f.key();
        let archive = PerformanceArchive::from_records(vec![
            RunRecord::new("a", k.clone(), 900, true, 1000).unwrap(),
            RunRecord::new("b", k.clone(), 1000, false, 1000).unwrap(),
        ])
        .unwrap();
        let members = vec!["a".to_string(), "b".to_string()];
        let oracle = OracleChooser::new(&archive, &members).unwrap();
        let mut cfg = SystemConfig::new("nm", members, SelectorChoice::Oracle);
        cfg.presolver = Some(PresolverConfig { budget: Some(100), epsilon: 1e-12 });
        let rec = run_instance(&cfg, Chooser::Oracle(&oracle), &archive, &k, &f, &f.bounds(), 1).unwrap();
        assert_eq!(rec.presolver_evals, 100);
        assert_eq!(rec.selected.as_deref(), Some("a"));
        assert_eq!(rec.total_evals, 100 + 900);
        assert!(rec.success);
    }

    #[test]
    fn ledger_rejects_inconsistent_records() {
        let mut r = SystemRunRecord {
            instance: key("f", 1),
            presolver_evals: 100,
            presolver_success: false,
            sampling_evals: 100,
            selected: Some("a".into()),
            replay_evals: 900,
            total_evals: 1100,
            success: true,
        };
        assert!(r.ledger_holds());
        r.total_evals = 1000;
        assert!(!r.ledger_holds());
    }

    #[test]
    fn scoring_imputes_undefined_functions() {
        let members = vec!["a".to_string(), "b".to_string()];
        let mut records = Vec::new();
        for f in ["f1", "f2"] {
            for i in 1..=2 {
                records.push(RunRecord::new("a", key(f, i), 10, f == "f1", 100).unwrap());
                records.push(RunRecord::new("b", key(f, i), 20, true, 100).unwrap());
            }
        }
        let table = MeasureTable::build(&PerformanceArchive::from_records(records).unwrap(), &members).unwrap();
        // f1: best SP1 10 (a), b relSP1 2. f2: best 20 (b), a undefined. Worst defined relSP1 = 2.
        let sys = |f: &str, i, evals, success| SystemRunRecord {
            instance: key(f, i),
            presolver_evals: 0,
            presolver_success: false,
            sampling_evals: 5,
            selected: Some("a".into()),
            replay_evals: evals - 5,
            total_evals: evals,
            success,
        };
        let recs = vec![sys("f1", 1, 15, true), sys("f1", 2, 25, true), sys("f2", 1, 15, false), sys("f2", 2, 15, false)];
        let (functions, means) = score_records(&recs, &table, 7).unwrap();
        assert_eq!(functions[0].rel_sp1, 2.0);
        assert!(!functions[0].imputed);
        assert_eq!((functions[1].rel_sp1, functions[1].imputed), (20.0, true));
        assert_eq!(means, vec![RunMean { run_seed: 7, dimension: 2, mean_rel_sp1: 11.0 }]);
    }

    #[test]
    fn config_validation() {
        let mut c = SystemConfig::new("s", vec!["a".into(), "a".into()], SelectorChoice::Oracle);
        assert!(c.validate().is_err());
        c.members = vec!["a".into(), "b".into()];
        assert!(c.validate().is_ok());
        c.feature_source = FeatureSource::XUnionY;
        assert!(c.validate().is_err());
        c.presolver = Some(PresolverConfig::default());
        assert!(c.validate().is_ok());
        c.sample_size = Some(0);
        assert!(c.validate().is_err());
        let json = r#"{"name":"x","members":["a","b"],"selector":"clustering","presolver":{"budget":20}}"#;
        let c: SystemConfig = serde_json::from_str(json).unwrap();
        assert_eq!(c.selector, SelectorChoice::Trained(SelectorKind::Clustering));
        assert_eq!(c.presolver.unwrap().budget_for(2), 20);
        assert_eq!(c.sample_size_for(3), 150);
    }
}
