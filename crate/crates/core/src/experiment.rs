//! Experiment configuration and the reports written by the command-line tool.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::archive::{ArchiveError, PerformanceArchive};
use crate::cv::Protocol;
use crate::measures::{mean_relsp1, sbs, MeasureError, MeasureTable};
use crate::pipeline::{evaluate_system, n_sbs, PipelineError, SystemConfig, SystemEvaluation};
use crate::seed::derive_seed;
use crate::stats::{performance_score, StatsError, DEFAULT_ALPHA};
use crate::testbed::{default_optimizers, generate_archive, SuiteSpec, DEFAULT_EPSILON};

/// Independent runs per system when none is configured.
pub const DEFAULT_RUNS: usize = 31;

#[derive(Debug, Error)]
pub enum ExperimentError {
    /// Invalid configuration; the message names the offending field.
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Archive(#[from] ArchiveError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl ExperimentError {
    /// Whether the error stems from the configuration rather than the data.
    pub fn is_config(&self) -> bool {
        matches!(self, ExperimentError::Config(_)) || matches!(self, ExperimentError::Pipeline(PipelineError::Config(_)))
    }
}

/// Archive generated from the suite with the toy optimizers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestbedArchive {
    /// Evaluation budget per optimizer run.
    pub budget: u64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_runs() -> usize {
    DEFAULT_RUNS
}

fn default_protocols() -> Vec<Protocol> {
    vec![Protocol::Lopo]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Archive CSV; when absent, `testbed_archive` must be given.
    #[serde(default)]
    pub archive: Option<PathBuf>,
    #[serde(default)]
    pub testbed_archive: Option<TestbedArchive>,
    /// Functions providing the objectives to sample and pre-solve.
    pub suite: SuiteSpec,
    #[serde(default = "default_protocols")]
    pub protocols: Vec<Protocol>,
    pub systems: Vec<SystemConfig>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub ri_folds: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let err = |m: String| Err(ExperimentError::Config(m));
        match (&self.archive, &self.testbed_archive) {
            (None, None) => return err("archive: either archive or testbed_archive is required".into()),
            (Some(_), Some(_)) => return err("archive: archive and testbed_archive are exclusive".into()),
            (Some(p), None) if !p.exists() => return err(format!("archive: {} does not exist", p.display())),
            _ => {}
        }
        if self.testbed_archive.as_ref().is_some_and(|t| t.budget == 0) {
            return err("testbed_archive.budget: must be at least 1".into());
        }
        if self.suite.dimensions.is_empty() || self.suite.families.is_empty() || self.suite.instances == 0 {
            return err("suite: needs at least one family, dimension and instance".into());
        }
        if self.suite.dimensions.contains(&0) {
            return err("suite.dimensions: must be positive".into());
        }
        if self.protocols.is_empty() {
            return err("protocols: empty".into());
        }
        if self.systems.is_empty() {
            return err("systems: empty".into());
        }
        if self.runs == 0 {
            return err("runs: must be at least 1".into());
        }
        let mut names: Vec<&str> = self.systems.iter().map(|s| s.name.as_str()).collect();
        names.sort();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return err(format!("systems: duplicate name '{}'", w[0]));
        }
        for (i, s) in self.systems.iter().enumerate() {
            s.validate().map_err(|e| ExperimentError::Config(format!("systems[{i}]: {e}")))?;
        }
        Ok(())
    }

    pub fn run_seeds(&self) -> Vec<u64> {
        (0..self.runs as u64).map(|r| derive_seed(self.seed, &[r])).collect()
    }

    pub fn load_archive(&self) -> Result<PerformanceArchive, ExperimentError> {
        match (&self.archive, &self.testbed_archive) {
            (Some(path), _) => Ok(PerformanceArchive::ingest_csv(path)?),
            (None, Some(t)) => {
                Ok(generate_archive(&self.suite.build(), &default_optimizers(t.budget), t.epsilon, t.seed)?)
            }
            (None, None) => Err(ExperimentError::Config("archive: missing".into())),
        }
    }
}

/// CSV reports of one protocol.
#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolReport {
    pub protocol: Protocol,
    pub evaluations: Vec<SystemEvaluation>,
    /// `system,run_seed,dimension,function,relSP1,imputed`
    pub results_csv: String,
    /// `system,run_seed,dimension,mean_relSP1`
    pub summary_csv: String,
    /// `system,dimension,P`
    pub scores_csv: String,
    /// `system,dimension,sbs,sbs_mean_relSP1,N_SBS`
    pub nsbs_csv: String,
}

impl ProtocolReport {
    pub fn write(&self, dir: &Path) -> Result<(), ExperimentError> {
        let dir = dir.join(self.protocol.name());
        fs::create_dir_all(&dir).map_err(|source| ExperimentError::Io { path: dir.clone(), source })?;
        for (name, body) in [
            ("results.csv", &self.results_csv),
            ("summary.csv", &self.summary_csv),
            ("scores.csv", &self.scores_csv),
            ("nsbs.csv", &self.nsbs_csv),
        ] {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|source| ExperimentError::Io { path, source })?;
        }
        Ok(())
    }
}

/// Evaluates every system under every protocol and assembles the reports.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ProtocolReport>, ExperimentError> {
    config.validate()?;
    let archive = config.load_archive()?;
    let suite = config.suite.build();
    let seeds = config.run_seeds();
    config
        .protocols
        .iter()
        .map(|&protocol| {
            let evaluations = config
                .systems
                .iter()
                .map(|s| evaluate_system(s, &archive, &suite, protocol, &seeds, config.ri_folds))
                .collect::<Result<Vec<_>, _>>()?;
            build_report(protocol, &archive, &config.systems, evaluations)
        })
        .collect()
}

fn build_report(
    protocol: Protocol,
    archive: &PerformanceArchive,
    systems: &[SystemConfig],
    evaluations: Vec<SystemEvaluation>,
) -> Result<ProtocolReport, ExperimentError> {
    let mut results = String::from("system,run_seed,dimension,function,relSP1,imputed\n");
    let mut summary = String::from("system,run_seed,dimension,mean_relSP1\n");
    for e in &evaluations {
        for f in &e.functions {
            results.push_str(&format!(
                "{},{},{},{},{},{}\n",
                e.system,
                f.run_seed,
                f.problem.dimension,
                f.problem.function_id,
                f.rel_sp1,
                u8::from(f.imputed)
            ));
        }
        for m in &e.means {
            summary.push_str(&format!("{},{},{},{}\n", e.system, m.run_seed, m.dimension, m.mean_rel_sp1));
        }
    }

    let dimensions: Vec<usize> = {
        let mut d: Vec<usize> = evaluations.iter().flat_map(|e| e.means.iter().map(|m| m.dimension)).collect();
        d.sort();
        d.dedup();
        d
    };

    let mut scores = String::from("system,dimension,P\n");
    if evaluations.len() >= 2 {
        for &d in &dimensions {
            let names: Vec<String> = evaluations.iter().map(|e| e.system.clone()).collect();
            let samples: Vec<Vec<f64>> = evaluations.iter().map(|e| e.means_of(d)).collect();
            let m = performance_score(&names, &samples, DEFAULT_ALPHA)?;
            for (name, p) in m.systems.iter().zip(&m.scores) {
                scores.push_str(&format!("{name},{d},{p}\n"));
            }
        }
    } else {
        for e in &evaluations {
            for &d in &dimensions {
                scores.push_str(&format!("{},{d},0\n", e.system));
            }
        }
    }

    let mut nsbs = String::from("system,dimension,sbs,sbs_mean_relSP1,N_SBS\n");
    let mut tables: BTreeMap<Vec<String>, MeasureTable> = BTreeMap::new();
    for (config, e) in systems.iter().zip(&evaluations) {
        let mut members = config.members.clone();
        members.sort();
        if !tables.contains_key(&members) {
            let t = MeasureTable::build(archive, &members)?.impute_all()?;
            tables.insert(members.clone(), t);
        }
        let table = &tables[&members];
        for &d in &dimensions {
            let best = sbs(table, &members, d)?;
            let best_mean = mean_relsp1(table, &best, d)?;
            let count = n_sbs(&e.means_of(d), best_mean)?;
            nsbs.push_str(&format!("{},{d},{best},{best_mean},{count}\n", e.system));
        }
    }

    Ok(ProtocolReport { protocol, evaluations, results_csv: results, summary_csv: summary, scores_csv: scores, nsbs_csv: nsbs })
}
