//! The five algorithm-selection methods over a pluggable model interface.
//!
//! Training targets are per-instance relative costs: the evaluations a member
//! needed on the instance, or ten times the largest evaluation count seen in
//! the dimension when it failed, divided by the smallest cost on the instance.

pub mod forest;
pub mod gmeans;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use forest::{rf_fit, ForestSpec, MaxFeatures, RandomForest, Task};
pub use gmeans::{ad_critical_value, anderson_darling_adjusted, gmeans_fit, Clustering, GMeansSpec};

use crate::archive::{ArchiveError, InstanceKey, PerformanceArchive};
use crate::features::FeatureVector;
use crate::seed::rng;
use crate::stats::midranks;

/// Version tag of the selector JSON format.
pub const SELECTOR_FORMAT_VERSION: u32 = 1;
/// Factor applied to the largest observed evaluation count to cost a failed run.
pub const FAILURE_PENALTY: f64 = 10.0;

#[derive(Debug, Error, PartialEq)]
pub enum SelectorError {
    #[error("empty training data")]
    EmptyTrainingData,
    #[error("{rows} rows but {targets} targets")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("rows have different lengths")]
    RaggedRows,
    #[error("class labels must be integers in 0..n_classes")]
    BadClassLabel,
    #[error("non-finite training value")]
    NonFinite,
    #[error("unsupported significance level {0} for the normality test")]
    UnsupportedAlpha(f64),
    #[error("at least two training rows are required, got {0}")]
    TooFewRows(usize),
    #[error("{kind} needs at least two portfolio members, got {k}")]
    TooFewMembers { kind: SelectorKind, k: usize },
    #[error("feature vector has {got} values, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("feature names differ from the training features at position {position}")]
    FeatureNames { position: usize },
    #[error("no features for training instance {0}")]
    MissingFeatures(InstanceKey),
    #[error("archive: {0}")]
    Archive(String),
    #[error("selector serialization: {0}")]
    Serialization(String),
    #[error("unsupported selector format version {0}")]
    UnsupportedVersion(u32),
    #[error("model does not support serialization")]
    NotSerializable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectorKind {
    Classification,
    Regression,
    PairwiseClassification,
    PairwiseRegression,
    Clustering,
}

impl SelectorKind {
    pub const ALL: [SelectorKind; 5] = [
        SelectorKind::Classification,
        SelectorKind::Regression,
        SelectorKind::PairwiseClassification,
        SelectorKind::PairwiseRegression,
        SelectorKind::Clustering,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SelectorKind::Classification => "classification",
            SelectorKind::Regression => "regression",
            SelectorKind::PairwiseClassification => "pairwise_classification",
            SelectorKind::PairwiseRegression => "pairwise_regression",
            SelectorKind::Clustering => "clustering",
        }
    }
}

impl fmt::Display for SelectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SelectorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SelectorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown selector kind '{s}'"))
    }
}

/// Hyperparameters of the built-in models.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub forest: ForestSpec,
    pub gmeans: GMeansSpec,
}

/// A fitted model: a class index (as `f64`) for classification tasks, a value otherwise.
pub trait Model: Send + Sync + fmt::Debug {
    fn predict(&self, row: &[f64]) -> f64;

    /// Serialized form, for models that can be restored from a selector file.
    fn to_blob(&self) -> Option<Vec<u8>> {
        None
    }
}

impl Model for RandomForest {
    fn predict(&self, row: &[f64]) -> f64 {
        RandomForest::predict(self, row)
    }

    fn to_blob(&self) -> Option<Vec<u8>> {
        serde_json::to_vec(self).ok()
    }
}

/// Fits models for the sub-problems of a selector.
pub trait Learner: Sync {
    fn fit(&self, task: Task, rows: &[Vec<f64>], targets: &[f64], seed: u64) -> Result<Arc<dyn Model>, SelectorError>;
}

/// The built-in random forest learner.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ForestLearner(pub ForestSpec);

impl Learner for ForestLearner {
    fn fit(&self, task: Task, rows: &[Vec<f64>], targets: &[f64], seed: u64) -> Result<Arc<dyn Model>, SelectorError> {
        Ok(Arc::new(rf_fit(rows, targets, task, &self.0, seed)?))
    }
}

/// Features, relative costs and best-member labels of the training instances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub members: Vec<String>,
    pub feature_names: Vec<String>,
    pub instances: Vec<InstanceKey>,
    pub rows: Vec<Vec<f64>>,
    /// `costs[i][m]`: relative cost of member `m` on instance `i` (minimum 1).
    pub costs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl TrainingSet {
    /// Validates the data and derives labels (lowest cost, ties to the lowest member index).
    pub fn new(
        members: Vec<String>,
        feature_names: Vec<String>,
        instances: Vec<InstanceKey>,
        rows: Vec<Vec<f64>>,
        costs: Vec<Vec<f64>>,
    ) -> Result<Self, SelectorError> {
        if rows.is_empty() {
            return Err(SelectorError::EmptyTrainingData);
        }
        if rows.len() != costs.len() || rows.len() != instances.len() {
            return Err(SelectorError::LengthMismatch { rows: rows.len(), targets: costs.len() });
        }
        let p = feature_names.len();
        if let Some(r) = rows.iter().find(|r| r.len() != p) {
            return Err(SelectorError::DimensionMismatch { expected: p, got: r.len() });
        }
        if costs.iter().any(|c| c.len() != members.len()) {
            return Err(SelectorError::RaggedRows);
        }
        if rows.iter().flatten().chain(costs.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(SelectorError::NonFinite);
        }
        let labels = costs.iter().map(|c| argmin(c)).collect();
        Ok(TrainingSet { members, feature_names, instances, rows, costs, labels })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }
}

/// Index of the smallest value, ties to the lowest index.
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Builds the training set of `members` over `train` only.
pub fn build_training_set(
    archive: &PerformanceArchive,
    members: &[String],
    train: &[InstanceKey],
    features: &BTreeMap<InstanceKey, FeatureVector>,
) -> Result<TrainingSet, SelectorError> {
    if train.is_empty() {
        return Err(SelectorError::EmptyTrainingData);
    }
    let mut max_evals: BTreeMap<usize, u64> = BTreeMap::new();
    let mut records = Vec::with_capacity(train.len());
    for inst in train {
        let row: Vec<(u64, bool)> = members
            .iter()
            .map(|m| archive.record(m, inst).map(|r| (r.evaluations, r.success)))
            .collect::<Result<_, _>>()?;
        let top = row.iter().map(|r| r.0).max().unwrap_or(0);
        let e = max_evals.entry(inst.dimension()).or_insert(0);
        *e = (*e).max(top);
        records.push(row);
    }

    let first = features.get(&train[0]).ok_or_else(|| SelectorError::MissingFeatures(train[0].clone()))?;
    let feature_names: Vec<String> = first.names().map(str::to_owned).collect();
    let mut rows = Vec::with_capacity(train.len());
    let mut costs = Vec::with_capacity(train.len());
    for (inst, row) in train.iter().zip(&records) {
        let fv = features.get(inst).ok_or_else(|| SelectorError::MissingFeatures(inst.clone()))?;
        check_names(&feature_names, fv)?;
        rows.push(fv.values());
        let penalty = FAILURE_PENALTY * max_evals[&inst.dimension()] as f64;
        let raw: Vec<f64> = row.iter().map(|&(e, s)| if s { e as f64 } else { penalty }).collect();
        let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
        costs.push(raw.iter().map(|c| c / min).collect());
    }
    TrainingSet::new(members.to_vec(), feature_names, train.to_vec(), rows, costs)
}

fn check_names(expected: &[String], fv: &FeatureVector) -> Result<(), SelectorError> {
    if fv.len() != expected.len() {
        return Err(SelectorError::DimensionMismatch { expected: expected.len(), got: fv.len() });
    }
    match fv.names().zip(expected).position(|(a, b)| a != b) {
        Some(position) => Err(SelectorError::FeatureNames { position }),
        None => Ok(()),
    }
}

/// Min-max scaling to `[-1, 1]` fitted on training rows, clusters, and the best member per cluster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
    pub centroids: Vec<Vec<f64>>,
    pub best: Vec<usize>,
}

impl ClusterModel {
    /// Maps training minima to −1 and maxima to +1, clamping values outside that range.
    /// Constant features map to 0.
    pub fn normalize(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mins.iter().zip(&self.maxs))
            .map(|(&v, (&lo, &hi))| {
                if hi > lo {
                    (2.0 * (v - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn cluster_of(&self, row: &[f64]) -> usize {
        let z = self.normalize(row);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.centroids.iter().enumerate() {
            let d: f64 = c.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

/// A trained selector; immutable and shareable across threads.
#[derive(Clone, Debug)]
pub struct Selector {
    kind: SelectorKind,
    members: Vec<String>,
    feature_names: Vec<String>,
    models: Vec<Arc<dyn Model>>,
    clusters: Option<ClusterModel>,
}

impl From<ArchiveError> for SelectorError {
    fn from(e: ArchiveError) -> Self {
        SelectorError::Archive(e.to_string())
    }
}

fn pairs(k: usize) -> Vec<(usize, usize)> {
    (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).collect()
}

/// Trains a selector with the built-in random forest and g-means.
pub fn train(kind: SelectorKind, ts: &TrainingSet, spec: &ModelSpec, seed: u64) -> Result<Selector, SelectorError> {
    train_with(kind, ts, &ForestLearner(spec.forest), &spec.gmeans, seed)
}

/// Trains a selector with a custom learner. Sub-model `i` is fitted with seed `seed + i`.
pub fn train_with(
    kind: SelectorKind,
    ts: &TrainingSet,
    learner: &dyn Learner,
    gmeans: &GMeansSpec,
    seed: u64,
) -> Result<Selector, SelectorError> {
    if ts.len() < 2 {
        return Err(SelectorError::TooFewRows(ts.len()));
    }
    let k = ts.k();
    if k < 2 {
        return Err(SelectorError::TooFewMembers { kind, k });
    }
    let log_cost = |i: usize, m: usize| ts.costs[i][m].log10();
    // (task, targets) per sub-model.
    let jobs: Vec<(Task, Vec<f64>)> = match kind {
        SelectorKind::Classification => {
            vec![(Task::Classification { n_classes: k }, ts.labels.iter().map(|&l| l as f64).collect())]
        }
        SelectorKind::Regression => {
            (0..k).map(|m| (Task::Regression, (0..ts.len()).map(|i| log_cost(i, m)).collect())).collect()
        }
        SelectorKind::PairwiseClassification => pairs(k)
            .into_iter()
            .map(|(a, b)| {
                let y = (0..ts.len()).map(|i| f64::from(u8::from(ts.costs[i][b] < ts.costs[i][a]))).collect();
                (Task::Classification { n_classes: 2 }, y)
            })
            .collect(),
        SelectorKind::PairwiseRegression => pairs(k)
            .into_iter()
            .map(|(a, b)| (Task::Regression, (0..ts.len()).map(|i| log_cost(i, a) - log_cost(i, b)).collect()))
            .collect(),
        SelectorKind::Clustering => Vec::new(),
    };
    let models = jobs
        .par_iter()
        .enumerate()
        .map(|(i, (task, y))| learner.fit(*task, &ts.rows, y, seed.wrapping_add(i as u64)))
        .collect::<Result<Vec<_>, _>>()?;

    let clusters = if kind == SelectorKind::Clustering { Some(fit_clusters(ts, gmeans, seed)?) } else { None };
    Ok(Selector {
        kind,
        members: ts.members.clone(),
        feature_names: ts.feature_names.clone(),
        models,
        clusters,
    })
}

fn fit_clusters(ts: &TrainingSet, spec: &GMeansSpec, seed: u64) -> Result<ClusterModel, SelectorError> {
    let p = ts.feature_names.len();
    let mins: Vec<f64> = (0..p).map(|j| ts.rows.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min)).collect();
    let maxs: Vec<f64> = (0..p).map(|j| ts.rows.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let mut model = ClusterModel { mins, maxs, centroids: Vec::new(), best: Vec::new() };
    let normalized: Vec<Vec<f64>> = ts.rows.iter().map(|r| model.normalize(r)).collect();
    let clustering = gmeans_fit(&normalized, spec, seed)?;

    let k = ts.k();
    let mut rank_sums = vec![vec![0.0; k]; clustering.k()];
    for (i, &c) in clustering.assignment.iter().enumerate() {
        for (m, r) in midranks(&ts.costs[i]).into_iter().enumerate() {
            rank_sums[c][m] += r;
        }
    }
    model.best = rank_sums.iter().map(|s| argmin(s)).collect();
    model.centroids = clustering.centroids;
    Ok(model)
}

impl Selector {
    pub fn kind(&self) -> SelectorKind {
        self.kind
    }

    pub fn members(&self) -> &[String] {
        &self.members
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Number of fitted sub-models.
    pub fn model_count(&self) -> usize {
        self.models.len()
    }

    pub fn clusters(&self) -> Option<&ClusterModel> {
        self.clusters.as_ref()
    }

    /// Selects a member index for a feature vector with the training feature names.
    pub fn select(&self, features: &FeatureVector, tie_seed: u64) -> Result<usize, SelectorError> {
        check_names(&self.feature_names, features)?;
        self.select_row(&features.values(), tie_seed)
    }

    /// Selects a member index for a raw feature row.
    pub fn select_row(&self, row: &[f64], tie_seed: u64) -> Result<usize, SelectorError> {
        if row.len() != self.feature_names.len() {
            return Err(SelectorError::DimensionMismatch { expected: self.feature_names.len(), got: row.len() });
        }
        let k = self.members.len();
        let choice = match self.kind {
            SelectorKind::Classification => (self.models[0].predict(row) as usize).min(k - 1),
            SelectorKind::Regression => {
                let predicted: Vec<f64> = self.models.iter().map(|m| m.predict(row)).collect();
                argmin(&predicted)
            }
            SelectorKind::PairwiseClassification => {
                let mut votes = vec![0usize; k];
                for (model, (a, b)) in self.models.iter().zip(pairs(k)) {
                    votes[if model.predict(row) >= 0.5 { b } else { a }] += 1;
                }
                let top = votes.iter().copied().max().unwrap_or(0);
                let tied: Vec<usize> = (0..k).filter(|&m| votes[m] == top).collect();
                if tied.len() == 1 {
                    tied[0]
                } else {
                    tied[rng(tie_seed).random_range(0..tied.len())]
                }
            }
            SelectorKind::PairwiseRegression => {
                let mut score = vec![0.0; k];
                for (model, (a, b)) in self.models.iter().zip(pairs(k)) {
                    let d = model.predict(row);
                    score[a] += d;
                    score[b] -= d;
                }
                argmin(&score)
            }
            SelectorKind::Clustering => {
                let c = self.clusters.as_ref().expect("clustering selector has clusters");
                c.best[c.cluster_of(row)]
            }
        };
        Ok(choice)
    }

    /// Versioned JSON with base64-encoded model blobs.
    pub fn to_json(&self) -> Result<String, SelectorError> {
        let models = self
            .models
            .iter()
            .map(|m| m.to_blob().map(|b| BASE64.encode(b)).ok_or(SelectorError::NotSerializable))
            .collect::<Result<Vec<_>, _>>()?;
        let file = SelectorFile {
            version: SELECTOR_FORMAT_VERSION,
            kind: self.kind,
            members: self.members.clone(),
            feature_names: self.feature_names.clone(),
            models,
            clusters: self.clusters.clone(),
        };
        serde_json::to_string_pretty(&file).map_err(|e| SelectorError::Serialization(e.to_string()))
    }

    /// Restores a selector written by [`Selector::to_json`] with random forest models.
    pub fn from_json(json: &str) -> Result<Selector, SelectorError> {
        let file: SelectorFile = serde_json::from_str(json).map_err(|e| SelectorError::Serialization(e.to_string()))?;
        if file.version != SELECTOR_FORMAT_VERSION {
            return Err(SelectorError::UnsupportedVersion(file.version));
        }
        let models = file
            .models
            .iter()
            .map(|b| {
                let bytes = BASE64.decode(b).map_err(|e| SelectorError::Serialization(e.to_string()))?;
                let rf: RandomForest =
                    serde_json::from_slice(&bytes).map_err(|e| SelectorError::Serialization(e.to_string()))?;
                Ok(Arc::new(rf) as Arc<dyn Model>)
            })
            .collect::<Result<Vec<_>, SelectorError>>()?;
        Ok(Selector {
            kind: file.kind,
            members: file.members,
            feature_names: file.feature_names,
            models,
            clusters: file.clusters,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct SelectorFile {
    version: u32,
    kind: SelectorKind,
    members: Vec<String>,
    feature_names: Vec<String>,
    models: Vec<String>,
    clusters: Option<ClusterModel>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archive::{ProblemKey, RunRecord};

    fn key(f: &str, i: u32) -> InstanceKey {
        InstanceKey::new(ProblemKey::new(f, 2).unwrap(), i).unwrap()
    }

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("x{j}")).collect()
    }

    #[derive(Debug)]
    struct Constant(f64);

    impl Model for Constant {
        fn predict(&self, _: &[f64]) -> f64 {
            self.0
        }
    }

    /// Fits a constant per sub-model, taken from a fixed list in fitting order.
    struct Fixed(Vec<f64>);

    impl Learner for Fixed {
        fn fit(&self, _: Task, _: &[Vec<f64>], _: &[f64], seed: u64) -> Result<Arc<dyn Model>, SelectorError> {
            Ok(Arc::new(Constant(self.0[(seed - 100) as usize])))
        }
    }

    fn tiny_set(k: usize) -> TrainingSet {
        let rows = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.5, 0.5]];
        let costs = vec![vec![1.0; k]; 3];
        TrainingSet::new(
            (0..k).map(|m| format!("m{m}")).collect(),
            names(2),
            vec![key("f", 1), key("f", 2), key("f", 3)],
            rows,
            costs,
        )
        .unwrap()
    }

    #[test]
    fn costs_and_labels_from_archive() {
        let members = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let outcomes = [
            // (instance, [(evals, success); 3])
            (1, [(100, true), (200, true), (50, false)]),
            (2, [(300, false), (120, true), (80, true)]),
            (3, [(40, true), (40, true), (500, false)]),
            (4, [(10, false), (20, false), (30, false)]),
        ];
        let mut records = Vec::new();
        for (i, row) in outcomes {
            for (m, (e, s)) in members.iter().zip(row) {
                records.push(RunRecord::new(m.as_str(), key("f", i), e, s, 1000).unwrap());
            }
        }
        let archive = PerformanceArchive::from_records(records).unwrap();
        let train: Vec<InstanceKey> = (1..=4).map(|i| key("f", i)).collect();
        let features: BTreeMap<InstanceKey, FeatureVector> = train
            .iter()
            .map(|k| {
                let mut fv = FeatureVector::new();
                fv.push("x0", f64::from(k.instance_id));
                (k.clone(), fv)
            })
            .collect();
        let ts = build_training_set(&archive, &members, &train, &features).unwrap();
        // Largest evaluation count among the training records is 500, so failures cost 5000.
        assert_eq!(ts.costs[0], vec![1.0, 2.0, 50.0]);
        assert_eq!(ts.costs[1], vec![5000.0 / 80.0, 1.5, 1.0]);
        assert_eq!(ts.costs[2], vec![1.0, 1.0, 125.0]);
        assert_eq!(ts.costs[3], vec![1.0, 1.0, 1.0]);
        assert_eq!(ts.labels, vec![0, 2, 0, 0]);

        // Dropping instance 3 lowers the failure cost to 10 x 300.
        let ts = build_training_set(&archive, &members, &train[..2], &features).unwrap();
        assert_eq!(ts.costs[0], vec![1.0, 2.0, 30.0]);
    }

    #[test]
    fn missing_features_and_coverage() {
        let archive = PerformanceArchive::from_records(vec![RunRecord::new("a", key("f", 1), 5, true, 10).unwrap()])
            .unwrap();
        let members = vec!["a".to_string()];
        assert!(matches!(
            build_training_set(&archive, &members, &[key("f", 1)], &BTreeMap::new()),
            Err(SelectorError::MissingFeatures(_))
        ));
        let members = vec!["a".to_string(), "b".to_string()];
        assert!(matches!(
            build_training_set(&archive, &members, &[key("f", 1)], &BTreeMap::new()),
            Err(SelectorError::Archive(_))
        ));
    }

    #[test]
    fn regression_picks_lowest_prediction() {
        let s = train_with(SelectorKind::Regression, &tiny_set(3), &Fixed(vec![2.0, 1.0, 3.0]), &GMeansSpec::default(), 100)
            .unwrap();
        assert_eq!(s.model_count(), 3);
        assert_eq!(s.select_row(&[0.0, 0.0], 0).unwrap(), 1);
        // log10 is strictly monotone; the choice of argmin is unchanged by it.
        let s2 = train_with(
            SelectorKind::Regression,
            &tiny_set(3),
            &Fixed(vec![2f64.log10(), 1f64.log10(), 3f64.log10()]),
            &GMeansSpec::default(),
            100,
        )
        .unwrap();
        assert_eq!(s2.select_row(&[0.0, 0.0], 0).unwrap(), 1);
    }

    #[test]
    fn pairwise_vote_ties_are_seeded() {
        // Pairs (0,1), (0,2), (1,2): 0 beats 1, 2 beats 0, 1 beats 2 -> votes (1, 1, 1).
        let s = train_with(
            SelectorKind::PairwiseClassification,
            &tiny_set(3),
            &Fixed(vec![0.0, 1.0, 0.0]),
            &GMeansSpec::default(),
            100,
        )
        .unwrap();
        assert_eq!(s.model_count(), 3);
        let picks: Vec<usize> = (0..50).map(|t| s.select_row(&[0.0, 0.0], t).unwrap()).collect();
        assert!(picks.iter().all(|&p| p < 3));
        assert_eq!(picks, (0..50).map(|t| s.select_row(&[0.0, 0.0], t).unwrap()).collect::<Vec<_>>());
        assert!((0..3).all(|m| picks.contains(&m)));

        // Votes (2, 2, 0) for 4 members... tally among {0, 1} only.
        let s = train_with(
            SelectorKind::PairwiseClassification,
            &tiny_set(4),
            // (0,1) (0,2) (0,3) (1,2) (1,3) (2,3): 0 wins vs 2,3; 1 wins vs 0,2,3; 2 wins vs 3.
            &Fixed(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            &GMeansSpec::default(),
            100,
        )
        .unwrap();
        assert_eq!(s.select_row(&[0.0, 0.0], 9).unwrap(), 1);
    }

    #[test]
    fn pairwise_regression_sums_signed_differences() {
        // d(0,1) = 1 (0 worse), d(0,2) = -1 (0 better), d(1,2) = -3 (1 much better).
        // scores: 0 -> 0, 1 -> -1 - 3 = -4, 2 -> 1 + 3 = 4.
        let s = train_with(
            SelectorKind::PairwiseRegression,
            &tiny_set(3),
            &Fixed(vec![1.0, -1.0, -3.0]),
            &GMeansSpec::default(),
            100,
        )
        .unwrap();
        assert_eq!(s.select_row(&[0.3, 0.3], 0).unwrap(), 1);
    }

    #[test]
    fn two_member_pairwise_matches_classification() {
        let mut r = rng(5);
        let rows: Vec<Vec<f64>> = (0..40).map(|_| vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]).collect();
        let costs: Vec<Vec<f64>> =
            rows.iter().map(|p| if p[0] * p[1] > 0.0 { vec![1.0, 3.0] } else { vec![2.0, 1.0] }).collect();
        let ts = TrainingSet::new(
            vec!["a".into(), "b".into()],
            names(2),
            (1..=40).map(|i| key("f", i)).collect(),
            rows,
            costs,
        )
        .unwrap();
        let spec = ModelSpec::default();
        let c = train(SelectorKind::Classification, &ts, &spec, 3).unwrap();
        let p = train(SelectorKind::PairwiseClassification, &ts, &spec, 3).unwrap();
        assert_eq!(p.model_count(), 1);
        for i in 0..200 {
            let x = [(i as f64 * 0.37).sin(), (i as f64 * 0.91).cos()];
            assert_eq!(c.select_row(&x, i).unwrap(), p.select_row(&x, i).unwrap());
        }
    }

    #[test]
    fn clustering_maps_blobs_to_their_best_member() {
        let mut r = rng(2);
        let mut rows = Vec::new();
        let mut costs = Vec::new();
        for (center, cost) in [(0.0, vec![1.0, 4.0]), (10.0, vec![3.0, 1.0])] {
            for _ in 0..40 {
                rows.push(vec![center + r.random_range(-0.1..0.1), center + r.random_range(-0.1..0.1)]);
                costs.push(cost.clone());
            }
        }
        let ts = TrainingSet::new(
            vec!["m1".into(), "m2".into()],
            names(2),
            (1..=80).map(|i| key("f", i)).collect(),
            rows,
            costs,
        )
        .unwrap();
        let s = train(SelectorKind::Clustering, &ts, &ModelSpec::default(), 1).unwrap();
        let c = s.clusters().unwrap();
        assert_eq!(c.centroids.len(), 2);
        assert_eq!(s.select_row(&[0.0, 0.0], 0).unwrap(), 0);
        assert_eq!(s.select_row(&[10.0, 10.0], 0).unwrap(), 1);
        // Out-of-range inputs clamp to the training box.
        assert_eq!(c.normalize(&[-50.0, 50.0]), vec![-1.0, 1.0]);
        let lo = c.normalize(&c.mins.clone());
        let hi = c.normalize(&c.maxs.clone());
        assert_eq!((lo, hi), (vec![-1.0, -1.0], vec![1.0, 1.0]));
    }

    #[test]
    fn json_round_trip_preserves_choices() {
        let mut r = rng(9);
        let rows: Vec<Vec<f64>> = (0..30).map(|_| vec![r.random_range(0.0..1.0), r.random_range(0.0..1.0)]).collect();
        let costs: Vec<Vec<f64>> = rows.iter().map(|p| vec![1.0 + p[0], 1.0 + p[1], 1.5]).collect();
        let ts = TrainingSet::new(
            vec!["a".into(), "b".into(), "c".into()],
            names(2),
            (1..=30).map(|i| key("f", i)).collect(),
            rows.clone(),
            costs,
        )
        .unwrap();
        let spec = ModelSpec { forest: ForestSpec { trees: 10, ..ForestSpec::default() }, ..ModelSpec::default() };
        for kind in SelectorKind::ALL {
            let s = train(kind, &ts, &spec, 4).unwrap();
            let back = Selector::from_json(&s.to_json().unwrap()).unwrap();
            for (t, row) in rows.iter().enumerate() {
                assert_eq!(s.select_row(row, t as u64).unwrap(), back.select_row(row, t as u64).unwrap(), "{kind}");
            }
        }
        let bad = s_json_with_version(99);
        assert_eq!(Selector::from_json(&bad).unwrap_err(), SelectorError::UnsupportedVersion(99));
    }

    fn s_json_with_version(v: u32) -> String {
        format!(r#"{{"version":{v},"kind":"regression","members":[],"feature_names":[],"models":[],"clusters":null}}"#)
    }

    #[test]
    fn preconditions() {
        let one = TrainingSet::new(vec!["a".into(), "b".into()], names(1), vec![key("f", 1)], vec![vec![0.0]], vec![vec![
            1.0, 2.0,
        ]])
        .unwrap();
        assert_eq!(
            train(SelectorKind::Regression, &one, &ModelSpec::default(), 0).unwrap_err(),
            SelectorError::TooFewRows(1)
        );
        let s = train(SelectorKind::Classification, &tiny_set(2), &ModelSpec::default(), 0).unwrap();
        assert_eq!(
            s.select_row(&[1.0], 0).unwrap_err(),
            SelectorError::DimensionMismatch { expected: 2, got: 1 }
        );
        let mut fv = FeatureVector::new();
        fv.push("x0", 0.0);
        fv.push("y", 0.0);
        assert_eq!(s.select(&fv, 0).unwrap_err(), SelectorError::FeatureNames { position: 1 });
    }
}
