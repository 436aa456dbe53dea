//! Fold generation for the LOIO, LOPO, LOPOAD and RI cross-validation protocols.
//!
//! LOIO, LOPO and RI split each dimension separately; LOPOAD holds out one
//! (function, dimension) pair at a time and trains on every other dimension too.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::archive::{InstanceKey, ProblemKey};
use crate::seed::{derive_seed, rng};

/// Fold count of the RI protocol on suites with enough instances.
pub const DEFAULT_RI_FOLDS: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum CvError {
    #[error("empty suite")]
    EmptySuite,
    #[error("irregular suite in dimension {dimension}: {problem} has instances {found:?}, expected {expected:?}")]
    Irregular { dimension: usize, problem: ProblemKey, found: Vec<u32>, expected: Vec<u32> },
    #[error("{protocol} needs at least two {what}, found {found}")]
    TooSmall { protocol: Protocol, what: &'static str, found: usize },
    #[error("duplicate instance {0}")]
    Duplicate(InstanceKey),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Loio,
    Lopo,
    Lopoad,
    Ri,
}

impl Protocol {
    pub const ALL: [Protocol; 4] = [Protocol::Loio, Protocol::Lopo, Protocol::Lopoad, Protocol::Ri];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Loio => "loio",
            Protocol::Lopo => "lopo",
            Protocol::Lopoad => "lopoad",
            Protocol::Ri => "ri",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown protocol '{s}' (expected loio, lopo, lopoad or ri)"))
    }
}

/// One train/test split.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub protocol: Protocol,
    /// Index within the dimension (LOIO, LOPO, RI) or within the whole suite (LOPOAD).
    pub fold_index: usize,
    /// The dimension the fold is confined to; `None` for LOPOAD.
    pub dimension: Option<usize>,
    pub train: Vec<InstanceKey>,
    pub test: Vec<InstanceKey>,
}

/// Instances the training statistics of `fold` may be computed from.
pub fn training_measure_scope(fold: &FoldSpec) -> &[InstanceKey] {
    &fold.train
}

type Grouped = BTreeMap<usize, BTreeMap<ProblemKey, Vec<InstanceKey>>>;

/// Groups the suite by dimension and function, checking that every function of a
/// dimension has the same instance ids.
fn group(suite: &[InstanceKey]) -> Result<Grouped, CvError> {
    if suite.is_empty() {
        return Err(CvError::EmptySuite);
    }
    let mut seen = BTreeSet::new();
    let mut grouped: Grouped = BTreeMap::new();
    for key in suite {
        if !seen.insert(key.clone()) {
            return Err(CvError::Duplicate(key.clone()));
        }
        grouped
            .entry(key.dimension())
            .or_default()
            .entry(key.problem.clone())
            .or_default()
            .push(key.clone());
    }
    for (&dimension, problems) in &mut grouped {
        let mut expected: Option<Vec<u32>> = None;
        for (problem, keys) in problems.iter_mut() {
            keys.sort();
            let ids: Vec<u32> = keys.iter().map(|k| k.instance_id).collect();
            match &expected {
                None => expected = Some(ids),
                Some(e) if *e != ids => {
                    return Err(CvError::Irregular {
                        dimension,
                        problem: problem.clone(),
                        found: ids,
                        expected: e.clone(),
                    })
                }
                Some(_) => {}
            }
        }
    }
    Ok(grouped)
}

fn split(all: &[InstanceKey], test: &BTreeSet<&InstanceKey>) -> (Vec<InstanceKey>, Vec<InstanceKey>) {
    let (test_keys, train_keys): (Vec<&InstanceKey>, Vec<&InstanceKey>) = all.iter().partition(|k| test.contains(k));
    (train_keys.into_iter().cloned().collect(), test_keys.into_iter().cloned().collect())
}

/// RI fold count for a dimension with `instances` instances: `requested`, shrunk to
/// `instances / 2` (at least 2) when fewer than two instances per fold would remain.
pub fn ri_fold_count(instances: usize, requested: usize) -> usize {
    if instances >= 2 * requested {
        requested
    } else {
        (instances / 2).max(2).min(instances)
    }
}

/// Folds of `protocol` over `suite`. `ri_folds` overrides the RI fold count.
pub fn folds(
    protocol: Protocol,
    suite: &[InstanceKey],
    seed: u64,
    ri_folds: Option<usize>,
) -> Result<Vec<FoldSpec>, CvError> {
    let grouped = group(suite)?;
    let mut out = Vec::new();
    match protocol {
        Protocol::Lopoad => {
            let mut all: Vec<InstanceKey> = suite.to_vec();
            all.sort();
            let problems: Vec<&Vec<InstanceKey>> = grouped.values().flat_map(|p| p.values()).collect();
            if problems.len() < 2 {
                return Err(CvError::TooSmall { protocol, what: "problems", found: problems.len() });
            }
            for (fold_index, keys) in problems.into_iter().enumerate() {
                let (train, test) = split(&all, &keys.iter().collect());
                out.push(FoldSpec { protocol, fold_index, dimension: None, train, test });
            }
        }
        _ => {
            for (&dimension, problems) in &grouped {
                let all: Vec<InstanceKey> = problems.values().flatten().cloned().collect();
                let tests: Vec<BTreeSet<&InstanceKey>> = match protocol {
                    Protocol::Loio => {
                        let ids: Vec<u32> = problems.values().next().expect("non-empty").iter().map(|k| k.instance_id).collect();
                        if ids.len() < 2 {
                            return Err(CvError::TooSmall { protocol, what: "instances per function", found: ids.len() });
                        }
                        ids.iter().map(|&id| all.iter().filter(|k| k.instance_id == id).collect()).collect()
                    }
                    Protocol::Lopo => {
                        if problems.len() < 2 {
                            return Err(CvError::TooSmall { protocol, what: "functions", found: problems.len() });
                        }
                        problems.values().map(|keys| keys.iter().collect()).collect()
                    }
                    Protocol::Ri => {
                        if all.len() < 2 {
                            return Err(CvError::TooSmall { protocol, what: "instances", found: all.len() });
                        }
                        let k = ri_fold_count(all.len(), ri_folds.unwrap_or(DEFAULT_RI_FOLDS).max(2));
                        let mut order: Vec<&InstanceKey> = all.iter().collect();
                        order.shuffle(&mut rng(derive_seed(seed, &[dimension as u64])));
                        let mut sets = vec![BTreeSet::new(); k];
                        for (i, key) in order.into_iter().enumerate() {
                            sets[i % k].insert(key);
                        }
                        sets
                    }
                    Protocol::Lopoad => unreachable!(),
                };
                for (fold_index, test) in tests.iter().enumerate() {
                    let (train, test) = split(&all, test);
                    out.push(FoldSpec { protocol, fold_index, dimension: Some(dimension), train, test });
                }
            }
        }
    }
    Ok(out)
}
