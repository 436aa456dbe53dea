//! Landscape features computed from a sample `(X, f(X))`.
//!
//! Seven feature classes are available. Every class returns finite values for
//! any valid sample: degenerate inputs (constant objective values, duplicated
//! points, rank-deficient designs) are clamped to documented values, because
//! downstream selectors consume every feature without filtering.

mod basic;
mod disp;
mod distr;
mod ic;
mod meta;
mod nbc;
mod pca;

use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::archive::InstanceKey;
use crate::sampling::SampleSet;

pub use basic::f_basic;
pub use disp::{f_disp, f_disp_with, DEFAULT_DISP_QUANTILES};
pub use distr::{f_ela_distr, kde_peaks, silverman_bandwidth};
pub use ic::{f_ic, ic_epsilon_grid};
pub use meta::f_ela_meta;
pub use nbc::f_nbc;
pub use pca::f_pca;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("unknown feature class `{0}`")]
    UnknownClass(String),
    #[error("feature class {class} needs at least {needed} points, got {got}")]
    TooFewPoints { class: FeatureClass, needed: usize, got: usize },
}

/// Feature classes, in the order their features appear in a [`FeatureVector`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureClass {
    Basic,
    ElaDistr,
    ElaMeta,
    Nbc,
    Disp,
    Ic,
    Pca,
}

impl FeatureClass {
    pub const ALL: [FeatureClass; 7] = [
        FeatureClass::Basic,
        FeatureClass::ElaDistr,
        FeatureClass::ElaMeta,
        FeatureClass::Nbc,
        FeatureClass::Disp,
        FeatureClass::Ic,
        FeatureClass::Pca,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureClass::Basic => "basic",
            FeatureClass::ElaDistr => "ela_distr",
            FeatureClass::ElaMeta => "ela_meta",
            FeatureClass::Nbc => "nbc",
            FeatureClass::Disp => "disp",
            FeatureClass::Ic => "ic",
            FeatureClass::Pca => "pca",
        }
    }
}

impl fmt::Display for FeatureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureClass {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| FeatureError::UnknownClass(s.to_string()))
    }
}

/// Parses class names such as `["basic", "nbc"]`.
pub fn parse_classes<S: AsRef<str>>(names: &[S]) -> Result<Vec<FeatureClass>, FeatureError> {
    names.iter().map(|n| n.as_ref().parse()).collect()
}

/// Named feature values in a deterministic order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector {
    entries: IndexMap<String, f64>,
}

impl FeatureVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, value: f64) {
        self.entries.insert(name.into(), value);
    }

    pub fn extend(&mut self, other: FeatureVector) {
        self.entries.extend(other.entries);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.values().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn all_finite(&self) -> bool {
        self.entries.values().all(|v| v.is_finite())
    }
}

/// Feature JSON: `{ "instance": {...}, "seed": s, "features": {name: value} }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub instance: InstanceKey,
    pub seed: u64,
    pub features: FeatureVector,
}

/// Computes the requested classes and concatenates them in [`FeatureClass::ALL`] order.
pub fn compute_features(sample: &SampleSet, classes: &[FeatureClass]) -> Result<FeatureVector, FeatureError> {
    let mut out = FeatureVector::new();
    for class in FeatureClass::ALL {
        if !classes.contains(&class) {
            continue;
        }
        let part = match class {
            FeatureClass::Basic => f_basic(sample)?,
            FeatureClass::ElaDistr => f_ela_distr(sample)?,
            FeatureClass::ElaMeta => f_ela_meta(sample)?,
            FeatureClass::Nbc => f_nbc(sample)?,
            FeatureClass::Disp => f_disp(sample)?,
            FeatureClass::Ic => f_ic(sample)?,
            FeatureClass::Pca => f_pca(sample)?,
        };
        out.extend(part);
    }
    Ok(out)
}

pub(crate) fn require(class: FeatureClass, sample: &SampleSet, needed: usize) -> Result<(), FeatureError> {
    if sample.len() < needed {
        return Err(FeatureError::TooFewPoints { class, needed, got: sample.len() });
    }
    Ok(())
}

/// Cap for ratios whose denominator vanishes.
pub const RATIO_SENTINEL: f64 = 1e12;

/// `num / den`, capped at [`RATIO_SENTINEL`]; `0 / 0` is 1.
pub(crate) fn safe_ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        (num / den).min(RATIO_SENTINEL)
    } else if num == 0.0 {
        1.0
    } else {
        RATIO_SENTINEL
    }
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
pub(crate) fn sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

pub(crate) fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n.is_multiple_of(2) {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    } else {
        s[n / 2]
    }
}

/// Pearson correlation; 0 when either side has zero variance.
pub(crate) fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va <= 0.0 || vb <= 0.0 {
        return 0.0;
    }
    (cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{evaluate_sample, lhs_sample, Bounds};

    fn sphere_sample(s: usize, seed: u64) -> SampleSet {
        let b = Bounds::default_box(2);
        evaluate_sample(lhs_sample(s, &b, seed, 100).unwrap(), &b, |x| x.iter().map(|v| v * v).sum()).unwrap()
    }

    #[test]
    fn basic_only() {
        let fv = compute_features(&sphere_sample(20, 1), &[FeatureClass::Basic]).unwrap();
        assert!(fv.names().all(|n| n.starts_with("basic.")));
        assert_eq!(fv.len(), 8);
    }

    #[test]
    fn all_classes_on_sphere() {
        let sample = sphere_sample(100, 4);
        let fv = compute_features(&sample, &FeatureClass::ALL).unwrap();
        assert_eq!(fv.len(), 36);
        assert!(fv.all_finite());
        assert_eq!(fv, compute_features(&sample, &FeatureClass::ALL).unwrap());
    }

    #[test]
    fn class_order_is_fixed() {
        let sample = sphere_sample(40, 2);
        let a = compute_features(&sample, &[FeatureClass::Pca, FeatureClass::Basic]).unwrap();
        let b = compute_features(&sample, &[FeatureClass::Basic, FeatureClass::Pca]).unwrap();
        assert_eq!(a.names().collect::<Vec<_>>(), b.names().collect::<Vec<_>>());
        assert!(a.names().next().unwrap().starts_with("basic."));
    }

    #[test]
    fn unknown_class_name() {
        assert_eq!(
            parse_classes(&["basic", "ela_level"]),
            Err(FeatureError::UnknownClass("ela_level".into()))
        );
        assert_eq!(parse_classes(&["nbc", "disp"]).unwrap(), vec![FeatureClass::Nbc, FeatureClass::Disp]);
    }

    #[test]
    fn feature_json_keeps_order() {
        let fv = compute_features(&sphere_sample(20, 1), &[FeatureClass::Basic]).unwrap();
        let key = InstanceKey::new(crate::ProblemKey::new("sphere", 2).unwrap(), 1).unwrap();
        let rec = FeatureRecord { instance: key, seed: 3, features: fv };
        let json = serde_json::to_string(&rec).unwrap();
        assert!(json.find("basic.dim").unwrap() < json.find("basic.y_median").unwrap());
        let back: FeatureRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rec);
    }
}
