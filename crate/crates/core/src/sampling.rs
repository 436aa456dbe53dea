//! Seeded Latin hypercube sampling with maximin refinement.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sample size per dimension used when none is configured (`s = 50 n`).
pub const DEFAULT_SAMPLE_FACTOR: usize = 50;
/// Candidate swaps tried by the maximin refinement.
pub const DEFAULT_REFINE_ITERS: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum SamplingError {
    #[error("sample size must be at least 1")]
    EmptySample,
    #[error("invalid bounds on coordinate {coordinate}: [{low}, {high}]")]
    InvalidBounds { coordinate: usize, low: f64, high: f64 },
    #[error("bounds have dimension {bounds}, expected {expected}")]
    DimensionMismatch { bounds: usize, expected: usize },
    #[error("objective returned a non-finite value at point {index}")]
    NonFinite { index: usize },
}

/// Black-box objective. Implementations must be deterministic.
pub trait Objective: Sync {
    fn dimension(&self) -> usize;
    fn evaluate(&self, x: &[f64]) -> f64;
    /// Optimal value, when known; pre-solvers need it to decide success.
    fn optimum_value(&self) -> Option<f64> {
        None
    }
}

/// Axis-aligned box `[lower_i, upper_i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, SamplingError> {
        if lower.len() != upper.len() {
            return Err(SamplingError::DimensionMismatch { bounds: upper.len(), expected: lower.len() });
        }
        for (i, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(SamplingError::InvalidBounds { coordinate: i, low: lo, high: hi });
            }
        }
        Ok(Bounds { lower, upper })
    }

    pub fn uniform(dimension: usize, low: f64, high: f64) -> Result<Self, SamplingError> {
        Self::new(vec![low; dimension], vec![high; dimension])
    }

    /// The `[-5, 5]^n` box.
    pub fn default_box(dimension: usize) -> Self {
        Self::uniform(dimension, -5.0, 5.0).expect("valid box")
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dimension()
            && x.iter().enumerate().all(|(i, &v)| v >= self.lower[i] && v <= self.upper[i])
    }

    pub fn clip(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }
}

/// Sample points with their objective values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub bounds: Bounds,
}

impl SampleSet {
    pub fn new(points: Vec<Vec<f64>>, values: Vec<f64>, bounds: Bounds) -> Result<Self, SamplingError> {
        if points.is_empty() {
            return Err(SamplingError::EmptySample);
        }
        for p in &points {
            if p.len() != bounds.dimension() {
                return Err(SamplingError::DimensionMismatch { bounds: bounds.dimension(), expected: p.len() });
            }
        }
        assert_eq!(points.len(), values.len(), "one value per point");
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(SamplingError::NonFinite { index });
        }
        Ok(SampleSet { points, values, bounds })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.bounds.dimension()
    }

    /// Appends more evaluated points, e.g. a pre-solver trajectory.
    pub fn extended(&self, points: &[Vec<f64>], values: &[f64]) -> Result<SampleSet, SamplingError> {
        let mut p = self.points.clone();
        let mut v = self.values.clone();
        p.extend_from_slice(points);
        v.extend_from_slice(values);
        SampleSet::new(p, v, self.bounds.clone())
    }
}

/// Sample export: `{ "bounds", "seed", "points", "values" }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleExport {
    pub bounds: Bounds,
    pub seed: u64,
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl SampleExport {
    pub fn new(sample: &SampleSet, seed: u64) -> Self {
        SampleExport {
            bounds: sample.bounds.clone(),
            seed,
            points: sample.points.clone(),
            values: sample.values.clone(),
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Smallest pairwise Euclidean distance (infinite for fewer than two points).
pub fn min_pairwise_distance(points: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            best = best.min(sq_dist(&points[i], &points[j]));
        }
    }
    best.sqrt()
}

/// Improved Latin hypercube sample of `s` points in `bounds`.
///
/// Each coordinate places exactly one point in each of `s` equal-width strata, at
/// a uniform position inside its stratum. `refine_iters` random swaps of one
/// coordinate between two points are then tried, keeping a swap only if it
/// increases the minimum pairwise distance. Swaps exchange whole coordinate
/// values, so stratification is preserved.
pub fn lhs_sample(
    s: usize,
    bounds: &Bounds,
    seed: u64,
    refine_iters: usize,
) -> Result<Vec<Vec<f64>>, SamplingError> {
    if s == 0 {
        return Err(SamplingError::EmptySample);
    }
    let bounds = Bounds::new(bounds.lower.clone(), bounds.upper.clone())?;
    let n = bounds.dimension();
    let mut rng = crate::seed::rng(seed);

    let mut points = vec![vec![0.0; n]; s];
    for j in 0..n {
        let mut strata: Vec<usize> = (0..s).collect();
        rand::seq::SliceRandom::shuffle(strata.as_mut_slice(), &mut rng);
        let width = bounds.width(j) / s as f64;
        for (i, &k) in strata.iter().enumerate() {
            // Keep clear of stratum edges so rounding cannot move a point across.
            let u = 1e-9 + (1.0 - 2e-9) * rng.random::<f64>();
            let v = bounds.lower[j] + (k as f64 + u) * width;
            // Guard against rounding past the upper edge.
            points[i][j] = v.min(bounds.upper[j]);
        }
    }

    if s >= 3 && n >= 1 {
        let mut current = min_pairwise_distance(&points);
        for _ in 0..refine_iters {
            let j = rng.random_range(0..n);
            let a = rng.random_range(0..s);
            let mut b = rng.random_range(0..s - 1);
            if b >= a {
                b += 1;
            }
            swap_coordinate(&mut points, a, b, j);
            let candidate = min_pairwise_distance(&points);
            if candidate > current {
                current = candidate;
            } else {
                swap_coordinate(&mut points, a, b, j);
            }
        }
    }
    Ok(points)
}

fn swap_coordinate(points: &mut [Vec<f64>], a: usize, b: usize, j: usize) {
    let tmp = points[a][j];
    points[a][j] = points[b][j];
    points[b][j] = tmp;
}

/// Evaluates `objective` once per point; the evaluation count equals `points.len()`.
pub fn evaluate_sample<F>(points: Vec<Vec<f64>>, bounds: &Bounds, mut objective: F) -> Result<SampleSet, SamplingError>
where
    F: FnMut(&[f64]) -> f64,
{
    let values = points.iter().map(|p| objective(p)).collect();
    SampleSet::new(points, values, bounds.clone())
}

/// Index of the stratum that `v` falls into on coordinate `j`.
pub fn stratum_of(v: f64, bounds: &Bounds, j: usize, s: usize) -> usize {
    let t = (v - bounds.lower[j]) / bounds.width(j) * s as f64;
    (t.floor() as usize).min(s - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn occupancy(points: &[Vec<f64>], bounds: &Bounds, j: usize) -> Vec<usize> {
        let s = points.len();
        let mut counts = vec![0; s];
        for p in points {
            counts[stratum_of(p[j], bounds, j, s)] += 1;
        }
        counts
    }

    #[test]
    fn single_point_inside_bounds() {
        let b = Bounds::default_box(3);
        let p = lhs_sample(1, &b, 9, DEFAULT_REFINE_ITERS).unwrap();
        assert_eq!(p.len(), 1);
        assert!(b.contains(&p[0]));
    }

    #[test]
    fn four_by_two_occupancy() {
        let b = Bounds::default_box(2);
        let p = lhs_sample(4, &b, 0, DEFAULT_REFINE_ITERS).unwrap();
        for j in 0..2 {
            assert_eq!(occupancy(&p, &b, j), vec![1, 1, 1, 1]);
        }
    }

    #[test]
    fn same_seed_same_matrix() {
        let b = Bounds::uniform(3, -1.0, 2.0).unwrap();
        assert_eq!(lhs_sample(30, &b, 5, 100).unwrap(), lhs_sample(30, &b, 5, 100).unwrap());
        assert_ne!(lhs_sample(30, &b, 5, 100).unwrap(), lhs_sample(30, &b, 6, 100).unwrap());
    }

    #[test]
    fn invalid_bounds_rejected() {
        let b = Bounds { lower: vec![1.0], upper: vec![1.0] };
        assert!(matches!(lhs_sample(5, &b, 0, 10), Err(SamplingError::InvalidBounds { .. })));
        assert!(Bounds::uniform(2, 3.0, -3.0).is_err());
        assert_eq!(lhs_sample(0, &Bounds::default_box(1), 0, 0), Err(SamplingError::EmptySample));
    }

    #[test]
    fn refinement_does_not_shrink_min_distance() {
        let b = Bounds::default_box(2);
        for seed in 0..20 {
            let raw = lhs_sample(20, &b, seed, 0).unwrap();
            let refined = lhs_sample(20, &b, seed, 500).unwrap();
            assert!(min_pairwise_distance(&refined) >= min_pairwise_distance(&raw));
        }
    }

    #[test]
    fn evaluation_matches_direct_loop() {
        let b = Bounds::default_box(3);
        let pts = lhs_sample(10, &b, 3, 100).unwrap();
        let f = |x: &[f64]| x.iter().map(|v| v.sin() * v).sum::<f64>();
        let mut calls = 0;
        let sample = evaluate_sample(pts.clone(), &b, |x| {
            calls += 1;
            f(x)
        })
        .unwrap();
        assert_eq!(calls, 10);
        for (p, v) in pts.iter().zip(&sample.values) {
            assert_eq!(*v, f(p));
        }
    }

    #[test]
    fn constant_and_sphere_objectives() {
        let b = Bounds::default_box(2);
        let s = evaluate_sample(lhs_sample(8, &b, 1, 10).unwrap(), &b, |_| 4.0).unwrap();
        assert!(s.values.iter().all(|&v| v == 4.0));
        let origin = evaluate_sample(vec![vec![0.0, 0.0]], &b, |x| x.iter().map(|v| v * v).sum()).unwrap();
        assert_eq!(origin.values, vec![0.0]);
    }

    #[test]
    fn non_finite_values_rejected() {
        let b = Bounds::default_box(1);
        let r = evaluate_sample(vec![vec![0.0], vec![1.0]], &b, |x| if x[0] > 0.5 { f64::NAN } else { 0.0 });
        assert_eq!(r, Err(SamplingError::NonFinite { index: 1 }));
    }
}
