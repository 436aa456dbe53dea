use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::SelectorError;
use crate::seed::{derive_seed, rng};

/// Critical values of the adjusted Anderson–Darling statistic for a normal
/// distribution with estimated mean and variance.
const AD_CRITICAL: [(f64, f64); 6] =
    [(0.1, 0.631), (0.05, 0.752), (0.025, 0.873), (0.01, 1.035), (0.005, 1.159), (0.0001, 1.8692)];

pub fn ad_critical_value(alpha: f64) -> Option<f64> {
    AD_CRITICAL.iter().find(|(a, _)| (a - alpha).abs() < 1e-12).map(|&(_, c)| c)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GMeansSpec {
    /// Significance level of the normality test; one of 0.1, 0.05, 0.025, 0.01, 0.005, 0.0001.
    pub alpha: f64,
    pub max_iter: usize,
    /// Clusters smaller than this are not tested for splitting.
    pub min_split: usize,
    pub max_clusters: usize,
}

impl Default for GMeansSpec {
    fn default() -> Self {
        GMeansSpec { alpha: 1e-4, max_iter: 100, min_split: 8, max_clusters: 64 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub centroids: Vec<Vec<f64>>,
    /// Cluster index of every input row.
    pub assignment: Vec<usize>,
}

impl Clustering {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// Index of the nearest centroid (ties: lowest index).
    pub fn nearest(&self, row: &[f64]) -> usize {
        nearest(&self.centroids, row)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centroids: &[Vec<f64>], row: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(c, row);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

fn centroid(rows: &[Vec<f64>], idx: &[usize]) -> Vec<f64> {
    let p = rows[idx[0]].len();
    let mut c = vec![0.0; p];
    for &i in idx {
        for (cj, v) in c.iter_mut().zip(&rows[i]) {
            *cj += v;
        }
    }
    c.iter_mut().for_each(|v| *v /= idx.len() as f64);
    c
}

/// 2-means on `idx` with k-means++ seeding; returns the two centroids.
fn two_means(rows: &[Vec<f64>], idx: &[usize], max_iter: usize, r: &mut ChaCha8Rng) -> [Vec<f64>; 2] {
    let first = rows[idx[r.random_range(0..idx.len())]].clone();
    let weights: Vec<f64> = idx.iter().map(|&i| sq_dist(&rows[i], &first)).collect();
    let total: f64 = weights.iter().sum();
    let second = if total > 0.0 {
        let mut u = r.random::<f64>() * total;
        let mut pick = idx[idx.len() - 1];
        for (k, &w) in weights.iter().enumerate() {
            if u < w {
                pick = idx[k];
                break;
            }
            u -= w;
        }
        rows[pick].clone()
    } else {
        first.clone()
    };
    let mut centers = [first, second];
    for _ in 0..max_iter {
        let mut groups: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for &i in idx {
            groups[nearest(&centers, &rows[i])].push(i);
        }
        let next = [0, 1].map(|g| if groups[g].is_empty() { centers[g].clone() } else { centroid(rows, &groups[g]) });
        if next == centers {
            break;
        }
        centers = next;
    }
    centers
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Anderson–Darling statistic with the small-sample adjustment `A²(1 + 4/n − 25/n²)`,
/// after standardizing `values`. `None` when the values have zero spread.
pub fn anderson_darling_adjusted(values: &[f64]) -> Option<f64> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
    if !(var > 0.0) {
        return None;
    }
    let sd = var.sqrt();
    let mut z: Vec<f64> = values.iter().map(|v| (v - mean) / sd).collect();
    z.sort_by(f64::total_cmp);
    let clamp = |p: f64| p.clamp(1e-300, 1.0 - 1e-16);
    let s: f64 = (0..n)
        .map(|i| {
            let lo = clamp(normal_cdf(z[i])).ln();
            let hi = clamp(1.0 - normal_cdf(z[n - 1 - i])).ln();
            (2 * i + 1) as f64 * (lo + hi)
        })
        .sum();
    let a2 = -nf - s / nf;
    Some(a2 * (1.0 + 4.0 / nf - 25.0 / (nf * nf)))
}

/// g-means: clusters are split in two while the points projected onto the axis
/// between the two child centroids fail the normality test. Rows are finally
/// assigned to their nearest centroid.
pub fn gmeans_fit(rows: &[Vec<f64>], spec: &GMeansSpec, seed: u64) -> Result<Clustering, SelectorError> {
    if rows.is_empty() {
        return Err(SelectorError::EmptyTrainingData);
    }
    let critical = ad_critical_value(spec.alpha).ok_or(SelectorError::UnsupportedAlpha(spec.alpha))?;
    let mut r = rng(derive_seed(seed, &[0x6d65616e73]));
    let mut open: Vec<Vec<usize>> = vec![(0..rows.len()).collect()];
    let mut done: Vec<Vec<usize>> = Vec::new();
    while let Some(idx) = open.pop() {
        if idx.len() < spec.min_split.max(2) || open.len() + done.len() + 2 > spec.max_clusters.max(1) {
            done.push(idx);
            continue;
        }
        let [c0, c1] = two_means(rows, &idx, spec.max_iter, &mut r);
        let axis: Vec<f64> = c0.iter().zip(&c1).map(|(a, b)| a - b).collect();
        let norm2: f64 = axis.iter().map(|v| v * v).sum();
        if !(norm2 > 0.0) {
            done.push(idx);
            continue;
        }
        let projected: Vec<f64> =
            idx.iter().map(|&i| rows[i].iter().zip(&axis).map(|(x, a)| x * a).sum::<f64>() / norm2).collect();
        let reject = anderson_darling_adjusted(&projected).is_some_and(|a| a > critical);
        let centers = [c0, c1];
        let (g0, g1): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| nearest(&centers, &rows[i]) == 0);
        if reject && !g0.is_empty() && !g1.is_empty() {
            open.push(g1);
            open.push(g0);
        } else {
            done.push(idx);
        }
    }
    done.sort();
    let mut centroids: Vec<Vec<f64>> = done.iter().map(|idx| centroid(rows, idx)).collect();
    let mut assignment: Vec<usize> = rows.iter().map(|row| nearest(&centroids, row)).collect();
    // Drop clusters that lost every row; the others keep their centroids, so the
    // nearest-centroid assignment is unchanged.
    let mut used: Vec<usize> = assignment.clone();
    used.sort();
    used.dedup();
    if used.len() < centroids.len() {
        centroids = used.iter().map(|&c| centroids[c].clone()).collect();
        assignment = rows.iter().map(|row| nearest(&centroids, row)).collect();
    }
    Ok(Clustering { centroids, assignment })
}
