use nalgebra::DMatrix;

use super::{require, FeatureClass, FeatureError, FeatureVector};
use crate::sampling::SampleSet;

/// Eigenvalues of the covariance matrix of `rows`, descending, negatives clipped to 0.
fn covariance_spectrum(rows: &[Vec<f64>]) -> Vec<f64> {
    let s = rows.len();
    let p = rows[0].len();
    let data = DMatrix::from_fn(s, p, |i, j| rows[i][j]);
    let means = data.row_mean();
    let centered = DMatrix::from_fn(s, p, |i, j| data[(i, j)] - means[j]);
    let cov = centered.transpose() * &centered / (s as f64 - 1.0);
    let mut eig: Vec<f64> = cov.symmetric_eigenvalues().iter().map(|v| v.max(0.0)).collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    eig
}

/// (fraction of components needed for 90% of the variance, first-component share).
fn explained(eig: &[f64]) -> (f64, f64) {
    let p = eig.len() as f64;
    let total: f64 = eig.iter().sum();
    if !(total > 0.0) {
        // Zero variance: every component carries an equal share.
        return ((0.9 * p).ceil() / p, 1.0 / p);
    }
    let mut cum = 0.0;
    let mut needed = eig.len();
    for (k, v) in eig.iter().enumerate() {
        cum += v / total;
        if cum >= 0.9 - 1e-12 {
            needed = k + 1;
            break;
        }
    }
    (needed as f64 / p, eig[0] / total)
}

/// Principal component features of the decision space alone and of the decision
/// space joined with the objective values.
pub fn f_pca(sample: &SampleSet) -> Result<FeatureVector, FeatureError> {
    let n = sample.dimension();
    require(FeatureClass::Pca, sample, n + 1)?;
    let x_rows = sample.points.clone();
    let xy_rows: Vec<Vec<f64>> = sample
        .points
        .iter()
        .zip(&sample.values)
        .map(|(p, &y)| {
            let mut r = p.clone();
            r.push(y);
            r
        })
        .collect();
    let (x90, x_first) = explained(&covariance_spectrum(&x_rows));
    let (xy90, xy_first) = explained(&covariance_spectrum(&xy_rows));

    let mut fv = FeatureVector::new();
    fv.push("pca.expl_var_x_0.9", x90);
    fv.push("pca.expl_var_xy_0.9", xy90);
    fv.push("pca.expl_var_first_x", x_first);
    fv.push("pca.expl_var_first_xy", xy_first);
    Ok(fv)
}
