use nalgebra::{DMatrix, DVector};

use super::{mean, require, safe_ratio, FeatureClass, FeatureError, FeatureVector, RATIO_SENTINEL};
use crate::sampling::SampleSet;

/// Relative singular-value threshold below which a design matrix counts as rank deficient.
const RANK_TOL: f64 = 1e-10;

struct Fit {
    coef: Vec<f64>,
    r2: f64,
}

/// Least squares fit with intercept in column 0. `None` when the design is rank deficient.
fn least_squares(design: DMatrix<f64>, y: &DVector<f64>) -> Option<Fit> {
    if design.nrows() < design.ncols() {
        return None;
    }
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin / smax < RANK_TOL {
        return None;
    }
    let coef = svd.solve(y, 0.0).ok()?;
    let fitted = &design * &coef;
    let ym = y.mean();
    let ss_res: f64 = (y - fitted).iter().map(|r| r * r).sum();
    let ss_tot: f64 = y.iter().map(|v| (v - ym) * (v - ym)).sum();
    let r2 = if ss_tot > 0.0 { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) } else { 0.0 };
    Some(Fit { coef: coef.iter().copied().collect(), r2 })
}

fn abs_extremes(v: &[f64]) -> (f64, f64) {
    let abs = v.iter().map(|c| c.abs());
    let min = abs.clone().fold(f64::INFINITY, f64::min);
    let max = abs.fold(0.0, f64::max);
    (min, max)
}

/// Linear and diagonal-quadratic regression of the objective on the sample.
///
/// Coefficient extremes use absolute values. A rank-deficient design (or too
/// few points for the quadratic model) reports R² 0, zero coefficients and the
/// ratio sentinel.
pub fn f_ela_meta(sample: &SampleSet) -> Result<FeatureVector, FeatureError> {
    let n = sample.dimension();
    require(FeatureClass::ElaMeta, sample, n + 2)?;
    let s = sample.len();
    let y = DVector::from_column_slice(&sample.values);

    let linear = DMatrix::from_fn(s, n + 1, |i, j| if j == 0 { 1.0 } else { sample.points[i][j - 1] });
    let mut fv = FeatureVector::new();
    match least_squares(linear, &y) {
        Some(fit) => {
            let (cmin, cmax) = abs_extremes(&fit.coef[1..]);
            fv.push("ela_meta.lin_r2", fit.r2);
            fv.push("ela_meta.lin_intercept", fit.coef[0]);
            fv.push("ela_meta.lin_coef_min", cmin);
            fv.push("ela_meta.lin_coef_max", cmax);
            fv.push("ela_meta.lin_coef_max_by_min", safe_ratio(cmax, cmin));
        }
        None => {
            fv.push("ela_meta.lin_r2", 0.0);
            fv.push("ela_meta.lin_intercept", mean(&sample.values));
            fv.push("ela_meta.lin_coef_min", 0.0);
            fv.push("ela_meta.lin_coef_max", 0.0);
            fv.push("ela_meta.lin_coef_max_by_min", RATIO_SENTINEL);
        }
    }

    let quad = DMatrix::from_fn(s, 2 * n + 1, |i, j| match j {
        0 => 1.0,
        j if j <= n => sample.points[i][j - 1],
        j => sample.points[i][j - n - 1].powi(2),
    });
    match least_squares(quad, &y) {
        Some(fit) => {
            let (qmin, qmax) = abs_extremes(&fit.coef[n + 1..]);
            fv.push("ela_meta.quad_r2", fit.r2);
            fv.push("ela_meta.quad_cond", safe_ratio(qmax, qmin));
        }
        None => {
            fv.push("ela_meta.quad_r2", 0.0);
            fv.push("ela_meta.quad_cond", RATIO_SENTINEL);
        }
    }
    Ok(fv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{evaluate_sample, lhs_sample, Bounds};

    fn sample_of(f: impl Fn(&[f64]) -> f64, s: usize, seed: u64) -> SampleSet {
        let b = Bounds::default_box(2);
        evaluate_sample(lhs_sample(s, &b, seed, 50).unwrap(), &b, f).unwrap()
    }

    #[test]
    fn exact_linear_fit() {
        let fv = f_ela_meta(&sample_of(|x| 3.0 * x[0] - x[1] + 1.0, 30, 1)).unwrap();
        assert!((fv.get("ela_meta.lin_r2").unwrap() - 1.0).abs() < 1e-12);
        assert!((fv.get("ela_meta.lin_intercept").unwrap() - 1.0).abs() < 1e-10);
        assert!((fv.get("ela_meta.lin_coef_min").unwrap() - 1.0).abs() < 1e-10);
        assert!((fv.get("ela_meta.lin_coef_max").unwrap() - 3.0).abs() < 1e-10);
        assert!((fv.get("ela_meta.lin_coef_max_by_min").unwrap() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn sphere_has_equal_curvature() {
        let fv = f_ela_meta(&sample_of(|x| x.iter().map(|v| v * v).sum(), 30, 2)).unwrap();
        assert!((fv.get("ela_meta.quad_r2").unwrap() - 1.0).abs() < 1e-12);
        assert!((fv.get("ela_meta.quad_cond").unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn duplicated_points_are_rank_deficient() {
        let b = Bounds::default_box(2);
        let s = SampleSet::new(vec![vec![1.0, 1.0]; 8], (0..8).map(f64::from).collect(), b).unwrap();
        let fv = f_ela_meta(&s).unwrap();
        assert_eq!(fv.get("ela_meta.lin_r2"), Some(0.0));
        assert_eq!(fv.get("ela_meta.quad_cond"), Some(RATIO_SENTINEL));
        assert!(fv.all_finite());
    }

    #[test]
    fn quadratic_model_needs_enough_points() {
        // n = 2: four points fit the linear model but not the 5-parameter quadratic one.
        let fv = f_ela_meta(&sample_of(|x| x[0] + 2.0 * x[1], 4, 3)).unwrap();
        assert!((fv.get("ela_meta.lin_r2").unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(fv.get("ela_meta.quad_r2"), Some(0.0));
        assert!(f_ela_meta(&sample_of(|x| x[0], 3, 3)).is_err());
    }
}
