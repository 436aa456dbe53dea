use super::{dist, mean, median, require, FeatureClass, FeatureError, FeatureVector};
use crate::sampling::SampleSet;

pub const DEFAULT_DISP_QUANTILES: [f64; 4] = [0.02, 0.05, 0.1, 0.25];

fn pairwise(points: &[&Vec<f64>]) -> Vec<f64> {
    let mut d = Vec::with_capacity(points.len() * points.len().saturating_sub(1) / 2);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            d.push(dist(points[i], points[j]));
        }
    }
    d
}

fn ratio(sub: f64, all: f64) -> f64 {
    if all > 0.0 {
        sub / all
    } else {
        0.0
    }
}

/// Dispersion features with the default quantiles.
pub fn f_disp(sample: &SampleSet) -> Result<FeatureVector, FeatureError> {
    f_disp_with(sample, &DEFAULT_DISP_QUANTILES)
}

/// Mean (median) pairwise distance among the best `ceil(q s)` points divided by
/// the mean (median) pairwise distance among all points, per quantile `q`.
///
/// The subset size is raised to 2 when `ceil(q s)` is smaller. A sample whose
/// points all coincide gives ratio 0.
pub fn f_disp_with(sample: &SampleSet, quantiles: &[f64]) -> Result<FeatureVector, FeatureError> {
    require(FeatureClass::Disp, sample, 2)?;
    let s = sample.len();
    let all: Vec<&Vec<f64>> = sample.points.iter().collect();
    let all_d = pairwise(&all);
    let (all_mean, all_median) = (mean(&all_d), median(&all_d));

    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| sample.values[a].total_cmp(&sample.values[b]).then(a.cmp(&b)));

    let mut fv = FeatureVector::new();
    for &q in quantiles {
        let m = ((q * s as f64).ceil() as usize).clamp(2, s);
        let best: Vec<&Vec<f64>> = order[..m].iter().map(|&i| &sample.points[i]).collect();
        let d = pairwise(&best);
        fv.push(format!("disp.ratio_mean_{q}"), ratio(mean(&d), all_mean));
        fv.push(format!("disp.ratio_median_{q}"), ratio(median(&d), all_median));
    }
    Ok(fv)
}
