use super::{mean, require, sd, FeatureClass, FeatureError, FeatureVector};
use crate::sampling::SampleSet;

const KDE_GRID: usize = 512;

/// Shape of the objective value distribution: adjusted skewness, adjusted excess
/// kurtosis and the number of modes of a Gaussian KDE.
///
/// Constant values give skewness 0, kurtosis 0 and a single peak.
pub fn f_ela_distr(sample: &SampleSet) -> Result<FeatureVector, FeatureError> {
    require(FeatureClass::ElaDistr, sample, 4)?;
    let y = &sample.values;
    let (skewness, kurtosis, peaks) = if is_constant(y) {
        (0.0, 0.0, 1)
    } else {
        let (g1, g2) = adjusted_moments(y);
        (g1, g2, kde_peaks(y, silverman_bandwidth(y)))
    };
    let mut fv = FeatureVector::new();
    fv.push("ela_distr.skewness", skewness);
    fv.push("ela_distr.kurtosis", kurtosis);
    fv.push("ela_distr.n_peaks", peaks as f64);
    Ok(fv)
}

fn is_constant(y: &[f64]) -> bool {
    y.iter().all(|&v| v == y[0])
}

/// Adjusted Fisher–Pearson skewness `G1` and adjusted excess kurtosis `G2`.
fn adjusted_moments(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let m = mean(y);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in y {
        let d = v - m;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 <= 0.0 {
        return (0.0, 0.0);
    }
    let g1 = m3 / m2.powf(1.5);
    let g2 = m4 / (m2 * m2) - 3.0;
    let skew = (n * (n - 1.0)).sqrt() / (n - 2.0) * g1;
    let kurt = ((n + 1.0) * g2 + 6.0) * (n - 1.0) / ((n - 2.0) * (n - 3.0));
    let finite = |v: f64| if v.is_finite() { v } else { 0.0 };
    (finite(skew), finite(kurt))
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Silverman's rule of thumb: `0.9 * min(sd, IQR / 1.34) * n^(-1/5)`.
pub fn silverman_bandwidth(y: &[f64]) -> f64 {
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let s = sd(y);
    let spread = if iqr > 0.0 { s.min(iqr / 1.34) } else { s };
    0.9 * spread * (y.len() as f64).powf(-0.2)
}

/// Number of local maxima of a Gaussian KDE evaluated on a 512-point grid
/// spanning `[min - 3h, max + 3h]`. At least 1.
pub fn kde_peaks(y: &[f64], bandwidth: f64) -> usize {
    if !(bandwidth > 0.0) {
        return 1;
    }
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * bandwidth;
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * bandwidth;
    let step = (hi - lo) / (KDE_GRID - 1) as f64;
    let density: Vec<f64> = (0..KDE_GRID)
        .map(|i| {
            let x = lo + i as f64 * step;
            y.iter()
                .map(|&v| {
                    let z = (x - v) / bandwidth;
                    (-0.5 * z * z).exp()
                })
                .sum()
        })
        .collect();
    let peaks = (1..KDE_GRID - 1)
        .filter(|&i| density[i] > density[i - 1] && density[i] >= density[i + 1])
        .count();
    peaks.max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::Bounds;

    fn sample(values: Vec<f64>) -> SampleSet {
        let pts = (0..values.len()).map(|i| vec![i as f64 / values.len() as f64]).collect();
        SampleSet::new(pts, values, Bounds::uniform(1, 0.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn symmetric_values_have_zero_skew() {
        let fv = f_ela_distr(&sample(vec![-2.0, -1.0, 1.0, 2.0])).unwrap();
        assert!(fv.get("ela_distr.skewness").unwrap().abs() < 1e-15);
    }

    #[test]
    fn constant_values_clamp() {
        let fv = f_ela_distr(&sample(vec![3.3; 10])).unwrap();
        assert_eq!(fv.get("ela_distr.skewness"), Some(0.0));
        assert_eq!(fv.get("ela_distr.kurtosis"), Some(0.0));
        assert_eq!(fv.get("ela_distr.n_peaks"), Some(1.0));
    }

    #[test]
    fn adjusted_moments_match_reference() {
        // Bias-corrected reference values for the squares 1..=10 (scipy.stats, bias=False).
        let y: Vec<f64> = (1..=10).map(|i| (i * i) as f64).collect();
        let (g1, g2) = adjusted_moments(&y);
        assert!((g1 - 0.674_366_813_133_715_8).abs() < 1e-12, "{g1}");
        assert!((g2 - (-0.747_573_126_581_872_1)).abs() < 1e-12, "{g2}");
    }

    #[test]
    fn too_few_points() {
        assert!(f_ela_distr(&sample(vec![1.0, 2.0, 3.0])).is_err());
    }
}
