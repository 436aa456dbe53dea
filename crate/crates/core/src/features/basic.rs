use super::{mean, median, require, FeatureClass, FeatureError, FeatureVector};
use crate::sampling::SampleSet;

/// Summary statistics of the sample: dimension, size, box extremes and the
/// distribution of objective values.
pub fn f_basic(sample: &SampleSet) -> Result<FeatureVector, FeatureError> {
    require(FeatureClass::Basic, sample, 2)?;
    let y = &sample.values;
    let lower = sample.bounds.lower.iter().copied().fold(f64::INFINITY, f64::min);
    let upper = sample.bounds.upper.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut fv = FeatureVector::new();
    fv.push("basic.dim", sample.dimension() as f64);
    fv.push("basic.sample_size", sample.len() as f64);
    fv.push("basic.lower", lower);
    fv.push("basic.upper", upper);
    fv.push("basic.y_min", y.iter().copied().fold(f64::INFINITY, f64::min));
    fv.push("basic.y_max", y.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    fv.push("basic.y_mean", mean(y));
    fv.push("basic.y_median", median(y));
    Ok(fv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::Bounds;

    #[test]
    fn values_one_to_four() {
        let s = SampleSet::new(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
            vec![1.0, 2.0, 3.0, 4.0],
            Bounds::default_box(2),
        )
        .unwrap();
        let fv = f_basic(&s).unwrap();
        assert_eq!(fv.get("basic.y_mean"), Some(2.5));
        assert_eq!(fv.get("basic.y_median"), Some(2.5));
        assert_eq!(fv.get("basic.dim"), Some(2.0));
        assert_eq!(fv.get("basic.lower"), Some(-5.0));
        assert_eq!(fv.get("basic.upper"), Some(5.0));
        assert_eq!(fv.get("basic.y_min"), Some(1.0));
        assert_eq!(fv.get("basic.y_max"), Some(4.0));
    }

    #[test]
    fn needs_two_points() {
        let s = SampleSet::new(vec![vec![0.0]], vec![1.0], Bounds::default_box(1)).unwrap();
        assert!(f_basic(&s).is_err());
    }
}
