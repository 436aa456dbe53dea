use super::{correlation, dist, mean, require, safe_ratio, sd, FeatureClass, FeatureError, FeatureVector};
use crate::sampling::SampleSet;

/// Nearest-neighbour and nearest-better-neighbour distances of every sample point.
///
/// "Better" means a strictly smaller objective value. Points without a better
/// point use their nearest-neighbour distance.
pub(crate) fn nn_nb_distances(sample: &SampleSet) -> (Vec<f64>, Vec<f64>) {
    let s = sample.len();
    let mut nn = vec![f64::INFINITY; s];
    let mut nb = vec![f64::INFINITY; s];
    for i in 0..s {
        for j in 0..s {
            if i == j {
                continue;
            }
            let d = dist(&sample.points[i], &sample.points[j]);
            nn[i] = nn[i].min(d);
            if sample.values[j] < sample.values[i] {
                nb[i] = nb[i].min(d);
            }
        }
        if nb[i].is_infinite() {
            nb[i] = nn[i];
        }
    }
    (nn, nb)
}

/// Nearest-better clustering features: ratios of the means and standard
/// deviations of NN and NB distances, and the correlation of NB distance with
/// the objective value.
pub fn f_nbc(sample: &SampleSet) -> Result<FeatureVector, FeatureError> {
    require(FeatureClass::Nbc, sample, 3)?;
    let (nn, nb) = nn_nb_distances(sample);
    let mut fv = FeatureVector::new();
    fv.push("nbc.nn_nb_mean_ratio", safe_ratio(mean(&nn), mean(&nb)));
    fv.push("nbc.nn_nb_sd_ratio", safe_ratio(sd(&nn), sd(&nb)));
    fv.push("nbc.nb_fitness_cor", correlation(&nb, &sample.values));
    Ok(fv)
}
