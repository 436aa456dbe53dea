use super::{dist, require, FeatureClass, FeatureError, FeatureVector};
use crate::sampling::SampleSet;

/// Threshold grid: 0 followed by 100 log-spaced values from 1e-5 to 1e5.
pub fn ic_epsilon_grid() -> Vec<f64> {
    let mut grid = Vec::with_capacity(101);
    grid.push(0.0);
    grid.extend((0..100).map(|i| 10f64.powf(-5.0 + 10.0 * i as f64 / 99.0)));
    grid
}

/// Greedy nearest-neighbour tour starting at point 0 (ties: lowest index).
pub(crate) fn nn_tour(points: &[Vec<f64>]) -> Vec<usize> {
    let s = points.len();
    let mut visited = vec![false; s];
    let mut tour = Vec::with_capacity(s);
    let mut current = 0;
    visited[0] = true;
    tour.push(0);
    for _ in 1..s {
        let mut next = usize::MAX;
        let mut best = f64::INFINITY;
        for (j, seen) in visited.iter().enumerate() {
            if *seen {
                continue;
            }
            let d = dist(&points[current], &points[j]);
            if d < best {
                best = d;
                next = j;
            }
        }
        visited[next] = true;
        tour.push(next);
        current = next;
    }
    tour
}

/// Slopes `(y_{i+1} - y_i) / d_i` along the tour. Coincident consecutive points give
/// 0 when their values agree and an infinite slope of the right sign otherwise.
fn tour_slopes(sample: &SampleSet) -> Vec<f64> {
    let tour = nn_tour(&sample.points);
    tour.windows(2)
        .map(|w| {
            let dy = sample.values[w[1]] - sample.values[w[0]];
            let d = dist(&sample.points[w[0]], &sample.points[w[1]]);
            if d > 0.0 {
                dy / d
            } else if dy == 0.0 {
                0.0
            } else {
                dy.signum() * f64::INFINITY
            }
        })
        .collect()
}

fn symbols(slopes: &[f64], eps: f64) -> Vec<i8> {
    slopes
        .iter()
        .map(|&v| {
            if v > eps {
                1
            } else if v < -eps {
                -1
            } else {
                0
            }
        })
        .collect()
}

/// Entropy (base 6) of consecutive symbol pairs with unequal symbols.
fn entropy(sym: &[i8]) -> f64 {
    let pairs = sym.len() - 1;
    let mut counts = [[0usize; 3]; 3];
    for w in sym.windows(2) {
        counts[(w[0] + 1) as usize][(w[1] + 1) as usize] += 1;
    }
    let mut h = 0.0;
    for (a, row) in counts.iter().enumerate() {
        for (b, &c) in row.iter().enumerate() {
            if a == b || c == 0 {
                continue;
            }
            let p = c as f64 / pairs as f64;
            h -= p * p.ln() / 6f64.ln();
        }
    }
    h
}

/// Fraction of sign changes among the non-zero symbols.
fn partial_information(sym: &[i8]) -> f64 {
    let nz: Vec<i8> = sym.iter().copied().filter(|&v| v != 0).collect();
    if nz.len() < 2 {
        return 0.0;
    }
    let changes = nz.windows(2).filter(|w| w[0] != w[1]).count();
    changes as f64 / (nz.len() - 1) as f64
}

/// Information content of the objective along a nearest-neighbour tour.
///
/// `h_max` is the largest entropy over the threshold grid, `eps_s` the smallest
/// grid threshold at which every symbol is 0 (clamped to the grid maximum when
/// none is), and `m0` the partial information content at threshold 0.
pub fn f_ic(sample: &SampleSet) -> Result<FeatureVector, FeatureError> {
    require(FeatureClass::Ic, sample, 3)?;
    let slopes = tour_slopes(sample);
    let grid = ic_epsilon_grid();
    let mut h_max: f64 = 0.0;
    let mut eps_s = None;
    for &eps in &grid {
        let sym = symbols(&slopes, eps);
        h_max = h_max.max(entropy(&sym));
        if eps_s.is_none() && sym.iter().all(|&v| v == 0) {
            eps_s = Some(eps);
        }
    }
    let m0 = partial_information(&symbols(&slopes, 0.0));

    let mut fv = FeatureVector::new();
    fv.push("ic.h_max", h_max);
    fv.push("ic.eps_s", eps_s.unwrap_or(*grid.last().expect("non-empty grid")));
    fv.push("ic.m0", m0);
    Ok(fv)
}
