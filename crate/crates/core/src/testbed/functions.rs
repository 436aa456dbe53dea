use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::archive::{InstanceKey, ProblemKey};
use crate::sampling::{Bounds, Objective};
use crate::seed::{derive_seed, rng, str_stream};

/// Half-width of the search box `[-5, 5]^n`.
pub const DOMAIN_RADIUS: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Sphere,
    Ellipsoid,
    Rastrigin,
    Rosenbrock,
    LinearSlope,
}

impl Family {
    pub const ALL: [Family; 5] =
        [Family::Sphere, Family::Ellipsoid, Family::Rastrigin, Family::Rosenbrock, Family::LinearSlope];

    pub fn name(self) -> &'static str {
        match self {
            Family::Sphere => "sphere",
            Family::Ellipsoid => "ellipsoid",
            Family::Rastrigin => "rastrigin",
            Family::Rosenbrock => "rosenbrock",
            Family::LinearSlope => "linear_slope",
        }
    }

    fn rotated(self, dimension: usize) -> bool {
        dimension > 3 && matches!(self, Family::Ellipsoid | Family::Rastrigin | Family::Rosenbrock)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown function family '{s}'"))
    }
}

/// One seeded instance of a test function family on `[-5, 5]^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub family: Family,
    pub dimension: usize,
    pub instance_id: u32,
    pub shift: Vec<f64>,
    /// Row-major orthogonal matrix, when the instance is rotated.
    pub rotation: Option<Vec<Vec<f64>>>,
    pub f_opt: f64,
}

impl TestFunction {
    /// Instance transformation derived from `(family, dimension, instance_id, seed)`.
    pub fn new(family: Family, dimension: usize, instance_id: u32, seed: u64) -> Self {
        assert!(dimension >= 1, "dimension must be positive");
        let s = derive_seed(seed, &[str_stream(family.name()), dimension as u64, u64::from(instance_id)]);
        let mut r = rng(s);
        let shift: Vec<f64> = (0..dimension).map(|_| r.random_range(-4.0..=4.0)).collect();
        let f_opt = r.random_range(-100.0..=100.0);
        let rotation = family.rotated(dimension).then(|| random_rotation(dimension, &mut r));
        TestFunction { family, dimension, instance_id, shift, rotation, f_opt }
    }

    pub fn key(&self) -> InstanceKey {
        let problem = ProblemKey::new(self.family.name(), self.dimension).expect("valid family name");
        InstanceKey::new(problem, self.instance_id).expect("valid instance id")
    }

    pub fn bounds(&self) -> Bounds {
        Bounds::default_box(self.dimension)
    }

    /// Location of the optimum.
    pub fn optimum(&self) -> Vec<f64> {
        match self.family {
            Family::LinearSlope => self.shift.iter().map(|&v| slope_sign(v) * DOMAIN_RADIUS).collect(),
            _ => self.shift.clone(),
        }
    }

    fn transform(&self, x: &[f64]) -> Vec<f64> {
        let d: Vec<f64> = x.iter().zip(&self.shift).map(|(a, b)| a - b).collect();
        match &self.rotation {
            Some(rot) => rot.iter().map(|row| row.iter().zip(&d).map(|(r, v)| r * v).sum()).collect(),
            None => d,
        }
    }

    fn raw(&self, x: &[f64]) -> f64 {
        let n = self.dimension;
        let cond = |i: usize, base: f64| if n > 1 { base.powf(i as f64 / (n - 1) as f64) } else { 1.0 };
        match self.family {
            Family::Sphere => self.transform(x).iter().map(|z| z * z).sum(),
            Family::Ellipsoid => {
                self.transform(x).iter().enumerate().map(|(i, z)| cond(i, 1e6) * z * z).sum()
            }
            Family::Rastrigin => {
                let z = self.transform(x);
                let tau = 2.0 * std::f64::consts::PI;
                10.0 * n as f64 + z.iter().map(|v| v * v - 10.0 * (tau * v).cos()).sum::<f64>()
            }
            Family::Rosenbrock => {
                let scale = (n as f64).sqrt().max(8.0) / 8.0;
                let z: Vec<f64> = self.transform(x).iter().map(|v| scale * v + 1.0).collect();
                if n == 1 {
                    return (z[0] - 1.0).powi(2);
                }
                z.windows(2)
                    .map(|w| 100.0 * (w[0] * w[0] - w[1]).powi(2) + (w[0] - 1.0).powi(2))
                    .sum()
            }
            Family::LinearSlope => {
                let opt = self.optimum();
                (0..n)
                    .map(|i| {
                        let s = opt[i].signum() * cond(i, 10.0);
                        let z = if opt[i] * x[i] < DOMAIN_RADIUS * DOMAIN_RADIUS { x[i] } else { opt[i] };
                        DOMAIN_RADIUS * s.abs() - s * z
                    })
                    .sum()
            }
        }
    }
}

impl Objective for TestFunction {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dimension);
        self.raw(x) + self.f_opt
    }

    fn optimum_value(&self) -> Option<f64> {
        Some(self.f_opt)
    }
}

fn slope_sign(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Haar-distributed orthogonal matrix from the QR decomposition of a Gaussian matrix.
fn random_rotation(n: usize, r: &mut impl Rng) -> Vec<Vec<f64>> {
    let g = DMatrix::from_fn(n, n, |_, _| r.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let (q, rr) = (qr.q(), qr.r());
    (0..n)
        .map(|i| (0..n).map(|j| q[(i, j)] * slope_sign(rr[(j, j)])).collect())
        .collect()
}

/// Deterministic suite of test function instances.
pub fn make_suite(families: &[Family], dimensions: &[usize], instances: u32, seed: u64) -> Vec<TestFunction> {
    let mut suite = Vec::with_capacity(families.len() * dimensions.len() * instances as usize);
    for &dimension in dimensions {
        for &family in families {
            for instance_id in 1..=instances {
                suite.push(TestFunction::new(family, dimension, instance_id, seed));
            }
        }
    }
    suite
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn optimum_identity() {
        for f in make_suite(&Family::ALL, &[1, 2, 5], 3, 11) {
            let v = f.evaluate(&f.optimum());
            if f.family == Family::Sphere || f.rotation.is_none() {
                assert_eq!(v, f.f_opt, "{}", f.key());
            } else {
                assert!((v - f.f_opt).abs() < 1e-9, "{}", f.key());
            }
            assert!(f.bounds().contains(&f.optimum()));
        }
    }

    #[test]
    fn optimum_is_minimal_nearby() {
        let mut r = rng(5);
        for f in make_suite(&Family::ALL, &[2, 4], 2, 3) {
            let opt = f.optimum();
            for _ in 0..200 {
                let mut x: Vec<f64> = opt.iter().map(|v| v + r.random_range(-0.5..0.5)).collect();
                f.bounds().clip(&mut x);
                assert!(f.evaluate(&x) >= f.f_opt - 1e-9, "{}", f.key());
            }
        }
    }

    #[test]
    fn rotation_is_orthogonal_and_only_above_three() {
        let f = TestFunction::new(Family::Ellipsoid, 5, 1, 9);
        let rot = f.rotation.as_ref().unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let dot: f64 = (0..5).map(|k| rot[i][k] * rot[j][k]).sum();
                assert!((dot - f64::from(u8::from(i == j))).abs() < 1e-12);
            }
        }
        assert!(TestFunction::new(Family::Ellipsoid, 3, 1, 9).rotation.is_none());
        assert!(TestFunction::new(Family::Sphere, 5, 1, 9).rotation.is_none());
    }

    #[test]
    fn suite_is_deterministic() {
        let a = make_suite(&Family::ALL, &[2], 5, 42);
        assert_eq!(a.len(), 25);
        assert_eq!(a, make_suite(&Family::ALL, &[2], 5, 42));
        assert_ne!(a[0].f_opt, make_suite(&Family::ALL, &[2], 5, 43)[0].f_opt);
        assert!(a.iter().all(|f| (-100.0..=100.0).contains(&f.f_opt)));
        assert!(a.iter().flat_map(|f| f.shift.iter()).all(|v| (-4.0..=4.0).contains(v)));
    }

    #[test]
    fn family_names_round_trip() {
        for f in Family::ALL {
            assert_eq!(f.name().parse::<Family>(), Ok(f));
        }
        assert!("f1".parse::<Family>().is_err());
    }
}
