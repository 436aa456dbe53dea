use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::sampling::{Bounds, Objective};
use crate::seed::rng;

/// Precision added to the optimal value to form the success target.
pub const DEFAULT_EPSILON: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    RandomSearch,
    OnePlusOneEs,
    NelderMead,
    CoordinateSearch,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 4] = [
        OptimizerKind::RandomSearch,
        OptimizerKind::OnePlusOneEs,
        OptimizerKind::NelderMead,
        OptimizerKind::CoordinateSearch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::RandomSearch => "random_search",
            OptimizerKind::OnePlusOneEs => "one_plus_one_es",
            OptimizerKind::NelderMead => "nelder_mead",
            OptimizerKind::CoordinateSearch => "coordinate_search",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OptimizerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown optimizer '{s}'"))
    }
}

/// Toy optimizer with a fixed evaluation budget per run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyOptimizer {
    pub kind: OptimizerKind,
    pub budget: u64,
}

impl ToyOptimizer {
    pub fn new(kind: OptimizerKind, budget: u64) -> Self {
        ToyOptimizer { kind, budget }
    }

    pub fn id(&self) -> &'static str {
        self.kind.name()
    }

    /// Runs once on `objective` until the target is hit or the budget is spent.
    pub fn run(&self, objective: &dyn Objective, bounds: &Bounds, target: f64, seed: u64) -> RunOutcome {
        let mut eval = BudgetedEvaluator::new(objective, target, self.budget);
        let mut r = rng(seed);
        let _ = match self.kind {
            OptimizerKind::RandomSearch => random_search(&mut eval, bounds, &mut r),
            OptimizerKind::OnePlusOneEs => one_plus_one_es(&mut eval, bounds, &mut r),
            OptimizerKind::NelderMead => nelder_mead(&mut eval, bounds, &mut r),
            OptimizerKind::CoordinateSearch => coordinate_search(&mut eval, bounds, &mut r),
        };
        eval.outcome()
    }
}

/// Result of a budgeted run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    /// Index of the first evaluation reaching the target, or all evaluations spent.
    pub evaluations: u64,
    pub success: bool,
    pub best: f64,
    /// Every evaluated point with its value, when tracing was requested.
    pub trace: Vec<(Vec<f64>, f64)>,
}

/// Signals that an optimizer must stop: target reached or budget spent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Halt;

/// Objective wrapper that counts evaluations, stops at the target and enforces the budget.
pub struct BudgetedEvaluator<'a> {
    objective: &'a dyn Objective,
    target: f64,
    budget: u64,
    evaluations: u64,
    hit: Option<u64>,
    best: f64,
    trace: Option<Vec<(Vec<f64>, f64)>>,
}

impl<'a> BudgetedEvaluator<'a> {
    pub fn new(objective: &'a dyn Objective, target: f64, budget: u64) -> Self {
        BudgetedEvaluator {
            objective,
            target,
            budget,
            evaluations: 0,
            hit: None,
            best: f64::INFINITY,
            trace: None,
        }
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    pub fn eval(&mut self, x: &[f64]) -> Result<f64, Halt> {
        if self.hit.is_some() || self.evaluations >= self.budget {
            return Err(Halt);
        }
        let v = self.objective.evaluate(x);
        self.evaluations += 1;
        self.best = self.best.min(v);
        if let Some(t) = self.trace.as_mut() {
            t.push((x.to_vec(), v));
        }
        if v <= self.target {
            self.hit = Some(self.evaluations);
        }
        Ok(v)
    }

    pub fn outcome(self) -> RunOutcome {
        RunOutcome {
            evaluations: self.hit.unwrap_or(self.evaluations),
            success: self.hit.is_some(),
            best: self.best,
            trace: self.trace.unwrap_or_default(),
        }
    }
}

fn uniform_point(bounds: &Bounds, r: &mut ChaCha8Rng) -> Vec<f64> {
    (0..bounds.dimension()).map(|j| r.random_range(bounds.lower[j]..=bounds.upper[j])).collect()
}

fn random_search(eval: &mut BudgetedEvaluator, bounds: &Bounds, r: &mut ChaCha8Rng) -> Result<(), Halt> {
    loop {
        eval.eval(&uniform_point(bounds, r))?;
    }
}

/// (1+1)-ES with the one-fifth success rule; restarts when the step size collapses.
fn one_plus_one_es(eval: &mut BudgetedEvaluator, bounds: &Bounds, r: &mut ChaCha8Rng) -> Result<(), Halt> {
    let n = bounds.dimension();
    let range = (0..n).map(|j| bounds.width(j)).fold(0.0, f64::max);
    loop {
        let mut x = uniform_point(bounds, r);
        let mut fx = eval.eval(&x)?;
        let mut sigma = 0.2 * range;
        while sigma > 1e-12 * range {
            let mut y: Vec<f64> = x.iter().map(|v| v + sigma * r.sample::<f64, _>(rand_distr::StandardNormal)).collect();
            bounds.clip(&mut y);
            let fy = eval.eval(&y)?;
            if fy <= fx {
                x = y;
                fx = fy;
                sigma *= 1.5;
            } else {
                sigma *= 1.5f64.powf(-0.25);
            }
        }
    }
}

/// Compass search: first-improvement moves along ± each axis, halving the step after a
/// failed sweep and restarting from a random point once the step is negligible.
fn coordinate_search(eval: &mut BudgetedEvaluator, bounds: &Bounds, r: &mut ChaCha8Rng) -> Result<(), Halt> {
    let n = bounds.dimension();
    let range = (0..n).map(|j| bounds.width(j)).fold(0.0, f64::max);
    loop {
        let mut x = uniform_point(bounds, r);
        let mut fx = eval.eval(&x)?;
        let mut step = 0.25 * range;
        while step > 1e-10 * range {
            let mut improved = false;
            for j in 0..n {
                for dir in [1.0, -1.0] {
                    let mut y = x.clone();
                    y[j] += dir * step;
                    bounds.clip(&mut y);
                    if y[j] == x[j] {
                        continue;
                    }
                    let fy = eval.eval(&y)?;
                    if fy < fx {
                        x = y;
                        fx = fy;
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
    }
}

/// Nelder–Mead simplex search (reflection 1, expansion 2, contraction 0.5, shrink 0.5)
/// from a seeded uniform start with initial steps of 0.1 × range, clipping every trial
/// point to `bounds`. Restarts from a new point when the simplex collapses.
pub fn nelder_mead(eval: &mut BudgetedEvaluator, bounds: &Bounds, r: &mut ChaCha8Rng) -> Result<(), Halt> {
    let n = bounds.dimension();
    loop {
        let x0 = uniform_point(bounds, r);
        let mut simplex = vec![x0.clone()];
        for j in 0..n {
            let mut v = x0.clone();
            let step = 0.1 * bounds.width(j);
            v[j] = if v[j] + step <= bounds.upper[j] { v[j] + step } else { v[j] - step };
            simplex.push(v);
        }
        let mut values = Vec::with_capacity(n + 1);
        for v in &simplex {
            values.push(eval.eval(v)?);
        }
        nelder_mead_from(eval, bounds, simplex, values)?;
    }
}

fn nelder_mead_from(
    eval: &mut BudgetedEvaluator,
    bounds: &Bounds,
    mut simplex: Vec<Vec<f64>>,
    mut values: Vec<f64>,
) -> Result<(), Halt> {
    let n = bounds.dimension();
    let scale = (0..n).map(|j| bounds.width(j)).fold(0.0, f64::max);
    let point = |base: &[f64], towards: &[f64], t: f64| -> Vec<f64> {
        let mut p: Vec<f64> = base.iter().zip(towards).map(|(b, c)| b + t * (c - b)).collect();
        bounds.clip(&mut p);
        p
    };
    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let diameter = simplex[1..]
            .iter()
            .map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diameter <= 1e-12 * scale || values[n] - values[0] <= 1e-14 * (1.0 + values[0].abs()) {
            return Ok(());
        }

        let centroid: Vec<f64> =
            (0..n).map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64).collect();
        // Points on the line through the worst vertex and the centroid: t = 2 reflects, 3 expands,
        // 1.5 contracts outside, 0.5 contracts inside.
        let worst = simplex[n].clone();
        let xr = point(&worst, &centroid, 2.0);
        let fr = eval.eval(&xr)?;
        if fr < values[0] {
            let xe = point(&worst, &centroid, 3.0);
            let fe = eval.eval(&xe)?;
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let xc = point(&worst, &centroid, if fr < values[n] { 1.5 } else { 0.5 });
        let fc = eval.eval(&xc)?;
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        for i in 1..=n {
            simplex[i] = point(&simplex[0], &simplex[i], 0.5);
            values[i] = eval.eval(&simplex[i])?;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testbed::functions::{Family, TestFunction};

    #[test]
    fn budget_one_fails_with_one_evaluation() {
        let f = TestFunction::new(Family::Rastrigin, 2, 1, 0);
        for kind in OptimizerKind::ALL {
            let out = ToyOptimizer::new(kind, 1).run(&f, &f.bounds(), f.f_opt + DEFAULT_EPSILON, 3);
            assert_eq!((out.evaluations, out.success), (1, false), "{kind}");
        }
    }

    #[test]
    fn local_methods_solve_the_sphere() {
        let f = TestFunction::new(Family::Sphere, 2, 1, 0);
        for kind in [OptimizerKind::OnePlusOneEs, OptimizerKind::NelderMead, OptimizerKind::CoordinateSearch] {
            let out = ToyOptimizer::new(kind, 2000).run(&f, &f.bounds(), f.f_opt + DEFAULT_EPSILON, 1);
            assert!(out.success, "{kind}");
            assert!(out.evaluations <= 2000);
            assert!(out.best <= f.f_opt + DEFAULT_EPSILON);
        }
    }

    #[test]
    fn evaluator_counts_exactly() {
        let f = TestFunction::new(Family::Sphere, 2, 1, 0);
        let mut e = BudgetedEvaluator::new(&f, f64::NEG_INFINITY, 5).with_trace();
        for _ in 0..5 {
            assert!(e.eval(&[0.0, 0.0]).is_ok());
        }
        assert_eq!(e.eval(&[0.0, 0.0]), Err(Halt));
        let out = e.outcome();
        assert_eq!((out.evaluations, out.success, out.trace.len()), (5, false, 5));

        let mut e = BudgetedEvaluator::new(&f, f.f_opt + 0.01, 100);
        e.eval(&[4.0, 4.0]).unwrap();
        e.eval(&f.optimum()).unwrap();
        assert_eq!(e.eval(&[0.0, 0.0]), Err(Halt));
        let out = e.outcome();
        assert_eq!((out.evaluations, out.success), (2, true));
    }

    #[test]
    fn runs_are_reproducible() {
        let f = TestFunction::new(Family::Rosenbrock, 3, 2, 4);
        for kind in OptimizerKind::ALL {
            let t = ToyOptimizer::new(kind, 500);
            assert_eq!(t.run(&f, &f.bounds(), f.f_opt + 0.01, 8), t.run(&f, &f.bounds(), f.f_opt + 0.01, 8));
        }
    }
}
