//! Fixed-target performance measures.
//!
//! ERT divides all evaluations (successful and unsuccessful runs) by the number
//! of successes, so it depends on how long failing runs were allowed to go on.
//! SP1 only looks at successful runs: mean successful evaluations divided by the
//! success rate. Relative forms divide by the best value among the portfolio on
//! the same function; missing relative values are imputed PAR10-style with ten
//! times the worst defined value of the dimension.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::archive::{PerformanceArchive, ProblemKey, RunRecord};

#[derive(Debug, Error, PartialEq)]
pub enum MeasureError {
    #[error("empty run list")]
    EmptyRuns,
    #[error("run list mixes optimizers or problems")]
    MixedRuns,
    #[error("empty portfolio")]
    EmptyPortfolio,
    #[error("no portfolio member reaches the target on {0}; route through imputation")]
    BestUndefined(ProblemKey),
    #[error("optimizer `{optimizer}` has no runs on {problem}")]
    MissingCell { optimizer: String, problem: ProblemKey },
    #[error("no defined relative value in dimension {0}; PAR10 worst value unavailable")]
    NoWorstValue(usize),
    #[error("relative values of dimension {0} are not imputed")]
    NotImputed(usize),
    #[error("{0} is not a relative measure")]
    NotRelative(MeasureKind),
    #[error("no functions in dimension {0}")]
    EmptyDimension(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MeasureKind {
    Ert,
    Sp1,
    RelErt,
    RelSp1,
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MeasureKind::Ert => "ERT",
            MeasureKind::Sp1 => "SP1",
            MeasureKind::RelErt => "relERT",
            MeasureKind::RelSp1 => "relSP1",
        })
    }
}

impl MeasureKind {
    pub fn is_relative(self) -> bool {
        matches!(self, MeasureKind::RelErt | MeasureKind::RelSp1)
    }
}

/// A measure value; `value` is `None` when undefined (no successful run).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureValue {
    pub kind: MeasureKind,
    pub value: Option<f64>,
    pub imputed: bool,
}

impl MeasureValue {
    pub fn defined(kind: MeasureKind, value: f64) -> Self {
        MeasureValue { kind, value: Some(value), imputed: false }
    }

    pub fn undefined(kind: MeasureKind) -> Self {
        MeasureValue { kind, value: None, imputed: false }
    }

    pub fn is_defined(&self) -> bool {
        self.value.is_some()
    }
}

struct RunTotals {
    runs: u64,
    successes: u64,
    all_evals: u64,
    success_evals: u64,
}

/// Aggregates evaluation counts for a run list sharing one optimizer and problem.
fn totals(runs: &[RunRecord]) -> Result<RunTotals, MeasureError> {
    let first = runs.first().ok_or(MeasureError::EmptyRuns)?;
    let mut t = RunTotals { runs: 0, successes: 0, all_evals: 0, success_evals: 0 };
    for r in runs {
        if r.optimizer_id != first.optimizer_id || r.instance.problem != first.instance.problem {
            return Err(MeasureError::MixedRuns);
        }
        t.runs += 1;
        t.all_evals += r.evaluations;
        if r.success {
            t.successes += 1;
            t.success_evals += r.evaluations;
        }
    }
    Ok(t)
}

/// Expected runtime: all evaluations over the number of successful runs.
pub fn ert(runs: &[RunRecord]) -> Result<MeasureValue, MeasureError> {
    let t = totals(runs)?;
    Ok(ert_from_counts(t.all_evals, t.successes))
}

/// SP1: mean evaluations of successful runs over the success probability.
pub fn sp1(runs: &[RunRecord]) -> Result<MeasureValue, MeasureError> {
    let t = totals(runs)?;
    Ok(sp1_from_counts(t.success_evals, t.successes, t.runs))
}

/// ERT from an (evaluations, success) list that need not share an optimizer,
/// e.g. the per-instance outcomes of a selection system.
pub fn ert_of_outcomes(outcomes: &[(u64, bool)]) -> Result<MeasureValue, MeasureError> {
    if outcomes.is_empty() {
        return Err(MeasureError::EmptyRuns);
    }
    let all = outcomes.iter().map(|o| o.0).sum();
    let succ = outcomes.iter().filter(|o| o.1).count() as u64;
    Ok(ert_from_counts(all, succ))
}

/// SP1 counterpart of [`ert_of_outcomes`].
pub fn sp1_of_outcomes(outcomes: &[(u64, bool)]) -> Result<MeasureValue, MeasureError> {
    if outcomes.is_empty() {
        return Err(MeasureError::EmptyRuns);
    }
    let succ_evals = outcomes.iter().filter(|o| o.1).map(|o| o.0).sum();
    let succ = outcomes.iter().filter(|o| o.1).count() as u64;
    Ok(sp1_from_counts(succ_evals, succ, outcomes.len() as u64))
}

fn ert_from_counts(all_evals: u64, successes: u64) -> MeasureValue {
    if successes == 0 {
        return MeasureValue::undefined(MeasureKind::Ert);
    }
    MeasureValue::defined(MeasureKind::Ert, all_evals as f64 / successes as f64)
}

fn sp1_from_counts(success_evals: u64, successes: u64, runs: u64) -> MeasureValue {
    if successes == 0 {
        return MeasureValue::undefined(MeasureKind::Sp1);
    }
    // (sum/succ) / (succ/runs), folded into one division to keep integer inputs exact.
    let value = (success_evals as f64 * runs as f64) / (successes as f64 * successes as f64);
    MeasureValue::defined(MeasureKind::Sp1, value)
}

/// Measures of one optimizer on one problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellMeasures {
    pub ert: MeasureValue,
    pub sp1: MeasureValue,
    pub rel_ert: MeasureValue,
    pub rel_sp1: MeasureValue,
}

impl CellMeasures {
    pub fn get(&self, kind: MeasureKind) -> MeasureValue {
        match kind {
            MeasureKind::Ert => self.ert,
            MeasureKind::Sp1 => self.sp1,
            MeasureKind::RelErt => self.rel_ert,
            MeasureKind::RelSp1 => self.rel_sp1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestValue {
    pub optimizer: String,
    pub value: f64,
}

/// Largest defined (pre-imputation) relative values of one dimension.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WorstValues {
    pub rel_ert: Option<f64>,
    pub rel_sp1: Option<f64>,
}

/// ERT / SP1 / relERT / relSP1 of every (member, problem) cell of an archive.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureTable {
    members: Vec<String>,
    cells: BTreeMap<(String, ProblemKey), CellMeasures>,
    best_ert: BTreeMap<ProblemKey, Option<BestValue>>,
    best_sp1: BTreeMap<ProblemKey, Option<BestValue>>,
    worst: BTreeMap<usize, WorstValues>,
}

/// Lowest defined value; ties go to the lexicographically smallest id.
fn best_of<'a>(values: impl Iterator<Item = (&'a str, Option<f64>)>) -> Option<BestValue> {
    let mut best: Option<BestValue> = None;
    for (id, v) in values {
        let Some(v) = v else { continue };
        let better = match &best {
            None => true,
            Some(b) => v < b.value || (v == b.value && id < b.optimizer.as_str()),
        };
        if better {
            best = Some(BestValue { optimizer: id.to_string(), value: v });
        }
    }
    best
}

impl MeasureTable {
    /// Computes all measures for `members` over every problem of the archive.
    pub fn build(archive: &PerformanceArchive, members: &[String]) -> Result<Self, MeasureError> {
        if members.is_empty() {
            return Err(MeasureError::EmptyPortfolio);
        }
        let mut members = members.to_vec();
        members.sort();
        members.dedup();

        let mut cells = BTreeMap::new();
        let mut best_ert = BTreeMap::new();
        let mut best_sp1 = BTreeMap::new();
        for problem in archive.problems() {
            let mut raw = Vec::with_capacity(members.len());
            for m in &members {
                let runs = archive.runs(m, &problem).ok_or_else(|| MeasureError::MissingCell {
                    optimizer: m.clone(),
                    problem: problem.clone(),
                })?;
                raw.push((m.as_str(), ert(runs)?, sp1(runs)?));
            }
            let be = best_of(raw.iter().map(|(id, e, _)| (*id, e.value)));
            let bs = best_of(raw.iter().map(|(id, _, s)| (*id, s.value)));
            for (id, e, s) in raw {
                let rel = |v: MeasureValue, best: &Option<BestValue>, kind| match (v.value, best) {
                    (Some(v), Some(b)) => MeasureValue::defined(kind, v / b.value),
                    _ => MeasureValue::undefined(kind),
                };
                let cell = CellMeasures {
                    ert: e,
                    sp1: s,
                    rel_ert: rel(e, &be, MeasureKind::RelErt),
                    rel_sp1: rel(s, &bs, MeasureKind::RelSp1),
                };
                cells.insert((id.to_string(), problem.clone()), cell);
            }
            best_ert.insert(problem.clone(), be);
            best_sp1.insert(problem, bs);
        }

        let mut worst: BTreeMap<usize, WorstValues> = BTreeMap::new();
        for ((_, problem), cell) in &cells {
            let w = worst.entry(problem.dimension).or_default();
            let fold = |acc: Option<f64>, v: Option<f64>| match (acc, v) {
                (Some(a), Some(v)) => Some(a.max(v)),
                (None, v) => v,
                (a, None) => a,
            };
            w.rel_ert = fold(w.rel_ert, cell.rel_ert.value);
            w.rel_sp1 = fold(w.rel_sp1, cell.rel_sp1.value);
        }

        Ok(MeasureTable { members, cells, best_ert, best_sp1, worst })
    }

    /// Members in lexicographic order.
    pub fn members(&self) -> &[String] {
        &self.members
    }

    pub fn problems(&self) -> Vec<ProblemKey> {
        self.best_sp1.keys().cloned().collect()
    }

    pub fn problems_of_dimension(&self, dimension: usize) -> Vec<ProblemKey> {
        self.best_sp1.keys().filter(|p| p.dimension == dimension).cloned().collect()
    }

    pub fn dimensions(&self) -> Vec<usize> {
        self.worst.keys().copied().collect()
    }

    pub fn cell(&self, optimizer: &str, problem: &ProblemKey) -> Result<&CellMeasures, MeasureError> {
        self.cells
            .get(&(optimizer.to_string(), problem.clone()))
            .ok_or_else(|| MeasureError::MissingCell {
                optimizer: optimizer.to_string(),
                problem: problem.clone(),
            })
    }

    pub fn best_ert(&self, problem: &ProblemKey) -> Option<&BestValue> {
        self.best_ert.get(problem).and_then(Option::as_ref)
    }

    pub fn best_sp1(&self, problem: &ProblemKey) -> Option<&BestValue> {
        self.best_sp1.get(problem).and_then(Option::as_ref)
    }

    /// Worst defined relative values of a dimension, computed before any imputation.
    pub fn worst(&self, dimension: usize) -> WorstValues {
        self.worst.get(&dimension).copied().unwrap_or_default()
    }

    /// Replaces every undefined relative value of `dimension` by ten times the
    /// dimension's worst defined value of the same kind.
    pub fn impute_par10(&self, dimension: usize) -> Result<MeasureTable, MeasureError> {
        let worst = self.worst(dimension);
        let mut out = self.clone();
        for ((_, problem), cell) in out.cells.iter_mut() {
            if problem.dimension != dimension {
                continue;
            }
            for (slot, w) in [(&mut cell.rel_ert, worst.rel_ert), (&mut cell.rel_sp1, worst.rel_sp1)] {
                if slot.value.is_none() {
                    let w = w.ok_or(MeasureError::NoWorstValue(dimension))?;
                    slot.value = Some(10.0 * w);
                    slot.imputed = true;
                }
            }
        }
        Ok(out)
    }

    /// [`impute_par10`](Self::impute_par10) over every dimension.
    pub fn impute_all(&self) -> Result<MeasureTable, MeasureError> {
        let mut t = self.clone();
        for d in self.dimensions() {
            t = t.impute_par10(d)?;
        }
        Ok(t)
    }

    /// Report CSV: `optimizer,function,dimension,ERT,SP1,relERT,relSP1,imputed`.
    pub fn report_csv(&self) -> String {
        let mut out = String::from("optimizer,function,dimension,ERT,SP1,relERT,relSP1,imputed\n");
        for ((id, problem), c) in &self.cells {
            let v = |m: MeasureValue| m.value.map(format_g6).unwrap_or_else(|| "NA".to_string());
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                id,
                problem.function_id,
                problem.dimension,
                v(c.ert),
                v(c.sp1),
                v(c.rel_ert),
                v(c.rel_sp1),
                u8::from(c.rel_ert.imputed || c.rel_sp1.imputed)
            ));
        }
        out
    }
}

/// Relative value of a cell: its ERT or SP1 divided by the best member's value.
///
/// `kind` selects the relative measure. Undefined numerators stay undefined;
/// an undefined best value is an error so the caller goes through imputation.
pub fn relative(
    table: &MeasureTable,
    kind: MeasureKind,
    optimizer: &str,
    problem: &ProblemKey,
) -> Result<MeasureValue, MeasureError> {
    let (base_kind, best) = match kind {
        MeasureKind::RelErt => (MeasureKind::Ert, table.best_ert(problem)),
        MeasureKind::RelSp1 => (MeasureKind::Sp1, table.best_sp1(problem)),
        other => return Err(MeasureError::NotRelative(other)),
    };
    let best = best.ok_or_else(|| MeasureError::BestUndefined(problem.clone()))?;
    let cell = table.cell(optimizer, problem)?;
    Ok(match cell.get(base_kind).value {
        Some(v) => MeasureValue::defined(kind, v / best.value),
        None => MeasureValue::undefined(kind),
    })
}

fn imputed_rel_sp1(table: &MeasureTable, member: &str, problem: &ProblemKey) -> Result<f64, MeasureError> {
    table
        .cell(member, problem)?
        .rel_sp1
        .value
        .ok_or(MeasureError::NotImputed(problem.dimension))
}

/// Virtual best solver: per function of `dimension`, the lowest relSP1 among `portfolio`.
pub fn vbs_relsp1(
    table: &MeasureTable,
    portfolio: &[String],
    dimension: usize,
) -> Result<Vec<(ProblemKey, f64)>, MeasureError> {
    if portfolio.is_empty() {
        return Err(MeasureError::EmptyPortfolio);
    }
    let problems = table.problems_of_dimension(dimension);
    if problems.is_empty() {
        return Err(MeasureError::EmptyDimension(dimension));
    }
    problems
        .into_iter()
        .map(|p| {
            let mut best = f64::INFINITY;
            for m in portfolio {
                best = best.min(imputed_rel_sp1(table, m, &p)?);
            }
            Ok((p, best))
        })
        .collect()
}

/// Mean imputed relSP1 of `member` over the functions of `dimension`.
pub fn mean_relsp1(table: &MeasureTable, member: &str, dimension: usize) -> Result<f64, MeasureError> {
    let problems = table.problems_of_dimension(dimension);
    if problems.is_empty() {
        return Err(MeasureError::EmptyDimension(dimension));
    }
    let mut sum = 0.0;
    for p in &problems {
        sum += imputed_rel_sp1(table, member, p)?;
    }
    Ok(sum / problems.len() as f64)
}

/// Single best solver: the member with the lowest mean imputed relSP1 in `dimension`.
/// Ties go to the lexicographically smallest id.
pub fn sbs(table: &MeasureTable, portfolio: &[String], dimension: usize) -> Result<String, MeasureError> {
    let mut ids = portfolio.to_vec();
    ids.sort();
    let mut best: Option<(String, f64)> = None;
    for id in ids {
        let mean = mean_relsp1(table, &id, dimension)?;
        if best.as_ref().is_none_or(|(_, b)| mean < *b) {
            best = Some((id, mean));
        }
    }
    best.map(|(id, _)| id).ok_or(MeasureError::EmptyPortfolio)
}

/// Formats like C's `%.6g`: six significant digits, trailing zeros removed,
/// exponent form outside `[1e-4, 1e6)`.
pub fn format_g6(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{:.5e}", v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, v)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
