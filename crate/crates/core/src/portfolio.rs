//! Portfolio construction.
//!
//! Optimizers are ranked per problem by SP1. The quality of a portfolio sums, over
//! all problems, `c * (best member rank)` when some member solves the problem and
//! a penalty of 1 otherwise, with `c = 1 / (l * cells)`. A value below 1 therefore
//! means every problem is solved by at least one member. Portfolios of size `k`
//! are found with a first-improvement local search over single swaps.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::archive::{PerformanceArchive, ProblemKey};
use crate::measures::sp1;

#[derive(Debug, Error, PartialEq)]
pub enum PortfolioError {
    #[error("empty portfolio")]
    Empty,
    #[error("portfolio size {k} must satisfy 1 <= k < {universe}")]
    InvalidSize { k: usize, universe: usize },
    #[error("duplicate member `{0}`")]
    DuplicateMember(String),
    #[error("optimizer `{0}` is not in the universe")]
    UnknownOptimizer(String),
    #[error("optimizer `{optimizer}` has no runs on {problem}")]
    CoverageGap { optimizer: String, problem: ProblemKey },
    #[error("rank table has no problems for the requested dimensions")]
    NoProblems,
    #[error("at least one restart is required")]
    NoRestarts,
}

/// A set of `k` optimizer ids drawn from a universe of `l` optimizers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Portfolio {
    members: Vec<String>,
    universe_size: usize,
}

impl Portfolio {
    pub fn new(members: Vec<String>, universe_size: usize) -> Result<Self, PortfolioError> {
        if members.is_empty() {
            return Err(PortfolioError::Empty);
        }
        if members.len() >= universe_size {
            return Err(PortfolioError::InvalidSize { k: members.len(), universe: universe_size });
        }
        let mut seen = BTreeSet::new();
        for m in &members {
            if !seen.insert(m) {
                return Err(PortfolioError::DuplicateMember(m.clone()));
            }
        }
        Ok(Portfolio { members, universe_size })
    }

    pub fn members(&self) -> &[String] {
        &self.members
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    pub fn universe_size(&self) -> usize {
        self.universe_size
    }
}

/// Per-problem SP1 ranks of every optimizer of a universe; `None` marks unsolved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    universe: Vec<String>,
    ranks: BTreeMap<ProblemKey, Vec<Option<u32>>>,
}

impl RankTable {
    /// Ranks optimizers by ascending SP1 per problem (ties: lexicographic id).
    pub fn build(archive: &PerformanceArchive, universe: &[String]) -> Result<Self, PortfolioError> {
        let mut universe = universe.to_vec();
        universe.sort();
        universe.dedup();
        let mut ranks = BTreeMap::new();
        for problem in archive.problems() {
            let mut scored = Vec::with_capacity(universe.len());
            for (i, opt) in universe.iter().enumerate() {
                let runs = archive.runs(opt, &problem).ok_or_else(|| PortfolioError::CoverageGap {
                    optimizer: opt.clone(),
                    problem: problem.clone(),
                })?;
                let v = sp1(runs).expect("archive runs are non-empty and homogeneous").value;
                scored.push((i, v));
            }
            ranks.insert(problem, ranks_from_scores(&scored, universe.len()));
        }
        Ok(RankTable { universe, ranks })
    }

    /// Builds a table from explicit per-problem SP1-like scores (`None` = unsolved).
    pub fn from_scores(
        universe: &[String],
        scores: BTreeMap<ProblemKey, Vec<Option<f64>>>,
    ) -> Result<Self, PortfolioError> {
        let mut order: Vec<usize> = (0..universe.len()).collect();
        order.sort_by(|&a, &b| universe[a].cmp(&universe[b]));
        let sorted: Vec<String> = order.iter().map(|&i| universe[i].clone()).collect();
        let mut ranks = BTreeMap::new();
        for (problem, values) in scores {
            if values.len() != universe.len() {
                return Err(PortfolioError::CoverageGap {
                    optimizer: universe.get(values.len()).cloned().unwrap_or_default(),
                    problem,
                });
            }
            let scored: Vec<(usize, Option<f64>)> =
                order.iter().enumerate().map(|(pos, &orig)| (pos, values[orig])).collect();
            ranks.insert(problem, ranks_from_scores(&scored, sorted.len()));
        }
        Ok(RankTable { universe: sorted, ranks })
    }

    /// Universe in lexicographic order.
    pub fn universe(&self) -> &[String] {
        &self.universe
    }

    pub fn problems(&self) -> impl Iterator<Item = &ProblemKey> {
        self.ranks.keys()
    }

    pub fn dimensions(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.ranks.keys().map(|p| p.dimension).collect();
        set.into_iter().collect()
    }

    /// Rank (1 = best) of `optimizer` on `problem`; `None` when unsolved or unknown.
    pub fn rank(&self, optimizer: &str, problem: &ProblemKey) -> Option<u32> {
        let idx = self.universe.binary_search_by(|u| u.as_str().cmp(optimizer)).ok()?;
        self.ranks.get(problem).and_then(|r| r[idx])
    }

    fn index_of(&self, optimizer: &str) -> Result<usize, PortfolioError> {
        self.universe
            .binary_search_by(|u| u.as_str().cmp(optimizer))
            .map_err(|_| PortfolioError::UnknownOptimizer(optimizer.to_string()))
    }

    fn cells(&self, dimensions: &[usize]) -> Vec<&Vec<Option<u32>>> {
        self.ranks
            .iter()
            .filter(|(p, _)| dimensions.contains(&p.dimension))
            .map(|(_, r)| r)
            .collect()
    }
}

fn ranks_from_scores(scored: &[(usize, Option<f64>)], n: usize) -> Vec<Option<u32>> {
    // `scored` is in lexicographic id order, so a stable sort breaks ties by id.
    let mut solved: Vec<(usize, f64)> = scored.iter().filter_map(|&(i, v)| v.map(|v| (i, v))).collect();
    solved.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal));
    let mut ranks = vec![None; n];
    for (r, (i, _)) in solved.into_iter().enumerate() {
        ranks[i] = Some(r as u32 + 1);
    }
    ranks
}

/// Exact portfolio quality: `numerator / denominator` with `denominator = l * cells`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct QualityScore {
    pub numerator: u64,
    pub denominator: u64,
}

impl QualityScore {
    pub fn value(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }
}

/// Precomputed view of a rank table restricted to some dimensions.
struct QualityKernel<'a> {
    cells: Vec<&'a Vec<Option<u32>>>,
    l: u64,
}

impl<'a> QualityKernel<'a> {
    fn new(table: &'a RankTable, dimensions: &[usize]) -> Result<Self, PortfolioError> {
        let cells = table.cells(dimensions);
        if cells.is_empty() {
            return Err(PortfolioError::NoProblems);
        }
        Ok(QualityKernel { cells, l: table.universe.len() as u64 })
    }

    fn score(&self, members: &[usize]) -> QualityScore {
        let penalty = self.l * self.cells.len() as u64;
        let mut numerator = 0;
        for ranks in &self.cells {
            numerator += members
                .iter()
                .filter_map(|&m| ranks[m])
                .min()
                .map_or(penalty, u64::from);
        }
        QualityScore { numerator, denominator: penalty }
    }
}

fn member_indices(table: &RankTable, members: &[String]) -> Result<Vec<usize>, PortfolioError> {
    if members.is_empty() {
        return Err(PortfolioError::Empty);
    }
    members.iter().map(|m| table.index_of(m)).collect()
}

/// Exact quality of `members` over the problems of `dimensions`.
pub fn quality_score(
    members: &[String],
    table: &RankTable,
    dimensions: &[usize],
) -> Result<QualityScore, PortfolioError> {
    let idx = member_indices(table, members)?;
    Ok(QualityKernel::new(table, dimensions)?.score(&idx))
}

/// Ranking-based quality `m(A)`; lower is better.
pub fn quality(portfolio: &Portfolio, table: &RankTable, dimensions: &[usize]) -> Result<f64, PortfolioError> {
    quality_score(portfolio.members(), table, dimensions).map(|q| q.value())
}

/// True iff the portfolio quality over all dimensions of the table is below 1.
pub fn check_solves_all(portfolio: &Portfolio, table: &RankTable) -> bool {
    quality(portfolio, table, &table.dimensions()).is_ok_and(|m| m < 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalSearchOutcome {
    pub portfolio: Portfolio,
    pub quality: f64,
    pub seed: u64,
    /// Quality after initialization and after every accepted swap.
    pub trace: Vec<f64>,
}

/// First-improvement local search from a seeded random `k`-subset.
///
/// Candidate swaps bring in `a'` (outer loop, lexicographic order over the
/// optimizers outside the portfolio) for `a` (inner loop, member order); the first
/// swap that strictly lowers the quality is applied and the scan restarts. The
/// search stops at a portfolio no single swap improves.
pub fn local_search(
    table: &RankTable,
    universe: &[String],
    k: usize,
    seed: u64,
) -> Result<LocalSearchOutcome, PortfolioError> {
    let mut universe_idx: Vec<usize> = universe.iter().map(|u| table.index_of(u)).collect::<Result<_, _>>()?;
    universe_idx.sort_unstable();
    universe_idx.dedup();
    let l = universe_idx.len();
    if k == 0 || k >= l {
        return Err(PortfolioError::InvalidSize { k, universe: l });
    }
    let kernel = QualityKernel::new(table, &table.dimensions())?;

    let mut rng = crate::seed::rng(seed);
    let mut shuffled = universe_idx.clone();
    shuffled.shuffle(&mut rng);
    let mut members: Vec<usize> = shuffled[..k].to_vec();
    let mut current = kernel.score(&members);
    let mut trace = vec![current.value()];

    'search: loop {
        // universe_idx is sorted, and table indices follow lexicographic id order.
        for &incoming in &universe_idx {
            if members.contains(&incoming) {
                continue;
            }
            for pos in 0..members.len() {
                let outgoing = members[pos];
                members[pos] = incoming;
                let candidate = kernel.score(&members);
                if candidate.numerator < current.numerator {
                    current = candidate;
                    trace.push(current.value());
                    continue 'search;
                }
                members[pos] = outgoing;
            }
        }
        break;
    }

    let ids = members.iter().map(|&i| table.universe[i].clone()).collect();
    Ok(LocalSearchOutcome {
        portfolio: Portfolio::new(ids, l)?,
        quality: current.value(),
        seed,
        trace,
    })
}

/// Runs `restarts` local searches (seeds `seed`, `seed + 1`, ...) and keeps the
/// best portfolio; ties go to the earliest restart.
pub fn best_of_restarts(
    table: &RankTable,
    universe: &[String],
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<LocalSearchOutcome, PortfolioError> {
    if restarts == 0 {
        return Err(PortfolioError::NoRestarts);
    }
    let mut best: Option<LocalSearchOutcome> = None;
    for r in 0..restarts as u64 {
        let outcome = local_search(table, universe, k, seed.wrapping_add(r))?;
        if best.as_ref().is_none_or(|b| outcome.quality < b.quality) {
            best = Some(outcome);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Whether no single swap with an optimizer from `universe` lowers the quality.
pub fn is_swap_local_optimum(
    portfolio: &Portfolio,
    table: &RankTable,
    universe: &[String],
) -> Result<bool, PortfolioError> {
    let kernel = QualityKernel::new(table, &table.dimensions())?;
    let mut members = member_indices(table, portfolio.members())?;
    let current = kernel.score(&members);
    for u in universe {
        let incoming = table.index_of(u)?;
        if members.contains(&incoming) {
            continue;
        }
        for pos in 0..members.len() {
            let outgoing = members[pos];
            members[pos] = incoming;
            let better = kernel.score(&members).numerator < current.numerator;
            members[pos] = outgoing;
            if better {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Portfolio JSON: `{ "members": [...], "quality": m, "seed": s }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PortfolioJson {
    pub members: Vec<String>,
    pub quality: f64,
    pub seed: u64,
}

impl From<&LocalSearchOutcome> for PortfolioJson {
    fn from(o: &LocalSearchOutcome) -> Self {
        PortfolioJson { members: o.portfolio.members().to_vec(), quality: o.quality, seed: o.seed }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("o{i}")).collect()
    }

    fn table(universe: &[String], scores: Vec<Vec<Option<f64>>>) -> RankTable {
        let map = scores
            .into_iter()
            .enumerate()
            .map(|(i, s)| (ProblemKey::new(format!("f{i}"), 2).unwrap(), s))
            .collect();
        RankTable::from_scores(universe, map).unwrap()
    }

    #[test]
    fn ranks_follow_sp1_with_unsolved_last() {
        let u = ids(3);
        let t = table(&u, vec![vec![Some(10.0), Some(5.0), None]]);
        let p = ProblemKey::new("f0", 2).unwrap();
        assert_eq!(t.rank("o0", &p), Some(2));
        assert_eq!(t.rank("o1", &p), Some(1));
        assert_eq!(t.rank("o2", &p), None);
    }

    #[test]
    fn equal_sp1_ranks_by_id() {
        let u = vec!["b".to_string(), "a".to_string(), "c".to_string()];
        let t = table(&u, vec![vec![Some(3.0); 3]]);
        let p = ProblemKey::new("f0", 2).unwrap();
        assert_eq!(t.rank("a", &p), Some(1));
        assert_eq!(t.rank("b", &p), Some(2));
        assert_eq!(t.rank("c", &p), Some(3));
    }

    #[test]
    fn quality_of_rank_one_everywhere() {
        // 96 cells, l = 209, a member ranked first on every cell.
        let u = ids(209);
        let mut map = BTreeMap::new();
        for d in [2usize, 3, 5, 10] {
            for f in 0..24 {
                let mut s = vec![Some(100.0); 209];
                s[0] = Some(1.0);
                map.insert(ProblemKey::new(format!("f{f}"), d).unwrap(), s);
            }
        }
        let t = RankTable::from_scores(&u, map).unwrap();
        let p = Portfolio::new(vec!["o0".into(), "o5".into()], 209).unwrap();
        let m = quality(&p, &t, &[2, 3, 5, 10]).unwrap();
        assert!((m - 1.0 / 209.0).abs() < 1e-15);
        assert!(check_solves_all(&p, &t));
    }

    #[test]
    fn quality_of_portfolio_solving_nothing() {
        let u = ids(4);
        let t = table(&u, vec![vec![Some(1.0), None, None, None], vec![Some(1.0), None, Some(2.0), None]]);
        let p = Portfolio::new(vec!["o1".into(), "o3".into()], 4).unwrap();
        assert_eq!(quality(&p, &t, &[2]).unwrap(), 2.0);
        assert!(!check_solves_all(&p, &t));
    }

    #[test]
    fn portfolio_validation() {
        assert_eq!(Portfolio::new(vec![], 3), Err(PortfolioError::Empty));
        assert!(matches!(Portfolio::new(ids(3), 3), Err(PortfolioError::InvalidSize { .. })));
        assert!(matches!(
            Portfolio::new(vec!["a".into(), "a".into()], 3),
            Err(PortfolioError::DuplicateMember(_))
        ));
    }

    #[test]
    fn local_optimum_start_is_returned_unchanged() {
        // o0 is rank 1 on every problem; any portfolio containing it is optimal.
        let u = ids(4);
        let t = table(
            &u,
            vec![
                vec![Some(1.0), Some(2.0), Some(3.0), Some(4.0)],
                vec![Some(1.0), Some(4.0), Some(3.0), Some(2.0)],
            ],
        );
        for seed in 0..20 {
            let out = local_search(&t, &u, 1, seed).unwrap();
            assert_eq!(out.portfolio.members(), &["o0".to_string()]);
            if out.trace.len() == 1 {
                // started at the optimum: nothing accepted
                assert_eq!(out.trace[0], out.quality);
            }
        }
    }

    #[test]
    fn restarts_one_equals_single_search() {
        let u = ids(6);
        let t = table(
            &u,
            vec![
                vec![Some(3.0), Some(1.0), None, Some(2.0), Some(9.0), None],
                vec![None, Some(5.0), Some(1.0), None, Some(2.0), Some(3.0)],
                vec![Some(1.0), None, None, Some(4.0), None, Some(2.0)],
            ],
        );
        let single = local_search(&t, &u, 2, 17).unwrap();
        let best = best_of_restarts(&t, &u, 2, 1, 17).unwrap();
        assert_eq!(single, best);
    }
}
