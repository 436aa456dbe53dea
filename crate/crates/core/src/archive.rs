//! Archived optimizer performance data.
//!
//! An archive holds one [`RunRecord`] per (optimizer, function instance): how many
//! objective evaluations the optimizer spent, whether it reached the target, and
//! the evaluation budget it was allowed. Budgets are stored per run because
//! optimizers terminate under different limits, and ERT is sensitive to that.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Header of the archive CSV format.
pub const CSV_HEADER: [&str; 7] = [
    "optimizer",
    "function",
    "dimension",
    "instance",
    "evaluations",
    "success",
    "budget",
];

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("bad header: expected `{expected}`, found `{found}`")]
    BadHeader { expected: String, found: String },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("duplicate record for optimizer `{optimizer}` on {instance}")]
    Duplicate { optimizer: String, instance: InstanceKey },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("optimizer `{optimizer}` does not cover all instances of {problem}")]
    RaggedCoverage { optimizer: String, problem: ProblemKey },
    #[error("unknown problem {0}")]
    UnknownProblem(ProblemKey),
    #[error("no record for optimizer `{optimizer}` on {instance}")]
    MissingRecord { optimizer: String, instance: InstanceKey },
}

/// A benchmark function at a given dimension.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProblemKey {
    pub function_id: String,
    pub dimension: usize,
}

impl ProblemKey {
    pub fn new(function_id: impl Into<String>, dimension: usize) -> Result<Self, ArchiveError> {
        let function_id = function_id.into();
        if function_id.is_empty() {
            return Err(ArchiveError::InvalidRecord("empty function id".into()));
        }
        if dimension == 0 {
            return Err(ArchiveError::InvalidRecord("dimension must be at least 1".into()));
        }
        Ok(ProblemKey { function_id, dimension })
    }
}

impl fmt::Display for ProblemKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}D", self.function_id, self.dimension)
    }
}

/// One instance of a [`ProblemKey`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InstanceKey {
    pub problem: ProblemKey,
    pub instance_id: u32,
}

impl InstanceKey {
    pub fn new(problem: ProblemKey, instance_id: u32) -> Result<Self, ArchiveError> {
        if instance_id == 0 {
            return Err(ArchiveError::InvalidRecord("instance id must be at least 1".into()));
        }
        Ok(InstanceKey { problem, instance_id })
    }

    pub fn dimension(&self) -> usize {
        self.problem.dimension
    }
}

impl fmt::Display for InstanceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.problem, self.instance_id)
    }
}

/// Outcome of one archived optimizer run on one function instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub optimizer_id: String,
    pub instance: InstanceKey,
    /// Evaluations until the target was hit, or until the optimizer gave up.
    pub evaluations: u64,
    pub success: bool,
    pub budget: u64,
}

impl RunRecord {
    pub fn new(
        optimizer_id: impl Into<String>,
        instance: InstanceKey,
        evaluations: u64,
        success: bool,
        budget: u64,
    ) -> Result<Self, ArchiveError> {
        let record = RunRecord {
            optimizer_id: optimizer_id.into(),
            instance,
            evaluations,
            success,
            budget,
        };
        record.validate()?;
        Ok(record)
    }

    fn validate(&self) -> Result<(), ArchiveError> {
        if self.optimizer_id.is_empty() {
            return Err(ArchiveError::InvalidRecord("empty optimizer id".into()));
        }
        if self.evaluations == 0 {
            return Err(ArchiveError::InvalidRecord("evaluations must be at least 1".into()));
        }
        if self.evaluations > self.budget {
            return Err(ArchiveError::InvalidRecord(format!(
                "{} evaluations exceed the budget of {} (success={})",
                self.evaluations, self.budget, self.success
            )));
        }
        Ok(())
    }

    fn sort_key(&self) -> (&str, &ProblemKey, u32) {
        (&self.optimizer_id, &self.instance.problem, self.instance.instance_id)
    }
}

/// Validated, immutable collection of run records with an (optimizer, problem) index.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PerformanceArchive {
    records: Vec<RunRecord>,
    index: BTreeMap<(String, ProblemKey), Range<usize>>,
    instances: BTreeMap<ProblemKey, Vec<InstanceKey>>,
}

impl PerformanceArchive {
    /// Builds an archive, rejecting duplicate keys and ragged per-problem coverage.
    pub fn from_records(mut records: Vec<RunRecord>) -> Result<Self, ArchiveError> {
        for r in &records {
            r.validate()?;
        }
        records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        for pair in records.windows(2) {
            if pair[0].sort_key() == pair[1].sort_key() {
                return Err(ArchiveError::Duplicate {
                    optimizer: pair[1].optimizer_id.clone(),
                    instance: pair[1].instance.clone(),
                });
            }
        }

        let mut index: BTreeMap<(String, ProblemKey), Range<usize>> = BTreeMap::new();
        let mut start = 0;
        while start < records.len() {
            let key = (records[start].optimizer_id.clone(), records[start].instance.problem.clone());
            let mut end = start + 1;
            while end < records.len()
                && records[end].optimizer_id == key.0
                && records[end].instance.problem == key.1
            {
                end += 1;
            }
            index.insert(key, start..end);
            start = end;
        }

        let mut instances: BTreeMap<ProblemKey, BTreeSet<InstanceKey>> = BTreeMap::new();
        for r in &records {
            instances
                .entry(r.instance.problem.clone())
                .or_default()
                .insert(r.instance.clone());
        }
        for ((optimizer, problem), range) in &index {
            if range.len() != instances[problem].len() {
                return Err(ArchiveError::RaggedCoverage {
                    optimizer: optimizer.clone(),
                    problem: problem.clone(),
                });
            }
        }

        Ok(PerformanceArchive {
            records,
            index,
            instances: instances
                .into_iter()
                .map(|(k, v)| (k, v.into_iter().collect()))
                .collect(),
        })
    }

    pub fn ingest_csv(path: impl AsRef<Path>) -> Result<Self, ArchiveError> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(file)
    }

    /// Reads the archive CSV format. Errors carry the 1-based line number.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, ArchiveError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::None)
            .from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.iter().ne(CSV_HEADER.iter().copied()) {
            return Err(ArchiveError::BadHeader {
                expected: CSV_HEADER.join(","),
                found: header.iter().collect::<Vec<_>>().join(","),
            });
        }

        let mut records = Vec::new();
        let mut seen: BTreeSet<(String, InstanceKey)> = BTreeSet::new();
        for row in rdr.records() {
            let row = row.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                ArchiveError::Malformed { line, message: e.to_string() }
            })?;
            let line = row.position().map(|p| p.line()).unwrap_or(0);
            let malformed = |message: String| ArchiveError::Malformed { line, message };

            let field = |i: usize| row.get(i).unwrap_or("");
            let parse_u64 = |i: usize| -> Result<u64, ArchiveError> {
                field(i)
                    .parse::<u64>()
                    .map_err(|_| malformed(format!("`{}` is not a valid {}", field(i), CSV_HEADER[i])))
            };
            let dimension = parse_u64(2)? as usize;
            let instance_id = u32::try_from(parse_u64(3)?)
                .map_err(|_| malformed("instance id out of range".into()))?;
            let evaluations = parse_u64(4)?;
            let success = match field(5) {
                "0" => false,
                "1" => true,
                other => return Err(malformed(format!("success must be 0 or 1, found `{other}`"))),
            };
            let budget = parse_u64(6)?;

            let problem = ProblemKey::new(field(1), dimension).map_err(|e| malformed(e.to_string()))?;
            let instance = InstanceKey::new(problem, instance_id).map_err(|e| malformed(e.to_string()))?;
            let record = RunRecord::new(field(0), instance, evaluations, success, budget)
                .map_err(|e| malformed(e.to_string()))?;
            if !seen.insert((record.optimizer_id.clone(), record.instance.clone())) {
                return Err(ArchiveError::Duplicate {
                    optimizer: record.optimizer_id,
                    instance: record.instance,
                });
            }
            records.push(record);
        }
        Self::from_records(records)
    }

    /// Writes records in stable (optimizer, function, dimension, instance) order.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), ArchiveError> {
        let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        wtr.write_record(CSV_HEADER)?;
        for r in &self.records {
            wtr.write_record([
                r.optimizer_id.as_str(),
                r.instance.problem.function_id.as_str(),
                &r.instance.problem.dimension.to_string(),
                &r.instance.instance_id.to_string(),
                &r.evaluations.to_string(),
                if r.success { "1" } else { "0" },
                &r.budget.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn export_csv(&self, path: impl AsRef<Path>) -> Result<(), ArchiveError> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("archive ids are utf-8")
    }

    pub fn records(&self) -> &[RunRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Ascending instance keys of a problem.
    pub fn instances_of(&self, problem: &ProblemKey) -> Result<Vec<InstanceKey>, ArchiveError> {
        self.instances
            .get(problem)
            .cloned()
            .ok_or_else(|| ArchiveError::UnknownProblem(problem.clone()))
    }

    /// Runs of one optimizer on one problem, ordered by instance id.
    pub fn runs(&self, optimizer: &str, problem: &ProblemKey) -> Option<&[RunRecord]> {
        self.index
            .get(&(optimizer.to_string(), problem.clone()))
            .map(|r| &self.records[r.clone()])
    }

    pub fn record(&self, optimizer: &str, instance: &InstanceKey) -> Result<&RunRecord, ArchiveError> {
        self.runs(optimizer, &instance.problem)
            .and_then(|runs| runs.iter().find(|r| r.instance.instance_id == instance.instance_id))
            .ok_or_else(|| ArchiveError::MissingRecord {
                optimizer: optimizer.to_string(),
                instance: instance.clone(),
            })
    }

    /// Optimizer ids in lexicographic order.
    pub fn optimizers(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.index.keys().map(|(o, _)| o.as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    }

    pub fn problems(&self) -> Vec<ProblemKey> {
        self.instances.keys().cloned().collect()
    }

    pub fn problems_of_dimension(&self, dimension: usize) -> Vec<ProblemKey> {
        self.instances.keys().filter(|p| p.dimension == dimension).cloned().collect()
    }

    pub fn dimensions(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.instances.keys().map(|p| p.dimension).collect();
        set.into_iter().collect()
    }

    /// Every instance of every problem, in key order.
    pub fn all_instances(&self) -> Vec<InstanceKey> {
        self.instances.values().flatten().cloned().collect()
    }

    /// Whether `optimizer` has runs for `problem`.
    pub fn covers(&self, optimizer: &str, problem: &ProblemKey) -> bool {
        self.index.contains_key(&(optimizer.to_string(), problem.clone()))
    }
}
