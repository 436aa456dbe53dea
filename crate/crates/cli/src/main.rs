use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use asbench::cv::{folds, Protocol};
use asbench::experiment::{run_experiment, ExperimentConfig};
use asbench::measures::MeasureTable;
use asbench::portfolio::{best_of_restarts, RankTable};
use asbench::testbed::{default_optimizers, generate_archive, SuiteSpec, DEFAULT_EPSILON};
use asbench::PerformanceArchive;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

#[derive(Parser)]
#[command(name = "asbench", version, about = "Benchmarking feature-based algorithm selection")]
struct Cli {
    /// Worker threads for parallel runs and folds.
    #[arg(long, global = true, env = "ASBENCH_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute ERT, SP1 and their relative forms for a portfolio.
    Measures(MeasuresArgs),
    /// Select a portfolio by restarted first-improvement local search.
    BuildPortfolio(PortfolioArgs),
    /// Run the optimizers of the testbed on a synthetic suite.
    GenerateArchive(GenerateArgs),
    /// Print the cross-validation folds of a synthetic suite.
    Folds(FoldsArgs),
    /// Evaluate selection systems and write the result CSVs.
    Run(RunArgs),
}

#[derive(Args)]
struct MeasuresArgs {
    #[arg(long)]
    archive: PathBuf,
    /// Comma-separated optimizer ids.
    #[arg(long, value_delimiter = ',')]
    portfolio: Vec<String>,
    /// Report CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the unrounded measures as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct PortfolioArgs {
    #[arg(long)]
    archive: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 31)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Restrict the universe to these optimizers (comma-separated).
    #[arg(long, value_delimiter = ',')]
    universe: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Suite JSON file or inline JSON object.
    #[arg(long)]
    suite: String,
    #[arg(long)]
    budget: u64,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FoldsArgs {
    #[arg(long)]
    suite: String,
    #[arg(long)]
    protocol: Protocol,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    ri_folds: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment JSON; its fields override the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    archive: Option<PathBuf>,
    #[arg(long)]
    suite: Option<String>,
    #[arg(long, value_delimiter = ',')]
    protocol: Vec<Protocol>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum CliError {
    Config(String),
    Data(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn config<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Config(e.to_string())
}

fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads(cli.jobs).and_then(|()| match cli.command {
        Command::Measures(a) => cmd_measures(a),
        Command::BuildPortfolio(a) => cmd_build_portfolio(a),
        Command::GenerateArchive(a) => cmd_generate_archive(a),
        Command::Folds(a) => cmd_folds(a),
        Command::Run(a) => cmd_run(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (CliError::Config(m) | CliError::Data(m)) = &e;
            eprintln!("asbench: {m}");
            ExitCode::from(e.code())
        }
    }
}

fn configure_threads(jobs: Option<usize>) -> CliResult<()> {
    match jobs {
        Some(0) => Err(CliError::Config("--jobs: must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(config),
        None => Ok(()),
    }
}

fn emit(out: Option<&Path>, body: &str) -> CliResult<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| data(format!("{}: {e}", dir.display())))?;
            }
            fs::write(path, body).map_err(|e| data(format!("{}: {e}", path.display())))
        }
        None => std::io::stdout().write_all(body.as_bytes()).map_err(data),
    }
}

fn load_archive(path: &Path) -> CliResult<PerformanceArchive> {
    if !path.exists() {
        return Err(CliError::Config(format!("--archive: {} does not exist", path.display())));
    }
    PerformanceArchive::ingest_csv(path).map_err(|e| data(format!("{}: {e}", path.display())))
}

/// Reads a JSON value given either inline or as a file path.
fn json_arg(flag: &str, text: &str) -> CliResult<Value> {
    let raw = if text.trim_start().starts_with('{') {
        text.to_string()
    } else {
        fs::read_to_string(text).map_err(|e| CliError::Config(format!("{flag}: {text}: {e}")))?
    };
    serde_json::from_str(&raw).map_err(|e| CliError::Config(format!("{flag}: {e}")))
}

fn parse_suite(text: &str) -> CliResult<SuiteSpec> {
    serde_json::from_value(json_arg("--suite", text)?).map_err(|e| CliError::Config(format!("--suite: {e}")))
}

fn to_json(value: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn cmd_measures(a: MeasuresArgs) -> CliResult<()> {
    if a.portfolio.iter().all(|m| m.trim().is_empty()) {
        return Err(CliError::Config("--portfolio: at least one optimizer is required".into()));
    }
    let archive = load_archive(&a.archive)?;
    let table = MeasureTable::build(&archive, &a.portfolio).map_err(data)?;
    if let Some(path) = &a.json {
        let cells: Vec<Value> = table
            .problems()
            .iter()
            .flat_map(|p| table.members().iter().map(move |m| (m, p)))
            .map(|(m, p)| {
                let c = table.cell(m, p).expect("cell of a built table");
                json!({
                    "optimizer": m,
                    "function": p.function_id,
                    "dimension": p.dimension,
                    "ERT": c.ert.value,
                    "SP1": c.sp1.value,
                    "relERT": c.rel_ert.value,
                    "relSP1": c.rel_sp1.value,
                })
            })
            .collect();
        emit(Some(path), &to_json(&cells))?;
    }
    emit(a.out.as_deref(), &table.report_csv())
}

fn cmd_build_portfolio(a: PortfolioArgs) -> CliResult<()> {
    let archive = load_archive(&a.archive)?;
    let universe = if a.universe.is_empty() { archive.optimizers() } else { a.universe.clone() };
    let table = RankTable::build(&archive, &universe).map_err(data)?;
    let outcome = best_of_restarts(&table, &universe, a.k, a.restarts, a.seed).map_err(config)?;
    let body = json!({
        "members": outcome.portfolio.members(),
        "quality": outcome.quality,
        "seed": outcome.seed,
        "restarts": a.restarts,
        "solves_all": outcome.quality < 1.0,
    });
    emit(a.out.as_deref(), &to_json(&body))
}

fn cmd_generate_archive(a: GenerateArgs) -> CliResult<()> {
    if a.budget == 0 {
        return Err(CliError::Config("--budget: must be at least 1".into()));
    }
    let suite = parse_suite(&a.suite)?.build();
    let archive = generate_archive(&suite, &default_optimizers(a.budget), a.epsilon, a.seed).map_err(data)?;
    emit(a.out.as_deref(), &archive.to_csv_string())
}

fn cmd_folds(a: FoldsArgs) -> CliResult<()> {
    let keys: Vec<_> = parse_suite(&a.suite)?.build().iter().map(|f| f.key()).collect();
    let specs = folds(a.protocol, &keys, a.seed, a.ri_folds).map_err(config)?;
    emit(a.out.as_deref(), &to_json(&specs))
}

/// Experiment config from the flags, overlaid with the fields of the config file.
fn experiment_config(a: &RunArgs) -> CliResult<ExperimentConfig> {
    let mut merged = Map::new();
    if let Some(p) = &a.archive {
        merged.insert("archive".into(), json!(p));
    }
    if let Some(s) = &a.suite {
        merged.insert("suite".into(), json_arg("--suite", s)?);
    }
    if !a.protocol.is_empty() {
        merged.insert("protocols".into(), json!(a.protocol));
    }
    if let Some(r) = a.runs {
        merged.insert("runs".into(), json!(r));
    }
    if let Some(s) = a.seed {
        merged.insert("seed".into(), json!(s));
    }
    if let Some(o) = &a.out {
        merged.insert("out".into(), json!(o));
    }
    if let Some(path) = &a.config {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("--config: {}: {e}", path.display())))?;
        let Value::Object(file) = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("--config: {e}")))?
        else {
            return Err(CliError::Config("--config: expected a JSON object".into()));
        };
        if file.contains_key("archive") || file.contains_key("testbed_archive") {
            merged.remove("archive");
        }
        merged.extend(file);
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Config(format!("config: {e}")))
}

fn cmd_run(a: RunArgs) -> CliResult<()> {
    let cfg = experiment_config(&a)?;
    let out = cfg.out.clone().ok_or_else(|| CliError::Config("out: an output directory is required".into()))?;
    let reports = run_experiment(&cfg).map_err(|e| if e.is_config() { config(&e) } else { data(&e) })?;
    for r in &reports {
        r.write(&out).map_err(data)?;
    }
    Ok(())
}
