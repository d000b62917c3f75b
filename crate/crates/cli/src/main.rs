//! `ate-repair` command-line front end.
//!
//! Exit status: 0 when the effect ends in the target interval, 2 when the
//! run was valid but missed it, 1 on any error. Errors and warnings go to
//! stderr as one JSON object per line with a stable `code`.

mod bench;
mod config;
mod report;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use ate_repair::data::{load_csv, write_csv, AttrKind, Column};
use ate_repair::estimator::{self, EstimatorConfig, EstimatorKind, UpdateMode};
use ate_repair::oracle::{self, generate, inject_noise, NoiseKind, PlantSpec, SynthSpec};
use ate_repair::{repair_pattern, repair_tuples, repair_tuples_single_update, CausalQuery, Dataset, Error, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::{Mode, RunConfig};

#[derive(Parser)]
#[command(name = "ate-repair", version, about = "Find small deletions that move a treatment effect into a target range")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for a repair and report it.
    Repair(RepairArgs),
    /// Run a seeded scenario grid and write long-format CSV.
    Bench(BenchArgs),
    /// Generate a synthetic table with optional planted noise.
    Synth(SynthArgs),
    /// Corrupt a table with duplicates, zeroed confounders or outliers.
    Inject(InjectArgs),
    /// Print a summary of a table and, given a query, its current effect.
    Inspect(InspectArgs),
}

#[derive(Args, Default)]
struct QueryArgs {
    #[arg(long)]
    treatment: Option<String>,
    #[arg(long)]
    outcome: Option<String>,
    /// Comma-separated confounder names.
    #[arg(long, value_delimiter = ',')]
    confounders: Option<Vec<String>>,
    #[arg(long, allow_negative_numbers = true)]
    target: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Args)]
struct RepairArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    query: QueryArgs,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long, value_parser = parse_estimator)]
    estimator: Option<EstimatorKind>,
    #[arg(long, value_parser = parse_update)]
    update: Option<UpdateMode>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_removals: Option<usize>,
    /// Wall-clock limit in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    k_walks: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    /// Let patterns constrain the treatment attribute.
    #[arg(long)]
    allow_treatment: bool,
    /// Largest deletion tried by opt-tuple.
    #[arg(long)]
    budget: Option<usize>,
    /// Raise the tuple-count guard of opt-tuple.
    #[arg(long)]
    opt_limit: Option<usize>,
    /// Write the result as JSON.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write the removed tuples as CSV.
    #[arg(long)]
    removed_csv: Option<PathBuf>,
    /// Write the search trace as CSV.
    #[arg(long)]
    trace_csv: Option<PathBuf>,
    /// Do not record a search trace.
    #[arg(long)]
    no_trace: bool,
    /// Write the initial fitted estimator state as JSON.
    #[arg(long)]
    dump_state: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// TOML generator spec; flags override its values.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    confounders: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    effect: Option<f64>,
    /// Fraction of planted noisy rows.
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    shift: Option<f64>,
    /// Domain sizes of the categorical columns, e.g. `3,3,2`.
    #[arg(long, value_delimiter = ',')]
    categoricals: Option<Vec<usize>>,
    /// Planted pattern as `column=level` index pairs, e.g. `0=1,1=0`.
    #[arg(long, value_delimiter = ',', value_parser = parse_mark)]
    pattern: Option<Vec<(usize, usize)>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
    /// Write the ground truth (clean effect, planted ids) as JSON.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct InjectArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    treatment: String,
    #[arg(long)]
    outcome: String,
    #[arg(long, value_delimiter = ',')]
    confounders: Vec<String>,
    #[arg(long)]
    kind: NoiseKind,
    #[arg(long)]
    level: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
    /// Write the injection log as JSON.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    query: QueryArgs,
    #[arg(long, value_parser = parse_estimator)]
    estimator: Option<EstimatorKind>,
}

fn parse_estimator(s: &str) -> std::result::Result<EstimatorKind, String> {
    match s {
        "ols" => Ok(EstimatorKind::Ols),
        "ipw" => Ok(EstimatorKind::Ipw),
        _ => Err(format!("unknown estimator `{s}` (expected ols or ipw)")),
    }
}

fn parse_update(s: &str) -> std::result::Result<UpdateMode, String> {
    match s {
        "exact" => Ok(UpdateMode::Exact),
        "neumann" => Ok(UpdateMode::Neumann),
        "refit" => Ok(UpdateMode::Refit),
        _ => Err(format!("unknown update `{s}` (expected exact, neumann or refit)")),
    }
}

fn parse_mark(s: &str) -> std::result::Result<(usize, usize), String> {
    let (c, l) = s.split_once('=').ok_or_else(|| format!("expected column=level, got `{s}`"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
    Ok((parse(c)?, parse(l)?))
}

fn diagnostic(level: &str, code: &str, message: impl std::fmt::Display) {
    eprintln!("{}", json!({ "level": level, "code": code, "message": message.to_string() }));
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Repair(a) => repair(a),
        Command::Bench(a) => bench_cmd(a).map(|()| true),
        Command::Synth(a) => synth(a).map(|()| true),
        Command::Inject(a) => inject(a).map(|()| true),
        Command::Inspect(a) => inspect(a).map(|()| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            diagnostic("error", e.code(), &e);
            ExitCode::from(1)
        }
    }
}

fn merge_query(cfg: &mut config::QuerySection, q: QueryArgs) {
    cfg.treatment = q.treatment.or(cfg.treatment.take());
    cfg.outcome = q.outcome.or(cfg.outcome.take());
    cfg.confounders = q.confounders.or(cfg.confounders.take());
    cfg.target = q.target.or(cfg.target);
    cfg.epsilon = q.epsilon.or(cfg.epsilon);
}

fn run_config(a: RepairArgs) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    merge_query(&mut cfg.query, a.query);
    cfg.data = a.data.or(cfg.data);
    cfg.mode = a.mode.unwrap_or(cfg.mode);
    cfg.estimator = a.estimator.or(cfg.estimator);
    cfg.update = a.update.or(cfg.update);
    cfg.seed = a.seed.or(cfg.seed);
    if let Some(m) = a.max_removals {
        cfg.tuple.max_removals = Some(m);
    }
    if let Some(t) = a.time_limit {
        cfg.tuple.time_limit = t;
        cfg.pattern.time_limit = t;
    }
    if let Some(k) = a.k_walks {
        cfg.pattern.k_walks = k;
    }
    if let Some(tau) = a.tau {
        cfg.pattern.tau = tau;
    }
    if a.allow_treatment {
        cfg.pattern.allow_treatment = true;
    }
    if a.no_trace {
        cfg.tuple.record_trace = false;
        cfg.pattern.record_trace = false;
    }
    cfg.opt.budget = a.budget.or(cfg.opt.budget);
    cfg.opt.tuple_limit = a.opt_limit.or(cfg.opt.tuple_limit);
    cfg.output.result = a.output.or(cfg.output.result.take());
    cfg.output.removed = a.removed_csv.or(cfg.output.removed.take());
    cfg.output.trace = a.trace_csv.or(cfg.output.trace.take());
    cfg.output.state = a.dump_state.or(cfg.output.state.take());
    Ok(cfg)
}

fn estimator_label(est: &EstimatorConfig) -> String {
    let kind = match est.estimator {
        EstimatorKind::Ols => "ols",
        EstimatorKind::Ipw => "ipw",
    };
    let update = match est.update {
        UpdateMode::Exact => "exact",
        UpdateMode::Neumann => "neumann",
        UpdateMode::Refit => "refit",
    };
    format!("{kind} ({update})")
}

fn repair(a: RepairArgs) -> Result<bool> {
    let cfg = run_config(a)?;
    let data = load_csv(cfg.data_path()?, None)?;
    let query = cfg.query()?;
    query.validate(&data)?;
    let tuple = cfg.tuple_config()?;
    let pattern = cfg.pattern_config()?;
    let est = match cfg.mode {
        Mode::Pattern | Mode::OptPattern => pattern.estimator,
        _ => tuple.estimator,
    };
    if let Some(path) = &cfg.output.state {
        report::write_json(path, &estimator::fit(&data, &query, &est)?)?;
    }
    let result = match cfg.mode {
        Mode::Tuple => repair_tuples(&data, &query, &tuple)?,
        Mode::TupleSingleUpdate => repair_tuples_single_update(&data, &query, &tuple)?,
        Mode::Pattern => repair_pattern(&data, &query, &pattern)?,
        Mode::OptTuple => {
            let budget = cfg.opt.budget.unwrap_or(data.alive_count());
            oracle::opt_tuple_with_limit(&data, &query, &est, budget, cfg.tuple_limit())?
        }
        Mode::OptPattern => {
            oracle::opt_pattern_with_limit(&data, &query, &est, pattern.allow_treatment, cfg.pattern_limit())?
        }
    };

    print!("{}", report::summary(cfg.mode, &query, &result, &estimator_label(&est)));
    if let Some(path) = &cfg.output.result {
        report::write_json(path, &report::Report::new(cfg.mode, &query, &result))?;
    }
    if let Some(path) = &cfg.output.removed {
        report::write_removed(path, &data, &result)?;
    }
    if let Some(path) = &cfg.output.trace {
        report::write_trace(path, &result)?;
    }
    if !result.hit_range {
        let code = result.stop_reason.map_or("missed", |s| s.code());
        diagnostic(
            "warning",
            code,
            format!("effect {:.6} is outside [{}, {}]", result.ate_after, query.lower(), query.upper()),
        );
    }
    Ok(result.hit_range)
}

fn bench_cmd(a: BenchArgs) -> Result<()> {
    let cfg = bench::load(&a.config)?;
    let rows = match &a.output {
        Some(path) => bench::run(&cfg, BufWriter::new(File::create(path)?))?,
        None => bench::run(&cfg, io::stdout().lock())?,
    };
    diagnostic("info", "bench_done", format!("{rows} rows"));
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut spec = match &a.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            toml::from_str::<SynthSpec>(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => SynthSpec::default(),
    };
    spec.n = a.n.unwrap_or(spec.n);
    spec.confounders = a.confounders.unwrap_or(spec.confounders);
    spec.effect = a.effect.unwrap_or(spec.effect);
    spec.categoricals = a.categoricals.unwrap_or(spec.categoricals);
    spec.planted = PlantSpec {
        fraction: a.fraction.unwrap_or(spec.planted.fraction),
        shift: a.shift.unwrap_or(spec.planted.shift),
        pattern: a.pattern.unwrap_or(spec.planted.pattern),
    };
    let (data, truth) = generate(&spec, a.seed)?;
    write_csv(&data, BufWriter::new(File::create(&a.output)?), None, None)?;
    if let Some(path) = &a.truth {
        report::write_json(path, &truth)?;
    }
    println!(
        "rows {}  planted {}  clean ATE {:.6}  ATE {:.6}",
        data.n(),
        truth.planted_ids.len(),
        truth.clean_ate,
        truth.ate
    );
    Ok(())
}

fn inject(a: InjectArgs) -> Result<()> {
    let data = load_csv(&a.data, None)?;
    let query = CausalQuery::new(a.treatment, a.outcome, a.confounders, 0.0, 0.0);
    let (noisy, log) = inject_noise(&data, &query, a.kind, a.level, a.seed)?;
    write_csv(&noisy, BufWriter::new(File::create(&a.output)?), None, None)?;
    if let Some(path) = &a.log {
        report::write_json(path, &log)?;
    }
    println!("rows {}  affected {}", noisy.n(), log.affected.len());
    Ok(())
}

fn describe(data: &Dataset, col: usize) -> String {
    match data.column(col) {
        Column::Numeric(v) => {
            let alive: Vec<f64> = data.alive_ids().map(|i| v[i]).collect();
            let n = alive.len().max(1) as f64;
            let mean = alive.iter().sum::<f64>() / n;
            let (lo, hi) = alive
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
            format!("mean {mean:.4}  min {lo:.4}  max {hi:.4}")
        }
        Column::Categorical { codes, levels } => {
            let mut counts = vec![0usize; levels.len()];
            for i in data.alive_ids() {
                counts[codes[i] as usize] += 1;
            }
            let shown: Vec<String> = levels
                .iter()
                .zip(&counts)
                .take(8)
                .map(|(l, c)| format!("{l}:{c}"))
                .collect();
            let more = if levels.len() > 8 { " …" } else { "" };
            format!("{} levels  {}{more}", levels.len(), shown.join(" "))
        }
    }
}

fn inspect(a: InspectArgs) -> Result<()> {
    let data = load_csv(&a.data, None)?;
    let mut out = io::stdout().lock();
    writeln!(out, "rows {}  columns {}", data.n(), data.schema().len())?;
    let width = data.schema().attributes().iter().map(|x| x.name.len()).max().unwrap_or(0);
    for (c, attr) in data.schema().attributes().iter().enumerate() {
        let kind = match attr.kind {
            AttrKind::Categorical => "categorical",
            AttrKind::NumericBinary => "binary",
            AttrKind::NumericContinuous => "numeric",
        };
        writeln!(out, "  {:<width$}  {kind:<11}  {}", attr.name, describe(&data, c))?;
    }
    let q = a.query;
    if let (Some(treatment), Some(outcome)) = (q.treatment, q.outcome) {
        let query = CausalQuery::new(
            treatment,
            outcome,
            q.confounders.unwrap_or_default(),
            q.target.unwrap_or(0.0),
            q.epsilon.unwrap_or(0.0),
        );
        query.validate(&data)?;
        let est = EstimatorConfig {
            estimator: a.estimator.unwrap_or_default(),
            ..EstimatorConfig::default()
        };
        let ate = estimator::refit_ate(&data, &query, &est, &[])?;
        let treated = data
            .column_by_name(&query.treatment)?
            .as_numeric()
            .map_or(0, |t| data.alive_ids().filter(|&i| t[i] == 1.0).count());
        writeln!(
            out,
            "query  effect of {} on {} given [{}]",
            query.treatment,
            query.outcome,
            query.confounders.join(", ")
        )?;
        writeln!(out, "treated {}  control {}", treated, data.alive_count() - treated)?;
        writeln!(out, "ATE ({}) {ate:.6}", estimator_label(&est))?;
        if q.target.is_some() {
            let status = if query.contains(ate) { "inside" } else { "outside" };
            writeln!(out, "target {} ± {}: {status}", query.target, query.epsilon)?;
        }
    }
    Ok(())
}
