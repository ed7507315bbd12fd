mod check;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use heim_core::optimizer::thresholds_by_size;
use heim_core::simharness::{
    breakdown_csv, compare, report_csv, report_json, run_benchmark, BenchmarkKind, ComparisonRow, Knobs, RunRecord,
    TrialConfig,
};
use heim_core::speclang::{HwOp, MemLoc};
use heim_core::{
    expand_vars, optimize, parse_hw_model, parse_spec, Error, HardwareModel, IndependenceConstraint, DEFAULT_MAX_N,
};

/// Exit codes.
const INPUT: u8 = 1;
const INFEASIBLE: u8 = 2;
const INTERNAL: u8 = 3;

const RATE_2BPC: f64 = 0.0215;
const RATE_3BPC: f64 = 0.1273;

#[derive(Parser)]
#[command(name = "heim", version, about = "Hypervector dimension and threshold optimizer")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Minimal dimension and per-query thresholds for an accuracy spec.
    Optimize(OptimizeArgs),
    /// Monte-Carlo accuracy of an optimized benchmark.
    Simulate(SimulateArgs),
    /// Independence verdicts for concrete tuple expressions.
    Check(CheckArgs),
    /// Model thresholds against grid-tuned thresholds at a fixed dimension.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Hardware error model; error-free when omitted.
    #[arg(long)]
    hw: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MAX_N)]
    max_n: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct NoiseArgs {
    /// Hardware error model used for optimization.
    #[arg(long, conflicts_with = "bpc")]
    hw: Option<PathBuf>,
    /// Resistive item memory with 2 or 3 bits per cell.
    #[arg(long, value_parser = clap::value_parser!(u8).range(2..=3))]
    bpc: Option<u8>,
    /// Injected item-memory flip rate; defaults to the model's item-memory rate.
    #[arg(long)]
    inject_p: Option<f64>,
    /// Flip rate applied to query vectors; defaults to the model's query rate.
    #[arg(long)]
    query_p: Option<f64>,
}

struct Noise {
    hw: HardwareModel,
    inject_p: f64,
    query_p: f64,
}

impl NoiseArgs {
    fn resolve(&self) -> Result<Noise, Error> {
        let hw = match (&self.hw, self.bpc) {
            (Some(path), _) => parse_hw_model(&read(path)?)?,
            (None, Some(2)) => HardwareModel::item_mem(RATE_2BPC),
            (None, Some(_)) => HardwareModel::item_mem(RATE_3BPC),
            (None, None) => HardwareModel::default(),
        };
        if hw.mem(MemLoc::Codebook) > 0.0 || HwOp::ALL.iter().any(|&op| hw.op(op) > 0.0) {
            eprintln!("heim: warning: codebook and operator error rates shape the model but are not injected");
        }
        Ok(Noise {
            inject_p: self.inject_p.unwrap_or_else(|| hw.mem(MemLoc::ItemMem)),
            query_p: self.query_p.unwrap_or_else(|| hw.mem(MemLoc::Query)),
            hw,
        })
    }
}

/// Generator sizes; unset values keep the benchmark's defaults.
#[derive(Args)]
struct KnobArgs {
    /// Smallest value of the swept knob.
    #[arg(long)]
    lo: Option<usize>,
    /// Largest value of the swept knob.
    #[arg(long, visible_aliases = ["set-size", "query-size", "records", "max-degree", "qs-len"])]
    hi: Option<usize>,
    #[arg(long)]
    codebook_factor: Option<usize>,
    #[arg(long)]
    pairs: Option<usize>,
    #[arg(long)]
    fields: Option<usize>,
    #[arg(long)]
    vertices: Option<usize>,
    #[arg(long)]
    concepts: Option<usize>,
    #[arg(long)]
    relations: Option<usize>,
    #[arg(long)]
    interactions: Option<usize>,
    #[arg(long)]
    base_len: Option<usize>,
    #[arg(long)]
    symbols: Option<usize>,
}

impl KnobArgs {
    fn apply(&self, mut k: Knobs) -> Knobs {
        let set = |slot: &mut usize, v: Option<usize>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut k.lo, self.lo);
        set(&mut k.hi, self.hi);
        set(&mut k.codebook_factor, self.codebook_factor);
        set(&mut k.pairs, self.pairs);
        set(&mut k.fields, self.fields);
        set(&mut k.vertices, self.vertices);
        set(&mut k.concepts, self.concepts);
        set(&mut k.relations, self.relations);
        set(&mut k.interactions, self.interactions);
        set(&mut k.base_len, self.base_len);
        set(&mut k.symbols, self.symbols);
        k
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    benchmark: String,
    #[command(flatten)]
    knobs: KnobArgs,
    #[command(flatten)]
    noise: NoiseArgs,
    #[arg(long, default_value_t = 100)]
    instances: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// End-to-end target accuracy.
    #[arg(long, default_value_t = 0.99)]
    acc: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_N)]
    max_n: usize,
    /// Record wall time; timed output is not reproducible.
    #[arg(long)]
    timing: bool,
    /// Writes `<out>.csv` and `<out>.json` instead of printing.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct CheckArgs {
    /// File with one expression per line.
    file: Option<PathBuf>,
    /// Expression to check; repeatable.
    #[arg(long = "expr", required_unless_present = "file")]
    exprs: Vec<String>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    benchmark: String,
    #[command(flatten)]
    knobs: KnobArgs,
    #[command(flatten)]
    noise: NoiseArgs,
    /// Dimension shared by both methods.
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    /// Candidate thresholds of the tuning baseline.
    #[arg(long, default_value_t = 1000)]
    grid: usize,
    /// Tuning trials per candidate threshold.
    #[arg(long, default_value_t = 1)]
    tune_trials: usize,
    #[arg(long, default_value_t = 4)]
    instances: usize,
    /// Held-out trials per instance.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

/// An error with its exit code.
struct Failure(u8, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::DimensionalConstraint(_) | Error::NoIntersection => INFEASIBLE,
            Error::Json(_) | Error::Csv(_) => INTERNAL,
            _ => INPUT,
        };
        Failure(code, e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure(INPUT, format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: Serialize>(v: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| Failure(INTERNAL, e.to_string()))
}

#[derive(Serialize)]
struct SizeThreshold {
    size: usize,
    threshold: f64,
    fp: f64,
    #[serde(rename = "fn")]
    fn_: f64,
    acc: f64,
}

#[derive(Serialize)]
struct QueryOut {
    id: usize,
    requirement: String,
    n: usize,
    threshold: f64,
    fp: f64,
    #[serde(rename = "fn")]
    fn_: f64,
    acc: f64,
    independence: String,
    /// Thresholds at `n_opt` for each size of a bounded data structure.
    #[serde(skip_serializing_if = "Option::is_none")]
    by_size: Option<Vec<SizeThreshold>>,
}

#[derive(Serialize)]
struct OptimizeOut {
    n_opt: usize,
    queries: Vec<QueryOut>,
}

fn independence(c: &IndependenceConstraint) -> String {
    match c {
        IndependenceConstraint::Iset(e) => format!("iset({e})"),
        IndependenceConstraint::Iproduct(e) => format!("iproduct({e})"),
        IndependenceConstraint::IsetBoth(d, q) => format!("iset({d}) and iset({q})"),
    }
}

fn cmd_optimize(a: &OptimizeArgs) -> Result<(), Failure> {
    let spec = parse_spec(&read(&a.spec)?)?;
    let hw = match &a.hw {
        Some(p) => parse_hw_model(&read(p)?)?,
        None => HardwareModel::default(),
    };
    let r = optimize(&hw, &spec, a.max_n)?;
    let expanded = expand_vars(&spec)?;
    let queries = r
        .per_query
        .iter()
        .map(|q| {
            let by_size = thresholds_by_size(&hw, &expanded.requirements[q.requirement_id], r.n_opt)
                .ok()
                .map(|reports| {
                    reports
                        .iter()
                        .enumerate()
                        .map(|(i, rep)| SizeThreshold {
                            size: i + 1,
                            threshold: rep.threshold.thr,
                            fp: rep.threshold.fp,
                            fn_: rep.threshold.fn_,
                            acc: rep.threshold.accuracy(),
                        })
                        .collect()
                });
            QueryOut {
                id: q.requirement_id,
                requirement: q.requirement.clone(),
                n: q.n,
                threshold: q.threshold,
                fp: q.achieved_fp,
                fn_: q.achieved_fn,
                acc: q.achieved_acc,
                independence: independence(&q.constraint),
                by_size,
            }
        })
        .collect();
    let out = OptimizeOut {
        n_opt: r.n_opt,
        queries,
    };
    let text = match a.format {
        Format::Json => json(&out)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let csv_err = |e: csv::Error| Failure(INTERNAL, e.to_string());
            w.write_record(["id", "requirement", "n", "threshold", "fp", "fn", "acc", "independence"])
                .map_err(csv_err)?;
            for q in &out.queries {
                w.write_record([
                    q.id.to_string(),
                    q.requirement.clone(),
                    q.n.to_string(),
                    q.threshold.to_string(),
                    q.fp.to_string(),
                    q.fn_.to_string(),
                    q.acc.to_string(),
                    q.independence.clone(),
                ])
                .map_err(csv_err)?;
            }
            let bytes = w.into_inner().map_err(|e| Failure(INTERNAL, e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| Failure(INTERNAL, e.to_string()))?
        }
    };
    emit(a.out.as_deref(), &text)
}

fn benchmark(name: &str) -> Result<BenchmarkKind, Failure> {
    Ok(name.parse::<BenchmarkKind>()?)
}

fn cmd_simulate(a: &SimulateArgs) -> Result<(), Failure> {
    let kind = benchmark(&a.benchmark)?;
    let Noise { hw, inject_p, query_p } = a.noise.resolve()?;
    let cfg = TrialConfig {
        benchmark: kind,
        knobs: a.knobs.apply(Knobs::desk(kind)),
        instances: a.instances,
        trials: a.trials,
        seed: a.seed,
        inject_p,
        query_p,
        acc: a.acc,
        max_n: a.max_n,
    };
    let t0 = Instant::now();
    let result = run_benchmark(&cfg, &hw)?;
    let wall_ms = a.timing.then(|| t0.elapsed().as_secs_f64() * 1e3);
    let records = [RunRecord { result, wall_ms }];
    let csv = {
        let summary = report_csv(&records)?;
        let sizes = breakdown_csv(&records)?;
        // same columns; per-size rows follow the summary row
        summary + sizes.split_once('\n').map_or("", |(_, rows)| rows)
    };
    let json_text = json(&report_json(&records))?;
    match &a.out {
        Some(prefix) => {
            emit(Some(&prefix.with_extension("csv")), &csv)?;
            emit(Some(&prefix.with_extension("json")), &json_text)?;
            let r = &records[0].result;
            eprintln!(
                "{kind}: accuracy {:.4} over {} queries",
                r.accuracy,
                r.counts.p + r.counts.n
            );
            Ok(())
        }
        None => emit(
            None,
            match a.format {
                Format::Json => &json_text,
                Format::Csv => &csv,
            },
        ),
    }
}

fn cmd_check(a: &CheckArgs) -> Result<(), Failure> {
    let text = match &a.file {
        Some(p) => read(p)?,
        None => String::new(),
    };
    let mut lines: Vec<(String, &str)> = check::expressions(&text)
        .map(|(i, e)| (format!("line {i}"), e))
        .collect();
    lines.extend(a.exprs.iter().map(|e| ("--expr".to_string(), e.as_str())));
    let mut all = true;
    let mut out = String::new();
    for (origin, src) in lines {
        let v = check::check_expr(src).map_err(|e| Failure(INPUT, format!("{origin}: {e}")))?;
        all &= v.independent();
        let _ = writeln!(out, "{src}: {}", v.label());
    }
    print!("{out}");
    if all {
        Ok(())
    } else {
        Err(Failure(INFEASIBLE, "dependent tuples found".into()))
    }
}

#[derive(Serialize)]
struct CompareRowOut<'a> {
    #[serde(flatten)]
    row: &'a ComparisonRow,
    time_ratio: f64,
}

fn cmd_compare(a: &CompareArgs) -> Result<(), Failure> {
    let kind = benchmark(&a.benchmark)?;
    let Noise { hw, inject_p, query_p } = a.noise.resolve()?;
    let cfg = TrialConfig {
        benchmark: kind,
        knobs: a.knobs.apply(Knobs::compare(kind)),
        instances: a.instances,
        trials: a.trials,
        seed: a.seed,
        inject_p,
        query_p,
        ..TrialConfig::desk(kind)
    };
    let rows = compare(&cfg, &hw, a.n, a.grid, a.tune_trials)?;
    let text = match a.format {
        Format::Json => {
            let out: Vec<CompareRowOut> = rows
                .iter()
                .map(|row| CompareRowOut {
                    row,
                    time_ratio: row.time_ratio(),
                })
                .collect();
            json(&out)?
        }
        Format::Csv => {
            let mut s = String::from(
                "benchmark,value,n,heim_accuracy,heim_ms,baseline_thr,baseline_accuracy,baseline_ms,time_ratio\n",
            );
            for r in &rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{:.6},{:.3},{:.6},{:.6},{:.3},{:.1}",
                    r.benchmark,
                    r.value,
                    r.n,
                    r.heim_accuracy,
                    r.heim_ms,
                    r.baseline_thr,
                    r.baseline_accuracy,
                    r.baseline_ms,
                    r.time_ratio()
                );
            }
            s
        }
    };
    emit(a.out.as_deref(), &text)
}

fn init_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("HEIM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure(INPUT, format!("HEIM_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure(INTERNAL, e.to_string()))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    init_threads()?;
    match &cli.cmd {
        Cmd::Optimize(a) => cmd_optimize(a),
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Check(a) => cmd_check(a),
        Cmd::Compare(a) => cmd_compare(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match std::panic::catch_unwind(|| run(&cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(Failure(code, msg))) => {
            eprintln!("heim: {msg}");
            ExitCode::from(code)
        }
        Err(_) => ExitCode::from(INTERNAL),
    }
}
