use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use multipoint::diagnostics::{
    acceptance_rate, bin_masses, lag1_correlation, normalized_histogram, write_csv, CSV_HEADER,
};
use multipoint::experiment::{
    residuals_csv, run_experiment_with, sample_chain, trace_csv, BalanceConfig, ExperimentConfig, Series, TargetSpec,
    WeightSpec,
};
use multipoint::Scheme;

const BALANCE_FIXTURE: &str = include_str!("../../core/fixtures/balance3.json");

#[derive(Parser)]
#[command(name = "multipoint", version, about = "Multi-point Metropolis experiments", arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one chain and write its trace as CSV.
    Sample(Overrides),
    /// Averaged acceptance rate and lag-1 correlation over a grid of N.
    Benchmark(Overrides),
    /// Build exact kernels on a discrete model and check detailed balance.
    VerifyBalance(BalanceArgs),
    /// Turn harness CSVs into chart-ready tables.
    PlotData(PlotArgs),
}

#[derive(Args, Default)]
struct Overrides {
    /// JSON experiment config; defaults to the bimodal study.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated numbers of tries.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// generic, qin, iid, mtm or mh.
    #[arg(long)]
    sampler: Option<String>,
    /// w1, w2, w3, ratio-theta, ratio-product, lambda-unit, lambda-inverse-pair.
    #[arg(long)]
    weights: Option<String>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long = "burn-in")]
    burn_in: Option<usize>,
}

#[derive(Args)]
struct BalanceArgs {
    /// JSON balance config; defaults to the shipped 3-state model.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Where to write the per-pair flows.
    #[arg(long, default_value = "residuals.csv")]
    out: PathBuf,
    /// Overrides the config tolerance.
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotKind {
    HistogramOverlay,
    MetricVsN,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long, value_enum)]
    kind: PlotKind,
    /// Input CSV: a benchmark table or a sample trace. Optional for the
    /// overlay, which then carries the target curve only.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Experiment config providing the target of the overlay.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    bins: usize,
    #[arg(long, default_value_t = -4.0, allow_hyphen_values = true)]
    lo: f64,
    #[arg(long, default_value_t = 4.0, allow_hyphen_values = true)]
    hi: f64,
}

type CliResult<T> = std::result::Result<T, String>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Sample(o) => sample(o),
        Command::Benchmark(o) => benchmark(o),
        Command::VerifyBalance(b) => verify_balance(b),
        Command::PlotData(p) => plot_data(p),
    };
    match outcome {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_config(o: &Overrides) -> CliResult<ExperimentConfig> {
    let mut cfg = match &o.config {
        Some(path) => ExperimentConfig::from_json(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))?,
        None => ExperimentConfig::bimodal_study(),
    };
    if let Some(n) = &o.n {
        if o.config.is_some() && *n != cfg.n_list {
            eprintln!("warning: --n {n:?} overrides the config's n_list {:?}", cfg.n_list);
        }
        cfg.n_list = n.clone();
    }
    if o.sampler.is_some() || o.weights.is_some() {
        let sampler = match &o.sampler {
            Some(id) => Scheme::from_id(id).ok_or_else(|| format!("unknown sampler '{id}'"))?,
            None => Scheme::Generic,
        };
        let weights = WeightSpec::from_id(o.weights.as_deref().unwrap_or("w1"), o.theta.unwrap_or(0.5))
            .map_err(|e| e.to_string())?;
        cfg.series = vec![Series { sampler, weights }];
    } else if let Some(theta) = o.theta {
        for s in &mut cfg.series {
            match &mut s.weights {
                WeightSpec::W1 { theta: t } | WeightSpec::RatioTheta { theta: t } => *t = theta,
                _ => {}
            }
        }
    }
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if let Some(v) = o.runs {
        cfg.runs = v;
    }
    if let Some(v) = o.steps {
        cfg.steps = v;
    }
    if let Some(v) = o.burn_in {
        cfg.burn_in = v;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn sample(o: Overrides) -> CliResult<ExitCode> {
    let cfg = load_config(&o)?;
    let series = &cfg.series[0];
    let n = cfg.n_list[0];
    if cfg.series.len() > 1 || cfg.n_list.len() > 1 {
        eprintln!("note: sampling the first series ({} {}) with N={n}", series.sampler.id(), series.weights.label());
    }
    let trace = sample_chain(&cfg, series, n, cfg.seed).map_err(|e| e.to_string())?;
    let text = trace_csv(&trace);
    match &o.out {
        Some(path) => write(path, &text)?,
        None => print!("{text}"),
    }
    let rate = acceptance_rate(&trace.accepted).map_err(|e| e.to_string())?;
    let corr = lag1_correlation(&trace.states).map_err(|e| e.to_string())?;
    eprintln!("{}: {} states, acceptance {rate:.4}, lag-1 correlation {corr}", trace.sampler, trace.len());
    Ok(ExitCode::SUCCESS)
}

fn benchmark(o: Overrides) -> CliResult<ExitCode> {
    let cfg = load_config(&o)?;
    let out = o.out.clone().or_else(|| cfg.out.as_ref().map(PathBuf::from));
    let rows = run_experiment_with(&cfg, |row| {
        let corr = row.metrics.correlation.map_or("undefined".to_string(), |c| format!("{:.4} ± {:.4}", c.mean, c.se));
        eprintln!(
            "{:>8} {:<14} N={:<4} accept {:.4} ± {:.4}  corr {corr}",
            row.sampler, row.weights, row.n, row.metrics.acceptance.mean, row.metrics.acceptance.se
        );
    })
    .map_err(|e| e.to_string())?;
    let text = write_csv(&rows);
    match &out {
        Some(path) => {
            write(path, &text)?;
            println!("wrote {} rows to {}", rows.len(), path.display());
        }
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn verify_balance(b: BalanceArgs) -> CliResult<ExitCode> {
    let text = match &b.config {
        Some(path) => read(path)?,
        None => BALANCE_FIXTURE.to_string(),
    };
    let mut cfg = BalanceConfig::from_json(&text).map_err(|e| e.to_string())?;
    if let Some(n) = b.n {
        cfg.n_list = n;
    }
    let tolerance = b.tolerance.unwrap_or(cfg.tolerance);
    let results = cfg.run().map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for r in &results {
        let verdict = if r.max_residual <= tolerance { "ok" } else { "FAIL" };
        println!("{:<8} {:<18} N={}  max residual {:.3e}  {verdict}", r.sampler.id(), r.weights, r.n, r.max_residual);
        worst = worst.max(r.max_residual);
    }
    write(&b.out, &residuals_csv(&results))?;
    println!("max residual: {worst:e} (tolerance {tolerance:e}) over {} kernels", results.len());
    println!("flows written to {}", b.out.display());
    Ok(if worst <= tolerance { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn emit(out: &Option<PathBuf>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn plot_data(p: PlotArgs) -> CliResult<ExitCode> {
    match p.kind {
        PlotKind::MetricVsN => {
            let path = p.csv.as_ref().ok_or("metric-vs-n needs --csv")?;
            let text = read(path)?;
            emit(&p.out, &metric_series(&text)?)?;
        }
        PlotKind::HistogramOverlay => {
            let target = match &p.config {
                Some(path) => ExperimentConfig::from_json(&read(path)?).map_err(|e| e.to_string())?.target,
                None => TargetSpec::BimodalQuartic,
            };
            let states = match &p.csv {
                Some(path) => Some(trace_states(&read(path)?)?),
                None => None,
            };
            emit(&p.out, &overlay(&target, states.as_deref(), p.bins, p.lo, p.hi)?)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Long-format `sampler,weights,N,metric,mean,se` rows from a benchmark table.
fn metric_series(text: &str) -> CliResult<String> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(format!("expected header '{CSV_HEADER}'"));
    }
    let mut out = String::from("sampler,weights,N,metric,mean,se\n");
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(format!("row {}: expected 9 fields, got {}", i + 1, f.len()));
        }
        out.push_str(&format!("{},{},{},acceptance,{},{}\n", f[0], f[1], f[2], f[4], f[5]));
        out.push_str(&format!("{},{},{},correlation,{},{}\n", f[0], f[1], f[2], f[6], f[7]));
    }
    Ok(out)
}

fn trace_states(text: &str) -> CliResult<Vec<f64>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty trace")?;
    let col = header.split(',').position(|c| c == "state").ok_or("trace has no 'state' column")?;
    let states = lines
        .map(|l| {
            l.split(',').nth(col).and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| format!("bad trace row '{l}'"))
        })
        .collect::<CliResult<Vec<f64>>>()?;
    if states.is_empty() {
        return Err("trace has no samples".into());
    }
    Ok(states)
}

/// `bin_lo,bin_hi,density,target_density` with the target normalized over
/// the plotted range; `density` is empty without a trace.
fn overlay(target: &TargetSpec, states: Option<&[f64]>, bins: usize, lo: f64, hi: f64) -> CliResult<String> {
    if bins == 0 || lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
        return Err("need bins >= 1 and lo < hi".into());
    }
    let width = (hi - lo) / bins as f64;
    let masses = bin_masses(|x| target.log_density(x), bins, lo, hi, 64);
    let hist = states.map(|s| normalized_histogram(s, bins, lo, hi)).transpose().map_err(|e| e.to_string())?;
    let mut out = String::from("bin_lo,bin_hi,density,target_density\n");
    for (i, m) in masses.iter().enumerate() {
        let a = lo + i as f64 * width;
        let density = hist.as_ref().map(|h| h.densities[i].to_string()).unwrap_or_default();
        out.push_str(&format!("{a},{},{density},{}\n", a + width, m / width));
    }
    if let Some(h) = &hist {
        if h.underflow + h.overflow > 0 {
            eprintln!("note: {} samples below and {} above the range", h.underflow, h.overflow);
        }
    }
    Ok(out)
}
