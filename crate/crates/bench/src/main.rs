use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use streambag_bench::config::{read_key_values, usage, RunSpec, UsageError};
use streambag_bench::generate::{cmd_generate, GenSpec};
use streambag_bench::grid::{cmd_grid, GridSpec};
use streambag_bench::report::{build_report, render_report};
use streambag_bench::results::read_rows;
use streambag_bench::run::cmd_process;

#[derive(Parser)]
#[command(name = "streambag", version, about = "Stream ensemble processor, load generator and experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one ensemble over a dataset or an incoming stream and append a results row.
    Process(ProcessArgs),
    /// Stream a dataset to a processor at a fraction of its capacity.
    #[command(alias = "gen")]
    Generate(GenerateArgs),
    /// Run an experiment grid, skipping runs already in the results file.
    Grid(GridArgs),
    /// Summarize a results file.
    Report(ReportArgs),
}

#[derive(Args)]
struct ProcessArgs {
    /// key=value file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    algorithm: Option<String>,
    /// Ensemble size.
    #[arg(long, short)]
    m: Option<usize>,
    /// sequential, parallel_instance, mini_batch, or a label such as Seq, B1, B50.
    #[arg(long)]
    executor: Option<String>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    /// ARFF file or synthetic:N[:change_at[:seed]].
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    rate_fraction: Option<f64>,
    /// Seconds.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    instances: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// null, os_counter or synthetic:WATTS.
    #[arg(long)]
    sensor: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Accept one generator connection on HOST:PORT.
    #[arg(long, conflicts_with = "loopback")]
    listen: Option<String>,
    /// Run the generator in-process over loopback.
    #[arg(long)]
    loopback: bool,
    /// Instances per second at full load; calibrated when absent.
    #[arg(long)]
    capacity: Option<f64>,
    /// Calibration window, seconds.
    #[arg(long)]
    warmup: Option<f64>,
    #[arg(long)]
    run_id: Option<String>,
}

impl ProcessArgs {
    fn spec(self) -> anyhow::Result<RunSpec> {
        let mut spec = RunSpec::default();
        if let Some(path) = &self.config {
            spec.apply_all(&read_key_values(path)?)?;
        }
        let mut flags: Vec<(&str, Option<String>)> = vec![
            ("algorithm", self.algorithm),
            ("m", self.m.map(|v| v.to_string())),
            ("executor", self.executor),
            ("batch_size", self.batch_size.map(|v| v.to_string())),
            ("threads", self.threads.map(|v| v.to_string())),
            ("dataset", self.dataset),
            ("rate_fraction", self.rate_fraction.map(|v| v.to_string())),
            ("duration", self.duration.map(|v| v.to_string())),
            ("instances", self.instances.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("sensor", self.sensor),
            ("output", self.output.map(|p| p.display().to_string())),
            ("listen", self.listen),
            ("capacity", self.capacity.map(|v| v.to_string())),
            ("warmup", self.warmup.map(|v| v.to_string())),
            ("run_id", self.run_id),
        ];
        if self.loopback {
            flags.push(("loopback", Some("true".into())));
        }
        for (key, value) in flags {
            if let Some(value) = value {
                spec.set(key, &value)?;
            }
        }
        Ok(spec)
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    dataset: String,
    #[arg(long)]
    rate_fraction: f64,
    /// Calibrated processor capacity, instances per second.
    #[arg(long)]
    capacity: f64,
    /// Seconds.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long, conflicts_with = "duration")]
    count: Option<u64>,
    #[arg(long)]
    connect: String,
    /// Write the send log here as CSV.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    /// key=value file with comma-separated lists.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra settings as key=value, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct ReportArgs {
    results: PathBuf,
    /// Executor compared against the best of Seq and B1.
    #[arg(long, default_value = "B50")]
    target: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config_error = e.downcast_ref::<UsageError>().is_some()
                || matches!(e.downcast_ref::<streambag::Error>(), Some(streambag::Error::Config(_)));
            ExitCode::from(if config_error { 2 } else { 1 })
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Process(args) => {
            let spec = args.spec()?;
            let row = cmd_process(&spec)?;
            if spec.output.is_none() {
                println!("{}", streambag::metrics::ResultsRow::HEADER.join(","));
                println!("{}", row.fields().join(","));
            }
        }
        Command::Generate(args) => {
            let spec = GenSpec {
                dataset: args.dataset.parse()?,
                rate_fraction: args.rate_fraction,
                capacity: args.capacity,
                duration: args
                    .duration
                    .map(std::time::Duration::try_from_secs_f64)
                    .transpose()
                    .map_err(|_| usage("bad duration"))?,
                count: args.count,
                connect: args.connect,
                log: args.log,
            };
            let log = cmd_generate(&spec)?;
            eprintln!(
                "sent {} instances in {:.3} s, {} backpressure events",
                log.entries.len(),
                log.elapsed.as_secs_f64(),
                log.backpressure_events
            );
        }
        Command::Grid(args) => {
            let mut grid = GridSpec::default();
            if let Some(path) = &args.config {
                for (k, v) in read_key_values(path)? {
                    grid.set(&k, &v)?;
                }
            }
            for pair in &args.set {
                let (k, v) = pair
                    .split_once('=')
                    .ok_or_else(|| usage(format!("--set expects KEY=VALUE, got `{pair}`")))?;
                grid.set(&k.trim().replace('-', "_"), v.trim())?;
            }
            let outcome = cmd_grid(&grid)?;
            eprintln!(
                "{} runs produced, {} already present, {} failed",
                outcome.produced,
                outcome.skipped,
                outcome.failures.len()
            );
            if !outcome.failures.is_empty() {
                anyhow::bail!("{} grid runs failed", outcome.failures.len());
            }
        }
        Command::Report(args) => {
            let rows = read_rows(&args.results)?;
            let mut warnings = Vec::new();
            let lines = build_report(&rows, &args.target, &mut warnings);
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", render_report(&lines, &args.target));
        }
    }
    Ok(())
}
