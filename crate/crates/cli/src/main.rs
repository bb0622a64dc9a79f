//! Command-line driver for the average-consensus simulator.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails or a run
//! fails at runtime, 2 on usage or configuration errors.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use avgcons::harness::{monte_carlo, read_records, ExperimentConfig, ScheduleSpec, Summary};
use avgcons::{run_trial, verify, Error, ProtocolTag};
use clap::{Args, Parser, Subcommand};

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "avgcons", version, about = "Randomized average consensus over dynamic graphs")]
struct Cli {
    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true, env = "AVGCONS_SEED")]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single trial and write its trace as JSON Lines.
    Run(RunArgs),
    /// Run a Monte Carlo batch described by a JSON config.
    Sweep(SweepArgs),
    /// Check the graph-product lemmas on random graphs.
    VerifyGraph(VerifyGraphArgs),
    /// Check the exponential-minimum and concentration bounds empirically.
    VerifyBounds(VerifyBoundsArgs),
    /// Render a summary as CSV.
    Report(ReportArgs),
}

#[derive(Args)]
struct ProblemArgs {
    #[arg(long)]
    protocol: ProtocolTag,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.3)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.2)]
    eta: f64,
    #[arg(long, default_value_t = 0.0)]
    a: f64,
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    /// Known upper bound on the network size (rbard only).
    #[arg(long = "bigN")]
    big_n: Option<u64>,
    /// Replica count overriding the parameter formulas.
    #[arg(long)]
    ell: Option<usize>,
    /// ring, complete, csc, blocking, delayed:T or c-connected:c.
    #[arg(long, default_value = "csc")]
    schedule: ScheduleSpec,
    /// Last round with passive agents (rbard only).
    #[arg(long, default_value_t = 0)]
    s_max: u64,
    #[arg(long)]
    t_max: Option<u64>,
}

impl ProblemArgs {
    fn experiment(&self, seed: u64) -> ExperimentConfig {
        let mut e = ExperimentConfig::new(self.protocol, self.n, self.epsilon, self.eta, self.schedule.clone());
        e.a = self.a;
        e.b = self.b;
        e.big_n = self.big_n;
        e.ell = self.ell;
        e.s_max = self.s_max;
        e.t_max = self.t_max;
        e.seed = seed;
        e
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Trial index within the master seed's family.
    #[arg(long, default_value_t = 0)]
    trial: usize,
    /// Trace file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Directory receiving records.jsonl, summary.json and summary.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run trials on one thread.
    #[arg(long)]
    serial: bool,
}

#[derive(Args)]
struct VerifyGraphArgs {
    /// Random cases per graph size.
    #[arg(long, default_value_t = 500)]
    trials: usize,
    /// Random cases per (size, c) pair of the c-in-connected suite.
    #[arg(long, default_value_t = 200)]
    c_trials: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyBoundsArgs {
    /// Repetitions per concentration check.
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    /// Samples for the exponential-minimum check.
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Summary JSON written by `sweep`.
    summary: Option<PathBuf>,
    /// Recompute the summary from these records instead (needs --config).
    #[arg(long, requires = "config")]
    records: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let usage = matches!(
            e.downcast_ref::<Error>(),
            Some(
                Error::InvalidParameter(_)
                    | Error::InvalidConfig(_)
                    | Error::EndpointOutOfRange { .. }
                    | Error::NodeCountMismatch { .. }
            )
        );
        if usage {
            Failure::Usage(e)
        } else {
            Failure::Runtime(e)
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn check_line(pass: bool, what: &str) -> bool {
    println!("{} {what}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn cmd_run(seed: u64, args: RunArgs) -> Result<bool, Failure> {
    let exp = args.problem.experiment(seed);
    exp.validate()?;
    let cfg = exp.trial_config(args.trial)?;
    let trace = run_trial(&cfg)?;
    let mut out = output(args.out.as_deref()).map_err(Failure::Runtime)?;
    trace.write_jsonl(&mut out)?;
    out.flush().map_err(|e| Failure::Runtime(e.into()))?;
    Ok(true)
}

fn cmd_sweep(seed: Option<u64>, args: SweepArgs) -> Result<bool, Failure> {
    let mut exp =
        ExperimentConfig::from_json_file(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    if let Some(seed) = seed {
        exp.seed = seed;
    }
    if let Some(trials) = args.trials {
        exp.trials = trials;
    }
    if args.serial {
        exp.parallel = false;
    }
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Runtime(e.into()))?;
        exp.records_path = Some(dir.join("records.jsonl"));
        exp.summary_path = Some(dir.join("summary.json"));
    }
    let result = monte_carlo(&exp)?;
    let summary = &result.summary;
    if let Some(dir) = &args.out {
        summary.write_csv(File::create(dir.join("summary.csv")).map_err(|e| Failure::Runtime(e.into()))?)?;
    }
    println!(
        "{} trials of {} at n = {}: failure fraction {:.4}",
        summary.trials,
        summary.protocol.as_str(),
        summary.n,
        summary.failure_fraction
    );
    let mut ok = true;
    for (name, v) in &summary.verdicts {
        ok &= check_line(v.pass, &format!("{name}: {} {} {}", v.measured, v.comparison, v.threshold));
    }
    Ok(ok)
}

fn cmd_verify_graph(seed: u64, args: VerifyGraphArgs) -> Result<bool, Failure> {
    let reports = vec![
        verify::product_completeness(5, args.trials, seed)?,
        verify::c_connected_speedup(6, &[1, 2, 3], args.c_trials, seed.wrapping_add(1))?,
        verify::product_associativity(6, args.trials, seed.wrapping_add(2))?,
    ];
    let mut ok = true;
    for r in &reports {
        ok &= check_line(r.passed(), &format!("{}: {}/{} cases", r.name, r.cases - r.failures, r.cases));
    }
    if let Some(path) = &args.out {
        let mut w = output(Some(path)).map_err(Failure::Runtime)?;
        serde_json::to_writer_pretty(&mut w, &reports).map_err(|e| Failure::Runtime(e.into()))?;
        w.flush().map_err(|e| Failure::Runtime(e.into()))?;
    }
    Ok(ok)
}

fn cmd_verify_bounds(seed: u64, args: VerifyBoundsArgs) -> Result<bool, Failure> {
    let rates = [1.0, 2.0, 3.0, 4.0, 5.0];
    let min = verify::min_of_exponentials(&rates, &[0.02, 0.05, 0.1], args.samples, seed)?;
    let mut ok = true;
    for (x, emp, exact) in &min.survival {
        ok &= check_line(
            (emp - exact).abs() <= 0.01,
            &format!("min of exponentials: P[min > {x}] = {emp:.4}, exact {exact:.4}"),
        );
    }
    let tails = verify::concentration_suite(
        &[(50, 0.1), (100, 0.2), (300, 0.1)],
        &[1.0, 3.0],
        &[None, Some(0.1)],
        args.trials,
        3.0,
        seed,
    )?;
    for t in &tails {
        let p = &t.params;
        let rounding = p.beta.map_or("unrounded".to_string(), |b| format!("beta {b}"));
        ok &= check_line(
            t.passed(),
            &format!(
                "tail ell {} alpha {} lambda {} {rounding}: {:.4} <= {:.4} + {:.4}",
                p.ell, p.alpha, p.lambda, t.frequency, t.bound, t.slack
            ),
        );
    }
    if let Some(path) = &args.out {
        let mut w = output(Some(path)).map_err(Failure::Runtime)?;
        let doc = serde_json::json!({ "min_of_exponentials": min, "tails": tails });
        serde_json::to_writer_pretty(&mut w, &doc).map_err(|e| Failure::Runtime(e.into()))?;
        w.flush().map_err(|e| Failure::Runtime(e.into()))?;
    }
    Ok(ok)
}

fn cmd_report(args: ReportArgs) -> Result<bool, Failure> {
    let summary: Summary = match (&args.records, &args.summary) {
        (Some(records), _) => {
            let config = args.config.as_ref().expect("clap enforces --config with --records");
            let exp =
                ExperimentConfig::from_json_file(config).with_context(|| format!("reading {}", config.display()))?;
            Summary::from_records(&exp, &read_records(records)?)
        }
        (None, Some(path)) => {
            let file =
                File::open(path).with_context(|| format!("opening {}", path.display())).map_err(Failure::Runtime)?;
            serde_json::from_reader(io::BufReader::new(file))
                .with_context(|| format!("parsing {}", path.display()))
                .map_err(Failure::Usage)?
        }
        (None, None) => {
            return Err(Failure::Usage(anyhow::anyhow!("report needs a summary file or --records with --config")))
        }
    };
    let out = output(args.out.as_deref()).map_err(Failure::Runtime)?;
    summary.write_csv(out)?;
    Ok(summary.all_pass())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let seed = cli.seed.unwrap_or(0);
    let result = match cli.command {
        Command::Run(a) => cmd_run(seed, a),
        Command::Sweep(a) => cmd_sweep(cli.seed, a),
        Command::VerifyGraph(a) => cmd_verify_graph(seed, a),
        Command::VerifyBounds(a) => cmd_verify_bounds(seed, a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FAIL)
        }
    }
}
