//! Command-line entry point. Exit codes: 0 success, 1 a check or estimand
//! failed, 2 usage, configuration or I/O error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::figures::run_figure;
use crate::io::config::{parse_config, ParsedConfig};
use crate::io::emit::{emit_report, emit_sweep, versioned_json, Format, RunManifest};
use crate::io::plot::emit_plot;
use crate::oracle::{enumerate_exact, mc_vs_oracle_against, DiscreteModelConfig};
use crate::rng::RngSeed;
use crate::sweep::{figure_preset, run_sweep, simulate_report, Execution, FigureName, DEFAULT_SEED};
use crate::validation::{run_suite, Budget};

#[derive(Parser, Debug)]
#[command(name = "posthoc", version, about = "Simulate a priori versus post hoc theorizing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    /// JSON configuration document.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Output format; both when omitted.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Worker threads, 0 for all cores. Never changes results.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    plot: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Paired trials of one model and their decomposition report.
    Simulate(RunArgs),
    /// A model swept along one axis.
    Sweep(RunArgs),
    /// Reproduce one of the preset figures.
    Figure {
        #[arg(value_parser = parse_figure)]
        name: FigureName,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        plot: bool,
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Exact enumeration of a small discrete model.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        /// Also simulate this many trials and report z-scores.
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Run the invariant suite.
    Validate {
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
}

fn parse_figure(s: &str) -> std::result::Result<FigureName, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn formats(f: Option<FormatArg>) -> Vec<Format> {
    match f {
        Some(FormatArg::Csv) => vec![Format::Csv],
        Some(FormatArg::Json) => vec![Format::Json],
        None => vec![Format::Csv, Format::Json],
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn warn_all(manifest: &mut RunManifest, warnings: impl IntoIterator<Item = String>) {
    for w in warnings {
        eprintln!("warning: {w}");
        manifest.warnings.push(w);
    }
}

fn model_warnings(model: &crate::theorizing::ModelConfig) -> Vec<String> {
    if model.falsifiability_warning() {
        vec!["no theory type rules out any idea, so every idea is consistent with theory".into()]
    } else {
        Vec::new()
    }
}

fn run_config(args: RunArgs, sweep: bool) -> Result<i32> {
    let command = if sweep { "sweep" } else { "simulate" };
    let parsed = parse_config(&read(&args.config)?)?;
    let mut config = parsed.config;
    if let Some(s) = args.seed {
        config.set_seed(s);
    }
    if let Some(t) = args.trials {
        config.set_trials(t);
    }
    config.validate()?;
    let mut manifest = RunManifest::new(command, config.canonical_value(), config.master_seed());
    manifest.defaults_applied = parsed.defaults_applied;
    warn_all(&mut manifest, model_warnings(config.model()));
    let exec = Execution::with_workers(args.workers);
    let fmts = formats(args.format);
    match (&config, sweep) {
        (ParsedConfig::Model(run), false) => {
            let report = simulate_report(&run.model, run.n_trials, RngSeed::new(run.master_seed, 0), exec)?;
            let u = &run.model.universe;
            emit_report(&report, (u.mu_dist.sd(), u.sd_mu_hat()), &fmts, &args.out, "report", &mut manifest)?;
            if args.plot {
                warn_all(&mut manifest, ["--plot has no chart for a single report; use figure or sweep".to_string()]);
            }
        }
        (ParsedConfig::Sweep(cfg), true) => {
            let result = run_sweep(cfg, exec)?;
            emit_sweep(&result, &fmts, &args.out, "sweep", &mut manifest)?;
            if args.plot {
                let data = crate::figures::FigureData::Sweep(result);
                for (suffix, spec) in data.plots()? {
                    let name = format!("sweep{suffix}.svg");
                    let w = emit_plot(&spec, &args.out.join(&name))?;
                    manifest.outputs.push(name);
                    warn_all(&mut manifest, w);
                }
            }
        }
        (ParsedConfig::Sweep(_), false) => {
            return Err(Error::config("sweep", "simulate takes a single model; use the sweep command"))
        }
        (ParsedConfig::Model(_), true) => {
            return Err(Error::config("sweep", "expected a sweep section, got nothing"))
        }
    }
    let path = manifest.finish(&args.out, &format!("{command}.manifest.json"))?;
    println!("seed {}; wrote {} files, manifest {}", config.master_seed(), manifest.outputs.len(), path.display());
    Ok(0)
}

fn run_figure_cmd(name: FigureName, trials: Option<u64>, seed: u64, out: &Path, plot: bool, workers: usize) -> Result<i32> {
    let mut job = figure_preset(name);
    job.set_seed(seed);
    if let Some(t) = trials {
        job.set_trials(t);
    }
    let value = serde_json::to_value(&job).map_err(|e| Error::Parse(e.to_string()))?;
    let mut manifest = RunManifest::new(format!("figure {name}"), value, seed);
    warn_all(&mut manifest, model_warnings(job.model()));
    let data = run_figure(&job, Execution::with_workers(workers))?;
    let stem = name.to_string();
    manifest.write(out, &format!("{stem}.csv"), data.csv().as_bytes())?;
    manifest.write(out, &format!("{stem}.json"), data.json()?.as_bytes())?;
    if plot {
        for (suffix, spec) in data.plots()? {
            let file = format!("{stem}{suffix}.svg");
            let w = emit_plot(&spec, &out.join(&file))?;
            manifest.outputs.push(file);
            warn_all(&mut manifest, w);
        }
    }
    let path = manifest.finish(out, &format!("{stem}.manifest.json"))?;
    println!("seed {seed}; wrote {} files, manifest {}", manifest.outputs.len(), path.display());
    Ok(0)
}

fn run_oracle(config: &Path, trials: Option<u64>, seed: u64) -> Result<i32> {
    let text = read(config)?;
    let cfg: DiscreteModelConfig = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    cfg.validate()?;
    let exact = enumerate_exact(&cfg)?;
    println!("{}", versioned_json("exact_report", &exact)?);
    let Some(n) = trials else { return Ok(0) };
    let zs = mc_vs_oracle_against(&cfg, &exact, n, RngSeed::new(seed, 0), Execution::default())?;
    let within = zs.iter().filter(|z| z.z.abs() <= 4.0).count();
    for z in &zs {
        println!("{:<28} simulated {:>12.6} exact {:>12.6} z {:>7.2}", z.quantity, z.simulated, z.exact, z.z);
    }
    Ok(if within as f64 >= 0.95 * zs.len() as f64 { 0 } else { 1 })
}

fn run_validate(quick: bool, workers: usize) -> Result<i32> {
    let budget = if quick { Budget::QUICK } else { Budget::FULL };
    let checks = run_suite(budget, Execution::with_workers(workers))?;
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(if checks.iter().all(|c| c.passed) { 0 } else { 1 })
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::EmptyCell { .. } => 1,
        _ => 2,
    }
}

pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Simulate(args) => run_config(args, false),
        Command::Sweep(args) => run_config(args, true),
        Command::Figure { name, trials, seed, out, plot, workers } => {
            run_figure_cmd(name, trials, seed, &out, plot, workers)
        }
        Command::Oracle { config, trials, seed } => run_oracle(&config, trials, seed),
        Command::Validate { quick, workers } => run_validate(quick, workers),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
