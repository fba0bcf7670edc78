//! Argument parsing and dispatch for the `denram` binary.
//!
//! Settings resolve as command line > environment (`DENRAM_OUT`,
//! `DENRAM_THREADS`) > config file > built-in defaults.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::{
    cmd_cd_demo, cmd_convert, cmd_encode, cmd_eval, cmd_report, cmd_sweep, cmd_train, exit_code, ConvertFrom,
    ExperimentConfig,
};
use crate::data::RasterLoadOptions;
use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "denram", version, about = "RRAM delay-line dendritic network simulator")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the configured model and save a checkpoint.
    Train,
    /// Evaluate a checkpoint across read-noise levels.
    Eval(EvalArgs),
    /// Sweep the input lag of the two-input coincidence circuit.
    CdDemo,
    /// Sweep delay distributions and recurrent hidden sizes.
    Sweep,
    /// Footprint and power report for one or more training runs.
    Report(ReportArgs),
    /// Delta-modulate a one-column signal into an ERAS raster.
    Encode(EncodeArgs),
    /// Convert a dataset to ERAS.
    Convert(ConvertArgs),
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// ERAS dataset to evaluate on.
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated relative read-noise levels; defaults to the config.
    #[arg(long, value_delimiter = ',')]
    pub noise: Option<Vec<f64>>,
    #[arg(long)]
    pub realizations: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Output directories of `train`; ratios are relative to the first.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// `sample_index,value` CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Modulation threshold; defaults to 0.1 × the interquartile range.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Starting reconstruction level; defaults to the first sample.
    #[arg(long)]
    pub initial: Option<f64>,
    /// Sample period, seconds.
    #[arg(long, default_value_t = 1.0 / 360.0)]
    pub dt: f64,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long, value_enum)]
    pub from: ConvertFrom,
    #[arg(long)]
    pub input: PathBuf,
    /// Beat annotations, for `--from ecg`.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// Target bin width, seconds.
    #[arg(long, default_value_t = RasterLoadOptions::default().dt)]
    pub dt: f64,
    /// Bins kept per sample.
    #[arg(long, default_value_t = RasterLoadOptions::default().max_steps)]
    pub max_steps: usize,
    /// Write the binary encoding.
    #[arg(long)]
    pub binary: bool,
}

/// Settings after merging flags, environment and config.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub out: PathBuf,
    pub threads: Option<usize>,
}

fn env_var(name: &str, lookup: &dyn Fn(&str) -> Option<String>) -> Option<String> {
    lookup(name).filter(|v| !v.is_empty())
}

pub fn resolve(global: &GlobalArgs, command: &str, lookup: &dyn Fn(&str) -> Option<String>) -> Result<Resolved> {
    let mut config = match &global.config {
        Some(p) if !p.is_file() => {
            return Err(Error::config("--config", format!("{} does not exist", p.display())));
        }
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = global.seed {
        config.seed = s;
    }
    let out = global
        .out
        .clone()
        .or_else(|| env_var("DENRAM_OUT", lookup).map(PathBuf::from))
        .unwrap_or_else(|| {
            if global.config.is_some() || config.out_dir != ExperimentConfig::default().out_dir {
                config.out_dir.clone()
            } else {
                Path::new("runs").join(command)
            }
        });
    let threads = match global.threads {
        Some(t) => Some(t),
        None => match env_var("DENRAM_THREADS", lookup) {
            Some(v) => Some(
                v.parse::<usize>()
                    .map_err(|_| Error::config("DENRAM_THREADS", format!("expected a thread count, got {v:?}")))?,
            ),
            None => config.threads,
        },
    };
    config.out_dir = out.clone();
    config.threads = threads;
    Ok(Resolved { config, out, threads })
}

fn init_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        // A second call in the same process fails harmlessly.
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::debug!("thread pool already initialized");
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Train => "train",
        Command::Eval(_) => "eval",
        Command::CdDemo => "cd-demo",
        Command::Sweep => "sweep",
        Command::Report(_) => "report",
        Command::Encode(_) => "encode",
        Command::Convert(_) => "convert",
    }
}

fn execute(cli: Cli, lookup: &dyn Fn(&str) -> Option<String>) -> Result<()> {
    let r = resolve(&cli.global, command_name(&cli.command), lookup)?;
    init_threads(r.threads);
    let cfg = &r.config;
    match cli.command {
        Command::Train => {
            let s = cmd_train(cfg, &r.out)?;
            println!(
                "test accuracy {:.4} (noisy {:.4} ± {:.4} at σ={}), {} parameters",
                s.test_accuracy, s.test_accuracy_noisy, s.test_accuracy_noisy_std, s.noise_relative_std,
                s.trainable_parameters
            );
        }
        Command::Eval(a) => {
            let levels = a.noise.unwrap_or_else(|| cfg.eval.noise_levels.clone());
            let realizations = a.realizations.unwrap_or(cfg.eval.realizations);
            let s = cmd_eval(&a.checkpoint, &a.data, &levels, realizations, cfg.seed, &r.out)?;
            for l in &s.levels {
                println!("noise {:<6} accuracy {:.4} ± {:.4}", l.noise, l.report.mean_accuracy, l.report.std_accuracy);
            }
        }
        Command::CdDemo => {
            let rows = cmd_cd_demo(cfg, &r.out)?;
            let fired = rows.iter().filter(|r| r.fired).count();
            println!("{fired} of {} lags fired", rows.len());
        }
        Command::Sweep => {
            let s = cmd_sweep(cfg, &r.out)?;
            println!("{} delay cells, {} hidden cells", s.delay_cells, s.hidden_cells);
        }
        Command::Report(a) => {
            let rep = cmd_report(&a.runs, &r.out)?;
            for run in &rep.runs {
                println!("{}: {} ({:.3e} W)", run.run, run.model, run.power.watts);
            }
        }
        Command::Encode(a) => {
            let stem = a.input.file_stem().and_then(|s| s.to_str()).unwrap_or("signal").to_string();
            std::fs::create_dir_all(&r.out).map_err(|e| Error::io(&r.out, e))?;
            let path = r.out.join(format!("{stem}.eras"));
            cmd_encode(&a.input, a.delta, a.initial, a.dt, &path)?;
            println!("{}", path.display());
        }
        Command::Convert(a) => {
            let load = RasterLoadOptions {
                dt: a.dt,
                max_steps: a.max_steps,
            };
            for p in cmd_convert(a.from, &a.input, a.annotations.as_deref(), &load, a.binary, &r.out)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli, &|k| std::env::var(k).ok()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
