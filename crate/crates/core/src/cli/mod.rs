//! Command-line driver: `gen-data`, `train`, `probe`, `report`, `selftest`.
//!
//! Exit codes: 0 on success, 1 on internal errors, 2 on user or config
//! errors. `ACAV_LOG` sets the log filter (`info`, `debug`, ...).

pub mod commands;
pub mod config;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::{
    cmd_gen_data, cmd_probe, cmd_report, cmd_selftest, cmd_train, run_pipeline, GenDataSummary,
    Layout, MergeSummary, TrainSummary,
};
pub use config::{ExperimentConfig, LoadedConfig, ProbeSettings, TrainSettings};
pub use manifest::RunManifest;

use crate::error::{AcavError, Result};
use crate::probe::AcavReport;

#[derive(Debug, Parser)]
#[command(name = "acav", version, about = "Concept activation probing on synthetic medical images")]
pub struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, overriding `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed, overriding `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl RunArgs {
    fn load(&self) -> Result<LoadedConfig> {
        Ok(LoadedConfig::load(&self.config)?.with_overrides(self.seed, self.out.clone()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Md,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the training dataset and the healthy probe pool.
    GenData(RunArgs),
    /// Train the classifier on the generated dataset.
    Train(RunArgs),
    /// Run the concept sweeps and write the report.
    Probe {
        #[command(flatten)]
        run: RunArgs,
        /// Checkpoint to probe instead of `<out>/model/checkpoint.acav`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Format printed to stdout; all formats are written to disk.
        #[arg(long, value_enum, default_value = "md")]
        format: Format,
    },
    /// Merge report files into comparison tables and plot series.
    Report {
        /// Report CSVs or directories containing `report.csv`.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "md")]
        format: Format,
    },
    /// Gradient checks, convolution oracle and per-neuron forward check.
    Selftest {
        #[arg(long, default_value_t = 100)]
        models: usize,
        #[arg(long, default_value_t = 100)]
        conv_cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "md")]
        format: Format,
    },
}

fn render_report(report: &AcavReport, format: Format) -> Result<String> {
    Ok(match format {
        Format::Csv => report.to_csv()?,
        Format::Md => report.to_markdown(),
        Format::Json => {
            serde_json::json!({ "footer": report.footer(), "rows": report.records() }).to_string() + "\n"
        }
    })
}

fn execute(command: Command) -> Result<i32> {
    match command {
        Command::GenData(args) => {
            println!("{}", cmd_gen_data(&args.load()?)?);
        }
        Command::Train(args) => {
            let s = cmd_train(&args.load()?)?;
            let last = s.history.last().map(|l| format!("{l:.4}")).unwrap_or_else(|| "n/a".into());
            println!(
                "wrote {} ({} epochs, final loss {last}, sha256 {})",
                s.checkpoint.display(),
                s.history.len(),
                s.checkpoint_sha256
            );
            if !s.early_loss_decreasing {
                println!("flagged: loss did not decrease strictly over the first 3 epochs");
            }
        }
        Command::Probe { run, checkpoint, format } => {
            let report = cmd_probe(&run.load()?, checkpoint.as_deref())?;
            print!("{}", render_report(&report, format)?);
        }
        Command::Report { inputs, out, format } => {
            let s = cmd_report(&inputs, &out)?;
            match format {
                Format::Json => println!("{}", serde_json::to_string(&s).expect("summary serializes")),
                _ => {
                    let name = if format == Format::Csv { commands::MERGED_CSV } else { commands::COMPARISON_MD };
                    let path = out.join(name);
                    print!("{}", std::fs::read_to_string(&path).map_err(|e| AcavError::io(&path, e))?);
                }
            }
        }
        Command::Selftest { models, conv_cases, seed, format } => {
            let r = cmd_selftest(models, conv_cases, seed)?;
            match format {
                Format::Json => println!("{}", serde_json::to_string(&r).expect("report serializes")),
                _ => {
                    println!(
                        "gradient check: {} models, {} coordinates, {} kink crossings skipped, max rel err {:.2e}, {} failures",
                        r.gradient_models, r.gradient.checked, r.gradient.skipped_kinks,
                        r.gradient.max_relative_error, r.gradient.failures
                    );
                    println!("conv oracle: {} cases, {} mismatches", r.conv_cases, r.conv_mismatches);
                    println!("per-neuron forward: max abs err {:.2e}", r.max_neuron_error);
                    println!("{}", if r.passed() { "PASS" } else { "FAIL" });
                }
            }
            return Ok(if r.passed() { 0 } else { 1 });
        }
    }
    Ok(0)
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter("ACAV_LOG")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(cli.command)),
            Err(e) => Err(AcavError::Config(format!("--threads {n}: {e}"))),
        },
        None => execute(cli.command),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_user_error() {
                2
            } else {
                1
            }
        }
    }
}
