//! `somnet` — generate datasets, run single experiments, sweep the grid,
//! and summarize results.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 data error, 3 run failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use somnet_core::config::{DatasetKind, ExperimentConfig, ModelKind};
use somnet_core::datasets::{generate_geometric, save_idx};
use somnet_core::error::Error;
use somnet_core::harness::{
    format_summary_table, run_experiment, summarize, sweep, write_summary_csv, SweepGrid,
    CSV_HEADER,
};
use somnet_core::rng::stream;

#[derive(Parser)]
#[command(name = "somnet", version, about = "Sleep-regularized spiking network experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Configuration file; defaults apply for every key not present.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding `<dataset>/{train,t10k}-...-ubyte` IDX files
    /// (falls back to $SOMNET_DATA_ROOT, then ./data).
    #[arg(long)]
    dataset_root: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(root) = &self.dataset_root {
            cfg.dataset_root = Some(root.clone());
        }
        if cfg.encoder.f_max * cfg.encoder.dt / 1000.0 >= 1.0 {
            eprintln!(
                "note: f_max = {} Hz at dt = {} ms saturates the encoder; \
                 full-intensity pixels spike deterministically every step",
                cfg.encoder.f_max, cfg.encoder.dt
            );
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the four-class geometric dataset as an IDX file pair.
    GenerateGeometric {
        /// Output directory for the IDX pair.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7100)]
        count: usize,
        /// Additive pixel-noise variance.
        #[arg(long, default_value_t = 0.02)]
        noise_var: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Run a single experiment and append its row to a results CSV.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Model override (stdp|sg).
        #[arg(long)]
        model: Option<String>,
        /// Dataset override (geometric|mnist|fmnist|kmnist|notmnist).
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        sleep_ratio: Option<f64>,
        /// Results CSV (appended; created with header when missing).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for per-run JSON-lines telemetry.
        #[arg(long)]
        telemetry: Option<PathBuf>,
    },
    /// Run the full models x datasets x seeds x ratios grid.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated model list, e.g. "stdp,sg".
        #[arg(long, default_value = "stdp")]
        models: String,
        /// Comma-separated dataset list.
        #[arg(long, default_value = "geometric")]
        datasets: String,
        /// Comma-separated seed list.
        #[arg(long, default_value = "1,2,3,4,5")]
        seeds: String,
        /// Comma-separated sleep-ratio list.
        #[arg(long, default_value = "0.0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")]
        sleep_ratios: String,
        /// Parallel worker count.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Results CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Skip (model,dataset,seed,ratio) keys already present in the CSV.
        #[arg(long)]
        resume: bool,
        /// Directory for per-run JSON-lines telemetry.
        #[arg(long)]
        telemetry: Option<PathBuf>,
    },
    /// Aggregate a results CSV into per-(model, sleep-ratio) means and CIs.
    Summarize {
        /// Results CSV produced by `run`/`sweep`.
        #[arg(long)]
        csv: PathBuf,
        /// Optional plot-ready summary CSV destination.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_list<T, F: Fn(&str) -> Result<T, Error>>(s: &str, parse: F) -> Result<Vec<T>, Error> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(parse)
        .collect()
}

fn append_record_csv(path: &PathBuf, row: &str) -> Result<(), Error> {
    use std::io::Write;
    let fresh = !path.exists();
    let mut file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(file, "{CSV_HEADER}")?;
    }
    writeln!(file, "{row}")?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::GenerateGeometric { out, count, noise_var, seed } => {
            if noise_var < 0.0 {
                return Err(Error::InvalidInput("noise_var must be >= 0".into()));
            }
            std::fs::create_dir_all(&out)?;
            let set = generate_geometric(count, noise_var.sqrt(), &mut stream(seed, "geometric"))?;
            let images = out.join("train-images-idx3-ubyte");
            let labels = out.join("train-labels-idx1-ubyte");
            save_idx(&set, &images, &labels)?;
            println!(
                "wrote {count} samples ({} classes) to {} and {}",
                set.class_count,
                images.display(),
                labels.display()
            );
            Ok(())
        }
        Command::Run { config, model, dataset, seed, sleep_ratio, out, telemetry } => {
            let mut cfg = config.load()?;
            if let Some(m) = model {
                cfg.model = ModelKind::parse(&m)?;
            }
            if let Some(d) = dataset {
                cfg.dataset = DatasetKind::parse(&d)?;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(r) = sleep_ratio {
                cfg.sleep_ratio = r;
            }
            if let Some(dir) = telemetry {
                cfg.telemetry_dir = Some(dir);
            }
            let record = run_experiment(&cfg)?;
            println!("{CSV_HEADER}");
            println!("{}", record.csv_row());
            if let somnet_core::harness::RunStatus::Aborted(reason) = &record.status {
                eprintln!("run aborted early: {reason}");
            }
            if let Some(path) = out {
                append_record_csv(&path, &record.csv_row())?;
            }
            Ok(())
        }
        Command::Sweep {
            config,
            models,
            datasets,
            seeds,
            sleep_ratios,
            jobs,
            out,
            resume,
            telemetry,
        } => {
            let mut cfg = config.load()?;
            if let Some(dir) = telemetry {
                cfg.telemetry_dir = Some(dir);
            }
            let grid = SweepGrid {
                models: parse_list(&models, ModelKind::parse)?,
                datasets: parse_list(&datasets, DatasetKind::parse)?,
                seeds: parse_list(&seeds, |s| {
                    s.parse().map_err(|_| Error::InvalidInput(format!("bad seed '{s}'")))
                })?,
                sleep_ratios: parse_list(&sleep_ratios, |s| {
                    s.parse().map_err(|_| Error::InvalidInput(format!("bad ratio '{s}'")))
                })?,
            };
            let outcome = sweep(&cfg, &grid, jobs.max(1), &out, resume)?;
            println!(
                "sweep finished: {} completed, {} skipped, {} failed -> {}",
                outcome.completed,
                outcome.skipped,
                outcome.failures.len(),
                out.display()
            );
            for failure in &outcome.failures {
                eprintln!("failed: {failure}");
            }
            if !outcome.failures.is_empty() {
                return Err(Error::RunFailed(format!(
                    "{} of {} runs failed",
                    outcome.failures.len(),
                    outcome.completed + outcome.failures.len()
                )));
            }
            Ok(())
        }
        Command::Summarize { csv, out } => {
            let text = std::fs::read_to_string(&csv)?;
            let rows = summarize(&text)?;
            print!("{}", format_summary_table(&rows));
            if let Some(path) = out {
                write_summary_csv(&rows, &path)?;
                println!("summary csv -> {}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are not errors
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
