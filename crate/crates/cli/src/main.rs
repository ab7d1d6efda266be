use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use trendlab::experiment::{self, ExperimentConfig, ReportFormat, RunManifest, RunOptions};
use trendlab::synthetic::{self, SynthConfig};

#[derive(Parser)]
#[command(name = "trendlab", version, about = "Direction-of-movement model comparison runner")]
struct Cli {
    /// Worker threads for the data-parallel paths (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Run everything on one thread.
    #[arg(long, global = true)]
    serial: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides `output_dir` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-render reports from a saved run manifest.
    Report {
        manifest: PathBuf,
        /// csv, text or both.
        #[arg(long, default_value = "both")]
        format: String,
        /// Output directory (default: the manifest's directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Write a seeded synthetic market and a matching config.
    Synth {
        #[arg(long, default_value_t = 800)]
        rows: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

fn configure_threads(cli: &Cli) -> Result<(), Failure> {
    let jobs = if cli.serial { Some(1) } else { cli.jobs };
    match jobs {
        Some(0) => Err(Failure::Config("--jobs must be at least 1".into())),
        #[cfg(feature = "parallel")]
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(format!("thread pool: {e}"))),
        #[cfg(not(feature = "parallel"))]
        Some(_) => Ok(()),
        None => Ok(()),
    }
}

const SYNTH_CONFIG: &str = r#"# Generated by `trendlab synth`.
seed = 42
output_dir = "out"
families = ["rf", "knn", "gbt", "svm", "nb", "ann", "lstm"]
kinds = ["continuous", "trend"]
windows = ["complete", "reduced"]

[data]
ohlcv = "prices.csv"
tweets = "tweets.csv"
trends = "trends.csv"
train_end = "TRAIN_END"
reduced_rows = REDUCED

[protocol]
kind = "cv"
k = 5

[grids]
preset = "quick"
"#;

fn execute(cli: &Cli) -> Result<(), Failure> {
    configure_threads(cli)?;
    match &cli.command {
        Command::Run { config, seed, out } => {
            let cfg = ExperimentConfig::load(config).map_err(|e| Failure::Config(e.to_string()))?;
            cfg.check().map_err(|e| Failure::Config(e.to_string()))?;
            let opts = RunOptions { seed: *seed, output_dir: out.clone() };
            let manifest = experiment::run(&cfg, &opts).map_err(|e| Failure::Runtime(e.to_string()))?;
            let failed: Vec<String> = manifest
                .results
                .iter()
                .filter(|r| r.error.is_some())
                .map(|r| format!("{}/{}/{}", r.kind, r.window, r.family))
                .collect();
            println!(
                "wrote {} reports to {} in {:.1}s",
                manifest.reports.len(),
                manifest.config.output_dir.display(),
                manifest.total_seconds
            );
            if !failed.is_empty() {
                eprintln!("failed cells: {}", failed.join(", "));
            }
            Ok(())
        }
        Command::Report { manifest, format, out } => {
            let format: ReportFormat = format.parse().map_err(|e: trendlab::Error| Failure::Config(e.to_string()))?;
            let m = RunManifest::load(manifest).map_err(|e| Failure::Config(e.to_string()))?;
            let dir = out.clone().unwrap_or_else(|| manifest.parent().map(PathBuf::from).unwrap_or_default());
            let written = experiment::write_reports(&m, &dir, format).map_err(|e| Failure::Runtime(e.to_string()))?;
            println!("wrote {} reports to {}", written.len(), dir.display());
            Ok(())
        }
        Command::Validate { config } => {
            let d = experiment::validate_config(config);
            print!("{}", experiment::render_diagnostics(&d));
            if d.is_clean() {
                Ok(())
            } else {
                Err(Failure::Config(format!("{} error(s)", d.errors.len())))
            }
        }
        Command::Synth { rows, seed, out } => {
            let cfg = SynthConfig { rows: *rows, ..Default::default() };
            let market = synthetic::generate(&cfg, *seed).map_err(|e| Failure::Config(e.to_string()))?;
            market.write_dir(out).map_err(|e| Failure::Runtime(e.to_string()))?;
            let train_end = market.last_date() - chrono::Days::new(60);
            let body = SYNTH_CONFIG
                .replace("TRAIN_END", &train_end.format("%Y-%m-%d").to_string())
                .replace("REDUCED", &(rows / 2).max(50).to_string());
            let path = out.join("experiment.toml");
            std::fs::write(&path, body).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
            println!("wrote {} rows and {}", rows, path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
