//! `uresample`: run resampling experiments from a JSON config.

mod config;
mod presets;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use thiserror::Error;
use uresample_core::{Summary, REPORT_HEADER};

use config::Config;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Output(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "uresample", about = "Subsampling and bootstrap Monte Carlo experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; defaults to the config, then URESAMPLE_THREADS.
        #[arg(long, env = "URESAMPLE_THREADS")]
        threads: Option<usize>,
        /// Output directory for the CSV report and JSON summary.
        #[arg(long)]
        out: Option<PathBuf>,
        /// `key=value` with dotted keys, applied before validation.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// List built-in presets, or print one as a config file.
    Presets {
        #[arg(long, value_name = "NAME")]
        dump: Option<String>,
    },
    Version,
}

fn output_err(e: impl std::fmt::Display) -> CliError {
    CliError::Output(e.to_string())
}

fn run(config_path: &Path, seed: Option<u64>, threads: Option<usize>, out: Option<PathBuf>, overrides: &[String]) -> Result<(), CliError> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", config_path.display())))?;
    let mut config = Config::parse(&text, overrides)?;
    if let Some(s) = seed {
        config.spec.set_seed(s);
    }
    init_logging(config.driver.log_level.as_deref());

    // Command line, then config file; the env var is folded into the flag by clap.
    let threads = threads.or(config.driver.threads);
    if threads == Some(0) {
        return Err(CliError::Config("threads must be positive".into()));
    }
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().map_err(|e| CliError::Config(e.to_string()))?;
    }
    let out_dir = out.or_else(|| config.driver.output.clone().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("."));
    let stem = config_path.file_stem().and_then(|s| s.to_str()).unwrap_or("report").to_string();

    log::info!("running {} (seed {}) with {} threads", config.spec.kind(), config.spec.seed(), rayon::current_num_threads());
    let start = Instant::now();
    let report = config.spec.run().map_err(|e| CliError::Numerical(e.to_string()))?;
    let wall = start.elapsed().as_secs_f64();

    std::fs::create_dir_all(&out_dir).map_err(output_err)?;
    let csv_path = out_dir.join(format!("{stem}.csv"));
    let json_path = out_dir.join(format!("{stem}.json"));
    let file = std::fs::File::create(&csv_path).map_err(output_err)?;
    report.write_csv(std::io::BufWriter::new(file)).map_err(output_err)?;
    let summary = Summary::new(&config.spec, &report, wall);
    std::fs::write(&json_path, summary.to_json().map_err(output_err)?).map_err(output_err)?;
    println!("{REPORT_HEADER}: wrote {} and {}", csv_path.display(), json_path.display());

    let errors = report.errors();
    if !errors.is_empty() {
        return Err(CliError::Numerical(format!("{} grid point(s) failed: {}", errors.len(), errors.join("; "))));
    }
    Ok(())
}

fn init_logging(level: Option<&str>) {
    let env = env_logger::Env::default().default_filter_or(level.unwrap_or("info"));
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

fn presets(dump: Option<String>) -> Result<(), CliError> {
    match dump {
        Some(name) => {
            let p = presets::find(&name).ok_or_else(|| CliError::Config(format!("unknown preset `{name}`")))?;
            print!("{}", p.config);
        }
        None => {
            for p in presets::PRESETS {
                println!("{:<20} {}", p.name, p.anchor);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, threads, out, overrides } => run(&config, seed, threads, out, &overrides),
        Command::Presets { dump } => presets(dump),
        Command::Version => {
            println!("uresample {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("uresample: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
