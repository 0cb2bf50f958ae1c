mod commands;
mod config;
mod inputs;

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use crate::commands::Outputs;
use crate::config::{Cli, Command, Report, RunConfig};

const THREADS_VAR: &str = "GRUNSKY_LAB_THREADS";

#[derive(Debug)]
pub enum Failure {
    /// Bad flags or unreadable input: exit 1.
    Usage(String),
    /// A numerical routine refused or failed: exit 2.
    Numerical(grunsky_core::Error),
}

impl From<grunsky_core::Error> for Failure {
    fn from(e: grunsky_core::Error) -> Self {
        Self::Numerical(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Usage(_) => 1,
            Self::Numerical(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Numerical(e) => write!(f, "numerical failure: {e}"),
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Failure::Usage(format!(
            "{THREADS_VAR} must be a positive integer, got {raw:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(format!("cannot size the thread pool: {e}")))
}

fn write_outputs(dir: &Path, out: &Outputs) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Usage(format!("cannot write to {}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    let mut json = serde_json::to_string_pretty(&out.report).expect("reports serialize");
    json.push('\n');
    fs::write(dir.join(out.report_file), json).map_err(io)?;
    for table in &out.tables {
        let mut w = csv::Writer::from_path(dir.join(table.file))
            .map_err(|e| Failure::Usage(e.to_string()))?;
        w.write_record(&table.header)
            .map_err(|e| Failure::Usage(e.to_string()))?;
        for row in &table.rows {
            w.write_record(row.iter().enumerate().map(|(j, v)| {
                if table.integer_columns.contains(&j) {
                    format!("{}", *v as i64)
                } else {
                    format!("{v:?}")
                }
            }))
            .map_err(|e| Failure::Usage(e.to_string()))?;
        }
        w.flush().map_err(io)?;
    }
    Ok(())
}

/// On a numerical failure the config and the diagnostic still go to disk.
fn write_failure(dir: &Path, cfg: &RunConfig, failure: &Failure) {
    let body = serde_json::json!({ "error": failure.to_string() });
    let report = Report::new(cfg, Default::default(), body);
    if fs::create_dir_all(dir).is_ok() {
        let json = serde_json::to_string_pretty(&report).expect("reports serialize");
        let _ = fs::write(
            dir.join(format!("{}_failure.json", cfg.command)),
            json + "\n",
        );
    }
}

fn run(command: &Command) -> Result<(), Failure> {
    configure_threads()?;
    let cfg = RunConfig::resolve(command)?;
    let result = match command {
        Command::Map(_) => commands::map(&cfg),
        Command::Grunsky(_) => commands::grunsky(&cfg),
        Command::Extremality(_) => commands::extremality(&cfg),
        Command::Deform(_) => commands::deform(&cfg),
    };
    let dir = &command.args().out;
    match result {
        Ok(out) => {
            write_outputs(dir, &out)?;
            log::info!("wrote {}", dir.join(out.report_file).display());
            Ok(())
        }
        Err(f) => {
            if matches!(f, Failure::Numerical(_)) {
                write_failure(dir, &cfg, &f);
            }
            Err(f)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let _ = writeln!(std::io::stderr(), "grunsky-lab: {f}");
            ExitCode::from(f.code())
        }
    }
}
