use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use roe_field::report::{exit_code, failure_record, run, Command, ExperimentConfig};
use roe_field::Error;

#[derive(Clone, Copy, ValueEnum)]
enum Cmd {
    Coeffs,
    Verify,
    Beta,
    Scan,
    Limit,
    Field,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Coeffs => Command::Coeffs,
            Cmd::Verify => Command::Verify,
            Cmd::Beta => Command::Beta,
            Cmd::Scan => Command::Scan,
            Cmd::Limit => Command::Limit,
            Cmd::Field => Command::Field,
        }
    }
}

/// Certified experiments on hat-function frames and their compressions.
#[derive(Parser)]
#[command(name = "roefield", version)]
struct Args {
    command: Cmd,
    /// TOML experiment config; defaults reproduce the reference setup.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Directory for CSV tables and the JSON summary.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; 0 runs sequentially.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Accepted for interface stability; every engine here is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let command = Command::from(args.command);
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global().expect("thread pool is set once");
    }
    let result = match &args.config {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
    .and_then(|cfg| run(command, &cfg));
    match result {
        Ok(report) => {
            for line in report.lines() {
                println!("{line}");
            }
            if let Some(dir) = &args.out {
                if let Err(e) = report.write(dir) {
                    eprintln!("error: cannot write {}: {e}", dir.display());
                    return ExitCode::from(2);
                }
            }
            println!("{command}: {}", report.status());
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => fail(command, &e, args.out.as_deref()),
    }
}

fn fail(command: Command, e: &Error, out: Option<&std::path::Path>) -> ExitCode {
    eprintln!("error: {e}");
    if let Some(dir) = out {
        let record = failure_record(Some(command), e);
        let text = serde_json::to_string_pretty(&record).expect("json value") + "\n";
        if std::fs::create_dir_all(dir).and_then(|_| std::fs::write(dir.join("error.json"), text)).is_err() {
            eprintln!("error: cannot write {}", dir.display());
        }
    }
    ExitCode::from(exit_code(e) as u8)
}
