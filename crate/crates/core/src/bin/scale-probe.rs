use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use scale_probe::harness::{compare_runs, describe, parse_config, run, Experiment};

#[derive(Parser)]
#[command(name = "scale-probe", version, about = "Scale-dependent local estimate measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a config file.
    Run {
        config: PathBuf,
        /// Output directory; overrides the `out` key of the config.
        #[arg(long, value_parser = clap::builder::ValueParser::os_string())]
        out: Option<std::ffi::OsString>,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Compare two CSV outputs column by column.
    Compare { a: PathBuf, b: PathBuf },
    /// List experiments and their CSV schemas.
    List,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, out, jobs } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: {}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            let cfg = match parse_config(&text) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            let dir = out.map(PathBuf::from).or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
            match run(&cfg, &dir, jobs) {
                Ok(outcome) => {
                    println!(
                        "{}: {} records, {} fit rows written to {}",
                        cfg.experiment,
                        outcome.records.len(),
                        outcome.fits.rows.len(),
                        dir.display()
                    );
                    for v in &outcome.violations {
                        println!("{v}");
                    }
                    if outcome.passed() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Command::Compare { a, b } => match compare_runs(&a, &b) {
            Ok(report) => {
                println!("column,max_abs,max_rel");
                for c in &report.columns {
                    println!("{},{:e},{:e}", c.column, c.max_abs, c.max_rel);
                }
                for f in &report.flags {
                    println!("FLAG row={} column={} a={} b={}", f.row, f.column, f.a, f.b);
                }
                if report.is_clean() {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Command::List => {
            for e in Experiment::ALL {
                print!("{}", describe(e));
            }
            ExitCode::SUCCESS
        }
    }
}
