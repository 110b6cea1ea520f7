use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use lipcap::corpus;
use lipcap::io::atomic_write;
use lipcap::scenario::{self, Scenario, ScenarioError};

#[derive(Parser)]
#[command(name = "lipcap", version, about = "Lipschitz truncation, p-capacity and change-of-variables checks on grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file and write its reports.
    Run { scenario: PathBuf },
    /// Browse the test corpus.
    Corpus {
        #[command(subcommand)]
        action: CorpusAction,
    },
    /// Operate on written reports.
    Report {
        #[command(subcommand)]
        action: ReportAction,
    },
}

#[derive(Subcommand)]
enum CorpusAction {
    List,
    Describe { id: String },
}

#[derive(Subcommand)]
enum ReportAction {
    /// Merge the checks of several report directories into the output root.
    Merge {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
}

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn config_error(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_CONFIG)
}

fn run(path: &PathBuf) -> ExitCode {
    let s = match Scenario::from_file(path) {
        Ok(s) => s,
        Err(e) => return config_error(e),
    };
    let dir = scenario::output_dir(&s);
    let checks = match scenario::run_scenario(&s, Some(&dir)) {
        Ok(c) => c,
        Err(e @ ScenarioError::Write(_)) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAIL);
        }
        Err(e) => return config_error(e),
    };
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    if let Err(e) = scenario::write_reports(&dir, &s, &checks, stamp) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_FAIL);
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.id.as_str()).collect();
    println!("{}: {}/{} checks passed, reports in {}", s.name, checks.len() - failed.len(), checks.len(), dir.display());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("failed checks: {}", failed.join(", "));
        ExitCode::from(EXIT_FAIL)
    }
}

fn merge(dirs: &[PathBuf]) -> ExitCode {
    let reports = match scenario::merge_reports(dirs) {
        Ok(r) => r,
        Err(e) => return config_error(e),
    };
    let root = scenario::output_root();
    let json = serde_json::to_string_pretty(&reports).expect("reports serialize");
    let written = std::fs::create_dir_all(&root)
        .map_err(lipcap::io::IoError::from)
        .and_then(|_| atomic_write(&root.join("merged.json"), json.as_bytes()))
        .and_then(|_| atomic_write(&root.join("merged.csv"), scenario::merged_csv(&reports).as_bytes()));
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_FAIL);
    }
    let failed: Vec<String> = reports
        .iter()
        .flat_map(|r| r.checks.iter().filter(|c| !c.pass).map(move |c| format!("{}:{}", r.scenario, c.id)))
        .collect();
    println!("merged {} reports into {}", reports.len(), root.display());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("failed checks: {}", failed.join(", "));
        ExitCode::from(EXIT_FAIL)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match cli.command {
        Command::Run { scenario } => run(&scenario),
        Command::Corpus { action: CorpusAction::List } => {
            for e in corpus::list() {
                println!("{:<20} {:<9} {}", e.id, e.kind, e.definition);
            }
            ExitCode::SUCCESS
        }
        Command::Corpus { action: CorpusAction::Describe { id } } => match corpus::describe(&id) {
            Ok(e) => {
                print!("{}", e.describe());
                ExitCode::SUCCESS
            }
            Err(e) => config_error(e),
        },
        Command::Report { action: ReportAction::Merge { dirs } } => merge(&dirs),
    }
}
