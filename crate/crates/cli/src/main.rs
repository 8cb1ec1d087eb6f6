use std::path::PathBuf;
use std::process::ExitCode;

use certfix_cli::commands::{self, InexactOptions, Outcome, SolveOptions, DEFAULT_SAMPLES};
use certfix_cli::document::RuleSpec;
use clap::{ArgGroup, Parser, Subcommand};

/// Certified fixed-point iteration for integral equations and boundary value
/// problems.
///
/// Exit codes: 0 success, 1 unreadable or malformed input, 2 certification
/// failure, 3 iteration budget exhausted.
#[derive(Debug, Parser)]
#[command(name = "certfix", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the data packet and run the diagnostic checklist.
    Certify {
        /// Problem document (TOML).
        problem: PathBuf,
        /// Sampling seed (default: the document's `seed`, then 0).
        #[arg(long)]
        seed: Option<u64>,
        /// Report directory (default: $CERTFIX_REPORT_DIR, then `.`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certify, then iterate until the stopping rule guarantees `--eps`.
    Solve {
        /// Problem document (TOML).
        problem: PathBuf,
        /// Target error (default: the document's `stop.eps`, then 1e-6).
        #[arg(long)]
        eps: Option<f64>,
        /// Stopping rule (default: the document's `stop.rule`, then residual).
        #[arg(long, value_enum)]
        rule: Option<RuleSpec>,
        /// Iteration budget (default: the document's `stop.max_iter`, then 10000).
        #[arg(long)]
        max_iter: Option<usize>,
        /// Sampling seed (default: the document's `seed`, then 0).
        #[arg(long)]
        seed: Option<u64>,
        /// Report directory (default: $CERTFIX_REPORT_DIR, then `.`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the fixed points of two problems on a shared ball.
    Stability {
        problem_a: PathBuf,
        problem_b: PathBuf,
        /// Functions sampled from the shared ball to estimate ε.
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
        /// Sampling seed (default: the document's `seed`, then 0).
        #[arg(long)]
        seed: Option<u64>,
        /// Report directory (default: $CERTFIX_REPORT_DIR, then `.`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an inexact orbit and compare it with the error floor.
    #[command(group(ArgGroup::new("noise").args(["eta_bar", "eta_seq", "quadrature"])))]
    Inexact {
        /// Problem document (TOML).
        problem: PathBuf,
        /// Constant per-step noise.
        #[arg(long)]
        eta_bar: Option<f64>,
        /// Comma-separated per-step noise; later steps are exact.
        #[arg(long, value_delimiter = ',')]
        eta_seq: Option<Vec<f64>>,
        /// Use the quadrature refinement defect as the per-step noise.
        #[arg(long)]
        quadrature: bool,
        /// Number of inexact steps.
        #[arg(long, default_value_t = 200)]
        steps: usize,
        /// Sampling seed (default: the document's `seed`, then 0).
        #[arg(long)]
        seed: Option<u64>,
        /// Report directory (default: $CERTFIX_REPORT_DIR, then `.`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Certify { problem, seed, out } => {
            commands::cmd_certify(&problem, seed, out.as_deref())
        }
        Command::Solve {
            problem,
            eps,
            rule,
            max_iter,
            seed,
            out,
        } => commands::cmd_solve(
            &problem,
            &SolveOptions {
                eps,
                rule,
                max_iter,
                seed,
            },
            out.as_deref(),
        ),
        Command::Stability {
            problem_a,
            problem_b,
            samples,
            seed,
            out,
        } => commands::cmd_stability(&problem_a, &problem_b, samples, seed, out.as_deref()),
        Command::Inexact {
            problem,
            eta_bar,
            eta_seq,
            quadrature,
            steps,
            seed,
            out,
        } => commands::cmd_inexact(
            &problem,
            &InexactOptions {
                eta_bar,
                eta_seq,
                quadrature,
                steps,
                seed,
            },
            out.as_deref(),
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are input errors; keep code 2 for certification
            return ExitCode::from(if e.use_stderr() {
                commands::EXIT_PARSE as u8
            } else {
                0
            });
        }
    };
    match run(cli) {
        Ok(outcome) => {
            for w in &outcome.report.warnings {
                eprintln!("warning: {w}");
            }
            if outcome.exit_code == commands::EXIT_OK {
                println!("{}", outcome.summary);
            } else {
                eprintln!("{}", outcome.summary);
            }
            if let Some(p) = &outcome.report_path {
                println!("report: {}", p.display());
            }
            if let Some(p) = &outcome.csv_path {
                println!("trace: {}", p.display());
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::EXIT_PARSE as u8)
        }
    }
}
