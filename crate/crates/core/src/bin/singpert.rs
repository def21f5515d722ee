use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use singpert::driver::{
    builtin, builtin_names, check_lines, emit_report, load_report, render_solution, run_case, DriverError, Overrides,
    ProblemFile, Report, Stage,
};

#[derive(Parser)]
#[command(name = "singpert", version, about = "Perturbation analysis of Pfaffian systems")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve and transform a problem file, without numeric validation.
    Analyze {
        file: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Run the full pipeline, validation included, on a problem file.
    Validate {
        file: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Run a built-in case, or all of them.
    Builtin {
        /// boundary_layer, nonlinear_damping or wkb.
        #[arg(required_unless_present = "all", conflicts_with = "all")]
        name: Option<String>,
        /// Run every built-in case concurrently.
        #[arg(long)]
        all: bool,
        #[command(flatten)]
        opts: Opts,
    },
    /// Summarize a report directory written earlier.
    Report {
        dir: PathBuf,
        /// Print report.json instead of the check list.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct Opts {
    /// Comma-separated epsilon values.
    #[arg(long, value_delimiter = ',')]
    eps_ladder: Option<Vec<f64>>,
    /// Validation tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Rounds of automatic ansatz extension.
    #[arg(long)]
    ansatz_depth: Option<u32>,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
    /// Write report.json, solution.txt and errors.csv here.
    #[arg(long, env = "SINGPERT_REPORT_DIR")]
    report_dir: Option<PathBuf>,
}

impl Opts {
    fn overrides(&self) -> Overrides {
        Overrides {
            eps_ladder: self.eps_ladder.clone(),
            tol: self.tol,
            ansatz_depth: self.ansatz_depth,
        }
    }
}

fn read_problem(path: &Path) -> Result<ProblemFile, DriverError> {
    let text = fs::read_to_string(path).map_err(|e| DriverError::new(Stage::Io, e, Some(&path.display().to_string())))?;
    ProblemFile::from_toml(&text)
}

fn show(r: &Report, opts: &Opts, dir: Option<PathBuf>) -> Result<(), DriverError> {
    if opts.json {
        print!("{}", r.to_json());
    } else {
        print!("{}", render_solution(r));
    }
    if let Some(d) = dir {
        for p in emit_report(r, &d)? {
            eprintln!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn file_case(file: &Path, opts: &Opts, validate: bool) -> Result<bool, DriverError> {
    let r = run_case(&read_problem(file)?, &opts.overrides(), validate)?;
    show(&r, opts, opts.report_dir.clone())?;
    Ok(r.passed)
}

fn run(cli: Cli) -> Result<bool, DriverError> {
    match cli.cmd {
        Cmd::Analyze { file, opts } => file_case(&file, &opts, false),
        Cmd::Validate { file, opts } => file_case(&file, &opts, true),
        Cmd::Builtin { name, all, opts } => {
            let names: Vec<String> = if all {
                builtin_names().into_iter().map(String::from).collect()
            } else {
                name.into_iter().collect()
            };
            let ov = opts.overrides();
            let results: Vec<Result<Report, DriverError>> =
                names.par_iter().map(|n| run_case(&builtin(n)?, &ov, true)).collect();
            let mut passed = true;
            for (n, r) in names.iter().zip(results) {
                let r = r?;
                // One subdirectory per case when running several.
                let dir = opts.report_dir.as_ref().map(|d| if all { d.join(n) } else { d.clone() });
                show(&r, &opts, dir)?;
                passed &= r.passed;
            }
            Ok(passed)
        }
        Cmd::Report { dir, json } => {
            let r = load_report(&dir)?;
            if json {
                print!("{}", r.to_json());
            } else {
                println!("case: {}", r.case);
                for l in check_lines(&r) {
                    println!("{l}");
                }
                println!("result: {}", if r.passed { "PASS" } else { "FAIL" });
            }
            Ok(r.passed)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
