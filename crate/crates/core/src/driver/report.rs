use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::solver::PerturbedSystem;
use crate::validate::{errors_csv, Check, ValidationReport};

use super::pipeline::Outputs;
use super::problem::ProblemFile;
use super::{DriverError, Stage};

pub const SCHEMA: &str = "singpert.report/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSummary {
    pub chart: Vec<String>,
    pub parameter: String,
    pub zero_order: Vec<String>,
    pub perturbation: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionSummary {
    pub field: String,
    pub components: Vec<String>,
    pub lambda: Vec<Vec<String>>,
    pub ansatz_terms: usize,
    pub unknowns: usize,
    pub equations: usize,
    pub rank: usize,
    pub nonzero: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymptoticSummary {
    pub relations: Vec<String>,
    pub definitions: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit: Option<String>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema: String,
    pub case: String,
    pub system: SystemSummary,
    pub solution: SolutionSummary,
    pub asymptotic: AsymptoticSummary,
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationReport>,
    pub passed: bool,
}

impl Report {
    pub(crate) fn assemble(
        pf: &ProblemFile,
        sys: &PerturbedSystem,
        o: &Outputs,
        checks: Vec<Check>,
        validation: Option<ValidationReport>,
    ) -> Self {
        let sol = &o.solution;
        let d = &sol.diagnostics;
        let a = &o.asymptotic;
        let passed = checks.iter().all(|c| c.passed) && validation.as_ref().map_or(true, ValidationReport::passed);
        Report {
            schema: SCHEMA.into(),
            case: pf.name.clone(),
            system: SystemSummary {
                chart: sys.chart.coords().iter().map(|s| s.to_string()).collect(),
                parameter: sys.eps.to_string(),
                zero_order: sys.omega0.iter().map(|w| w.to_string()).collect(),
                perturbation: sys.omega1.iter().map(|w| w.to_string()).collect(),
            },
            solution: SolutionSummary {
                field: sol.x.to_string(),
                components: sol.x.components().iter().map(|c| c.to_string()).collect(),
                lambda: sol.lambda.iter().map(|r| r.iter().map(|l| l.to_string()).collect()).collect(),
                ansatz_terms: d.ansatz_terms,
                unknowns: d.unknowns,
                equations: d.equations,
                rank: d.rank,
                nonzero: d.nonzero,
            },
            asymptotic: AsymptoticSummary {
                relations: a.relations.iter().map(|r| r.to_string()).collect(),
                definitions: a.definitions.iter().map(|r| r.to_string()).collect(),
                explicit: a.explicit.as_ref().map(|e| e.to_string()),
                notes: a.notes.clone(),
            },
            checks,
            validation,
            passed,
        }
    }

    /// Every check, expectation checks first.
    pub fn all_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().chain(self.validation.iter().flat_map(|v| v.checks.iter()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, DriverError> {
        let r: Report = serde_json::from_str(text).map_err(|e| DriverError::new(Stage::Io, format!("report.json: {e}"), None))?;
        if r.schema != SCHEMA {
            return Err(DriverError::new(Stage::Io, format!("unsupported schema {}", r.schema), None));
        }
        Ok(r)
    }
}

fn check_line(c: &Check) -> String {
    let mut s = format!("[{}] {}", if c.passed { "PASS" } else { "FAIL" }, c.name);
    if c.relation != "==" {
        let _ = write!(s, ": {:e} {} {:e}", c.value, c.relation, c.bound);
    }
    if let Some(d) = &c.detail {
        let _ = write!(s, " ({d})");
    }
    s
}

/// Human-readable summary written to solution.txt.
pub fn render_solution(r: &Report) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "case: {}", r.case);
    let _ = writeln!(s, "chart: ({})", r.system.chart.join(", "));
    let _ = writeln!(s, "parameter: {}", r.system.parameter);
    for (k, (a, b)) in r.system.zero_order.iter().zip(&r.system.perturbation).enumerate() {
        let _ = writeln!(s, "omega0[{}] = {a}    omega1[{}] = {b}", k + 1, k + 1);
    }
    let _ = writeln!(s, "\nX = {}", r.solution.field);
    for (i, row) in r.solution.lambda.iter().enumerate() {
        for (j, l) in row.iter().enumerate() {
            let _ = writeln!(s, "lambda[{}][{}] = {l}", i + 1, j + 1);
        }
    }
    let _ = writeln!(
        s,
        "ansatz terms {}, unknowns {}, equations {}, rank {}, nonzero {}",
        r.solution.ansatz_terms, r.solution.unknowns, r.solution.equations, r.solution.rank, r.solution.nonzero
    );
    if !r.asymptotic.relations.is_empty() {
        let _ = writeln!(s, "\nrelations:");
        for x in &r.asymptotic.relations {
            let _ = writeln!(s, "  {x}");
        }
    }
    if !r.asymptotic.definitions.is_empty() {
        let _ = writeln!(s, "where:");
        for x in &r.asymptotic.definitions {
            let _ = writeln!(s, "  {x}");
        }
    }
    if let Some(e) = &r.asymptotic.explicit {
        let _ = writeln!(s, "explicit: {e}");
    }
    for n in &r.asymptotic.notes {
        let _ = writeln!(s, "note: {n}");
    }
    let _ = writeln!(s, "\nchecks:");
    for c in r.all_checks() {
        let _ = writeln!(s, "  {}", check_line(c));
    }
    if let Some(v) = &r.validation {
        if let Some(x) = v.exponent {
            let _ = writeln!(s, "fitted error exponent: {x:.4}");
        }
        for row in &v.summary {
            let _ = writeln!(s, "  {} eps={} max_error={:e}", row.comparison, row.epsilon, row.max_error);
        }
    }
    let _ = writeln!(s, "\nresult: {}", if r.passed { "PASS" } else { "FAIL" });
    s
}

fn io(e: std::io::Error, p: &Path) -> DriverError {
    DriverError::new(Stage::Io, e, Some(&p.display().to_string()))
}

/// Write report.json, solution.txt and (with validation) errors.csv.
pub fn emit_report(r: &Report, dir: &Path) -> Result<Vec<PathBuf>, DriverError> {
    fs::create_dir_all(dir).map_err(|e| io(e, dir))?;
    let mut files = vec![
        (dir.join("report.json"), r.to_json()),
        (dir.join("solution.txt"), render_solution(r)),
    ];
    if let Some(v) = &r.validation {
        files.push((dir.join("errors.csv"), errors_csv(&v.errors)));
    }
    let mut out = Vec::new();
    for (p, text) in files {
        fs::write(&p, text).map_err(|e| io(e, &p))?;
        out.push(p);
    }
    Ok(out)
}

pub fn load_report(dir: &Path) -> Result<Report, DriverError> {
    let p = dir.join("report.json");
    let text = fs::read_to_string(&p).map_err(|e| io(e, &p))?;
    Report::from_json(&text)
}

pub fn check_lines(r: &Report) -> Vec<String> {
    r.all_checks().map(check_line).collect()
}
