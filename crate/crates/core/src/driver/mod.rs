//! Problem files, built-in cases, the forms → solve → transform → validate
//! pipeline and report emission.

mod builtin;
mod pipeline;
mod problem;
mod report;

use std::fmt;

use thiserror::Error;

pub use builtin::{builtin, builtin_names, builtin_source, BUILTINS};
pub use pipeline::{run_case, Overrides};
pub use problem::*;
pub use report::{check_lines, emit_report, load_report, render_solution, AsymptoticSummary, Report, SolutionSummary, SystemSummary, SCHEMA};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Parse,
    Pretransform,
    Ansatz,
    Solve,
    Transform,
    Validate,
    Io,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Parse => "parse",
            Stage::Pretransform => "pretransform",
            Stage::Ansatz => "ansatz",
            Stage::Solve => "solve",
            Stage::Transform => "transform",
            Stage::Validate => "validate",
            Stage::Io => "io",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub struct DriverError {
    pub stage: Stage,
    pub message: String,
    /// Offending expression, when there is one.
    pub expr: Option<String>,
}

impl fmt::Display for DriverError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage: {}", self.stage, self.message)?;
        if let Some(e) = &self.expr {
            write!(f, " (in `{e}`)")?;
        }
        Ok(())
    }
}

impl DriverError {
    pub fn new(stage: Stage, message: impl fmt::Display, expr: Option<&str>) -> Self {
        DriverError {
            stage,
            message: message.to_string(),
            expr: expr.map(str::to_string),
        }
    }

    pub fn parse(message: impl fmt::Display, expr: Option<&str>) -> Self {
        Self::new(Stage::Parse, message, expr)
    }
}
