//! Problem-file schema (TOML).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::DriverError;

fn default_parameter() -> String {
    "eps".into()
}

fn is_zero_u32(v: &u32) -> bool {
    *v == 0
}

fn is_false(v: &bool) -> bool {
    !*v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub system: SystemSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pretransform: Option<Pretransform>,
    pub ansatz: AnsatzSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<TransformSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Expected>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub chart: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub independent: Option<String>,
    /// Perturbation parameter as an expression, e.g. `eps` or `eps^2`.
    #[serde(default = "default_parameter")]
    pub parameter: String,
    /// Undefined functions allowed in expressions, e.g. `Omega`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub functions: Vec<String>,
    /// Extra symbols allowed in the forms besides chart and parameter.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constants: Vec<String>,
    pub zero_order: Vec<String>,
    pub perturbation: Vec<String>,
}

/// Recombine the declared forms with a matrix, then pull back to a new
/// chart given by the old coordinates as functions of the new ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pretransform {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub recombine: Vec<Vec<String>>,
    pub chart: Vec<String>,
    pub old_in_new: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzSpec {
    #[serde(default)]
    pub terms: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub multipliers: Vec<String>,
    /// Coordinates whose field components may be nonzero; all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "is_zero_u32")]
    pub depth: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvariantSpec {
    pub expr: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve_for: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformSpec {
    #[serde(default)]
    pub invariants: Vec<InvariantSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub substitutions: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub constants: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub first_order: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear_first_order: Option<LinearSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<AmplitudeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wkb: Option<WkbSpec>,
}

/// Read relation `relation` as `derivative = F(unknown)` and solve it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearSpec {
    #[serde(default)]
    pub relation: usize,
    pub unknown: String,
    pub derivative: String,
    /// Constant of the homogeneous part.
    pub constant: String,
    /// Names given to the particular coefficients, in rate order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rename: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmplitudeSpec {
    #[serde(default)]
    pub relation: usize,
    /// Oscillating terms in this variable are dropped first.
    pub secular: String,
    pub coordinate: String,
    /// `variable = back(coordinate)`.
    pub variable: String,
    pub back: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub constants: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WkbSpec {
    pub omega: String,
    pub unknown: String,
    /// Mode constants of the general solution.
    #[serde(default = "wkb_constants")]
    pub constants: [String; 2],
}

fn wkb_constants() -> [String; 2] {
    ["C1".into(), "C2".into()]
}

/// Results that must come out of the pipeline (canonical equality).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expected {
    /// Field components in the solving chart.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<Vec<String>>,
    /// `lhs = rhs` relations that must appear among the outputs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub relations: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit: Option<String>,
    /// Wall-clock bound on the solve stage, seconds. Not part of the report.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve_seconds: Option<f64>,
}

fn default_tol() -> f64 {
    1e-10
}
fn default_grid() -> usize {
    400
}
fn default_ladder() -> Vec<f64> {
    vec![0.1, 0.05, 0.025]
}
fn default_points() -> usize {
    100
}
fn default_residual_bound() -> f64 {
    1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationSpec {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_ladder")]
    pub eps_ladder: Vec<f64>,
    #[serde(default = "default_points")]
    pub residual_points: usize,
    #[serde(default = "default_residual_bound")]
    pub residual_bound: f64,
    /// Sampling intervals for the numeric residual.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sampling: BTreeMap<String, [f64; 2]>,
    #[serde(default)]
    pub variants: Vec<Variant>,
}

impl Default for ValidationSpec {
    fn default() -> Self {
        ValidationSpec {
            tol: default_tol(),
            grid: default_grid(),
            eps_ladder: default_ladder(),
            residual_points: default_points(),
            residual_bound: default_residual_bound(),
            sampling: BTreeMap::new(),
            variants: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub name: String,
    /// `"F(s) = body"` definitions for undefined functions.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub functions: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub parameters: BTreeMap<String, f64>,
    /// Overrides the ladder for this variant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<Vec<f64>>,
    pub reference: Reference,
    /// Check the declared system's forms along the reference curve.
    #[serde(default, skip_serializing_if = "is_false")]
    pub annihilate_declared: bool,
    #[serde(default)]
    pub compare: Vec<Compare>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Reference {
    /// Adaptive integration of `d(chart)/ds = rhs`.
    Ode {
        chart: Vec<String>,
        rhs: Vec<String>,
        ic: Vec<f64>,
        span: [f64; 2],
        /// Integration tolerance; the validation tolerance when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tol: Option<f64>,
    },
    /// `a y'' + b y' + c y = 0` in closed form on the chart `(x, y, y')`.
    Characteristic {
        chart: Vec<String>,
        coefficients: [String; 3],
        ic: [f64; 2],
        span: [f64; 2],
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompareKind {
    /// `|reference - asymptotic|`.
    Solution,
    /// `|reference - asymptotic| / |reference|`.
    Relative,
    /// Unwrapped angle of `(reference[0], reference[1])` against `asymptotic`.
    Phase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Compare {
    pub name: String,
    pub kind: CompareKind,
    /// Expressions in the reference chart; two for `phase`.
    pub reference: Vec<String>,
    /// Expression in the independent variable. `$explicit` and `$phase`
    /// stand for the pipeline results.
    pub asymptotic: String,
    /// Constants fitted at the start of the span.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fit: Vec<String>,
    /// `(derivative order, value)` pairs, one per fitted constant.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conditions: Vec<(u32, f64)>,
    /// Comparison window; the reference span when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_error: Option<f64>,
    /// `max_error` as a multiple of the validation tolerance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_error_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub decreasing: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_exponent: Option<f64>,
}

impl ProblemFile {
    pub fn from_toml(text: &str) -> Result<Self, DriverError> {
        toml::from_str(text).map_err(|e| DriverError::parse(format!("problem file: {}", e.message().trim()), None))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("problem files serialize")
    }
}
