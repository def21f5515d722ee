//! Homological equation `ω1 + L_X ω0 = Σ λ ω0` by ansatz and exact linear
//! algebra.
//!
//! Unknown coefficients are symbols with the reserved prefix `_`:
//! `_a{k}_{m}` for term `m` of field component `k` and `_l{i}_{j}_{m}` for
//! term `m` of multiplier `λ_ij`. Unknowns are ordered by component index,
//! then by the canonical order of the basis functions; this ordering is the
//! tie-break for minimal-support solutions.

mod ansatz;
pub mod linear;
mod residual;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::forms::{self, annihilator, in_span, lie_derivative, Chart, FormError, KForm, VectorField};
use crate::kernel::{self, expr, EvalEnv, Expr, KernelError, Number, Symbol};

pub use ansatz::{condition_number, extend_ansatz, Ansatz, CONDITION_LIMIT, MAX_DEPTH};
pub use residual::{residual_norm_numeric, SamplingBox};

use linear::{Outcome, Row};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Form(#[from] FormError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("residual is not linear in the unknowns: {0}")]
    Nonlinear(String),
    #[error("ansatz insufficient; irreducible residual terms: {}", .residual.join(", "))]
    AnsatzInsufficient { residual: Vec<String> },
    #[error("degenerate ansatz (condition number {condition:.3e})")]
    DegenerateAnsatz { condition: f64 },
    #[error("ansatz depth {0} exceeds 3")]
    DepthTooLarge(u32),
    #[error("every sample point is singular")]
    AllSamplesSingular,
    #[error("internal inconsistency: {0}")]
    Unsound(String),
}

/// Zero-order basis `ω0`, perturbation basis `ω1` and the perturbation
/// parameter `eps` (an expression, e.g. `eps` or `eps^2`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerturbedSystem {
    pub chart: Chart,
    pub omega0: Vec<KForm>,
    pub omega1: Vec<KForm>,
    pub eps: Expr,
    /// Coordinate used for secular antiderivatives in `extend_ansatz`.
    pub independent: Option<Symbol>,
}

impl PerturbedSystem {
    pub fn new(
        chart: &Chart,
        omega0: Vec<KForm>,
        omega1: Vec<KForm>,
        eps: Expr,
        independent: Option<&str>,
    ) -> Result<Self, SolverError> {
        if omega0.len() != omega1.len() {
            return Err(SolverError::InvalidSystem(format!(
                "{} zero-order forms but {} perturbation forms",
                omega0.len(),
                omega1.len()
            )));
        }
        for w in omega0.iter().chain(&omega1) {
            if w.chart() != chart {
                return Err(FormError::ChartMismatch.into());
            }
            if w.degree() != 1 {
                return Err(SolverError::InvalidSystem(format!("`{w}` is not a 1-form")));
            }
        }
        if let Some(ind) = independent {
            if chart.index_of(ind).is_none() {
                return Err(SolverError::InvalidSystem(format!("`{ind}` is not a chart coordinate")));
            }
        }
        // Full rank at generic points.
        annihilator(&omega0)?;
        Ok(PerturbedSystem {
            chart: chart.clone(),
            omega0,
            omega1,
            eps,
            independent: independent.map(Symbol::from),
        })
    }

    pub fn len(&self) -> usize {
        self.omega0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega0.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub ansatz_terms: usize,
    pub multiplier_terms: usize,
    pub unknowns: usize,
    pub equations: usize,
    pub rank: usize,
    pub nonzero: usize,
    pub free: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HomologicalSolution {
    pub x: VectorField,
    /// `lambda[i][j]` multiplies `ω0_j` in equation `i`.
    pub lambda: Vec<Vec<Expr>>,
    pub diagnostics: Diagnostics,
}

impl fmt::Display for HomologicalSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "X = {}", self.x)?;
        for (i, row) in self.lambda.iter().enumerate() {
            for (j, l) in row.iter().enumerate() {
                writeln!(f, "lambda[{}][{}] = {}", i + 1, j + 1, l)?;
            }
        }
        Ok(())
    }
}

/// `ω1_i + L_X ω0_i - Σ_j λ_ij ω0_j` for every `i`.
pub fn build_residual(sys: &PerturbedSystem, x: &VectorField, lambda: &[Vec<Expr>]) -> Result<Vec<KForm>, SolverError> {
    let mut out = Vec::with_capacity(sys.len());
    for i in 0..sys.len() {
        let mut r = sys.omega1[i].add(&lie_derivative(x, &sys.omega0[i])?)?;
        if let Some(row) = lambda.get(i) {
            for (j, l) in row.iter().enumerate() {
                if !l.is_zero() {
                    r = r.sub(&sys.omega0[j].scale(l))?;
                }
            }
        }
        for (_, c) in r.terms() {
            check_linear(c)?;
        }
        out.push(r);
    }
    Ok(out)
}

pub fn is_unknown(s: &str) -> bool {
    s.starts_with('_')
}

fn unknown_degree(t: &Expr) -> i64 {
    let (_, fs) = t.coeff_factors();
    let mut d = 0i64;
    for f in fs {
        let (b, p) = f.as_base_exp();
        match b.as_symbol() {
            Some(s) if is_unknown(s) => {
                if !p.is_integer() {
                    return i64::MAX;
                }
                d += p.to_integer().try_into().unwrap_or(i64::MAX);
            }
            _ if f.free_symbols().iter().any(|s| is_unknown(s)) => return i64::MAX,
            _ => {}
        }
    }
    d
}

fn check_linear(c: &Expr) -> Result<(), SolverError> {
    for t in kernel::clear_denominators(c).terms() {
        let d = unknown_degree(&t);
        if !(0..=1).contains(&d) {
            return Err(SolverError::Nonlinear(t.to_string()));
        }
    }
    Ok(())
}

/// Turn `e = 0` (linear in unknowns) into rows, one per monomial.
fn collect_rows(e: &Expr, index: &BTreeMap<Symbol, usize>, rows: &mut Vec<Row>, keys: &mut Vec<Expr>) -> Result<(), SolverError> {
    let cleared = kernel::clear_denominators(e);
    let mut by_mono: BTreeMap<Expr, Row> = BTreeMap::new();
    for t in cleared.terms() {
        let (c, fs) = t.coeff_factors();
        let mut unknown = None;
        let mut rest = Vec::new();
        for f in fs {
            match f.as_symbol() {
                Some(s) if is_unknown(s) => {
                    if unknown.is_some() {
                        return Err(SolverError::Nonlinear(t.to_string()));
                    }
                    unknown = Some(index[s]);
                }
                _ => {
                    if f.free_symbols().iter().any(|s| is_unknown(s)) {
                        return Err(SolverError::Nonlinear(t.to_string()));
                    }
                    rest.push(f)
                }
            }
        }
        let mono = expr::mul(rest);
        let row = by_mono.entry(mono).or_insert_with(Row::new);
        match unknown {
            Some(u) => row.add_coeff(u, &c),
            None => row.rhs = row.rhs.sub(&c),
        }
    }
    for (m, r) in by_mono {
        rows.push(r);
        keys.push(m);
    }
    Ok(())
}

struct Unknowns {
    names: Vec<Symbol>,
    index: BTreeMap<Symbol, usize>,
    x: VectorField,
    lambda: Vec<Vec<Expr>>,
}

fn make_unknowns(sys: &PerturbedSystem, a: &Ansatz) -> Result<Unknowns, SolverError> {
    let n = sys.chart.dim();
    if a.mask.len() != n {
        return Err(SolverError::InvalidSystem(format!(
            "mask has {} entries for a {}-dimensional chart",
            a.mask.len(),
            n
        )));
    }
    let mut names: Vec<Symbol> = Vec::new();
    let mut comps = vec![Expr::zero(); n];
    for (k, comp) in comps.iter_mut().enumerate() {
        if !a.mask[k] {
            continue;
        }
        let mut acc = Vec::new();
        for (m, b) in a.terms.iter().enumerate() {
            let s: Symbol = Symbol::from(format!("_a{k}_{m}").as_str());
            acc.push(expr::mul2(&Expr::symbol(s.clone()), b));
            names.push(s);
        }
        *comp = expr::add(acc);
    }
    let p = sys.len();
    let mut lambda = vec![vec![Expr::zero(); p]; p];
    if !a.multipliers.is_empty() {
        for (i, row) in lambda.iter_mut().enumerate() {
            for (j, l) in row.iter_mut().enumerate() {
                let mut acc = Vec::new();
                for (m, b) in a.multipliers.iter().enumerate() {
                    let s: Symbol = Symbol::from(format!("_l{i}_{j}_{m}").as_str());
                    acc.push(expr::mul2(&Expr::symbol(s.clone()), b));
                    names.push(s);
                }
                *l = expr::add(acc);
            }
        }
    }
    let index = names.iter().enumerate().map(|(k, s)| (s.clone(), k)).collect();
    Ok(Unknowns {
        names,
        index,
        x: VectorField::new(&sys.chart, comps)?,
        lambda,
    })
}

fn bind_values(e: &Expr, names: &[Symbol], values: &[Number]) -> Expr {
    let mut b = kernel::Binding::new();
    for (s, v) in names.iter().zip(values) {
        b.insert(s, Expr::num(v.clone())).expect("unique unknown names");
    }
    kernel::substitute(e, &b)
}

/// Solve the homological equation within the span of `ansatz`.
///
/// With an empty multiplier list the multipliers are eliminated by
/// contracting the residual with vector fields spanning the kernel of `ω0`
/// and recovered afterwards by an exact span solve.
pub fn solve(sys: &PerturbedSystem, ansatz: &Ansatz) -> Result<HomologicalSolution, SolverError> {
    solve_with_env(sys, ansatz, &EvalEnv::new())
}

/// As [`solve`], with parameter values and function definitions for the
/// numeric independence check of the ansatz.
pub fn solve_with_env(sys: &PerturbedSystem, ansatz: &Ansatz, env: &EvalEnv) -> Result<HomologicalSolution, SolverError> {
    ansatz.check_independent(env)?;
    let u = make_unknowns(sys, ansatz)?;
    let residual = build_residual(sys, &u.x, &u.lambda)?;
    let mut rows = Vec::new();
    let mut keys = Vec::new();
    let mut sources: Vec<Expr> = Vec::new();
    if ansatz.multipliers.is_empty() {
        let kernel_fields = annihilator(&sys.omega0)?;
        for r in &residual {
            for w in &kernel_fields {
                let e = r.contract(w.components());
                let before = rows.len();
                collect_rows(&e, &u.index, &mut rows, &mut keys)?;
                sources.extend(std::iter::repeat_n(e, rows.len() - before));
            }
        }
    } else {
        for r in &residual {
            for (_, c) in r.terms() {
                let before = rows.len();
                collect_rows(c, &u.index, &mut rows, &mut keys)?;
                sources.extend(std::iter::repeat_n(c.clone(), rows.len() - before));
            }
        }
    }
    let ncols = u.names.len();
    let mut diagnostics = Diagnostics {
        ansatz_terms: ansatz.terms.len(),
        multiplier_terms: ansatz.multipliers.len(),
        unknowns: ncols,
        equations: rows.len(),
        ..Diagnostics::default()
    };
    let values = match linear::solve_min_support(&rows, ncols) {
        Outcome::Solved { values, rank } => {
            diagnostics.rank = rank;
            values
        }
        Outcome::Inconsistent { rows: bad, .. } => {
            return Err(insufficient(&rows, &bad, &keys, ncols, &sources, &u));
        }
    };
    diagnostics.nonzero = values.iter().filter(|v| !v.is_zero()).count();
    diagnostics.free = ncols - diagnostics.rank;
    let x = u.x.map(|c| bind_values(c, &u.names, &values));
    let lambda = if ansatz.multipliers.is_empty() {
        recover_multipliers(sys, &x)?
    } else {
        u.lambda
            .iter()
            .map(|row| row.iter().map(|l| bind_values(l, &u.names, &values)).collect())
            .collect()
    };
    let sol = HomologicalSolution { x, lambda, diagnostics };
    if !symbolic_residual_is_zero(sys, &sol)? {
        return Err(SolverError::Unsound("solution leaves a nonzero residual".into()));
    }
    Ok(sol)
}

fn insufficient(rows: &[Row], bad: &[usize], keys: &[Expr], ncols: usize, sources: &[Expr], u: &Unknowns) -> SolverError {
    // Solve the consistent part and report what it cannot cancel.
    let good: Vec<Row> = rows
        .iter()
        .enumerate()
        .filter(|(k, _)| !bad.contains(k))
        .map(|(_, r)| r.clone())
        .collect();
    let values = match linear::solve(&good, ncols, None) {
        Outcome::Solved { values, .. } => values,
        Outcome::Inconsistent { .. } => vec![Number::zero(); ncols],
    };
    let mut residual: Vec<String> = Vec::new();
    for &k in bad {
        let e = kernel::cancel(&bind_values(&sources[k], &u.names, &values));
        let text = if e.is_zero() { keys[k].to_string() } else { e.to_string() };
        if !residual.contains(&text) {
            residual.push(text);
        }
    }
    SolverError::AnsatzInsufficient { residual }
}

fn recover_multipliers(sys: &PerturbedSystem, x: &VectorField) -> Result<Vec<Vec<Expr>>, SolverError> {
    let mut out = Vec::new();
    for i in 0..sys.len() {
        let w = sys.omega1[i].add(&lie_derivative(x, &sys.omega0[i])?)?;
        match in_span(&w, &sys.omega0)? {
            Some(c) => out.push(c),
            None => {
                return Err(SolverError::Unsound(format!(
                    "ω1 + L_X ω0 = {w} is not in the span of the zero-order forms"
                )))
            }
        }
    }
    Ok(out)
}

/// Exact check that every residual form canonicalises to zero.
pub fn symbolic_residual_is_zero(sys: &PerturbedSystem, sol: &HomologicalSolution) -> Result<bool, SolverError> {
    let r = build_residual(sys, &sol.x, &sol.lambda)?;
    Ok(r.iter().all(KForm::is_zero_exact))
}

/// Convenience for problem files: the zero-order and perturbation forms as
/// text on a chart.
pub fn parse_forms(texts: &[String], chart: &Chart, ctx: &kernel::ParseContext) -> Result<Vec<KForm>, SolverError> {
    texts
        .iter()
        .map(|t| forms::KForm::parse_one_form(t, chart, ctx).map_err(SolverError::from))
        .collect()
}
