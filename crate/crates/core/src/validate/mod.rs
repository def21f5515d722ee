//! Numerical checks: reference integration, curve annihilation, sampled
//! asymptotics and error-scaling fits.

mod rk;

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forms::{FormError, KForm, OdeSystem};
use crate::kernel::{differentiate, eval_numeric, substitute, Binding, Compiled, EvalEnv, EvalError, Expr, Symbol};

pub use rk::RkOptions;
use rk::Segment;

/// Imaginary parts below this are dropped when sampling.
pub const IMAG_CUTOFF: f64 = 1e-10;
pub const MIN_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidateError {
    #[error("step size underflow at t = {t} (h = {h:e}): the problem is stiff here; use the closed-form characteristic oracle")]
    StepUnderflow { t: f64, h: f64 },
    #[error("pole in `{expr}` at {at}")]
    Pole { expr: String, at: String },
    #[error("tolerance {0:e} below {MIN_TOL:e}")]
    Tolerance(f64),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("`{expr}` is not linear in `{constant}`")]
    NotLinear { expr: String, constant: String },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Form(#[from] FormError),
}

/// Closed-form solution of `a y'' + b y' + c y = 0` with real initial data
/// at `x0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicOracle {
    pub roots: [Complex64; 2],
    pub repeated: bool,
    x0: f64,
    c: [Complex64; 2],
}

impl CharacteristicOracle {
    pub fn new(a: f64, b: f64, c: f64, x0: f64, y0: f64, v0: f64) -> Result<Self, ValidateError> {
        if a == 0.0 || !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(ValidateError::Degenerate(format!("characteristic polynomial {a} r^2 + {b} r + {c}")));
        }
        let disc = Complex64::new(b * b - 4.0 * a * c, 0.0).sqrt();
        let r1 = (-b + disc) / (2.0 * a);
        let r2 = (-b - disc) / (2.0 * a);
        let y0c = Complex64::new(y0, 0.0);
        let v0c = Complex64::new(v0, 0.0);
        let repeated = (r1 - r2).norm() <= 1e-12 * r1.norm().max(1.0);
        let coef = if repeated {
            [y0c, v0c - r1 * y0c]
        } else {
            let c2 = (v0c - r1 * y0c) / (r2 - r1);
            [y0c - c2, c2]
        };
        Ok(CharacteristicOracle {
            roots: [r1, if repeated { r1 } else { r2 }],
            repeated,
            x0,
            c: coef,
        })
    }

    /// `(y, y')` at `x`.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let s = x - self.x0;
        let [r1, r2] = self.roots;
        let [c1, c2] = self.c;
        if self.repeated {
            let e = (r1 * s).exp();
            let y = (c1 + c2 * s) * e;
            let d = c2 * e + r1 * y;
            (y.re, d.re)
        } else {
            let e1 = (r1 * s).exp();
            let e2 = (r2 * s).exp();
            ((c1 * e1 + c2 * e2).re, (c1 * r1 * e1 + c2 * r2 * e2).re)
        }
    }

    /// Samples `(x, y, y')` on `n + 1` uniform points.
    pub fn trajectory(&self, span: (f64, f64), n: usize) -> Trajectory {
        let n = n.max(1);
        let s: Vec<f64> = (0..=n).map(|k| span.0 + (span.1 - span.0) * k as f64 / n as f64).collect();
        let states = s
            .iter()
            .map(|x| {
                let (y, d) = self.eval(*x);
                vec![*x, y, d]
            })
            .collect();
        Trajectory {
            s,
            states,
            method: "closed-form".into(),
            tol: 0.0,
            steps: n,
            rejected: 0,
            interp: Interp::Oracle(self.clone()),
        }
    }
}

#[derive(Debug, Clone)]
enum Interp {
    Dense(Vec<Segment>),
    Oracle(CharacteristicOracle),
}

/// Samples of a solution curve with dense output between them.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Curve parameter, strictly increasing.
    pub s: Vec<f64>,
    /// Chart coordinates at each `s`.
    pub states: Vec<Vec<f64>>,
    pub method: String,
    pub tol: f64,
    pub steps: usize,
    pub rejected: usize,
    interp: Interp,
}

impl Trajectory {
    pub fn span(&self) -> (f64, f64) {
        (self.s[0], *self.s.last().expect("non-empty"))
    }

    /// State at `s`, or `None` outside the span.
    pub fn at(&self, s: f64) -> Option<Vec<f64>> {
        let (a, b) = self.span();
        if !(a..=b).contains(&s) {
            return None;
        }
        match &self.interp {
            Interp::Oracle(o) => {
                let (y, d) = o.eval(s);
                Some(vec![s, y, d])
            }
            Interp::Dense(segs) => {
                if segs.is_empty() {
                    return Some(self.states[0].clone());
                }
                let k = segs.partition_point(|g| g.t0 <= s).saturating_sub(1);
                Some(segs[k].eval(s))
            }
        }
    }

    /// Coordinate `k` at each grid point.
    pub fn component_on(&self, k: usize, grid: &[f64]) -> Result<Vec<f64>, ValidateError> {
        grid.iter()
            .map(|s| {
                self.at(*s)
                    .map(|v| v[k])
                    .ok_or_else(|| ValidateError::Degenerate(format!("{s} outside trajectory span")))
            })
            .collect()
    }
}

fn slots(sys: &OdeSystem) -> Vec<Symbol> {
    let mut v: Vec<Symbol> = sys.chart().coords().to_vec();
    v.push(Symbol::from(sys.param()));
    v
}

fn compile_all(es: &[Expr], slots: &[Symbol], env: &EvalEnv) -> Result<Vec<Compiled>, ValidateError> {
    es.iter().map(|e| Ok(Compiled::new(e, slots, env)?)).collect()
}

/// Adaptive Dormand–Prince integration of `sys` from `ic` over `span`.
pub fn integrate_reference(
    sys: &OdeSystem,
    env: &EvalEnv,
    ic: &[f64],
    span: (f64, f64),
    tol: f64,
) -> Result<Trajectory, ValidateError> {
    integrate_reference_with(sys, env, ic, span, RkOptions::new(tol, span))
}

pub fn integrate_reference_with(
    sys: &OdeSystem,
    env: &EvalEnv,
    ic: &[f64],
    span: (f64, f64),
    opts: RkOptions,
) -> Result<Trajectory, ValidateError> {
    if opts.rtol < MIN_TOL || opts.atol < MIN_TOL {
        return Err(ValidateError::Tolerance(opts.rtol.min(opts.atol)));
    }
    if ic.len() != sys.chart().dim() {
        return Err(ValidateError::Degenerate(format!(
            "{} initial values for a {}-dimensional chart",
            ic.len(),
            sys.chart().dim()
        )));
    }
    if !(span.1 > span.0) {
        return Err(ValidateError::Degenerate(format!("empty span [{}, {}]", span.0, span.1)));
    }
    let sl = slots(sys);
    let rhs = compile_all(sys.rhs(), &sl, env)?;
    let n = ic.len();
    let f = |s: f64, y: &[f64], dy: &mut [f64]| {
        let mut x = Vec::with_capacity(n + 1);
        x.extend_from_slice(y);
        x.push(s);
        for (d, c) in dy.iter_mut().zip(&rhs) {
            *d = c.eval(&x);
        }
    };
    let r = rk::integrate(f, ic, span, &opts)?;
    Ok(Trajectory {
        s: r.t,
        states: r.y,
        method: "dopri5".into(),
        tol: opts.rtol,
        steps: r.segments.len(),
        rejected: r.rejected,
        interp: Interp::Dense(r.segments),
    })
}

/// Max over samples (and midpoints between them) of `|ω(F)|`, where `F` is
/// the tangent given by the ODE right-hand side.
pub fn curve_annihilation(traj: &Trajectory, w: &KForm, sys: &OdeSystem, env: &EvalEnv) -> Result<f64, ValidateError> {
    if w.degree() != 1 || w.chart() != sys.chart() {
        return Err(ValidateError::Degenerate("expected a 1-form on the trajectory's chart".into()));
    }
    let sl = slots(sys);
    let coeffs = w.components();
    let cw = compile_all(&coeffs, &sl, env)?;
    let cf = compile_all(sys.rhs(), &sl, env)?;
    let mut points: Vec<(f64, Vec<f64>)> = traj.s.iter().cloned().zip(traj.states.iter().cloned()).collect();
    for k in 1..traj.s.len() {
        let m = 0.5 * (traj.s[k - 1] + traj.s[k]);
        if let Some(v) = traj.at(m) {
            points.push((m, v));
        }
    }
    let mut worst = 0f64;
    for (s, state) in points {
        let mut x = state.clone();
        x.push(s);
        let mut acc = 0.0;
        for (k, (a, f)) in cw.iter().zip(&cf).enumerate() {
            let (av, fv) = (a.eval(&x), f.eval(&x));
            if !av.is_finite() || !fv.is_finite() {
                return Err(ValidateError::Pole {
                    expr: coeffs[k].to_string(),
                    at: format!("{:?}", state),
                });
            }
            acc += av * fv;
        }
        worst = worst.max(acc.abs());
    }
    Ok(worst)
}

/// Evaluate `e` at `var = x` for each grid point.
pub fn sample_asymptotic(e: &Expr, var: &str, grid: &[f64], env: &EvalEnv) -> Result<Vec<Complex64>, ValidateError> {
    let e = env.expand_functions(e);
    let mut env = env.clone();
    grid.iter()
        .map(|x| {
            env.set(var, *x);
            let v = match eval_numeric(&e, &env) {
                Ok(v) => v,
                Err(EvalError::Pole(_)) => {
                    return Err(ValidateError::Pole {
                        expr: e.to_string(),
                        at: format!("{var} = {x}"),
                    })
                }
                Err(err) => return Err(err.into()),
            };
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(ValidateError::Pole {
                    expr: e.to_string(),
                    at: format!("{var} = {x}"),
                });
            }
            Ok(if v.im.abs() < IMAG_CUTOFF { Complex64::new(v.re, 0.0) } else { v })
        })
        .collect()
}

/// Least-squares slope of `log(err)` against `log(eps)`.
pub fn error_scaling(errors: &[(f64, f64)]) -> Result<f64, ValidateError> {
    if errors.len() < 3 {
        return Err(ValidateError::Degenerate(format!("{} points; need at least 3", errors.len())));
    }
    if let Some((e, m)) = errors.iter().find(|(e, m)| !(*e > 0.0 && *m > 0.0)) {
        return Err(ValidateError::Degenerate(format!("non-positive entry ({e}, {m})")));
    }
    let pts: Vec<(f64, f64)> = errors.iter().map(|(e, m)| (e.ln(), m.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(ValidateError::Degenerate("all epsilon values equal".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}

/// Solve for `constants` (entering `e` linearly) so that the `order`-th
/// derivative of `e` in `var` equals `value` at `x0`, one condition per
/// constant.
pub fn fit_constants(
    e: &Expr,
    var: &str,
    x0: f64,
    constants: &[&str],
    conditions: &[(u32, f64)],
    env: &EvalEnv,
) -> Result<Vec<Complex64>, ValidateError> {
    if conditions.len() != constants.len() {
        return Err(ValidateError::Degenerate(format!(
            "{} conditions for {} constants",
            conditions.len(),
            constants.len()
        )));
    }
    let e = env.expand_functions(e);
    let mut zero = Binding::new();
    for c in constants {
        zero.insert(c, Expr::zero()).map_err(|k| ValidateError::Degenerate(k.to_string()))?;
    }
    let mut cols = Vec::new();
    for c in constants {
        let d = differentiate(&e, c);
        for c2 in constants {
            if !differentiate(&d, c2).is_zero() {
                return Err(ValidateError::NotLinear {
                    expr: e.to_string(),
                    constant: c2.to_string(),
                });
            }
        }
        cols.push(d);
    }
    let base = substitute(&e, &zero);
    let mut env = env.clone();
    env.set(var, x0);
    let deriv = |f: &Expr, k: u32| {
        let mut g = f.clone();
        for _ in 0..k {
            g = differentiate(&g, var);
        }
        g
    };
    let m = constants.len();
    let mut a = DMatrix::<Complex64>::zeros(m, m);
    let mut b = DVector::<Complex64>::zeros(m);
    for (i, (k, v)) in conditions.iter().enumerate() {
        for (j, col) in cols.iter().enumerate() {
            a[(i, j)] = eval_numeric(&deriv(col, *k), &env)?;
        }
        b[i] = Complex64::new(*v, 0.0) - eval_numeric(&deriv(&base, *k), &env)?;
    }
    let sol = a
        .lu()
        .solve(&b)
        .ok_or_else(|| ValidateError::Degenerate("singular fitting system".into()))?;
    Ok(sol.iter().copied().collect())
}

/// Environment with fitted constants bound.
pub fn bind_constants(env: &EvalEnv, constants: &[&str], values: &[Complex64]) -> EvalEnv {
    let mut env = env.clone();
    for (c, v) in constants.iter().zip(values) {
        env.set_complex(c, *v);
    }
    env
}

/// One named, traceable check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    /// `"<="`, `">="` or `"=="` (for boolean checks, value and bound are 0/1).
    pub relation: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            value,
            bound,
            relation: "<=".into(),
            passed: value <= bound,
            detail: None,
        }
    }

    pub fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            value,
            bound,
            relation: ">=".into(),
            passed: value >= bound,
            detail: None,
        }
    }

    pub fn holds(name: &str, ok: bool) -> Self {
        Check {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            bound: 1.0,
            relation: "==".into(),
            passed: ok,
            detail: None,
        }
    }

    pub fn with_detail(mut self, d: impl Into<String>) -> Self {
        self.detail = Some(d.into());
        self
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorRow {
    pub case: String,
    pub epsilon: f64,
    pub x_or_t: f64,
    pub reference: f64,
    pub asymptotic: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsSummary {
    pub comparison: String,
    pub epsilon: f64,
    pub max_error: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub summary: Vec<EpsSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    /// Written to errors.csv, not to the JSON report.
    #[serde(skip)]
    pub errors: Vec<ErrorRow>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn merge(&mut self, other: ValidationReport) {
        self.checks.extend(other.checks);
        self.summary.extend(other.summary);
        self.errors.extend(other.errors);
        if other.exponent.is_some() {
            self.exponent = other.exponent;
        }
    }
}

pub const CSV_HEADER: &str = "case,epsilon,x_or_t,reference,asymptotic,abs_error";

pub fn errors_csv(rows: &[ErrorRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{:e},{:e},{:e},{:e},{:e}",
            r.case, r.epsilon, r.x_or_t, r.reference, r.asymptotic, r.abs_error
        );
    }
    s
}

/// `n + 1` uniform points on `[a, b]`.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n).map(|k| a + (b - a) * k as f64 / n as f64).collect()
}

/// Rows for one comparison plus its max absolute error.
pub fn compare_rows(
    case: &str,
    eps: f64,
    grid: &[f64],
    reference: &[f64],
    asymptotic: &[f64],
) -> (Vec<ErrorRow>, f64) {
    let mut worst = 0f64;
    let rows = grid
        .iter()
        .zip(reference.iter().zip(asymptotic))
        .map(|(x, (r, a))| {
            let d = (r - a).abs();
            worst = worst.max(d);
            ErrorRow {
                case: case.into(),
                epsilon: eps,
                x_or_t: *x,
                reference: *r,
                asymptotic: *a,
                abs_error: d,
            }
        })
        .collect();
    (rows, worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::Chart;
    use crate::kernel::{parse, ParseContext};

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    fn oscillator() -> OdeSystem {
        let ch = Chart::new(&["t", "y", "z"]).unwrap();
        OdeSystem::new(&ch, vec![p("1"), p("z"), p("-y")], "s", &[]).unwrap()
    }

    #[test]
    fn harmonic_oscillator_is_cosine() {
        let sys = oscillator();
        let tr = integrate_reference(&sys, &EvalEnv::new(), &[0.0, 1.0, 0.0], (0.0, 10.0), 1e-10).unwrap();
        for s in uniform_grid(0.0, 10.0, 97) {
            let v = tr.at(s).unwrap();
            assert!((v[1] - s.cos()).abs() < 1e-8, "{s}");
        }
        assert!(tr.at(10.5).is_none());
    }

    #[test]
    fn energy_conserved_over_long_run() {
        let tr = integrate_reference(&oscillator(), &EvalEnv::new(), &[0.0, 1.0, 0.0], (0.0, 100.0), 1e-10).unwrap();
        let worst = tr.states.iter().map(|v| (v[1] * v[1] + v[2] * v[2] - 1.0).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn zero_rhs_is_constant() {
        let ch = Chart::new(&["y", "z"]).unwrap();
        let sys = OdeSystem::new(&ch, vec![p("0"), p("0")], "s", &[]).unwrap();
        let tr = integrate_reference(&sys, &EvalEnv::new(), &[2.0, -3.0], (0.0, 5.0), 1e-10).unwrap();
        assert!(tr.states.iter().all(|v| v == &vec![2.0, -3.0]));
        assert_eq!(tr.at(2.5).unwrap(), vec![2.0, -3.0]);
    }

    #[test]
    fn tolerance_floor() {
        let r = integrate_reference(&oscillator(), &EvalEnv::new(), &[0.0, 1.0, 0.0], (0.0, 1.0), 1e-14);
        assert!(matches!(r, Err(ValidateError::Tolerance(_))));
    }

    #[test]
    fn boundary_layer_oracle_roots() {
        let o = CharacteristicOracle::new(0.1, 1.0, 1.0, 0.0, 0.0, 1.0).unwrap();
        let r = [(-1.0 + 0.6f64.sqrt()) / 0.2, (-1.0 - 0.6f64.sqrt()) / 0.2];
        assert!((o.roots[0].re - r[0]).abs() < 1e-12 && (o.roots[1].re - r[1]).abs() < 1e-12);
        assert!((o.roots[0].re + 1.12702).abs() < 1e-5 && (o.roots[1].re + 8.87298).abs() < 1e-5);
        assert_eq!(o.eval(0.0), (0.0, 1.0));
        // Residual of the ODE at an interior point by finite differences.
        let h = 1e-4;
        let x = 0.3;
        let (y, d) = o.eval(x);
        let dd = (o.eval(x + h).1 - o.eval(x - h).1) / (2.0 * h);
        assert!((0.1 * dd + d + y).abs() < 1e-6);
    }

    #[test]
    fn oracle_complex_and_repeated_roots() {
        let o = CharacteristicOracle::new(1.0, 0.0, 1.0, 0.0, 1.0, 0.0).unwrap();
        assert!((o.eval(1.3).0 - 1.3f64.cos()).abs() < 1e-14);
        let o = CharacteristicOracle::new(1.0, 2.0, 1.0, 0.0, 1.0, 0.0).unwrap();
        assert!(o.repeated);
        let x = 0.7f64;
        assert!((o.eval(x).0 - (1.0 + x) * (-x).exp()).abs() < 1e-14);
        assert!(CharacteristicOracle::new(0.0, 1.0, 1.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn annihilation_of_oscillator_forms() {
        let sys = oscillator();
        let ch = sys.chart().clone();
        let ctx = ParseContext::default();
        let tr = integrate_reference(&sys, &EvalEnv::new(), &[0.0, 1.0, 0.0], (0.0, 10.0), 1e-10).unwrap();
        let good = KForm::parse_one_form("dy - z*dt", &ch, &ctx).unwrap();
        let bad = KForm::parse_one_form("dy + z*dt", &ch, &ctx).unwrap();
        let env = EvalEnv::new();
        assert!(curve_annihilation(&tr, &good, &sys, &env).unwrap() <= 1e-8);
        assert!(curve_annihilation(&tr, &bad, &sys, &env).unwrap() > 0.5);
    }

    #[test]
    fn annihilation_along_boundary_layer_oracle() {
        let ch = Chart::new(&["x", "y", "z"]).unwrap();
        let sys = OdeSystem::new(&ch, vec![p("1"), p("z"), p("-(y + z)/eps")], "s", &["eps"]).unwrap();
        let env = EvalEnv::from_reals([("eps", 0.1)]);
        let o = CharacteristicOracle::new(0.1, 1.0, 1.0, 0.0, 0.0, 1.0).unwrap();
        let tr = o.trajectory((0.0, 1.0), 400);
        let w = KForm::parse_one_form("dy + y*dx + eps*dz", &ch, &ParseContext::default()).unwrap();
        assert!(curve_annihilation(&tr, &w, &sys, &env).unwrap() <= 1e-8);
    }

    #[test]
    fn sampling_examples() {
        let env = EvalEnv::from_reals([("eps", 0.1), ("Abar", -0.1), ("B", 0.1)]);
        let grid = uniform_grid(0.0, 1.0, 10);
        let v = sample_asymptotic(&p("Abar*exp(-x/eps) + B*exp(-x)"), "x", &grid, &env).unwrap();
        assert!(v[0].norm() < 1e-15);
        assert!((v[10].re - (-0.1 * (-10f64).exp() + 0.1 * (-1f64).exp())).abs() < 1e-15);
        let c = sample_asymptotic(&p("7/2"), "x", &grid, &env).unwrap();
        assert!(c.iter().all(|z| *z == Complex64::new(3.5, 0.0)));
        let env = EvalEnv::from_reals([("eps", 0.05), ("R0", 1.7)]);
        let r = sample_asymptotic(&p("R0/sqrt(1 + 3/4*R0^2*eps*t)"), "t", &[0.0], &env).unwrap();
        assert!((r[0].re - 1.7).abs() < 1e-15);
        let z = sample_asymptotic(&p("exp(i*x)"), "x", &[1.0], &EvalEnv::new()).unwrap();
        assert!(z[0].im != 0.0);
        assert!(matches!(
            sample_asymptotic(&p("1/x"), "x", &[0.0], &EvalEnv::new()),
            Err(ValidateError::Pole { .. })
        ));
    }

    #[test]
    fn scaling_fits() {
        let eps = [0.1, 0.05, 0.025];
        let lin: Vec<(f64, f64)> = eps.iter().map(|e| (*e, 3.0 * e)).collect();
        assert!((error_scaling(&lin).unwrap() - 1.0).abs() < 1e-12);
        let sq: Vec<(f64, f64)> = eps.iter().map(|e| (*e, 0.5 * e * e)).collect();
        assert!((error_scaling(&sq).unwrap() - 2.0).abs() < 1e-12);
        assert!(error_scaling(&lin[..2]).is_err());
        assert!(error_scaling(&[(0.1, 1.0), (0.05, 0.0), (0.025, 1.0)]).is_err());
    }

    #[test]
    fn fit_boundary_layer_constants() {
        let env = EvalEnv::from_reals([("eps", 0.1)]);
        let e = p("Abar*exp(-x/eps) + B*exp(-x)");
        let c = fit_constants(&e, "x", 0.0, &["Abar", "B"], &[(0, 0.0), (1, 1.0)], &env).unwrap();
        // Abar + B = 0, -10 Abar - B = 1.
        assert!((c[0].re + 1.0 / 9.0).abs() < 1e-14 && (c[1].re - 1.0 / 9.0).abs() < 1e-14);
        let env = bind_constants(&env, &["Abar", "B"], &c);
        let v = sample_asymptotic(&e, "x", &[0.0], &env).unwrap();
        assert!(v[0].norm() < 1e-14);
        assert!(matches!(
            fit_constants(&p("A*B*x"), "x", 0.0, &["A", "B"], &[(0, 1.0), (1, 1.0)], &env),
            Err(ValidateError::NotLinear { .. })
        ));
    }

    #[test]
    fn wkb_modes_reconstruct_cosine() {
        let env = EvalEnv::from_reals([("eps", 0.05)]);
        let e = p("C1*exp(i*x/eps) + C2*exp(-i*x/eps)");
        let c = fit_constants(&e, "x", 0.0, &["C1", "C2"], &[(0, 1.0), (1, 0.0)], &env).unwrap();
        let env = bind_constants(&env, &["C1", "C2"], &c);
        let grid = uniform_grid(0.0, 1.0, 50);
        let v = sample_asymptotic(&e, "x", &grid, &env).unwrap();
        for (x, z) in grid.iter().zip(&v) {
            assert!((z.re - (x / 0.05).cos()).abs() < 1e-13 && z.im == 0.0);
        }
    }

    #[test]
    fn csv_layout() {
        let (rows, m) = compare_rows("bl", 0.1, &[0.0, 1.0], &[1.0, 2.0], &[1.5, 2.0]);
        assert_eq!(m, 0.5);
        let s = errors_csv(&rows);
        assert_eq!(s.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(s.lines().count(), 3);
    }
}
