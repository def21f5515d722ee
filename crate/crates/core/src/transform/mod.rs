//! Near-identity map `Φ* = 1 + εL` applied to zero-order invariants, and
//! the closed-form steps that turn the pushed relations into explicit
//! first-order approximations.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::BigRational;
use num_traits::One;
use thiserror::Error;

use crate::forms::{exterior_derivative, in_span, FormError, KForm, VectorField};
use crate::kernel::{
    self, antiderivative, cancel, differentiate, equivalent, expr, is_zero_exact, substitute, together, Binding, Expr,
    Func, KernelError, Node, Number,
};
use crate::solver::{HomologicalSolution, PerturbedSystem};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("resonant forcing: rate {rate} cancels the homogeneous rate")]
    Resonance { rate: String },
    #[error("{op}: unsupported term {term}")]
    Unsupported { op: &'static str, term: String },
    #[error("`{invariant}` is not constant on zero-order solution curves")]
    NotInvariant { invariant: String },
    #[error("{0}")]
    Structure(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Form(#[from] FormError),
}

/// `lhs = rhs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub lhs: Expr,
    pub rhs: Expr,
}

impl Relation {
    pub fn new(lhs: Expr, rhs: Expr) -> Self {
        Relation { lhs, rhs }
    }

    /// `e = 0`.
    pub fn implicit(e: Expr) -> Self {
        Relation::new(e, Expr::zero())
    }

    /// `lhs - rhs`.
    pub fn as_zero(&self) -> Expr {
        expr::sub(&self.lhs, &self.rhs)
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.lhs, self.rhs)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AsymptoticSolution {
    pub relations: Vec<Relation>,
    pub explicit: Option<Expr>,
    /// Named constants introduced along the way, e.g. `Abar = A*eps/(eps - 1)`.
    pub definitions: Vec<Relation>,
    pub notes: Vec<String>,
}

/// `f + eps * X(f)`.
pub fn push_function(x: &VectorField, eps: &Expr, f: &Expr) -> Expr {
    expr::add2(f, &expr::mul2(eps, &x.apply(f)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Invariant {
    pub expr: Expr,
    /// Symbol to isolate in the pushed relation, when possible.
    pub solve_for: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Rewrites {
    /// Applied to the pushed relation, e.g. `z = y'`.
    pub substitutions: Binding,
    /// Constants expressed through other constants, e.g. `x0 = eps*ln(A)`.
    pub constants: Binding,
    /// Replacements inside the O(eps) part only, e.g. `th = th0`.
    pub first_order: Binding,
}

fn merge(a: &Binding, b: &Binding) -> Result<Binding, KernelError> {
    let mut out = a.clone();
    for (k, v) in b.iter() {
        out.insert(k, v.clone())?;
    }
    Ok(out)
}

/// Push each invariant through `1 + eps L_X`, apply the rewrites and
/// isolate the requested symbol where the relation allows it.
pub fn transform_invariant(
    sys: &PerturbedSystem,
    sol: &HomologicalSolution,
    invariants: &[Invariant],
    rw: &Rewrites,
) -> Result<AsymptoticSolution, TransformError> {
    let all = merge(&rw.substitutions, &rw.constants)?;
    let mut out = AsymptoticSolution::default();
    for inv in invariants {
        let df = exterior_derivative(&KForm::scalar(&sys.chart, inv.expr.clone()))?;
        if in_span(&df, &sys.omega0)?.is_none() {
            return Err(TransformError::NotInvariant {
                invariant: inv.expr.to_string(),
            });
        }
        let g = substitute(&sol.x.apply(&inv.expr), &rw.first_order);
        let pushed = expr::add2(&inv.expr, &expr::mul2(&sys.eps, &g));
        let rel = substitute(&pushed, &all);
        match &inv.solve_for {
            Some(s) => match solve_for(&rel, s) {
                Some(v) => {
                    out.notes.push(format!("pushed {}; solved for {s}", inv.expr));
                    out.relations.push(Relation::new(Expr::sym(s), v));
                }
                None => {
                    out.notes.push(format!("pushed {}; not solvable for {s}, kept implicit", inv.expr));
                    out.relations.push(Relation::implicit(rel));
                }
            },
            None => {
                out.notes.push(format!("pushed {}", inv.expr));
                out.relations.push(Relation::implicit(rel));
            }
        }
    }
    Ok(out)
}

/// Solve `e = 0` for `s` when `s` enters linearly or through a single
/// chain of invertible functions.
pub fn solve_for(e: &Expr, s: &str) -> Option<Expr> {
    let sym = Expr::sym(s);
    let mut lhs = e.clone();
    let mut rhs = Expr::zero();
    for _ in 0..32 {
        let (with, without): (Vec<Expr>, Vec<Expr>) = lhs.terms().into_iter().partition(|t| t.contains_symbol(s));
        rhs = expr::sub(&rhs, &expr::add(without));
        if with.is_empty() {
            return None;
        }
        let coeffs: Vec<Expr> = with.iter().map(|t| expr::div(t, &sym)).collect();
        if coeffs.iter().all(|c| !c.contains_symbol(s)) {
            let a = expr::add(coeffs);
            if is_zero_exact(&a) {
                return None;
            }
            return Some(cancel(&expr::mul2(&rhs, &reciprocal(&a))));
        }
        if with.len() != 1 {
            return None;
        }
        let (c, fs) = with[0].coeff_factors();
        let (inner, rest): (Vec<Expr>, Vec<Expr>) = fs.into_iter().partition(|f| f.contains_symbol(s));
        if inner.len() != 1 {
            return None;
        }
        let mut k = rest;
        k.push(Expr::num(c));
        rhs = expr::mul2(&rhs, &reciprocal(&expr::mul(k)));
        let h = &inner[0];
        match h.node() {
            Node::Pow(b, p) => {
                rhs = expr::pow(&rhs, &(BigRational::one() / p));
                lhs = b.clone();
            }
            Node::Fn(Func::Exp, a) => {
                rhs = expr::ln(&rhs);
                lhs = a.clone();
            }
            Node::Fn(Func::Ln, a) => {
                rhs = expr::exp(&rhs);
                lhs = a.clone();
            }
            _ => return None,
        }
    }
    None
}

/// `1/e` with the denominator of `e` moved up, so `1/(1 - 1/eps)` becomes
/// `eps/(eps - 1)`.
fn reciprocal(e: &Expr) -> Expr {
    let (n, d) = together(e);
    expr::div(&d, &n)
}

fn oscillates_in(t: &Expr, var: &str) -> bool {
    let mut hit = false;
    t.visit(&mut |n| {
        if let Node::Fn(Func::Sin | Func::Cos, a) = n.node() {
            if a.contains_symbol(var) {
                hit = true;
            }
        }
    });
    hit
}

/// Drop every additive term carrying a `sin`/`cos` factor whose argument
/// depends on `var`.
pub fn secular_limit(e: &Expr, var: &str) -> Expr {
    expr::add(e.terms().into_iter().filter(|t| !oscillates_in(t, var)).collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearSolution {
    /// Particular part plus `B * exp(-coeff * indep)`.
    pub solution: Expr,
    /// `(coefficient, rate)` of each particular term `c * exp(rate * indep)`.
    pub particular: Vec<(Expr, Expr)>,
    pub homogeneous: Expr,
}

/// General solution of `y' + coeff*y = forcing` for constant `coeff` and
/// forcing a sum of `c * exp(a * indep)`.
pub fn solve_linear_first_order(
    coeff: &Expr,
    forcing: &Expr,
    indep: &str,
    constant: &str,
) -> Result<LinearSolution, TransformError> {
    if coeff.contains_symbol(indep) {
        return Err(TransformError::Unsupported {
            op: "solve_linear_first_order",
            term: coeff.to_string(),
        });
    }
    let x = Expr::sym(indep);
    let mut by_rate: BTreeMap<Expr, Vec<Expr>> = BTreeMap::new();
    for t in forcing.terms() {
        let (c, fs) = t.coeff_factors();
        let mut rate = Expr::zero();
        let mut rest = vec![Expr::num(c)];
        for f in fs {
            match f.node() {
                Node::Fn(Func::Exp, a) if a.contains_symbol(indep) => {
                    let r = differentiate(a, indep);
                    if r.contains_symbol(indep) {
                        return Err(TransformError::Unsupported {
                            op: "solve_linear_first_order",
                            term: t.to_string(),
                        });
                    }
                    rest.push(expr::exp(&expr::sub(a, &expr::mul2(&r, &x))));
                    rate = r;
                }
                _ if f.contains_symbol(indep) => {
                    return Err(TransformError::Unsupported {
                        op: "solve_linear_first_order",
                        term: t.to_string(),
                    })
                }
                _ => rest.push(f),
            }
        }
        by_rate.entry(rate).or_default().push(expr::mul(rest));
    }
    let mut particular = Vec::new();
    let mut parts = Vec::new();
    for (rate, cs) in by_rate {
        let denom = expr::add2(&rate, coeff);
        if is_zero_exact(&denom) {
            return Err(TransformError::Resonance { rate: rate.to_string() });
        }
        let c = expr::mul2(&expr::add(cs), &reciprocal(&denom));
        parts.push(expr::mul2(&c, &expr::exp(&expr::mul2(&rate, &x))));
        particular.push((c, rate));
    }
    let homogeneous = expr::mul2(&Expr::sym(constant), &expr::exp(&expr::neg(&expr::mul2(coeff, &x))));
    parts.push(homogeneous.clone());
    Ok(LinearSolution {
        solution: expr::add(parts),
        particular,
        homogeneous,
    })
}

/// Read `y' = F` as `y' + coeff*y = forcing`. Returns `(coeff, forcing)`.
pub fn as_linear_first_order(f: &Expr, y: &str) -> Result<(Expr, Expr), TransformError> {
    let coeff = expr::neg(&differentiate(f, y));
    let forcing = expr::add2(f, &expr::mul2(&coeff, &Expr::sym(y)));
    if coeff.contains_symbol(y) || forcing.contains_symbol(y) {
        return Err(TransformError::Unsupported {
            op: "as_linear_first_order",
            term: f.to_string(),
        });
    }
    Ok((coeff, forcing))
}

/// `(c + rest)^p` with `c` the part free of `var`, rewritten as
/// `c^p (1 + rest/c)^p` when `c` is a single term.
fn factor_constant_part(e: &Expr, var: &str) -> Expr {
    let e = e.map_children(&mut |c| factor_constant_part(c, var));
    let Node::Pow(b, p) = e.node() else { return e };
    if p.is_integer() || !matches!(b.node(), Node::Add(_)) {
        return e;
    }
    let (free, dep): (Vec<Expr>, Vec<Expr>) = b.terms().into_iter().partition(|t| !t.contains_symbol(var));
    if free.len() != 1 || dep.is_empty() {
        return e;
    }
    let c = &free[0];
    let inner = expr::add2(&Expr::one(), &expr::div(&expr::add(dep), c));
    expr::mul2(&expr::pow(c, p), &expr::pow(&inner, p))
}

/// Explicit amplitude from a secular-limited relation `coord = u_expr`
/// and the declared back-substitution `variable = back(coord)`.
pub fn amplitude_law(
    u_expr: &Expr,
    coord: &str,
    back: &Expr,
    constants: &Binding,
    indep: &str,
) -> Result<Expr, TransformError> {
    let mut b = Binding::new();
    b.insert(coord, u_expr.clone())?;
    let r = substitute(&substitute(back, &b), constants);
    if r.contains_symbol(coord) {
        return Err(TransformError::Structure(format!(
            "back-substitution still depends on {coord}: {r}"
        )));
    }
    Ok(factor_constant_part(&r, indep))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WkbModes {
    /// `y' = ±(i/eps) Ω y`.
    pub relations: [Relation; 2],
    /// `exp(±(i/eps) ∫Ω dx)`.
    pub solutions: [Expr; 2],
    /// `∫Ω dx`, unevaluated when outside the supported class.
    pub phase: Expr,
}

/// First-order WKB modes from a field on `(x, u, v)` with `u = y^2`,
/// `v = y'^2`. The pushed invariant `u - u0` with `u0 = 0` gives
/// `y^2 + param * X_u(v = y'^2) = 0`, which requires `X_u = v/Ω^2`.
pub fn wkb_phase(sol: &HomologicalSolution, omega: &Expr, param: &Expr, unknown: &str) -> Result<WkbModes, TransformError> {
    let chart = sol.x.chart();
    if chart.dim() != 3 {
        return Err(TransformError::Structure(format!("wkb needs a chart (x, u, v), got {chart}")));
    }
    let (x, u, v) = (chart.name(0), chart.name(1), chart.name(2));
    let c = expr::div(sol.x.component(1), &Expr::sym(v));
    if c.contains_symbol(u) || c.contains_symbol(v) {
        return Err(TransformError::Structure(format!(
            "X_{u} = {} is not v times a function of {x}",
            sol.x.component(1)
        )));
    }
    let check = expr::mul2(&c, &expr::powi(omega, 2));
    if !equivalent(&check, &Expr::one())?.holds() {
        return Err(TransformError::Structure(format!("X_{u}/v = {c} differs from 1/Ω^2 for Ω = {omega}")));
    }
    let k = expr::pow(param, &BigRational::new(1.into(), 2.into()));
    let y = Expr::sym(unknown);
    let dy = Expr::sym(&format!("{unknown}'"));
    let phase = antiderivative(omega, x).unwrap_or_else(|_| expr::integral(omega, x.into()));
    let mode = |sign: i64| {
        let i = Expr::num(Number::i().mul(&Number::int(sign)));
        let rel = Relation::new(dy.clone(), expr::mul(vec![i.clone(), expr::recip(&k), omega.clone(), y.clone()]));
        let sol = expr::exp(&expr::mul(vec![i, expr::recip(&k), phase.clone()]));
        (rel, sol)
    };
    let (r0, s0) = mode(1);
    let (r1, s1) = mode(-1);
    Ok(WkbModes {
        relations: [r0, r1],
        solutions: [s0, s1],
        phase,
    })
}

/// Exact check that `sol` satisfies `y' + coeff*y = forcing`.
pub fn satisfies_first_order(sol: &Expr, indep: &str, coeff: &Expr, forcing: &Expr) -> bool {
    let lhs = expr::add2(&differentiate(sol, indep), &expr::mul2(coeff, sol));
    kernel::is_zero_exact(&expr::sub(&lhs, forcing))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::Chart;
    use crate::kernel::{parse, parse_with, ParseContext};
    use crate::solver::{solve, Ansatz, Diagnostics};

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    fn bl() -> (PerturbedSystem, HomologicalSolution) {
        let ch = Chart::new(&["x", "y", "z"]).unwrap();
        let ctx = ParseContext::default();
        let f = |s: &str| KForm::parse_one_form(s, &ch, &ctx).unwrap();
        let sys = PerturbedSystem::new(&ch, vec![f("dy - z*dx"), f("dy + y*dx")], vec![f("0"), f("-dz")], p("eps"), Some("x")).unwrap();
        let a = Ansatz::new(vec![p("ln(y+z)"), p("y*ln(y+z)"), p("z"), p("y")], vec![], vec![true, true, false]);
        let sol = solve(&sys, &a).unwrap();
        (sys, sol)
    }

    #[test]
    fn push_examples() {
        let (_, sol) = bl();
        assert_eq!(push_function(&sol.x, &p("eps"), &p("x - x0")), p("x - x0 + eps*ln(y+z)"));
        let zero = VectorField::zero(sol.x.chart());
        assert_eq!(push_function(&zero, &p("eps"), &p("x - x0")), p("x - x0"));
    }

    #[test]
    fn boundary_layer_relation() {
        let (sys, sol) = bl();
        let rw = Rewrites {
            substitutions: Binding::from_pairs([("z", p("y'"))]).unwrap(),
            constants: Binding::from_pairs([("x0", p("eps*ln(A)"))]).unwrap(),
            first_order: Binding::new(),
        };
        let inv = Invariant {
            expr: p("x - x0"),
            solve_for: Some("A".into()),
        };
        let a = transform_invariant(&sys, &sol, &[inv], &rw).unwrap();
        assert_eq!(a.relations[0].rhs, p("(y + y')*exp(x/eps)"));
        let dy = solve_for(&a.relations[0].as_zero(), "y'").unwrap();
        assert_eq!(dy, p("A*exp(-x/eps) - y"));
        let (c, f) = as_linear_first_order(&dy, "y").unwrap();
        assert_eq!((c, f), (p("1"), p("A*exp(-x/eps)")));
    }

    #[test]
    fn non_invariant_rejected() {
        let (sys, sol) = bl();
        let inv = Invariant {
            expr: p("z"),
            solve_for: None,
        };
        let r = transform_invariant(&sys, &sol, &[inv], &Rewrites::default());
        assert!(matches!(r, Err(TransformError::NotInvariant { .. })));
    }

    #[test]
    fn zero_perturbation_keeps_invariants() {
        let (sys, _) = bl();
        let sol = HomologicalSolution {
            x: VectorField::zero(&sys.chart),
            lambda: vec![],
            diagnostics: Diagnostics::default(),
        };
        let inv = Invariant {
            expr: p("x - x0"),
            solve_for: None,
        };
        let a = transform_invariant(&sys, &sol, &[inv], &Rewrites::default()).unwrap();
        assert_eq!(a.relations[0].lhs, p("x - x0"));
    }

    #[test]
    fn secular_examples() {
        let e = p("u0 + eps*(3/4*t - sin(2*(t+th))/2 + sin(4*(t+th))/16)");
        assert_eq!(secular_limit(&e, "t"), p("u0 + 3/4*eps*t"));
        assert_eq!(secular_limit(&p("5 + t^2"), "t"), p("5 + t^2"));
        assert_eq!(secular_limit(&p("sin(th0)"), "t"), p("sin(th0)"));
        let once = secular_limit(&e, "t");
        assert_eq!(secular_limit(&once, "t"), once);
    }

    #[test]
    fn linear_first_order_examples() {
        let s = solve_linear_first_order(&p("1"), &p("A*exp(-x/eps)"), "x", "B").unwrap();
        assert_eq!(s.solution, p("A*eps/(eps - 1)*exp(-x/eps) + B*exp(-x)"));
        let s = solve_linear_first_order(&p("1"), &p("0"), "x", "B").unwrap();
        assert_eq!(s.solution, p("B*exp(-x)"));
        let s = solve_linear_first_order(&p("2"), &p("exp(x)"), "x", "B").unwrap();
        assert_eq!(s.solution, p("exp(x)/3 + B*exp(-2*x)"));
        assert!(satisfies_first_order(&s.solution, "x", &p("2"), &p("exp(x)")));
        assert!(matches!(
            solve_linear_first_order(&p("1"), &p("exp(-x)"), "x", "B"),
            Err(TransformError::Resonance { .. })
        ));
    }

    #[test]
    fn amplitude_examples() {
        let consts = Binding::from_pairs([("u0", p("R0^(-2)"))]).unwrap();
        let r = amplitude_law(&p("u0 + 3/4*eps*t"), "u", &p("u^(-1/2)"), &consts, "t").unwrap();
        assert_eq!(r.to_string(), "R0/sqrt(1 + 3/4*R0^2*eps*t)");
        let at = |s: &str, v: &str| substitute(&r, &Binding::from_pairs([(s, p(v))]).unwrap());
        assert_eq!(at("eps", "0"), p("R0"));
        assert_eq!(at("t", "0"), p("R0"));
    }

    #[test]
    fn wkb_modes() {
        let ctx = ParseContext::with_functions(["Omega"]);
        let ch = Chart::new(&["x", "u", "v"]).unwrap();
        let q = |s: &str| parse_with(s, &ctx).unwrap();
        let x = VectorField::new(&ch, vec![q("sqrt(v/u)/Omega(x)^2"), q("v/Omega(x)^2"), Expr::zero()]).unwrap();
        let sol = HomologicalSolution {
            x,
            lambda: vec![],
            diagnostics: Diagnostics::default(),
        };
        let m = wkb_phase(&sol, &q("Omega(x)"), &p("eps^2"), "y").unwrap();
        assert_eq!(m.relations[0].rhs, q("i/eps*Omega(x)*y"));
        assert_eq!(m.solutions[1], q("exp(-i/eps*int(Omega(x), x))"));
        let f = kernel::Lambda::new("s", p("1 + s"));
        let sub = HomologicalSolution {
            x: sol.x.map(|c| kernel::substitute_function(c, "Omega", &f)),
            ..sol.clone()
        };
        let m = wkb_phase(&sub, &p("1 + x"), &p("eps^2"), "y").unwrap();
        assert_eq!(m.solutions[0], p("exp(i/eps*(x + x^2/2))"));
        let one = HomologicalSolution {
            x: sol.x.map(|c| kernel::substitute_function(c, "Omega", &kernel::Lambda::new("s", p("1")))),
            ..sol
        };
        assert_eq!(wkb_phase(&one, &p("1"), &p("eps^2"), "y").unwrap().solutions[0], p("exp(i*x/eps)"));
    }
}
