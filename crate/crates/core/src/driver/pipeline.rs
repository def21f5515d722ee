use std::collections::BTreeSet;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::forms::{ode_to_forms, pullback, Chart, KForm, OdeSystem};
use crate::kernel::{
    evaluate_integrals, expr, is_zero_exact, parse_with, substitute, Binding, Compiled, EvalEnv, Expr, Lambda,
    ParseContext, Symbol,
};
use crate::solver::{
    extend_ansatz, parse_forms, residual_norm_numeric, solve, symbolic_residual_is_zero, Ansatz, HomologicalSolution,
    PerturbedSystem, SamplingBox,
};
use crate::transform::{
    amplitude_law, as_linear_first_order, secular_limit, solve_for, solve_linear_first_order, transform_invariant,
    wkb_phase, AsymptoticSolution, Invariant, Relation, Rewrites,
};
use crate::validate::{
    curve_annihilation, error_scaling, fit_constants, integrate_reference, sample_asymptotic,
    uniform_grid, CharacteristicOracle, Check, EpsSummary, ErrorRow, Trajectory, ValidationReport,
};

use super::problem::*;
use super::report::Report;
use super::{DriverError, Stage};

/// Command-line overrides applied on top of a problem file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub eps_ladder: Option<Vec<f64>>,
    pub tol: Option<f64>,
    pub ansatz_depth: Option<u32>,
}

impl Overrides {
    pub fn apply(&self, pf: &mut ProblemFile) {
        if let Some(d) = self.ansatz_depth {
            pf.ansatz.depth = d;
        }
        if let Some(v) = &mut pf.validation {
            if let Some(t) = self.tol {
                v.tol = t;
            }
            if let Some(l) = &self.eps_ladder {
                v.eps_ladder = l.clone();
            }
        }
    }
}

fn err(stage: Stage, e: impl std::fmt::Display, at: &str) -> DriverError {
    DriverError::new(stage, e, Some(at))
}

struct Ctx {
    parse: ParseContext,
}

impl Ctx {
    fn expr(&self, stage: Stage, s: &str) -> Result<Expr, DriverError> {
        parse_with(s, &self.parse).map_err(|e| err(stage, e, s))
    }

    fn binding(&self, stage: Stage, m: &std::collections::BTreeMap<String, String>) -> Result<Binding, DriverError> {
        let mut b = Binding::new();
        for (k, v) in m {
            b.insert(k, self.expr(stage, v)?).map_err(|e| err(stage, e, k))?;
        }
        Ok(b)
    }
}

fn chart(stage: Stage, names: &[String]) -> Result<Chart, DriverError> {
    Chart::new(names).map_err(|e| err(stage, e, &names.join(", ")))
}

/// `F(s) = body`.
fn function_def(ctx: &Ctx, text: &str) -> Result<(String, Lambda), DriverError> {
    let bad = || DriverError::new(Stage::Validate, "expected `F(s) = body`", Some(text));
    let (lhs, rhs) = text.split_once('=').ok_or_else(bad)?;
    let lhs = lhs.trim();
    let open = lhs.find('(').ok_or_else(bad)?;
    let name = lhs[..open].trim();
    let param = lhs[open + 1..].strip_suffix(')').ok_or_else(bad)?.trim();
    if name.is_empty() || param.is_empty() {
        return Err(bad());
    }
    Ok((name.to_string(), Lambda::new(param, ctx.expr(Stage::Validate, rhs.trim())?)))
}

/// `lhs = rhs`.
fn relation(ctx: &Ctx, text: &str) -> Result<Relation, DriverError> {
    let (l, r) = text
        .split_once('=')
        .ok_or_else(|| DriverError::parse("expected `lhs = rhs`", Some(text)))?;
    Ok(Relation::new(ctx.expr(Stage::Parse, l.trim())?, ctx.expr(Stage::Parse, r.trim())?))
}

pub(crate) struct Prepared {
    ctx: Ctx,
    declared: PerturbedSystem,
    system: PerturbedSystem,
    ansatz: Ansatz,
    notes: Vec<String>,
}

fn prepare(pf: &ProblemFile) -> Result<Prepared, DriverError> {
    let s = &pf.system;
    let ctx = Ctx {
        parse: ParseContext::with_functions(s.functions.iter().map(String::as_str)),
    };
    let ch = chart(Stage::Parse, &s.chart)?;
    let param = ctx.expr(Stage::Parse, &s.parameter)?;
    let w0 = parse_forms(&s.zero_order, &ch, &ctx.parse).map_err(|e| DriverError::parse(e, None))?;
    let w1 = parse_forms(&s.perturbation, &ch, &ctx.parse).map_err(|e| DriverError::parse(e, None))?;
    let mut allowed: BTreeSet<String> = s.chart.iter().cloned().collect();
    allowed.extend(param.free_symbols().iter().map(|x| x.to_string()));
    allowed.extend(s.constants.iter().cloned());
    allowed.insert("pi".into());
    for (w, text) in w0.iter().chain(&w1).zip(s.zero_order.iter().chain(&s.perturbation)) {
        for c in w.components() {
            if let Some(bad) = c.free_symbols().iter().find(|x| !allowed.contains(&***x)) {
                return Err(DriverError::parse(format!("undeclared symbol `{bad}`"), Some(text)));
            }
        }
    }
    let ind = s.independent.as_deref();
    let declared =
        PerturbedSystem::new(&ch, w0.clone(), w1.clone(), param.clone(), ind).map_err(|e| DriverError::parse(e, None))?;
    let system = match &pf.pretransform {
        None => declared.clone(),
        Some(p) => {
            let st = Stage::Pretransform;
            let new = chart(st, &p.chart)?;
            let map: Vec<Expr> = p.old_in_new.iter().map(|t| ctx.expr(st, t)).collect::<Result<_, _>>()?;
            let n = w0.len();
            let m: Vec<Vec<Expr>> = if p.recombine.is_empty() {
                (0..n)
                    .map(|i| (0..n).map(|j| if i == j { Expr::one() } else { Expr::zero() }).collect())
                    .collect()
            } else {
                if p.recombine.len() != n || p.recombine.iter().any(|r| r.len() != n) {
                    return Err(DriverError::new(st, format!("recombine must be {n}x{n}"), None));
                }
                p.recombine
                    .iter()
                    .map(|r| r.iter().map(|t| ctx.expr(st, t)).collect::<Result<_, _>>())
                    .collect::<Result<_, _>>()?
            };
            let tr = |ws: &[KForm]| -> Result<Vec<KForm>, DriverError> {
                (0..n)
                    .map(|i| {
                        let mut acc = KForm::zero(&ch, 1);
                        for (j, w) in ws.iter().enumerate() {
                            acc = acc.add(&w.scale(&m[i][j])).map_err(|e| DriverError::new(st, e, None))?;
                        }
                        pullback(&acc, &new, &map).map_err(|e| err(st, e, &acc.to_string()))
                    })
                    .collect()
            };
            let (a0, a1) = (tr(&w0)?, tr(&w1)?);
            PerturbedSystem::new(&new, a0, a1, param.clone(), ind).map_err(|e| DriverError::new(st, e, None))?
        }
    };
    let st = Stage::Ansatz;
    let a = &pf.ansatz;
    let terms: Vec<Expr> = a.terms.iter().map(|t| ctx.expr(st, t)).collect::<Result<_, _>>()?;
    let mults: Vec<Expr> = a.multipliers.iter().map(|t| ctx.expr(st, t)).collect::<Result<_, _>>()?;
    let dim = system.chart.dim();
    let mask = match &a.mask {
        None => vec![true; dim],
        Some(names) => {
            let mut m = vec![false; dim];
            for nm in names {
                let k = system
                    .chart
                    .index_of(nm)
                    .ok_or_else(|| DriverError::new(st, format!("mask coordinate `{nm}` not in chart {}", system.chart), None))?;
                m[k] = true;
            }
            m
        }
    };
    let base = Ansatz::new(terms, mults, mask);
    let (ansatz, warnings) = extend_ansatz(&base, &system, a.depth).map_err(|e| DriverError::new(st, e, None))?;
    let notes = warnings.into_iter().map(|w| format!("ansatz: {w}")).collect();
    Ok(Prepared {
        ctx,
        declared,
        system,
        ansatz,
        notes,
    })
}

/// Pipeline results before validation.
pub(crate) struct Outputs {
    pub solution: HomologicalSolution,
    pub asymptotic: AsymptoticSolution,
    pub phase: Option<Expr>,
}

fn transform(p: &Prepared, pf: &ProblemFile, sol: &HomologicalSolution) -> Result<(AsymptoticSolution, Option<Expr>), DriverError> {
    let st = Stage::Transform;
    let Some(t) = &pf.transform else {
        return Ok((AsymptoticSolution::default(), None));
    };
    let ctx = &p.ctx;
    let invariants: Vec<Invariant> = t
        .invariants
        .iter()
        .map(|i| {
            Ok(Invariant {
                expr: ctx.expr(st, &i.expr)?,
                solve_for: i.solve_for.clone(),
            })
        })
        .collect::<Result<_, DriverError>>()?;
    let rw = Rewrites {
        substitutions: ctx.binding(st, &t.substitutions)?,
        constants: ctx.binding(st, &t.constants)?,
        first_order: ctx.binding(st, &t.first_order)?,
    };
    let mut out = transform_invariant(&p.system, sol, &invariants, &rw).map_err(|e| DriverError::new(st, e, None))?;
    let indep = pf.system.independent.clone();
    let need_indep = || {
        indep
            .clone()
            .ok_or_else(|| DriverError::new(st, "an independent coordinate is required", None))
    };
    let pick = |k: usize, out: &AsymptoticSolution| {
        out.relations
            .get(k)
            .cloned()
            .ok_or_else(|| DriverError::new(st, format!("no relation #{k}"), None))
    };
    if let Some(l) = &t.linear_first_order {
        let x = need_indep()?;
        let rel = pick(l.relation, &out)?;
        let z = rel.as_zero();
        let dy = solve_for(&z, &l.derivative)
            .ok_or_else(|| err(st, format!("cannot isolate {}", l.derivative), &z.to_string()))?;
        let (coeff, forcing) = as_linear_first_order(&dy, &l.unknown).map_err(|e| err(st, e, &dy.to_string()))?;
        let ls = solve_linear_first_order(&coeff, &forcing, &x, &l.constant).map_err(|e| err(st, e, &dy.to_string()))?;
        out.relations.push(Relation::new(Expr::sym(&l.derivative), dy));
        let mut parts = Vec::new();
        for (k, (c, rate)) in ls.particular.iter().enumerate() {
            let e = expr::exp(&expr::mul2(rate, &Expr::sym(&x)));
            match l.rename.get(k) {
                Some(name) => {
                    out.definitions.push(Relation::new(Expr::sym(name), c.clone()));
                    parts.push(expr::mul2(&Expr::sym(name), &e));
                }
                None => parts.push(expr::mul2(c, &e)),
            }
        }
        parts.push(ls.homogeneous.clone());
        let explicit = expr::add(parts);
        out.notes.push(format!("solved {} + ({coeff})*{} = {forcing}", l.derivative, l.unknown));
        out.relations.push(Relation::new(Expr::sym(&l.unknown), explicit.clone()));
        out.explicit = Some(explicit);
    }
    if let Some(a) = &t.amplitude {
        let rel = pick(a.relation, &out)?;
        if rel.lhs != Expr::sym(&a.coordinate) {
            return Err(err(st, format!("relation #{} is not solved for {}", a.relation, a.coordinate), &rel.to_string()));
        }
        let slow = secular_limit(&rel.rhs, &a.secular);
        out.relations.push(Relation::new(rel.lhs.clone(), slow.clone()));
        let back = ctx.expr(st, &a.back)?;
        let consts = ctx.binding(st, &a.constants)?;
        let law = amplitude_law(&slow, &a.coordinate, &back, &consts, &a.secular).map_err(|e| err(st, e, &a.back))?;
        out.notes.push(format!("dropped oscillating terms in {}", a.secular));
        out.relations.push(Relation::new(Expr::sym(&a.variable), law.clone()));
        out.explicit = Some(law);
    }
    let mut phase = None;
    if let Some(w) = &t.wkb {
        let omega = ctx.expr(st, &w.omega)?;
        let m = wkb_phase(sol, &omega, &p.system.eps, &w.unknown).map_err(|e| err(st, e, &w.omega))?;
        out.relations.extend(m.relations.iter().cloned());
        let [c1, c2] = &w.constants;
        let explicit = expr::add2(
            &expr::mul2(&Expr::sym(c1), &m.solutions[0]),
            &expr::mul2(&Expr::sym(c2), &m.solutions[1]),
        );
        out.relations.push(Relation::new(Expr::sym(&w.unknown), explicit.clone()));
        out.explicit = Some(explicit);
        phase = Some(m.phase);
    }
    Ok((out, phase))
}

fn same_relation(a: &Relation, b: &Relation) -> bool {
    (a.lhs == b.lhs && a.rhs == b.rhs) || is_zero_exact(&expr::sub(&a.as_zero(), &b.as_zero()))
}

fn expectation_checks(p: &Prepared, ex: &Expected, o: &Outputs, solve_time: f64) -> Result<Vec<Check>, DriverError> {
    let ctx = &p.ctx;
    let mut checks = Vec::new();
    if let Some(field) = &ex.field {
        let dim = p.system.chart.dim();
        if field.len() != dim {
            return Err(DriverError::parse(format!("expected field needs {dim} components"), None));
        }
        let mut bad = Vec::new();
        for (k, f) in field.iter().enumerate() {
            let want = ctx.expr(Stage::Parse, f)?;
            let got = o.solution.x.component(k);
            if *got != want {
                bad.push(format!("d/d{}: got {got}, expected {want}", p.system.chart.name(k)));
            }
        }
        let c = Check::holds("expected field (canonical equality)", bad.is_empty());
        checks.push(if bad.is_empty() { c } else { c.with_detail(bad.join("; ")) });
    }
    let produced: Vec<&Relation> = o.asymptotic.relations.iter().chain(&o.asymptotic.definitions).collect();
    for r in &ex.relations {
        let want = relation(ctx, r)?;
        let ok = produced.iter().any(|g| same_relation(g, &want));
        let c = Check::holds(&format!("expected relation {want}"), ok);
        checks.push(if ok {
            c
        } else {
            // Relations for the same unknown, explicit or kept implicit.
            let near: Vec<String> = produced
                .iter()
                .filter(|g| g.lhs == want.lhs || (g.rhs.is_zero() && want.lhs.free_symbols().iter().all(|s| g.lhs.contains_symbol(s))))
                .map(|g| g.to_string())
                .collect();
            c.with_detail(if near.is_empty() {
                "no relation for this left-hand side".to_string()
            } else {
                format!("produced {}", near.join("; "))
            })
        });
    }
    if let Some(e) = &ex.explicit {
        let want = ctx.expr(Stage::Parse, e)?;
        let ok = o.asymptotic.explicit.as_ref() == Some(&want);
        let c = Check::holds(&format!("expected explicit solution {want}"), ok);
        checks.push(match (&o.asymptotic.explicit, ok) {
            (_, true) => c,
            (Some(g), false) => c.with_detail(format!("produced {g}")),
            (None, false) => c.with_detail("no explicit solution produced"),
        });
    }
    if let Some(limit) = ex.solve_seconds {
        // The measured time is kept out of the report so reruns stay identical.
        checks.push(Check::holds(&format!("solve within {limit} s"), solve_time <= limit));
    }
    Ok(checks)
}

/// Run the whole pipeline on one problem file.
pub fn run_case(pf: &ProblemFile, ov: &Overrides, validate: bool) -> Result<Report, DriverError> {
    let mut pf = pf.clone();
    ov.apply(&mut pf);
    let prepared = prepare(&pf)?;
    let t0 = Instant::now();
    let solution = solve(&prepared.system, &prepared.ansatz).map_err(|e| DriverError::new(Stage::Solve, e, None))?;
    let solve_time = t0.elapsed().as_secs_f64();
    let (mut asymptotic, phase) = transform(&prepared, &pf, &solution)?;
    let mut notes = prepared.notes.clone();
    notes.append(&mut asymptotic.notes);
    asymptotic.notes = notes;
    let outputs = Outputs {
        solution,
        asymptotic,
        phase,
    };
    let checks = match &pf.expected {
        Some(ex) => expectation_checks(&prepared, ex, &outputs, solve_time)?,
        None => Vec::new(),
    };
    let validation = match (&pf.validation, validate) {
        (Some(v), true) => Some(run_validation(&prepared, &pf, v, &outputs)?),
        _ => None,
    };
    Ok(Report::assemble(&pf, &prepared.system, &outputs, checks, validation))
}

fn parameter_symbol(p: &Prepared) -> Result<String, DriverError> {
    let syms = p.system.eps.free_symbols();
    match syms.iter().next() {
        Some(s) if syms.len() == 1 => Ok(s.to_string()),
        _ => Err(DriverError::new(
            Stage::Validate,
            "the perturbation parameter must contain exactly one symbol",
            Some(&p.system.eps.to_string()),
        )),
    }
}

fn residual_checks(p: &Prepared, v: &ValidationSpec, sol: &HomologicalSolution) -> Result<Vec<Check>, DriverError> {
    let st = Stage::Validate;
    let exact = symbolic_residual_is_zero(&p.system, sol).map_err(|e| DriverError::new(st, e, None))?;
    let mut sampling = SamplingBox::default();
    for (k, [lo, hi]) in &v.sampling {
        sampling.intervals.insert(k.clone(), (*lo, *hi));
    }
    let norm = residual_norm_numeric(sol, &p.system, v.residual_points, &sampling).map_err(|e| DriverError::new(st, e, None))?;
    Ok(vec![
        Check::holds("symbolic homological residual is zero", exact),
        Check::at_most(
            &format!("numeric homological residual over {} points", v.residual_points),
            norm,
            v.residual_bound,
        ),
    ])
}

fn run_validation(p: &Prepared, pf: &ProblemFile, v: &ValidationSpec, o: &Outputs) -> Result<ValidationReport, DriverError> {
    let mut report = ValidationReport::default();
    report.checks.extend(residual_checks(p, v, &o.solution)?);
    for var in &v.variants {
        report.merge(run_variant(p, pf, v, var, o)?);
    }
    Ok(report)
}

/// The declared system's forms `ω0_i - param*ω1_i`.
fn declared_full_forms(p: &Prepared) -> Result<Vec<KForm>, DriverError> {
    p.declared
        .omega0
        .iter()
        .zip(&p.declared.omega1)
        .map(|(a, b)| a.sub(&b.scale(&p.declared.eps)).map_err(|e| DriverError::new(Stage::Validate, e, None)))
        .collect()
}

struct EpsRun {
    checks: Vec<Check>,
    rows: Vec<ErrorRow>,
    /// Max error per comparison, in `var.compare` order.
    errors: Vec<f64>,
}

fn run_variant(p: &Prepared, pf: &ProblemFile, v: &ValidationSpec, var: &Variant, o: &Outputs) -> Result<ValidationReport, DriverError> {
    let st = Stage::Validate;
    let ladder = var.eps.clone().unwrap_or_else(|| v.eps_ladder.clone());
    if ladder.is_empty() {
        return Err(DriverError::new(st, format!("variant {}: empty epsilon list", var.name), None));
    }
    let eps_name = parameter_symbol(p)?;
    let mut base = EvalEnv::new();
    for f in &var.functions {
        let (name, l) = function_def(&p.ctx, f)?;
        base.define(&name, l);
    }
    for (k, x) in &var.parameters {
        base.set(k, *x);
    }
    let runs: Vec<Result<EpsRun, DriverError>> = ladder
        .par_iter()
        .map(|eps| {
            let mut env = base.clone();
            env.set(&eps_name, *eps);
            run_eps(p, pf, v, var, o, &env, *eps)
        })
        .collect();
    let mut out = ValidationReport::default();
    let mut per_compare: Vec<Vec<(f64, f64)>> = vec![Vec::new(); var.compare.len()];
    for (eps, r) in ladder.iter().zip(runs) {
        let r = r?;
        out.checks.extend(r.checks);
        out.errors.extend(r.rows);
        for (k, e) in r.errors.iter().enumerate() {
            per_compare[k].push((*eps, *e));
            out.summary.push(EpsSummary {
                comparison: format!("{}/{}", var.name, var.compare[k].name),
                epsilon: *eps,
                max_error: *e,
            });
        }
    }
    for (c, pts) in var.compare.iter().zip(&per_compare) {
        let label = format!("{}/{}", var.name, c.name);
        if c.decreasing {
            let mut sorted = pts.clone();
            sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
            let ok = sorted.windows(2).all(|w| w[1].1 < w[0].1);
            let detail: Vec<String> = sorted.iter().map(|(e, m)| format!("{e}: {m:e}")).collect();
            out.checks
                .push(Check::holds(&format!("{label}: max error decreases with epsilon"), ok).with_detail(detail.join(", ")));
        }
        if let Some(min) = c.min_exponent {
            let name = format!("{label}: fitted error exponent");
            match error_scaling(pts) {
                Ok(fitted) => {
                    out.checks.push(Check::at_least(&name, fitted, min));
                    out.exponent = Some(fitted);
                }
                // Too few or non-positive errors: the check fails, the run goes on.
                Err(e) => out.checks.push(Check::at_least(&name, 0.0, min).with_detail(e.to_string())),
            }
        }
    }
    Ok(out)
}

struct RefCurve {
    traj: Trajectory,
    ode: OdeSystem,
    chart: Vec<Symbol>,
}

fn reference(p: &Prepared, var: &Variant, env: &EvalEnv, tol: f64, grid: usize) -> Result<RefCurve, DriverError> {
    let st = Stage::Validate;
    let ctx = &p.ctx;
    let mut params: Vec<String> = env.symbols().map(|s| s.to_string()).collect();
    params.extend(p.declared.eps.free_symbols().iter().map(|s| s.to_string()));
    let params: Vec<&str> = params.iter().map(String::as_str).collect();
    match &var.reference {
        Reference::Ode {
            chart: names,
            rhs,
            ic,
            span,
            tol: own,
        } => {
            let ch = chart(st, names)?;
            let rhs: Vec<Expr> = rhs.iter().map(|t| ctx.expr(st, t)).collect::<Result<_, _>>()?;
            let ode = OdeSystem::new(&ch, rhs, "s", &params).map_err(|e| DriverError::new(st, e, Some(&var.name)))?;
            let traj = integrate_reference(&ode, env, ic, (span[0], span[1]), own.unwrap_or(tol))
                .map_err(|e| DriverError::new(st, e, Some(&var.name)))?;
            Ok(RefCurve {
                traj,
                chart: ch.coords().to_vec(),
                ode,
            })
        }
        Reference::Characteristic {
            chart: names,
            coefficients,
            ic,
            span,
        } => {
            if names.len() != 3 {
                return Err(DriverError::new(st, "characteristic reference needs a chart (x, y, y')", Some(&var.name)));
            }
            let ch = chart(st, names)?;
            let cs: Vec<Expr> = coefficients.iter().map(|t| ctx.expr(st, t)).collect::<Result<_, _>>()?;
            let num: Vec<f64> = cs
                .iter()
                .map(|c| {
                    crate::kernel::eval_numeric(c, env)
                        .map(|z| z.re)
                        .map_err(|e| err(st, e, &c.to_string()))
                })
                .collect::<Result<_, _>>()?;
            let oracle = CharacteristicOracle::new(num[0], num[1], num[2], span[0], ic[0], ic[1])
                .map_err(|e| DriverError::new(st, e, Some(&var.name)))?;
            let (y, z) = (ch.coord(1), ch.coord(2));
            let accel = expr::neg(&expr::div(&expr::add2(&expr::mul2(&cs[1], &z), &expr::mul2(&cs[2], &y)), &cs[0]));
            let ode = OdeSystem::new(&ch, vec![Expr::one(), z, accel], "s", &params)
                .map_err(|e| DriverError::new(st, e, Some(&var.name)))?;
            Ok(RefCurve {
                traj: oracle.trajectory((span[0], span[1]), grid),
                chart: ch.coords().to_vec(),
                ode,
            })
        }
    }
}

/// Angle of `(re, im)` made continuous along the samples.
fn unwrap_angles(re: &[f64], im: &[f64]) -> Vec<f64> {
    use std::f64::consts::TAU;
    let mut out: Vec<f64> = Vec::with_capacity(re.len());
    for (a, b) in re.iter().zip(im) {
        let mut ang = b.atan2(*a);
        if let Some(q) = out.last() {
            ang -= TAU * ((ang - q) / TAU).round();
        }
        out.push(ang);
    }
    out
}

/// Replace `$explicit` / `$phase` by the pipeline results.
fn asymptotic_expr(p: &Prepared, c: &Compare, o: &Outputs) -> Result<Expr, DriverError> {
    let st = Stage::Validate;
    let text = c.asymptotic.replace("$explicit", "__explicit").replace("$phase", "__phase");
    let e = p.ctx.expr(st, &text)?;
    let mut b = Binding::new();
    if text.contains("__explicit") {
        let x = o
            .asymptotic
            .explicit
            .clone()
            .ok_or_else(|| DriverError::new(st, "no explicit solution to compare", Some(&c.asymptotic)))?;
        b.insert("__explicit", x).expect("fresh binding");
    }
    if text.contains("__phase") {
        let x = o
            .phase
            .clone()
            .ok_or_else(|| DriverError::new(st, "no phase to compare", Some(&c.asymptotic)))?;
        b.insert("__phase", x).expect("fresh binding");
    }
    Ok(substitute(&e, &b))
}

fn run_eps(
    p: &Prepared,
    pf: &ProblemFile,
    v: &ValidationSpec,
    var: &Variant,
    o: &Outputs,
    env: &EvalEnv,
    eps: f64,
) -> Result<EpsRun, DriverError> {
    let st = Stage::Validate;
    let curve = reference(p, var, env, v.tol, v.grid)?;
    let mut checks = Vec::new();
    let bound = 10.0 * v.tol;
    let annihilate = |forms: &[KForm]| -> Result<f64, DriverError> {
        let mut worst = 0f64;
        for w in forms {
            let r = curve_annihilation(&curve.traj, w, &curve.ode, env).map_err(|e| err(st, e, &w.to_string()))?;
            worst = worst.max(r);
        }
        Ok(worst)
    };
    let own = ode_to_forms(&curve.ode);
    checks.push(Check::at_most(
        &format!("{}: ode_to_forms annihilate the reference (eps = {eps})", var.name),
        annihilate(&own)?,
        bound,
    ));
    if var.annihilate_declared {
        if curve.ode.chart() != &p.declared.chart {
            return Err(DriverError::new(
                st,
                format!("variant {}: reference chart differs from the declared chart", var.name),
                None,
            ));
        }
        checks.push(Check::at_most(
            &format!("{}: declared forms annihilate the reference (eps = {eps})", var.name),
            annihilate(&declared_full_forms(p)?)?,
            bound,
        ));
    }
    let indep = pf
        .system
        .independent
        .clone()
        .ok_or_else(|| DriverError::new(st, "validation needs an independent coordinate", None))?;
    let ind_slot = curve.chart.iter().position(|s| **s == *indep);
    let (s0, s1) = curve.traj.span();
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for c in &var.compare {
        let label = format!("{}/{}", var.name, c.name);
        let [a, b] = c.window.unwrap_or([s0, s1]);
        let grid = uniform_grid(a, b, v.grid);
        let states: Vec<Vec<f64>> = grid
            .iter()
            .map(|s| {
                curve
                    .traj
                    .at(*s)
                    .ok_or_else(|| DriverError::new(st, format!("{s} outside the reference span"), Some(&label)))
            })
            .collect::<Result<_, _>>()?;
        let xs: Vec<f64> = match ind_slot {
            Some(k) => states.iter().map(|v| v[k]).collect(),
            None => grid.clone(),
        };
        let mut slots = curve.chart.clone();
        slots.push(Symbol::from("s"));
        let refs: Vec<Compiled> = c
            .reference
            .iter()
            .map(|t| {
                let e = env.expand_functions(&p.ctx.expr(st, t)?);
                Compiled::new(&e, &slots, env).map_err(|er| err(st, er, t))
            })
            .collect::<Result<_, _>>()?;
        let want = if c.kind == CompareKind::Phase { 2 } else { 1 };
        if refs.len() != want {
            return Err(DriverError::new(st, format!("{label}: {want} reference expression(s) expected"), None));
        }
        let eval_ref = |k: usize| -> Vec<f64> {
            states
                .iter()
                .zip(&grid)
                .map(|(st, s)| {
                    let mut x = st.clone();
                    x.push(*s);
                    refs[k].eval(&x)
                })
                .collect()
        };
        let asym = evaluate_integrals(&env.expand_functions(&asymptotic_expr(p, c, o)?));
        let mut env = env.clone();
        if !c.fit.is_empty() {
            let names: Vec<&str> = c.fit.iter().map(String::as_str).collect();
            // Conditions hold at the start of the reference curve.
            let x0 = match ind_slot {
                Some(k) => curve.traj.states[0][k],
                None => s0,
            };
            let vals = fit_constants(&asym, &indep, x0, &names, &c.conditions, &env).map_err(|e| err(st, e, &asym.to_string()))?;
            env = crate::validate::bind_constants(&env, &names, &vals);
        }
        let sampled: Vec<Complex64> = sample_asymptotic(&asym, &indep, &xs, &env).map_err(|e| err(st, e, &asym.to_string()))?;
        let asym_re: Vec<f64> = sampled.iter().map(|z| z.re).collect();
        let reference: Vec<f64> = match c.kind {
            CompareKind::Solution | CompareKind::Relative => eval_ref(0),
            CompareKind::Phase => unwrap_angles(&eval_ref(0), &eval_ref(1)),
        };
        let case = format!("{}/{label}", pf.name);
        let mut worst = 0f64;
        for ((x, r), a) in xs.iter().zip(&reference).zip(&asym_re) {
            let d = (r - a).abs();
            worst = worst.max(if c.kind == CompareKind::Relative { d / r.abs() } else { d });
            rows.push(ErrorRow {
                case: case.clone(),
                epsilon: eps,
                x_or_t: *x,
                reference: *r,
                asymptotic: *a,
                abs_error: d,
            });
        }
        errors.push(worst);
        let limit = c.max_error.or(c.max_error_tol.map(|k| k * v.tol));
        if let Some(lim) = limit {
            checks.push(Check::at_most(&format!("{label}: max error (eps = {eps})"), worst, lim));
        }
    }
    Ok(EpsRun { checks, rows, errors })
}
