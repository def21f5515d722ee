//! Floating-point evaluation.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

use super::expr::{Expr, Func, Node, Symbol};
use super::subst::{substitute_function, Lambda};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound symbol `{0}`")]
    Unbound(String),
    #[error("undefined function `{0}`")]
    UnboundFunction(String),
    #[error("pole at `{0}`")]
    Pole(String),
    #[error("branch violation at `{0}`")]
    Branch(String),
    #[error("unevaluated integral `{0}`")]
    Integral(String),
    #[error("non-real value in real evaluation: `{0}`")]
    NotReal(String),
}

/// Values for symbols and definitions for undefined functions.
#[derive(Debug, Clone, Default)]
pub struct EvalEnv {
    values: BTreeMap<Symbol, Complex64>,
    functions: BTreeMap<Symbol, Lambda>,
}

impl EvalEnv {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_reals<'a, I: IntoIterator<Item = (&'a str, f64)>>(pairs: I) -> Self {
        let mut env = EvalEnv::new();
        for (k, v) in pairs {
            env.set(k, v);
        }
        env
    }

    pub fn set(&mut self, name: &str, v: f64) -> &mut Self {
        self.values.insert(Arc::from(name), Complex64::new(v, 0.0));
        self
    }

    pub fn set_complex(&mut self, name: &str, v: Complex64) -> &mut Self {
        self.values.insert(Arc::from(name), v);
        self
    }

    pub fn define(&mut self, name: &str, f: Lambda) -> &mut Self {
        self.functions.insert(Arc::from(name), f);
        self
    }

    pub fn get(&self, name: &str) -> Option<Complex64> {
        self.values.get(name).copied()
    }

    pub fn symbols(&self) -> impl Iterator<Item = &Symbol> {
        self.values.keys()
    }

    pub fn functions(&self) -> impl Iterator<Item = (&Symbol, &Lambda)> {
        self.functions.iter()
    }

    /// Inline every defined function into `e`.
    pub fn expand_functions(&self, e: &Expr) -> Expr {
        let mut out = e.clone();
        for (name, f) in &self.functions {
            out = substitute_function(&out, name, f);
        }
        out
    }
}

/// IEEE double evaluation. `pi` evaluates to π unless bound.
pub fn eval_numeric(e: &Expr, env: &EvalEnv) -> Result<Complex64, EvalError> {
    let e = if e.applied_functions().is_empty() {
        e.clone()
    } else {
        env.expand_functions(e)
    };
    eval(&e, env)
}

fn eval(e: &Expr, env: &EvalEnv) -> Result<Complex64, EvalError> {
    Ok(match e.node() {
        Node::Num(n) => n.to_c64(),
        Node::Sym(s) => match env.get(s) {
            Some(v) => v,
            None if &**s == "pi" => Complex64::new(PI, 0.0),
            None => return Err(EvalError::Unbound(s.to_string())),
        },
        Node::Add(ts) => {
            let mut acc = Complex64::zero();
            for t in ts {
                acc += eval(t, env)?;
            }
            acc
        }
        Node::Mul(fs) => {
            let mut acc = Complex64::new(1.0, 0.0);
            for f in fs {
                acc *= eval(f, env)?;
            }
            acc
        }
        Node::Pow(b, p) => {
            let base = eval(b, env)?;
            if p.is_integer() {
                let k = p.to_integer().to_i32().ok_or_else(|| EvalError::Pole(e.to_string()))?;
                if k < 0 && base.norm() == 0.0 {
                    return Err(EvalError::Pole(e.to_string()));
                }
                base.powi(k)
            } else {
                let q = p.to_f64().unwrap_or(f64::NAN);
                if base.im.abs() <= 1e-14 * base.re.abs() && base.re >= 0.0 {
                    if base.re == 0.0 && q < 0.0 {
                        return Err(EvalError::Pole(e.to_string()));
                    }
                    Complex64::new(base.re.powf(q), 0.0)
                } else {
                    return Err(EvalError::Branch(e.to_string()));
                }
            }
        }
        Node::Fn(f, a) => {
            let x = eval(a, env)?;
            match f {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Exp => x.exp(),
                Func::Ln => {
                    if x.im.abs() > 1e-14 * x.re.abs() || x.re <= 0.0 {
                        return Err(EvalError::Branch(e.to_string()));
                    }
                    Complex64::new(x.re.ln(), 0.0)
                }
            }
        }
        Node::Apply { name, .. } => return Err(EvalError::UnboundFunction(name.to_string())),
        Node::Integral { .. } => return Err(EvalError::Integral(e.to_string())),
    })
}

/// Real-valued expression compiled against a fixed slot layout, for
/// right-hand sides evaluated many times by the integrator.
#[derive(Debug, Clone)]
pub struct Compiled {
    root: Op,
}

#[derive(Debug, Clone)]
enum Op {
    Const(f64),
    Slot(usize),
    Add(Vec<Op>),
    Mul(Vec<Op>),
    Powi(Box<Op>, i32),
    Powf(Box<Op>, f64),
    Sin(Box<Op>),
    Cos(Box<Op>),
    Exp(Box<Op>),
    Ln(Box<Op>),
}

impl Compiled {
    /// Symbols in `slots` are read from the argument vector; all others come
    /// from `env`.
    pub fn new(e: &Expr, slots: &[Symbol], env: &EvalEnv) -> Result<Self, EvalError> {
        let e = env.expand_functions(e);
        Ok(Compiled {
            root: compile(&e, slots, env)?,
        })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        run(&self.root, x)
    }
}

fn compile(e: &Expr, slots: &[Symbol], env: &EvalEnv) -> Result<Op, EvalError> {
    if let Node::Sym(s) = e.node() {
        if let Some(k) = slots.iter().position(|x| x == s) {
            return Ok(Op::Slot(k));
        }
    }
    let free = e.free_symbols();
    if free.iter().all(|s| !slots.contains(s)) {
        let v = eval_numeric(e, env)?;
        if v.im.abs() > 1e-14 * v.re.abs().max(1.0) {
            return Err(EvalError::NotReal(e.to_string()));
        }
        return Ok(Op::Const(v.re));
    }
    let boxed = |a: &Expr| compile(a, slots, env).map(Box::new);
    Ok(match e.node() {
        Node::Add(ts) => Op::Add(ts.iter().map(|t| compile(t, slots, env)).collect::<Result<_, _>>()?),
        Node::Mul(fs) => Op::Mul(fs.iter().map(|t| compile(t, slots, env)).collect::<Result<_, _>>()?),
        Node::Pow(b, p) => match p.is_integer().then(|| p.to_integer().to_i32()).flatten() {
            Some(k) => Op::Powi(boxed(b)?, k),
            None => Op::Powf(boxed(b)?, p.to_f64().unwrap_or(f64::NAN)),
        },
        Node::Fn(Func::Sin, a) => Op::Sin(boxed(a)?),
        Node::Fn(Func::Cos, a) => Op::Cos(boxed(a)?),
        Node::Fn(Func::Exp, a) => Op::Exp(boxed(a)?),
        Node::Fn(Func::Ln, a) => Op::Ln(boxed(a)?),
        Node::Apply { name, .. } => return Err(EvalError::UnboundFunction(name.to_string())),
        Node::Integral { .. } => return Err(EvalError::Integral(e.to_string())),
        Node::Num(_) | Node::Sym(_) => unreachable!("handled above"),
    })
}

fn run(op: &Op, x: &[f64]) -> f64 {
    match op {
        Op::Const(c) => *c,
        Op::Slot(k) => x[*k],
        Op::Add(v) => v.iter().map(|o| run(o, x)).sum(),
        Op::Mul(v) => v.iter().map(|o| run(o, x)).product(),
        Op::Powi(b, k) => run(b, x).powi(*k),
        Op::Powf(b, q) => run(b, x).powf(*q),
        Op::Sin(a) => run(a, x).sin(),
        Op::Cos(a) => run(a, x).cos(),
        Op::Exp(a) => run(a, x).exp(),
        Op::Ln(a) => run(a, x).ln(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::parse::parse;

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    #[test]
    fn log_of_sum() {
        let env = EvalEnv::from_reals([("y", 1.0), ("z", std::f64::consts::E - 1.0)]);
        let v = eval_numeric(&p("ln(y+z)"), &env).unwrap();
        assert!((v.re - 1.0).abs() < 1e-15 && v.im == 0.0);
    }

    #[test]
    fn amplitude_by_hand() {
        let env = EvalEnv::from_reals([("R0", 2.0), ("eps", 0.1), ("t", 10.0)]);
        let v = eval_numeric(&p("R0/sqrt(1 + 3/4*R0^2*eps*t)"), &env).unwrap();
        assert!((v.re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn euler_identity() {
        let v = eval_numeric(&p("exp(i*pi)"), &EvalEnv::new()).unwrap();
        assert!((v - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn branch_and_pole_errors() {
        let env = EvalEnv::from_reals([("y", -1.0), ("z", 0.5)]);
        assert!(matches!(eval_numeric(&p("ln(y+z)"), &env), Err(EvalError::Branch(s)) if s == "ln(y + z)"));
        let env = EvalEnv::from_reals([("u", 0.0)]);
        assert!(matches!(eval_numeric(&p("1/u"), &env), Err(EvalError::Pole(_))));
        assert!(matches!(eval_numeric(&p("q"), &EvalEnv::new()), Err(EvalError::Unbound(_))));
    }

    #[test]
    fn compiled_matches_tree() {
        let e = p("-eps*z^3 - y + sqrt(y^2 + z^2)*sin(t)");
        let slots: Vec<Symbol> = ["t", "y", "z"].iter().map(|s| Arc::from(*s)).collect();
        let mut env = EvalEnv::new();
        env.set("eps", 0.05);
        let c = Compiled::new(&e, &slots, &env).unwrap();
        env.set("t", 0.3).set("y", 0.7).set("z", -1.1);
        let want = eval_numeric(&e, &env).unwrap().re;
        assert!((c.eval(&[0.3, 0.7, -1.1]) - want).abs() < 1e-14);
    }
}
