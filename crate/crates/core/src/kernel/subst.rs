//! Simultaneous substitution.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::calculus::{antiderivative, differentiate};
use super::expr::{self, Expr, Node, Symbol};
use super::KernelError;

/// Symbol → expression map. A symbol can be bound at most once.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Binding {
    map: BTreeMap<Symbol, Expr>,
}

impl Binding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Expr) -> Result<(), KernelError> {
        if self.map.contains_key(name) {
            return Err(KernelError::DuplicateBinding(name.to_string()));
        }
        self.map.insert(Arc::from(name), value);
        Ok(())
    }

    pub fn from_pairs<'a, I>(pairs: I) -> Result<Self, KernelError>
    where
        I: IntoIterator<Item = (&'a str, Expr)>,
    {
        let mut b = Binding::new();
        for (k, v) in pairs {
            b.insert(k, v)?;
        }
        Ok(b)
    }

    pub fn get(&self, name: &str) -> Option<&Expr> {
        self.map.get(name)
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Symbol, &Expr)> {
        self.map.iter()
    }

    fn without(&self, name: &str) -> Binding {
        let mut b = self.clone();
        b.map.remove(name);
        b
    }
}

/// Replace every bound symbol at once, then canonicalise.
pub fn substitute(e: &Expr, b: &Binding) -> Expr {
    if b.is_empty() {
        return e.clone();
    }
    match e.node() {
        Node::Sym(s) => b.get(s).cloned().unwrap_or_else(|| e.clone()),
        // The integration variable is bound inside the integral.
        Node::Integral { integrand, var } => {
            expr::integral(&substitute(integrand, &b.without(var)), var.clone())
        }
        _ => e.map_children(&mut |c| substitute(c, b)),
    }
}

/// A one-argument function given by `param ↦ body`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lambda {
    pub param: Symbol,
    pub body: Expr,
}

impl Lambda {
    pub fn new(param: &str, body: Expr) -> Self {
        Lambda {
            param: Arc::from(param),
            body,
        }
    }

    /// `order`-th derivative evaluated at `arg`.
    pub fn apply(&self, arg: &Expr, order: u32) -> Expr {
        let mut body = self.body.clone();
        for _ in 0..order {
            body = differentiate(&body, &self.param);
        }
        let mut b = Binding::new();
        b.insert(&self.param, arg.clone()).expect("single binding");
        substitute(&body, &b)
    }
}

/// Replace applications of the undefined function `name` by `f`.
pub fn substitute_function(e: &Expr, name: &str, f: &Lambda) -> Expr {
    match e.node() {
        Node::Apply {
            name: n,
            arg,
            order,
        } if &**n == name => f.apply(&substitute_function(arg, name, f), *order),
        _ => e.map_children(&mut |c| substitute_function(c, name, f)),
    }
}

/// Evaluate unevaluated integrals whose integrand is in the supported class.
pub fn evaluate_integrals(e: &Expr) -> Expr {
    match e.node() {
        Node::Integral { integrand, var } => {
            let inner = evaluate_integrals(integrand);
            antiderivative(&inner, var).unwrap_or_else(|_| expr::integral(&inner, var.clone()))
        }
        _ => e.map_children(&mut evaluate_integrals),
    }
}
