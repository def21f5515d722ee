//! Differential forms of degree 0–2 on a coordinate chart.

mod ops;
mod span;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::kernel::{self, expr, Expr, KernelError, ParseContext, Symbol};

pub use ops::{exterior_derivative, interior_product, lie_derivative, ode_to_forms, pullback, wedge};
pub use span::{annihilator, in_span, solve_symbolic, SymbolicSolve};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormError {
    #[error("coordinate `{0}` appears twice in the chart")]
    DuplicateCoordinate(String),
    #[error("operands live on different charts")]
    ChartMismatch,
    #[error("expected {expected} components, got {got}")]
    Length { expected: usize, got: usize },
    #[error("{op}: degree {degree} not supported")]
    Degree { op: &'static str, degree: usize },
    #[error("basis is degenerate at generic points (rank {rank} < {len})")]
    Degenerate { rank: usize, len: usize },
    #[error("`{text}` is not a 1-form: {reason}")]
    NotOneForm { text: String, reason: String },
    #[error("symbol `{symbol}` is not a coordinate or declared parameter")]
    ForeignSymbol { symbol: String },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Ordered coordinate names.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Chart(Arc<Vec<Symbol>>);

impl Chart {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Self, FormError> {
        let mut out: Vec<Symbol> = Vec::new();
        for n in names {
            let n = n.as_ref();
            if out.iter().any(|x| &**x == n) {
                return Err(FormError::DuplicateCoordinate(n.to_string()));
            }
            out.push(Arc::from(n));
        }
        Ok(Chart(Arc::new(out)))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[Symbol] {
        &self.0
    }

    pub fn name(&self, k: usize) -> &str {
        &self.0[k]
    }

    pub fn coord(&self, k: usize) -> Expr {
        Expr::symbol(self.0[k].clone())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.0.iter().position(|x| &**x == name)
    }
}

impl fmt::Display for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.0.iter().map(|s| &**s).collect();
        write!(f, "[{}]", names.join(", "))
    }
}

/// A form of degree 0, 1 or 2. Only strictly increasing index tuples are
/// stored and zero coefficients are dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KForm {
    chart: Chart,
    degree: usize,
    coeffs: BTreeMap<Vec<usize>, Expr>,
}

impl KForm {
    pub fn zero(chart: &Chart, degree: usize) -> Self {
        KForm {
            chart: chart.clone(),
            degree,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn scalar(chart: &Chart, f: Expr) -> Self {
        let mut w = KForm::zero(chart, 0);
        w.set(vec![], f);
        w
    }

    /// `dx_k`.
    pub fn basis(chart: &Chart, k: usize) -> Self {
        let mut w = KForm::zero(chart, 1);
        w.set(vec![k], Expr::one());
        w
    }

    /// `dx_i ∧ dx_j`, reordered to increasing indices.
    pub fn basis2(chart: &Chart, i: usize, j: usize) -> Self {
        let mut w = KForm::zero(chart, 2);
        match i.cmp(&j) {
            std::cmp::Ordering::Less => w.set(vec![i, j], Expr::one()),
            std::cmp::Ordering::Greater => w.set(vec![j, i], Expr::int(-1)),
            std::cmp::Ordering::Equal => {}
        }
        w
    }

    /// 1-form from one coefficient per coordinate.
    pub fn one_form(chart: &Chart, coeffs: Vec<Expr>) -> Result<Self, FormError> {
        if coeffs.len() != chart.dim() {
            return Err(FormError::Length {
                expected: chart.dim(),
                got: coeffs.len(),
            });
        }
        let mut w = KForm::zero(chart, 1);
        for (k, c) in coeffs.into_iter().enumerate() {
            w.set(vec![k], c);
        }
        Ok(w)
    }

    /// Parse `dy - z*dx` style text; `d<coord>` is the differential of a
    /// chart coordinate.
    pub fn parse_one_form(text: &str, chart: &Chart, ctx: &ParseContext) -> Result<Self, FormError> {
        let e = kernel::parse_with(text, ctx).map_err(KernelError::from)?;
        let diffs: Vec<String> = chart.coords().iter().map(|c| format!("d{c}")).collect();
        let mut coeffs = Vec::with_capacity(chart.dim());
        let mut rest = e.clone();
        for d in &diffs {
            let c = kernel::differentiate(&e, d);
            if diffs.iter().any(|o| c.contains_symbol(o)) {
                return Err(FormError::NotOneForm {
                    text: text.to_string(),
                    reason: format!("coefficient of {d} contains a differential"),
                });
            }
            rest = expr::sub(&rest, &expr::mul2(&c, &Expr::sym(d)));
            coeffs.push(c);
        }
        if !kernel::is_zero_exact(&rest) {
            return Err(FormError::NotOneForm {
                text: text.to_string(),
                reason: format!("term `{rest}` has no differential"),
            });
        }
        KForm::one_form(chart, coeffs)
    }

    fn set(&mut self, idx: Vec<usize>, c: Expr) {
        if c.is_zero() {
            self.coeffs.remove(&idx);
        } else {
            self.coeffs.insert(idx, c);
        }
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeff(&self, idx: &[usize]) -> Expr {
        self.coeffs.get(idx).cloned().unwrap_or_else(Expr::zero)
    }

    /// Nonzero coefficients by increasing index tuple.
    pub fn terms(&self) -> impl Iterator<Item = (&Vec<usize>, &Expr)> {
        self.coeffs.iter()
    }

    /// Dense coefficient vector of a 1-form.
    pub fn components(&self) -> Vec<Expr> {
        (0..self.chart.dim()).map(|k| self.coeff(&[k])).collect()
    }

    /// Value of a 0-form.
    pub fn function(&self) -> Expr {
        self.coeff(&[])
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// True when every coefficient is zero after clearing denominators.
    pub fn is_zero_exact(&self) -> bool {
        self.coeffs.values().all(kernel::is_zero_exact)
    }

    pub fn map_coeffs(&self, mut f: impl FnMut(&Expr) -> Expr) -> Self {
        let mut out = KForm::zero(&self.chart, self.degree);
        for (k, c) in &self.coeffs {
            out.set(k.clone(), f(c));
        }
        out
    }

    fn check_same(&self, o: &KForm) -> Result<(), FormError> {
        if self.chart != o.chart {
            return Err(FormError::ChartMismatch);
        }
        if self.degree != o.degree {
            return Err(FormError::Degree {
                op: "add",
                degree: o.degree,
            });
        }
        Ok(())
    }

    pub fn add(&self, o: &KForm) -> Result<Self, FormError> {
        self.check_same(o)?;
        let mut out = self.clone();
        for (k, c) in &o.coeffs {
            let v = expr::add2(&out.coeff(k), c);
            out.set(k.clone(), v);
        }
        Ok(out)
    }

    pub fn sub(&self, o: &KForm) -> Result<Self, FormError> {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> Self {
        self.map_coeffs(expr::neg)
    }

    /// Multiply by a function.
    pub fn scale(&self, f: &Expr) -> Self {
        self.map_coeffs(|c| expr::mul2(c, f))
    }

    /// Evaluate a 1-form on a vector.
    pub fn contract(&self, v: &[Expr]) -> Expr {
        expr::add(self.coeffs.iter().map(|(k, c)| expr::mul2(c, &v[k[0]])).collect())
    }
}

impl fmt::Display for KForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return f.write_str("0");
        }
        let mut first = true;
        for (idx, c) in &self.coeffs {
            let basis: Vec<String> = idx.iter().map(|k| format!("d{}", self.chart.name(*k))).collect();
            let basis = basis.join("∧");
            let (neg, body) = if c.has_negative_lead() && c.terms().len() == 1 {
                (true, expr::neg(c))
            } else {
                (false, c.clone())
            };
            let coeff = if body.terms().len() > 1 {
                format!("({body})")
            } else {
                body.to_string()
            };
            let term = match (basis.is_empty(), body.is_one()) {
                (true, _) => coeff,
                (false, true) => basis,
                (false, false) => format!("{coeff}*{basis}"),
            };
            match (first, neg) {
                (true, true) => write!(f, "-{term}")?,
                (true, false) => write!(f, "{term}")?,
                (false, true) => write!(f, " - {term}")?,
                (false, false) => write!(f, " + {term}")?,
            }
            first = false;
        }
        Ok(())
    }
}

/// One component per chart coordinate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VectorField {
    chart: Chart,
    comps: Vec<Expr>,
}

impl VectorField {
    pub fn new(chart: &Chart, comps: Vec<Expr>) -> Result<Self, FormError> {
        if comps.len() != chart.dim() {
            return Err(FormError::Length {
                expected: chart.dim(),
                got: comps.len(),
            });
        }
        Ok(VectorField {
            chart: chart.clone(),
            comps,
        })
    }

    pub fn zero(chart: &Chart) -> Self {
        VectorField {
            chart: chart.clone(),
            comps: vec![Expr::zero(); chart.dim()],
        }
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn components(&self) -> &[Expr] {
        &self.comps
    }

    pub fn component(&self, k: usize) -> &Expr {
        &self.comps[k]
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(Expr::is_zero)
    }

    /// Directional derivative `X f`.
    pub fn apply(&self, f: &Expr) -> Expr {
        expr::add(
            self.comps
                .iter()
                .zip(self.chart.coords())
                .filter(|(c, _)| !c.is_zero())
                .map(|(c, x)| expr::mul2(c, &kernel::differentiate(f, x)))
                .collect(),
        )
    }

    pub fn map(&self, f: impl FnMut(&Expr) -> Expr) -> Self {
        VectorField {
            chart: self.chart.clone(),
            comps: self.comps.iter().map(f).collect(),
        }
    }
}

impl fmt::Display for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .comps
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(k, c)| {
                let d = format!("d/d{}", self.chart.name(k));
                if c.is_one() {
                    d
                } else if c.terms().len() > 1 {
                    format!("({c})*{d}")
                } else {
                    format!("{c}*{d}")
                }
            })
            .collect();
        if parts.is_empty() {
            f.write_str("0")
        } else {
            f.write_str(&parts.join(" + "))
        }
    }
}

/// `dx_i/ds = F_i(x)` for a curve parameter `s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OdeSystem {
    chart: Chart,
    rhs: Vec<Expr>,
    param: Symbol,
}

impl OdeSystem {
    /// Free symbols of the right-hand side must be coordinates or listed in
    /// `parameters`.
    pub fn new(chart: &Chart, rhs: Vec<Expr>, param: &str, parameters: &[&str]) -> Result<Self, FormError> {
        if rhs.len() != chart.dim() {
            return Err(FormError::Length {
                expected: chart.dim(),
                got: rhs.len(),
            });
        }
        for f in &rhs {
            for s in f.free_symbols() {
                if chart.index_of(&s).is_none() && !parameters.contains(&&*s) && &*s != "pi" {
                    return Err(FormError::ForeignSymbol { symbol: s.to_string() });
                }
            }
        }
        Ok(OdeSystem {
            chart: chart.clone(),
            rhs,
            param: Arc::from(param),
        })
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn rhs(&self) -> &[Expr] {
        &self.rhs
    }

    pub fn param(&self) -> &str {
        &self.param
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::parse;

    #[test]
    fn parse_and_print_one_form() {
        let ch = Chart::new(&["x", "y", "z"]).unwrap();
        let ctx = ParseContext::default();
        let w = KForm::parse_one_form("dy - z*dx", &ch, &ctx).unwrap();
        assert_eq!(w.components(), vec![parse("-z").unwrap(), Expr::one(), Expr::zero()]);
        assert_eq!(w.to_string(), "-z*dx + dy");
        let again = KForm::parse_one_form(&w.to_string(), &ch, &ctx).unwrap();
        assert_eq!(again, w);
        assert!(KForm::parse_one_form("dy + 1", &ch, &ctx).is_err());
        assert!(KForm::parse_one_form("dx*dy", &ch, &ctx).is_err());
        assert!(KForm::parse_one_form("0", &ch, &ctx).unwrap().is_zero());
    }

    #[test]
    fn chart_rejects_duplicates() {
        assert!(Chart::new(&["x", "x"]).is_err());
    }

    #[test]
    fn ode_symbols_checked() {
        let ch = Chart::new(&["t", "y"]).unwrap();
        assert!(OdeSystem::new(&ch, vec![Expr::one(), parse("eps*y").unwrap()], "s", &[]).is_err());
        assert!(OdeSystem::new(&ch, vec![Expr::one(), parse("eps*y").unwrap()], "s", &["eps"]).is_ok());
    }
}
