//! Canonical expression trees.
//!
//! Every [`Expr`] is built through smart constructors that keep it in a
//! canonical form, so two expressions in the supported class that are equal
//! as functions compare equal structurally:
//!
//! * sums are flat, like terms are collected and terms are sorted;
//! * products are flat with one leading rational coefficient, equal bases
//!   are merged by adding exponents, and products over sums are expanded;
//! * positive integer powers of sums are expanded;
//! * products and powers of `sin`/`cos` are reduced to linear Fourier form
//!   (sums of `sin`/`cos` of linear combinations of angle atoms);
//! * `exp` factors are merged and `exp(c*ln(w))` becomes `w^c`.
//!
//! Symbols are treated as positive reals for the power rules
//! `(a*b)^p = a^p*b^p` and `(a^p)^q = a^(p*q)`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::number::{rational_root, Number};

/// Interned-by-value symbol name.
pub type Symbol = Arc<str>;

/// Highest positive integer power of a sum that is expanded eagerly.
const MAX_EXPAND_POWER: u32 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Node {
    Num(Number),
    Sym(Symbol),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Pow(Expr, BigRational),
    Fn(Func, Expr),
    /// Undefined function of one argument, differentiated `order` times
    /// (`Omega(x)`, `Omega'(x)`).
    Apply {
        name: Symbol,
        arg: Expr,
        order: u32,
    },
    /// Unevaluated antiderivative.
    Integral {
        integrand: Expr,
        var: Symbol,
    },
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Expr(Arc<Node>);

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl PartialOrd for Expr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Expr {
    fn cmp(&self, other: &Self) -> Ordering {
        cmp_expr(self, other)
    }
}

// ---------------------------------------------------------------------------
// ordering

fn rank(e: &Expr) -> u8 {
    match e.node() {
        Node::Num(_) => 0,
        Node::Sym(_) => 1,
        Node::Apply { .. } => 2,
        Node::Integral { .. } => 3,
        Node::Fn(..) => 4,
        Node::Add(_) => 5,
        Node::Pow(..) | Node::Mul(_) => 6,
    }
}

fn cmp_atom(a: &Expr, b: &Expr) -> Ordering {
    let r = rank(a).cmp(&rank(b));
    if r != Ordering::Equal {
        return r;
    }
    match (a.node(), b.node()) {
        (Node::Num(x), Node::Num(y)) => x.total_cmp(y),
        (Node::Sym(x), Node::Sym(y)) => x.cmp(y),
        (
            Node::Apply {
                name: n1,
                arg: a1,
                order: o1,
            },
            Node::Apply {
                name: n2,
                arg: a2,
                order: o2,
            },
        ) => n1.cmp(n2).then(o1.cmp(o2)).then_with(|| cmp_expr(a1, a2)),
        (
            Node::Integral {
                integrand: i1,
                var: v1,
            },
            Node::Integral {
                integrand: i2,
                var: v2,
            },
        ) => v1.cmp(v2).then_with(|| cmp_expr(i1, i2)),
        (Node::Fn(f1, a1), Node::Fn(f2, a2)) => f1.cmp(f2).then_with(|| cmp_expr(a1, a2)),
        (Node::Add(t1), Node::Add(t2)) => cmp_seq(t1, t2),
        _ => Ordering::Equal,
    }
}

fn cmp_factor(a: &Expr, b: &Expr) -> Ordering {
    let (ba, ea) = a.as_base_exp();
    let (bb, eb) = b.as_base_exp();
    cmp_atom(&ba, &bb).then_with(|| ea.cmp(&eb))
}

fn cmp_seq(a: &[Expr], b: &[Expr]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        let c = cmp_expr(x, y);
        if c != Ordering::Equal {
            return c;
        }
    }
    a.len().cmp(&b.len())
}

fn cmp_expr(a: &Expr, b: &Expr) -> Ordering {
    match (a.node(), b.node()) {
        (Node::Num(x), Node::Num(y)) => return x.total_cmp(y),
        (Node::Num(_), _) => return Ordering::Less,
        (_, Node::Num(_)) => return Ordering::Greater,
        _ => {}
    }
    let (ca, fa) = a.coeff_factors();
    let (cb, fb) = b.coeff_factors();
    for (x, y) in fa.iter().zip(fb.iter()) {
        let c = cmp_factor(x, y);
        if c != Ordering::Equal {
            return c;
        }
    }
    fa.len().cmp(&fb.len()).then_with(|| ca.total_cmp(&cb))
}

// ---------------------------------------------------------------------------
// accessors

impl Expr {
    fn from_node(n: Node) -> Expr {
        Expr(Arc::new(n))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn num(n: Number) -> Expr {
        Expr::from_node(Node::Num(n))
    }

    pub fn int(n: i64) -> Expr {
        Expr::num(Number::int(n))
    }

    pub fn rational(n: i64, d: i64) -> Expr {
        Expr::num(Number::ratio(n, d))
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn i() -> Expr {
        Expr::num(Number::i())
    }

    pub fn sym(name: &str) -> Expr {
        Expr::from_node(Node::Sym(Arc::from(name)))
    }

    pub fn symbol(name: Symbol) -> Expr {
        Expr::from_node(Node::Sym(name))
    }

    pub fn as_number(&self) -> Option<&Number> {
        match self.node() {
            Node::Num(n) => Some(n),
            _ => None,
        }
    }

    pub fn as_symbol(&self) -> Option<&Symbol> {
        match self.node() {
            Node::Sym(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.node(), Node::Num(n) if n.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self.node(), Node::Num(n) if n.is_one())
    }

    pub fn is_number(&self) -> bool {
        matches!(self.node(), Node::Num(_))
    }

    /// Terms of a sum (a non-sum is a single term).
    pub fn terms(&self) -> Vec<Expr> {
        match self.node() {
            Node::Add(ts) => ts.clone(),
            _ if self.is_zero() => vec![],
            _ => vec![self.clone()],
        }
    }

    /// Split a term into numeric coefficient and monomial.
    pub fn as_coeff_monomial(&self) -> (Number, Expr) {
        match self.node() {
            Node::Num(n) => (n.clone(), Expr::one()),
            Node::Mul(fs) => match fs[0].node() {
                Node::Num(c) => {
                    let rest = &fs[1..];
                    let m = if rest.len() == 1 {
                        rest[0].clone()
                    } else {
                        Expr::from_node(Node::Mul(rest.to_vec()))
                    };
                    (c.clone(), m)
                }
                _ => (Number::one(), self.clone()),
            },
            _ => (Number::one(), self.clone()),
        }
    }

    /// Coefficient and the non-numeric factors of a term.
    pub fn coeff_factors(&self) -> (Number, Vec<Expr>) {
        match self.node() {
            Node::Num(n) => (n.clone(), vec![]),
            Node::Mul(fs) => match fs[0].node() {
                Node::Num(c) => (c.clone(), fs[1..].to_vec()),
                _ => (Number::one(), fs.clone()),
            },
            _ => (Number::one(), vec![self.clone()]),
        }
    }

    /// `(base, exponent)` of a factor.
    pub fn as_base_exp(&self) -> (Expr, BigRational) {
        match self.node() {
            Node::Pow(b, e) => (b.clone(), e.clone()),
            _ => (self.clone(), BigRational::one()),
        }
    }

    /// True when the expression's leading coefficient is negative; used to
    /// fix the sign of trig arguments and printed terms.
    pub fn has_negative_lead(&self) -> bool {
        match self.node() {
            Node::Add(ts) => {
                let lead = ts.iter().find(|t| !t.is_number()).unwrap_or(&ts[0]);
                lead.as_coeff_monomial().0.leading_sign_negative()
            }
            _ => self.as_coeff_monomial().0.leading_sign_negative(),
        }
    }

    pub fn children(&self) -> Vec<Expr> {
        match self.node() {
            Node::Num(_) | Node::Sym(_) => vec![],
            Node::Add(v) | Node::Mul(v) => v.clone(),
            Node::Pow(b, _) => vec![b.clone()],
            Node::Fn(_, a) => vec![a.clone()],
            Node::Apply { arg, .. } => vec![arg.clone()],
            Node::Integral { integrand, .. } => vec![integrand.clone()],
        }
    }

    pub fn free_symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<Symbol>) {
        match self.node() {
            Node::Sym(s) => {
                out.insert(s.clone());
            }
            Node::Integral { integrand, var } => {
                integrand.collect_symbols(out);
                out.insert(var.clone());
            }
            _ => {
                for c in self.children() {
                    c.collect_symbols(out);
                }
            }
        }
    }

    pub fn contains_symbol(&self, name: &str) -> bool {
        match self.node() {
            Node::Sym(s) => &**s == name,
            Node::Integral { integrand, var } => &**var == name || integrand.contains_symbol(name),
            _ => self.children().iter().any(|c| c.contains_symbol(name)),
        }
    }

    /// Names of undefined functions applied anywhere in the expression.
    pub fn applied_functions(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Node::Apply { name, .. } = e.node() {
                out.insert(name.clone());
            }
        });
        out
    }

    pub fn visit(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        for c in self.children() {
            c.visit(f);
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(Expr::node_count).sum::<usize>()
    }

    /// Rebuild through the smart constructors after mapping every child.
    pub fn map_children(&self, f: &mut dyn FnMut(&Expr) -> Expr) -> Expr {
        match self.node() {
            Node::Num(_) | Node::Sym(_) => self.clone(),
            Node::Add(ts) => add(ts.iter().map(|t| f(t)).collect()),
            Node::Mul(fs) => mul(fs.iter().map(|t| f(t)).collect()),
            Node::Pow(b, e) => pow(&f(b), e),
            Node::Fn(func, a) => apply_func(*func, &f(a)),
            Node::Apply { name, arg, order } => apply_undefined(name.clone(), &f(arg), *order),
            Node::Integral { integrand, var } => integral(&f(integrand), var.clone()),
        }
    }
}

// ---------------------------------------------------------------------------
// constructors

/// Canonical sum.
pub fn add(terms: Vec<Expr>) -> Expr {
    let mut constant = Number::zero();
    let mut collected: BTreeMap<Expr, Number> = BTreeMap::new();
    let mut stack = terms;
    while let Some(t) = stack.pop() {
        match t.node() {
            Node::Add(ts) => stack.extend(ts.iter().cloned()),
            Node::Num(n) => constant = constant.add(n),
            _ => {
                let (c, m) = t.as_coeff_monomial();
                let entry = collected.entry(m).or_insert_with(Number::zero);
                *entry = entry.add(&c);
            }
        }
    }
    let mut out: Vec<Expr> = Vec::with_capacity(collected.len() + 1);
    if !constant.is_zero() {
        out.push(Expr::num(constant));
    }
    for (m, c) in collected {
        if !c.is_zero() {
            out.push(term_from(c, &m));
        }
    }
    out.sort();
    match out.len() {
        0 => Expr::zero(),
        1 => out.pop().unwrap(),
        _ => Expr::from_node(Node::Add(out)),
    }
}

fn term_from(c: Number, m: &Expr) -> Expr {
    if c.is_zero() {
        return Expr::zero();
    }
    if m.is_one() {
        return Expr::num(c);
    }
    if c.is_one() {
        return m.clone();
    }
    let mut fs = vec![Expr::num(c)];
    match m.node() {
        Node::Mul(ms) => fs.extend(ms.iter().cloned()),
        _ => fs.push(m.clone()),
    }
    Expr::from_node(Node::Mul(fs))
}

pub fn add2(a: &Expr, b: &Expr) -> Expr {
    add(vec![a.clone(), b.clone()])
}

pub fn sub(a: &Expr, b: &Expr) -> Expr {
    add(vec![a.clone(), neg(b)])
}

pub fn neg(a: &Expr) -> Expr {
    scale(a, &Number::int(-1))
}

/// Multiply by a constant without re-canonicalising the monomials.
pub fn scale(a: &Expr, c: &Number) -> Expr {
    if c.is_zero() {
        return Expr::zero();
    }
    if c.is_one() {
        return a.clone();
    }
    let terms: Vec<Expr> = a
        .terms()
        .into_iter()
        .map(|t| {
            let (tc, m) = t.as_coeff_monomial();
            term_from(tc.mul(c), &m)
        })
        .collect();
    match terms.len() {
        0 => Expr::zero(),
        1 => terms.into_iter().next().unwrap(),
        _ => {
            let mut terms = terms;
            terms.sort();
            Expr::from_node(Node::Add(terms))
        }
    }
}

pub fn mul2(a: &Expr, b: &Expr) -> Expr {
    mul(vec![a.clone(), b.clone()])
}

pub fn div(a: &Expr, b: &Expr) -> Expr {
    mul(vec![a.clone(), pow(b, &BigRational::from_integer((-1).into()))])
}

pub fn powi(a: &Expr, n: i64) -> Expr {
    pow(a, &BigRational::from_integer(n.into()))
}

pub fn recip(a: &Expr) -> Expr {
    powi(a, -1)
}

pub fn sqrt(a: &Expr) -> Expr {
    pow(a, &BigRational::new(1.into(), 2.into()))
}

/// `t * Π b^q` with the powers merged into `t` before any expansion, so
/// `(y+z)^-2 * (y+z)^2` cancels instead of distributing.
pub(crate) fn mul_by_powers(t: &Expr, powers: &[(Expr, BigRational)]) -> Expr {
    let mut fs = vec![t.clone()];
    for (b, q) in powers {
        fs.push(Expr::from_node(Node::Pow(b.clone(), q.clone())));
    }
    mul(fs)
}

/// Canonical product.
pub fn mul(factors: Vec<Expr>) -> Expr {
    let mut coeff = Number::one();
    let mut bases: BTreeMap<Expr, BigRational> = BTreeMap::new();
    let mut exp_args: Vec<Expr> = Vec::new();
    let mut stack = factors;
    loop {
        while let Some(f) = stack.pop() {
            match f.node() {
                Node::Num(n) => coeff = coeff.mul(n),
                Node::Mul(fs) => stack.extend(fs.iter().cloned()),
                Node::Fn(Func::Exp, a) => exp_args.push(a.clone()),
                _ => {
                    let (b, e) = f.as_base_exp();
                    let entry = bases.entry(b).or_insert_with(BigRational::zero);
                    *entry += e;
                }
            }
        }
        if coeff.is_zero() {
            return Expr::zero();
        }
        // Normalise every base; anything that does not come back atomic goes
        // round the loop again.
        let mut atoms: Vec<Expr> = Vec::new();
        for (b, e) in std::mem::take(&mut bases) {
            if e.is_zero() {
                continue;
            }
            let p = pow(&b, &e);
            match p.node() {
                Node::Num(n) => coeff = coeff.mul(n),
                Node::Mul(_) | Node::Fn(Func::Exp, _) => stack.push(p),
                _ => atoms.push(p),
            }
        }
        // Positive rational radicals sharing an exponent: a^q * b^q = (ab)^q.
        let mut radicals: BTreeMap<BigRational, Vec<usize>> = BTreeMap::new();
        for (k, a) in atoms.iter().enumerate() {
            if let Node::Pow(b, q) = a.node() {
                if let Node::Num(n) = b.node() {
                    if n.is_real() && n.re.is_positive() {
                        radicals.entry(q.clone()).or_default().push(k);
                    }
                }
            }
        }
        let mut merged: BTreeSet<usize> = BTreeSet::new();
        for (q, ks) in radicals.into_iter().filter(|(_, ks)| ks.len() > 1) {
            let mut prod = Number::one();
            for k in &ks {
                if let Node::Pow(b, _) = atoms[*k].node() {
                    if let Node::Num(n) = b.node() {
                        prod = prod.mul(n);
                    }
                }
                merged.insert(*k);
            }
            stack.push(num_pow(&prod, &q));
        }
        if !merged.is_empty() {
            atoms = atoms
                .into_iter()
                .enumerate()
                .filter(|(k, _)| !merged.contains(k))
                .map(|(_, a)| a)
                .collect();
        }
        if !exp_args.is_empty() {
            let e = exp(&add(std::mem::take(&mut exp_args)));
            match e.node() {
                Node::Fn(Func::Exp, _) => atoms.push(e),
                Node::Num(n) => coeff = coeff.mul(n),
                _ => stack.push(e),
            }
        }
        if stack.is_empty() {
            return finish_product(coeff, atoms);
        }
        // Re-insert the atoms so equal bases merge with the new material.
        stack.extend(atoms);
        if !coeff.is_one() {
            stack.push(Expr::num(coeff));
            coeff = Number::one();
        }
    }
}

fn finish_product(coeff: Number, atoms: Vec<Expr>) -> Expr {
    if coeff.is_zero() {
        return Expr::zero();
    }
    // Distribute over the first sum factor.
    if let Some(pos) = atoms.iter().position(|a| matches!(a.node(), Node::Add(_))) {
        let mut rest = atoms.clone();
        let sum = rest.remove(pos);
        rest.push(Expr::num(coeff));
        let rest = mul(rest);
        return add(sum.terms().iter().map(|t| mul2(t, &rest)).collect());
    }
    // Trigonometric products become Fourier sums.
    let mut trig: Vec<(Func, Expr)> = Vec::new();
    let mut others: Vec<Expr> = Vec::new();
    for a in atoms {
        let (b, e) = a.as_base_exp();
        if let (Node::Fn(f @ (Func::Sin | Func::Cos), arg), Some(n)) = (b.node(), positive_int(&e)) {
            for _ in 0..n {
                trig.push((*f, arg.clone()));
            }
        } else {
            others.push(a);
        }
    }
    if trig.len() >= 2 {
        let fourier = trig_product(&trig);
        others.push(Expr::num(coeff));
        return mul2(&fourier, &mul(others));
    }
    for (f, arg) in trig {
        others.push(Expr::from_node(Node::Fn(f, arg)));
    }
    others.sort_by(cmp_factor);
    if others.is_empty() {
        return Expr::num(coeff);
    }
    if others.len() == 1 && coeff.is_one() {
        return others.pop().unwrap();
    }
    let mut fs = Vec::with_capacity(others.len() + 1);
    if !coeff.is_one() {
        fs.push(Expr::num(coeff));
    }
    fs.extend(others);
    Expr::from_node(Node::Mul(fs))
}

fn positive_int(e: &BigRational) -> Option<u32> {
    if e.is_integer() && e.is_positive() {
        e.to_integer().to_u32()
    } else {
        None
    }
}

/// Product of `sin`/`cos` factors as a linear Fourier sum.
fn trig_product(factors: &[(Func, Expr)]) -> Expr {
    // Fourier terms: (func or None for the constant, argument) -> coefficient.
    let half = Number::ratio(1, 2);
    let mut acc: BTreeMap<(Option<Func>, Expr), Number> = BTreeMap::new();
    acc.insert((None, Expr::zero()), Number::one());
    for (f, b) in factors {
        let mut next: BTreeMap<(Option<Func>, Expr), Number> = BTreeMap::new();
        let mut push = |func: Func, arg: Expr, c: Number| {
            let (func, arg, c) = normalize_trig_term(func, arg, c);
            let key = match func {
                Some(func) => (Some(func), arg),
                None => (None, Expr::zero()),
            };
            let entry = next.entry(key).or_insert_with(Number::zero);
            *entry = entry.add(&c);
        };
        for ((g, a), c) in &acc {
            match g {
                None => push(*f, b.clone(), c.clone()),
                Some(g) => {
                    let ch = c.mul(&half);
                    let s = add2(a, b);
                    let d = sub(a, b);
                    match (g, f) {
                        (Func::Sin, Func::Sin) => {
                            push(Func::Cos, d, ch.clone());
                            push(Func::Cos, s, ch.neg());
                        }
                        (Func::Cos, Func::Cos) => {
                            push(Func::Cos, d, ch.clone());
                            push(Func::Cos, s, ch);
                        }
                        (Func::Sin, Func::Cos) => {
                            push(Func::Sin, s, ch.clone());
                            push(Func::Sin, d, ch);
                        }
                        (Func::Cos, Func::Sin) => {
                            push(Func::Sin, s, ch.clone());
                            push(Func::Sin, d, ch.neg());
                        }
                        _ => unreachable!("only sin/cos reach trig_product"),
                    }
                }
            }
        }
        acc = next;
    }
    add(acc
        .into_iter()
        .map(|((f, a), c)| match f {
            None => Expr::num(c),
            Some(f) => scale(&Expr::from_node(Node::Fn(f, a)), &c),
        })
        .collect())
}

/// Apply `sin(-a) = -sin(a)`, `cos(-a) = cos(a)`, `sin(0) = 0`, `cos(0) = 1`.
/// Returns `None` as function when the term collapsed to a constant.
fn normalize_trig_term(f: Func, arg: Expr, c: Number) -> (Option<Func>, Expr, Number) {
    if arg.is_zero() {
        return match f {
            Func::Sin => (None, arg, Number::zero()),
            _ => (None, arg, c),
        };
    }
    if arg.has_negative_lead() {
        let arg = neg(&arg);
        return match f {
            Func::Sin => (Some(f), arg, c.neg()),
            _ => (Some(f), arg, c),
        };
    }
    (Some(f), arg, c)
}

/// Canonical power with a rational exponent.
pub fn pow(base: &Expr, e: &BigRational) -> Expr {
    if e.is_zero() {
        return Expr::one();
    }
    if e.is_one() {
        return base.clone();
    }
    match base.node() {
        Node::Num(c) => num_pow(c, e),
        Node::Pow(b, e1) => pow(b, &(e1 * e)),
        Node::Mul(fs) => mul(fs.iter().map(|f| pow(f, e)).collect()),
        Node::Fn(Func::Exp, a) => exp(&scale(a, &Number::real(e.clone()))),
        Node::Fn(f @ (Func::Sin | Func::Cos), arg) if positive_int(e).is_some() => {
            let n = positive_int(e).unwrap() as usize;
            trig_product(&vec![(*f, arg.clone()); n])
        }
        Node::Add(ts) => {
            if let Some(n) = positive_int(e).filter(|n| *n <= MAX_EXPAND_POWER) {
                let mut acc = base.clone();
                for _ in 1..n {
                    let mut out = Vec::new();
                    for a in acc.terms() {
                        for b in ts {
                            out.push(mul2(&a, b));
                        }
                    }
                    acc = add(out);
                }
                return acc;
            }
            // Integer powers are scaled by the first symbolic term; other
            // powers by the constant term when there is one, so roots read
            // `sqrt(1 + ...)`.
            let lead = if e.is_integer() {
                ts.iter().find(|t| !t.is_number()).unwrap_or(&ts[0])
            } else {
                ts.iter().find(|t| t.is_number()).unwrap_or(&ts[0])
            };
            let (c, _) = lead.as_coeff_monomial();
            let content = if e.is_integer() {
                c
            } else if c.is_real() {
                Number::real(c.re.abs())
            } else {
                Number::one()
            };
            if content.is_one() {
                return Expr::from_node(Node::Pow(base.clone(), e.clone()));
            }
            let inv = content.inv().expect("leading coefficient is nonzero");
            let normalized = scale(base, &inv);
            mul(vec![
                num_pow(&content, e),
                Expr::from_node(Node::Pow(normalized, e.clone())),
            ])
        }
        _ => Expr::from_node(Node::Pow(base.clone(), e.clone())),
    }
}

fn num_pow(c: &Number, e: &BigRational) -> Expr {
    if e.is_integer() {
        return match c.powi(&e.to_integer()) {
            Some(n) => Expr::num(n),
            None => Expr::from_node(Node::Pow(Expr::num(c.clone()), e.clone())),
        };
    }
    if c.is_zero() && e.is_positive() {
        return Expr::zero();
    }
    if !c.is_real() || c.is_zero() {
        return Expr::from_node(Node::Pow(Expr::num(c.clone()), e.clone()));
    }
    let q = e.denom().to_u32().unwrap_or(0);
    let p = e.numer().clone();
    if c.re.is_negative() {
        // Only square roots of negatives are resolved: (-a)^(k/2) = i^k a^(k/2).
        if q == 2 {
            let i_pow = Number::i().powi(&p).expect("i is nonzero");
            let pos = num_pow(&Number::real(-c.re.clone()), e);
            return mul2(&Expr::num(i_pow), &pos);
        }
        return Expr::from_node(Node::Pow(Expr::num(c.clone()), e.clone()));
    }
    if q > 0 {
        if let Some(root) = rational_root(&c.re, q) {
            return num_pow(&Number::real(root), &BigRational::from_integer(p));
        }
    }
    // Split off the integer part of the exponent: c^(p/q) = c^k * c^(r/q).
    let k = e.floor();
    let frac = e - &k;
    let atom = Expr::from_node(Node::Pow(Expr::num(c.clone()), frac));
    if k.is_zero() {
        atom
    } else {
        let ki = k.to_integer();
        let whole = c.powi(&ki).expect("positive base");
        mul2(&Expr::num(whole), &atom)
    }
}

pub fn apply_func(f: Func, a: &Expr) -> Expr {
    match f {
        Func::Sin => sin(a),
        Func::Cos => cos(a),
        Func::Exp => exp(a),
        Func::Ln => ln(a),
    }
}

pub fn sin(a: &Expr) -> Expr {
    match normalize_trig_term(Func::Sin, a.clone(), Number::one()) {
        (None, _, c) => Expr::num(c),
        (Some(f), arg, c) => scale(&Expr::from_node(Node::Fn(f, arg)), &c),
    }
}

pub fn cos(a: &Expr) -> Expr {
    match normalize_trig_term(Func::Cos, a.clone(), Number::one()) {
        (None, _, c) => Expr::num(c),
        (Some(f), arg, c) => scale(&Expr::from_node(Node::Fn(f, arg)), &c),
    }
}

pub fn exp(a: &Expr) -> Expr {
    if a.is_zero() {
        return Expr::one();
    }
    // Pull rational multiples of logarithms out as powers.
    let mut powers = Vec::new();
    let mut rest = Vec::new();
    for t in a.terms() {
        let (c, m) = t.as_coeff_monomial();
        match (m.node(), c.is_real()) {
            (Node::Fn(Func::Ln, w), true) => powers.push(pow(w, &c.re)),
            _ => rest.push(t),
        }
    }
    if powers.is_empty() {
        return Expr::from_node(Node::Fn(Func::Exp, a.clone()));
    }
    let rest = add(rest);
    if !rest.is_zero() {
        powers.push(Expr::from_node(Node::Fn(Func::Exp, rest)));
    }
    mul(powers)
}

pub fn ln(a: &Expr) -> Expr {
    if a.is_one() {
        return Expr::zero();
    }
    if let Node::Fn(Func::Exp, inner) = a.node() {
        return inner.clone();
    }
    Expr::from_node(Node::Fn(Func::Ln, a.clone()))
}

pub fn apply_undefined(name: Symbol, arg: &Expr, order: u32) -> Expr {
    Expr::from_node(Node::Apply {
        name,
        arg: arg.clone(),
        order,
    })
}

pub fn integral(integrand: &Expr, var: Symbol) -> Expr {
    if integrand.is_zero() {
        return Expr::zero();
    }
    Expr::from_node(Node::Integral {
        integrand: integrand.clone(),
        var,
    })
}

/// Rebuild bottom-up through the smart constructors. Constructors keep
/// expressions canonical already, so this is idempotent.
pub fn simplify(e: &Expr) -> Expr {
    e.map_children(&mut |c| simplify(c))
}

impl std::ops::Add for &Expr {
    type Output = Expr;
    fn add(self, o: &Expr) -> Expr {
        add2(self, o)
    }
}

impl std::ops::Sub for &Expr {
    type Output = Expr;
    fn sub(self, o: &Expr) -> Expr {
        sub(self, o)
    }
}

impl std::ops::Mul for &Expr {
    type Output = Expr;
    fn mul(self, o: &Expr) -> Expr {
        mul2(self, o)
    }
}

impl std::ops::Div for &Expr {
    type Output = Expr;
    fn div(self, o: &Expr) -> Expr {
        div(self, o)
    }
}

impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        neg(self)
    }
}

impl From<i64> for Expr {
    fn from(n: i64) -> Expr {
        Expr::int(n)
    }
}

pub(crate) fn big(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(n: &str) -> Expr {
        Expr::sym(n)
    }

    #[test]
    fn x_plus_zero_is_x() {
        assert_eq!(add2(&s("x"), &Expr::zero()), s("x"));
    }

    #[test]
    fn like_terms_collect() {
        let e = add(vec![s("x"), s("y"), s("x")]);
        assert_eq!(e, add(vec![scale(&s("x"), &Number::int(2)), s("y")]));
        assert_eq!(sub(&e, &e), Expr::zero());
    }

    #[test]
    fn sum_times_reciprocal_cancels() {
        let yz = add2(&s("y"), &s("z"));
        assert_eq!(mul2(&yz, &recip(&yz)), Expr::one());
    }

    #[test]
    fn binomial_expansion() {
        let e = powi(&add2(&Expr::one(), &s("eps")), 2);
        let expect = add(vec![
            Expr::one(),
            scale(&s("eps"), &Number::int(2)),
            powi(&s("eps"), 2),
        ]);
        assert_eq!(e, expect);
    }

    #[test]
    fn pythagoras_is_canonical() {
        let p = s("p");
        let e = add2(&powi(&sin(&p), 2), &powi(&cos(&p), 2));
        assert_eq!(e, Expr::one());
    }

    #[test]
    fn sin_fourth_power() {
        let p = s("p");
        let two_p = scale(&p, &Number::int(2));
        let four_p = scale(&p, &Number::int(4));
        let expect = add(vec![
            Expr::rational(3, 8),
            scale(&cos(&two_p), &Number::ratio(-1, 2)),
            scale(&cos(&four_p), &Number::ratio(1, 8)),
        ]);
        assert_eq!(powi(&sin(&p), 4), expect);
    }

    #[test]
    fn odd_even_trig() {
        let x = s("x");
        assert_eq!(sin(&neg(&x)), neg(&sin(&x)));
        assert_eq!(cos(&neg(&x)), cos(&x));
        assert_eq!(sin(&Expr::zero()), Expr::zero());
        assert_eq!(cos(&Expr::zero()), Expr::one());
    }

    #[test]
    fn exp_log_rules() {
        let w = add2(&s("y"), &s("z"));
        let x = s("x");
        let e = exp(&add2(&x, &ln(&w)));
        assert_eq!(e, mul2(&w, &exp(&x)));
        assert_eq!(mul2(&exp(&x), &exp(&neg(&x))), Expr::one());
        assert_eq!(ln(&exp(&x)), x);
    }

    #[test]
    fn numeric_roots() {
        assert_eq!(sqrt(&Expr::int(4)), Expr::int(2));
        assert_eq!(sqrt(&Expr::int(-4)), mul2(&Expr::int(2), &Expr::i()));
        let r2 = sqrt(&Expr::int(2));
        assert_eq!(mul2(&r2, &r2), Expr::int(2));
    }

    #[test]
    fn power_of_product_distributes() {
        let e = sqrt(&div(&s("v"), &s("u")));
        assert_eq!(e, mul2(&sqrt(&s("v")), &pow(&s("u"), &BigRational::new((-1).into(), 2.into()))));
    }

    #[test]
    fn negative_sum_base_pulls_sign() {
        let a = recip(&add2(&neg(&s("y")), &neg(&s("z"))));
        let b = neg(&recip(&add2(&s("y"), &s("z"))));
        assert_eq!(a, b);
    }
}
