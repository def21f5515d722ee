//! Deterministic infix printer. Its output parses back to the same
//! canonical expression.

use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::expr::{Expr, Node};
use super::number::Number;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Prec {
    Sum = 1,
    Product = 2,
    Unary = 3,
    Power = 4,
    Atom = 5,
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self).0)
    }
}

fn wrap(s: (String, Prec), min: Prec) -> String {
    if s.1 < min {
        format!("({})", s.0)
    } else {
        s.0
    }
}

fn number_prec(n: &Number) -> Prec {
    if !n.is_real() && !n.re.is_zero() {
        Prec::Sum
    } else if n.leading_sign_negative() {
        Prec::Unary
    } else if !n.is_real() || !n.re.is_integer() {
        Prec::Product
    } else {
        Prec::Atom
    }
}

fn render(e: &Expr) -> (String, Prec) {
    match e.node() {
        Node::Num(n) => (n.to_string(), number_prec(n)),
        Node::Sym(s) => (s.to_string(), Prec::Atom),
        Node::Add(ts) => {
            let mut out = String::new();
            for (k, t) in ts.iter().enumerate() {
                if k == 0 {
                    out.push_str(&render_term(t));
                } else if t.as_coeff_monomial().0.leading_sign_negative()
                    && t.as_coeff_monomial().0.is_real()
                {
                    out.push_str(" - ");
                    out.push_str(&render_term(&super::expr::neg(t)));
                } else {
                    out.push_str(" + ");
                    out.push_str(&render_term(t));
                }
            }
            (out, Prec::Sum)
        }
        Node::Mul(_) => render_product(e),
        Node::Pow(b, p) => render_power(b, p),
        Node::Fn(func, a) => (format!("{}({})", func.name(), render(a).0), Prec::Atom),
        Node::Apply { name, arg, order } => (
            format!("{}{}({})", name, "'".repeat(*order as usize), render(arg).0),
            Prec::Atom,
        ),
        Node::Integral { integrand, var } => {
            (format!("int({}, {})", render(integrand).0, var), Prec::Atom)
        }
    }
}

fn render_term(t: &Expr) -> String {
    let r = render(t);
    if r.1 == Prec::Sum {
        format!("({})", r.0)
    } else {
        r.0
    }
}

fn render_power(b: &Expr, p: &BigRational) -> (String, Prec) {
    let half = BigRational::new(1.into(), 2.into());
    if *p == half {
        return (format!("sqrt({})", render(b).0), Prec::Atom);
    }
    if p.is_negative() {
        return (
            format!("1/{}", render_factor_positive(b, &-p.clone())),
            Prec::Product,
        );
    }
    let base = wrap(render(b), Prec::Atom);
    let exp = if p.is_integer() && !p.is_negative() {
        p.to_string()
    } else {
        format!("({p})")
    };
    (format!("{base}^{exp}"), Prec::Power)
}

fn render_factor_positive(b: &Expr, p: &BigRational) -> String {
    if p.is_one() {
        wrap(render(b), Prec::Power)
    } else {
        let half = BigRational::new(1.into(), 2.into());
        if *p == half {
            format!("sqrt({})", render(b).0)
        } else {
            let base = wrap(render(b), Prec::Atom);
            if p.is_integer() {
                format!("{base}^{p}")
            } else {
                format!("{base}^({p})")
            }
        }
    }
}

fn render_product(e: &Expr) -> (String, Prec) {
    let (c, factors) = e.coeff_factors();
    let mut numer: Vec<String> = Vec::new();
    let mut denom: Vec<String> = Vec::new();
    // Sums get a division each: `/((a + b)*(c + d))` would parse back expanded.
    let mut denom_sums: Vec<String> = Vec::new();
    for f in &factors {
        let (b, p) = f.as_base_exp();
        if p.is_negative() {
            let r = render_factor_positive(&b, &-p);
            if matches!(b.node(), Node::Add(_)) {
                denom_sums.push(r);
            } else {
                denom.push(r);
            }
        } else {
            numer.push(render_factor_positive(&b, &p));
        }
    }
    let negative = c.is_real() && c.re.is_negative();
    let c_abs = if negative { c.neg() } else { c.clone() };
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    let coeff_str = if c_abs.is_real() {
        c_abs.to_string()
    } else if c_abs.re.is_zero() {
        c_abs.to_string()
    } else {
        format!("({c_abs})")
    };
    let mut parts: Vec<String> = Vec::new();
    if !c_abs.is_one() || numer.is_empty() {
        parts.push(coeff_str);
    }
    parts.extend(numer);
    out.push_str(&parts.join("*"));
    if !denom.is_empty() {
        out.push('/');
        if denom.len() == 1 {
            out.push_str(&denom[0]);
        } else {
            out.push('(');
            out.push_str(&denom.join("*"));
            out.push(')');
        }
    }
    for d in denom_sums {
        out.push('/');
        out.push_str(&d);
    }
    let prec = if negative { Prec::Unary } else { Prec::Product };
    (out, prec)
}
