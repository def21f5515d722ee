//! Differentiation, restricted antiderivatives and power-series truncation.

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::expr::{self, big, Expr, Func, Node};
use super::number::Number;
use super::KernelError;

/// Exact partial derivative with respect to `var`.
pub fn differentiate(e: &Expr, var: &str) -> Expr {
    if !e.contains_symbol(var) {
        return Expr::zero();
    }
    match e.node() {
        Node::Num(_) => Expr::zero(),
        Node::Sym(s) => {
            if &**s == var {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Node::Add(ts) => expr::add(ts.iter().map(|t| differentiate(t, var)).collect()),
        Node::Mul(fs) => {
            let mut out = Vec::new();
            for k in 0..fs.len() {
                let dk = differentiate(&fs[k], var);
                if dk.is_zero() {
                    continue;
                }
                let mut prod: Vec<Expr> = fs
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != k)
                    .map(|(_, f)| f.clone())
                    .collect();
                prod.push(dk);
                out.push(expr::mul(prod));
            }
            expr::add(out)
        }
        Node::Pow(b, p) => {
            let db = differentiate(b, var);
            let lower = expr::pow(b, &(p - BigRational::one()));
            expr::mul(vec![Expr::num(Number::real(p.clone())), lower, db])
        }
        Node::Fn(f, a) => {
            let da = differentiate(a, var);
            let outer = match f {
                Func::Sin => expr::cos(a),
                Func::Cos => expr::neg(&expr::sin(a)),
                Func::Exp => e.clone(),
                Func::Ln => expr::recip(a),
            };
            expr::mul2(&outer, &da)
        }
        Node::Apply { name, arg, order } => {
            let da = differentiate(arg, var);
            expr::mul2(&expr::apply_undefined(name.clone(), arg, order + 1), &da)
        }
        Node::Integral { integrand, var: v } => {
            if &**v == var {
                integrand.clone()
            } else {
                expr::integral(&differentiate(integrand, var), v.clone())
            }
        }
    }
}

/// Antiderivative with zero integration constant for sums of
/// `c * var^k * {sin, cos, exp}(a*var + b)` and plain powers of `var`.
pub fn antiderivative(e: &Expr, var: &str) -> Result<Expr, KernelError> {
    let mut out = Vec::new();
    for t in e.terms() {
        out.push(antiderivative_term(&t, var)?);
    }
    Ok(expr::add(out))
}

fn unsupported(t: &Expr, var: &str) -> KernelError {
    KernelError::Unsupported {
        op: "antiderivative",
        term: format!("{t} (with respect to {var})"),
    }
}

fn antiderivative_term(t: &Expr, var: &str) -> Result<Expr, KernelError> {
    let x = Expr::sym(var);
    if !t.contains_symbol(var) {
        return Ok(expr::mul2(t, &x));
    }
    let (c, factors) = t.coeff_factors();
    let mut constant = vec![Expr::num(c)];
    let mut power = BigRational::zero();
    let mut kernel: Option<(Func, Expr)> = None;
    for f in factors {
        if !f.contains_symbol(var) {
            constant.push(f);
            continue;
        }
        let (b, p) = f.as_base_exp();
        match b.node() {
            Node::Sym(s) if &**s == var => power += p,
            Node::Fn(func @ (Func::Sin | Func::Cos | Func::Exp), arg) if p.is_one() && kernel.is_none() => {
                kernel = Some((*func, arg.clone()))
            }
            _ => return Err(unsupported(t, var)),
        }
    }
    let constant = expr::mul(constant);
    let body = match kernel {
        None => {
            if power == -BigRational::one() {
                expr::ln(&x)
            } else {
                let q = &power + BigRational::one();
                expr::scale(&expr::pow(&x, &q), &Number::real(q.recip()))
            }
        }
        Some((func, arg)) => {
            let k = power
                .is_integer()
                .then(|| power.to_integer().to_u32())
                .flatten()
                .ok_or_else(|| unsupported(t, var))?;
            let slope = differentiate(&arg, var);
            if slope.contains_symbol(var) || slope.is_zero() {
                return Err(unsupported(t, var));
            }
            by_parts(func, &arg, &slope, &x, k)
        }
    };
    Ok(expr::mul2(&constant, &body))
}

/// `∫ x^k g(arg) dx` for `g` in {sin, cos, exp} and `arg` linear in `x`.
fn by_parts(func: Func, arg: &Expr, slope: &Expr, x: &Expr, k: u32) -> Expr {
    let inv = expr::recip(slope);
    // First antiderivative of g(arg).
    let g1 = match func {
        Func::Sin => expr::neg(&expr::cos(arg)),
        Func::Cos => expr::sin(arg),
        Func::Exp => expr::exp(arg),
        Func::Ln => unreachable!(),
    };
    let g1 = expr::mul2(&g1, &inv);
    if k == 0 {
        return g1;
    }
    let (next_func, sign) = match func {
        Func::Sin => (Func::Cos, -1),
        Func::Cos => (Func::Sin, 1),
        Func::Exp => (Func::Exp, 1),
        Func::Ln => unreachable!(),
    };
    // ∫ x^k g = x^k G1 - k ∫ x^(k-1) G1, with G1 = sign * next(arg) / slope.
    let rest = by_parts(next_func, arg, slope, x, k - 1);
    let rest = expr::mul(vec![Expr::int(sign * k as i64), inv, rest]);
    expr::sub(&expr::mul2(&expr::powi(x, k as i64), &g1), &rest)
}

/// Drop every monomial whose degree in `eps` exceeds `order`.
pub fn series_truncate(e: &Expr, eps: &str, order: u32) -> Result<Expr, KernelError> {
    let mut keep = Vec::new();
    for t in e.terms() {
        let (_, factors) = t.coeff_factors();
        let mut degree = BigRational::zero();
        for f in &factors {
            let (b, p) = f.as_base_exp();
            if b.as_symbol().is_some_and(|s| &**s == eps) {
                degree += p;
            } else if f.contains_symbol(eps) {
                return Err(KernelError::NotPolynomial {
                    var: eps.to_string(),
                    term: t.to_string(),
                });
            }
        }
        if !degree.is_integer() || degree.is_negative() {
            return Err(KernelError::NotPolynomial {
                var: eps.to_string(),
                term: t.to_string(),
            });
        }
        if degree <= big(order as i64) {
            keep.push(t);
        }
    }
    Ok(expr::add(keep))
}
