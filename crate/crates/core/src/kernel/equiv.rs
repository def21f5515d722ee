//! Zero testing and equivalence.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::eval::{eval_numeric, EvalEnv};
use super::expr::{self, Expr};
use super::parse::parse;
use super::subst::Lambda;
use super::KernelError;

/// Sampling interval for every free symbol in the numeric fallback.
pub const SAMPLE_INTERVAL: (f64, f64) = (0.5, 1.5);
pub const SAMPLE_POINTS: usize = 64;
pub const SAMPLE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equivalence {
    /// Canonical forms agree after clearing denominators.
    Exact,
    /// Agreement at every random sample point only.
    Probabilistic,
    Different,
}

impl Equivalence {
    pub fn holds(self) -> bool {
        !matches!(self, Equivalence::Different)
    }
}

/// Multiply `e` by the common denominator of its terms. Returns
/// `(numerator, denominator)` with `e = numerator / denominator`.
pub fn together(e: &Expr) -> (Expr, Expr) {
    let (numer, powers) = together_powers(e);
    let d = expr::mul(powers.iter().map(|(b, p)| expr::pow(b, p)).collect());
    (numer, d)
}

/// As [`together`], with the denominator as a list of `(base, power)`.
fn together_powers(e: &Expr) -> (Expr, Vec<(Expr, BigRational)>) {
    let mut numer = e.clone();
    let mut total: BTreeMap<Expr, BigRational> = BTreeMap::new();
    // Each pass removes the negative powers present at top level; products
    // of the multiplier with other terms cannot reintroduce them.
    for _ in 0..8 {
        let mut need: BTreeMap<Expr, BigRational> = BTreeMap::new();
        for t in numer.terms() {
            let (_, fs) = t.coeff_factors();
            for f in fs {
                let (b, p) = f.as_base_exp();
                if p.is_negative() && !b.is_number() {
                    let q = -p;
                    let cur = need.entry(b).or_insert_with(BigRational::zero);
                    if q > *cur {
                        *cur = q;
                    }
                }
            }
        }
        if need.is_empty() {
            break;
        }
        let powers: Vec<(Expr, BigRational)> = need.into_iter().collect();
        numer = expr::add(numer.terms().iter().map(|t| expr::mul_by_powers(t, &powers)).collect());
        for (b, q) in powers {
            *total.entry(b).or_insert_with(BigRational::zero) += q;
        }
    }
    (numer, total.into_iter().collect())
}

type Monomial = BTreeMap<Expr, BigRational>;

fn monomial(t: &Expr) -> (super::Number, Monomial) {
    let (c, fs) = t.coeff_factors();
    let mut m = Monomial::new();
    for f in fs {
        let (b, p) = f.as_base_exp();
        *m.entry(b).or_insert_with(BigRational::zero) += p;
    }
    (c, m)
}

/// Graded order on monomials, ties broken by the base ordering.
fn leading(e: &Expr) -> Option<(super::Number, Monomial)> {
    e.terms().iter().map(monomial).max_by(|(_, a), (_, b)| {
        let da: BigRational = a.values().sum();
        let db: BigRational = b.values().sum();
        da.cmp(&db).then_with(|| lex(a, b))
    })
}

/// Lexicographic on exponents, largest base first.
fn lex(a: &Monomial, b: &Monomial) -> std::cmp::Ordering {
    let zero = BigRational::zero();
    let mut keys: Vec<&Expr> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    for k in keys.into_iter().rev() {
        let o = a.get(k).unwrap_or(&zero).cmp(b.get(k).unwrap_or(&zero));
        if o.is_ne() {
            return o;
        }
    }
    std::cmp::Ordering::Equal
}

/// Exact quotient `n / b` when `b` divides `n` as a polynomial in the
/// atoms of both; `None` otherwise.
fn divide_exact(n: &Expr, b: &Expr) -> Option<Expr> {
    let (bc, bm) = leading(b)?;
    let mut r = n.clone();
    let mut q = Vec::new();
    for _ in 0..256 {
        let Some((rc, mut rm)) = leading(&r) else {
            return Some(expr::add(q));
        };
        for (base, p) in &bm {
            *rm.entry(base.clone()).or_insert_with(BigRational::zero) -= p;
        }
        if rm.values().any(|p| p.is_negative()) {
            return None;
        }
        let mut fs = vec![Expr::num(rc.div(&bc)?)];
        for (base, p) in rm {
            if !p.is_zero() {
                fs.push(expr::pow(&base, &p));
            }
        }
        let m = expr::mul(fs);
        r = expr::sub(&r, &expr::mul2(&m, b));
        q.push(m);
    }
    None
}

/// `b = c * p` with `p` having leading coefficient one.
fn primitive(b: &Expr) -> (super::Number, Expr) {
    match leading(b) {
        Some((c, _)) if !c.is_one() => {
            let inv = c.inv().expect("nonzero leading coefficient");
            (c, expr::mul2(b, &Expr::num(inv)))
        }
        _ => (super::Number::one(), b.clone()),
    }
}

fn is_sum(e: &Expr) -> bool {
    matches!(e.node(), super::Node::Add(_))
}

/// Split integer-power sum bases of a denominator into primitive factors
/// found by dividing them by one another. Returns the constant factor and
/// the refined `(base, power)` list.
fn refine(powers: Vec<(Expr, BigRational)>) -> (super::Number, Vec<(Expr, BigRational)>) {
    let mut scale = super::Number::one();
    let mut den: BTreeMap<Expr, BigRational> = BTreeMap::new();
    let push = |b: Expr, q: BigRational, scale: &mut super::Number, den: &mut BTreeMap<Expr, BigRational>| {
        if q.is_integer() && is_sum(&b) {
            let (c, p) = primitive(&b);
            *scale = scale.mul(&c.powi(q.numer()).expect("nonzero base"));
            *den.entry(p).or_insert_with(BigRational::zero) += q;
        } else {
            *den.entry(b).or_insert_with(BigRational::zero) += q;
        }
    };
    for (b, q) in powers {
        push(b, q, &mut scale, &mut den);
    }
    for _ in 0..16 {
        let sums: Vec<(Expr, BigRational)> = den
            .iter()
            .filter(|(b, q)| q.is_integer() && is_sum(b))
            .map(|(b, q)| (b.clone(), q.clone()))
            .collect();
        let mut split = None;
        'outer: for (bi, qi) in &sums {
            for (bj, _) in &sums {
                if bi == bj {
                    continue;
                }
                if let Some(k) = divide_exact(bi, bj) {
                    split = Some((bi.clone(), qi.clone(), bj.clone(), k));
                    break 'outer;
                }
            }
        }
        let Some((bi, qi, bj, k)) = split else { break };
        den.remove(&bi);
        push(bj, qi.clone(), &mut scale, &mut den);
        match k.node() {
            super::Node::Num(c) => scale = scale.mul(&c.powi(qi.numer()).expect("nonzero quotient")),
            _ => push(k, qi, &mut scale, &mut den),
        }
    }
    (scale, den.into_iter().filter(|(_, q)| !q.is_zero()).collect())
}

/// Put the sum over a common denominator, divide out denominator factors
/// that divide the numerator exactly and distribute again. This turns
/// `1 - z/(y+z)` into `y/(y+z)`.
pub fn cancel(e: &Expr) -> Expr {
    let (mut n, powers) = together_powers(e);
    if powers.is_empty() {
        return e.clone();
    }
    let (scale, mut den) = refine(powers);
    let one = BigRational::one();
    loop {
        let mut progress = false;
        for (b, q) in den.iter_mut() {
            if is_sum(b) && *q >= one {
                if let Some(quot) = divide_exact(&n, b) {
                    n = quot;
                    *q -= &one;
                    progress = true;
                }
            }
        }
        if !progress {
            break;
        }
    }
    let left: Vec<(Expr, BigRational)> = den.into_iter().filter(|(_, q)| !q.is_zero()).map(|(b, q)| (b, -q)).collect();
    let inv = Expr::num(scale.inv().expect("nonzero denominator constant"));
    expr::add(
        n.terms()
            .iter()
            .map(|t| expr::mul_by_powers(&expr::mul2(t, &inv), &left))
            .collect(),
    )
}

pub fn clear_denominators(e: &Expr) -> Expr {
    together(e).0
}

/// Exact zero test: canonical zero after clearing denominators.
pub fn is_zero_exact(e: &Expr) -> bool {
    e.is_zero() || clear_denominators(e).is_zero()
}

/// Smooth stand-in for undefined functions in the numeric fallback.
pub fn generic_test_function() -> Lambda {
    Lambda::new("s", parse("13/10 + 2/5*sin(7/10*s + 1/5)").expect("literal parses"))
}

/// Exact check first, then numeric sampling of every free symbol on
/// [`SAMPLE_INTERVAL`] with a fixed seed.
pub fn equivalent(a: &Expr, b: &Expr) -> Result<Equivalence, KernelError> {
    let diff = expr::sub(a, b);
    if is_zero_exact(&diff) {
        return Ok(Equivalence::Exact);
    }
    let mut symbols = a.free_symbols();
    symbols.extend(b.free_symbols());
    let mut env = EvalEnv::new();
    let mut functions = a.applied_functions();
    functions.extend(b.applied_functions());
    for f in functions {
        env.define(&f, generic_test_function());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut usable = 0;
    for _ in 0..SAMPLE_POINTS {
        for s in &symbols {
            env.set(s, rng.gen_range(SAMPLE_INTERVAL.0..SAMPLE_INTERVAL.1));
        }
        let (Ok(x), Ok(y)) = (eval_numeric(a, &env), eval_numeric(b, &env)) else {
            continue;
        };
        usable += 1;
        let scale = 1f64.max(x.norm()).max(y.norm());
        if (x - y).norm() >= SAMPLE_TOL * scale {
            return Ok(Equivalence::Different);
        }
    }
    if usable == 0 {
        return Err(KernelError::AllSamplesSingular(diff.to_string()));
    }
    Ok(Equivalence::Probabilistic)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    #[test]
    fn trivial_identities() {
        assert_eq!(equivalent(&p("(y+z)*(1/(y+z))"), &p("1")).unwrap(), Equivalence::Exact);
        assert_eq!(equivalent(&p("sin(ph)^2 + cos(ph)^2"), &p("1")).unwrap(), Equivalence::Exact);
        assert_eq!(
            equivalent(&p("2*sin(ph)^4"), &p("3/4 - cos(2*ph) + cos(4*ph)/4")).unwrap(),
            Equivalence::Exact
        );
    }

    #[test]
    fn rational_functions_clear() {
        let e = p("y/(y+z) + z/(y+z) - 1");
        assert!(!e.is_zero());
        assert!(is_zero_exact(&e));
        let (n, d) = together(&p("1/u + 1/v"));
        assert_eq!(n, p("u + v"));
        assert_eq!(d, p("u*v"));
    }

    #[test]
    fn cancel_divides_common_factors() {
        assert_eq!(cancel(&p("1 - z/(y+z)")), p("y/(y+z)"));
        let e = p("-y*z/(y + z)^2 - z*ln(y + z)/(y + z) - z^2/(y + z)^2");
        assert_eq!(cancel(&e), p("-z/(y+z) - z*ln(y+z)/(y+z)"));
        assert_eq!(cancel(&p("(u^2 - v^2)/(u - v)")), p("u + v"));
        assert_eq!(cancel(&p("1/(u+v) + 1/(u-v)")).to_string(), "2*u/(u - v)/(u + v)");
    }

    #[test]
    fn different_and_probabilistic() {
        assert_eq!(equivalent(&p("x"), &p("x + 1/1000")).unwrap(), Equivalence::Different);
        // Holds for positive symbols but is not rewritten.
        let r = equivalent(&p("ln(x^2)"), &p("2*ln(x)")).unwrap();
        assert_eq!(r, Equivalence::Probabilistic);
    }

    #[test]
    fn all_singular_is_error() {
        assert!(equivalent(&p("ln(-1 - x)"), &p("x")).is_err());
    }
}
