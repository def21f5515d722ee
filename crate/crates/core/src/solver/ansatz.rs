//! Search spaces for the vector field and multipliers.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kernel::{self, antiderivative, differentiate, equiv, expr, EvalEnv, Expr};

use super::{PerturbedSystem, SolverError};

/// Condition number above which sampled basis functions count as dependent.
pub const CONDITION_LIMIT: f64 = 1e8;
pub const MAX_DEPTH: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ansatz {
    /// Basis functions for the vector-field components, sorted canonically.
    pub terms: Vec<Expr>,
    /// Basis functions for the multipliers. Empty means multipliers are
    /// recovered from the solved field instead of being unknowns.
    pub multipliers: Vec<Expr>,
    /// Which components of the field may be nonzero.
    pub mask: Vec<bool>,
}

fn sorted_unique(v: Vec<Expr>) -> Vec<Expr> {
    let mut v: Vec<Expr> = v.into_iter().filter(|e| !e.is_zero()).collect();
    v.sort();
    v.dedup();
    v
}

impl Ansatz {
    pub fn new(terms: Vec<Expr>, multipliers: Vec<Expr>, mask: Vec<bool>) -> Self {
        Ansatz {
            terms: sorted_unique(terms),
            multipliers: sorted_unique(multipliers),
            mask,
        }
    }

    pub fn empty(dim: usize) -> Self {
        Ansatz::new(vec![], vec![], vec![true; dim])
    }

    pub fn unknown_count(&self, n_forms: usize) -> usize {
        let active = self.mask.iter().filter(|m| **m).count();
        active * self.terms.len() + n_forms * n_forms * self.multipliers.len()
    }

    /// Numeric linear-independence check of each basis list.
    pub fn check_independent(&self, env: &EvalEnv) -> Result<(), SolverError> {
        for list in [&self.terms, &self.multipliers] {
            let c = condition_number(list, env)?;
            if c > CONDITION_LIMIT {
                return Err(SolverError::DegenerateAnsatz { condition: c });
            }
        }
        Ok(())
    }
}

/// Condition number of the column-normalised sample matrix of `funcs`
/// evaluated at random points of [0.5, 1.5]^n.
pub fn condition_number(funcs: &[Expr], env: &EvalEnv) -> Result<f64, SolverError> {
    if funcs.len() < 2 {
        return Ok(1.0);
    }
    let mut symbols = std::collections::BTreeSet::new();
    let mut functions = std::collections::BTreeSet::new();
    for f in funcs {
        symbols.extend(f.free_symbols());
        functions.extend(f.applied_functions());
    }
    let mut env = env.clone();
    for name in functions {
        if !env.functions().any(|(n, _)| *n == name) {
            env.define(&name, equiv::generic_test_function());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xa11);
    let want = funcs.len() * 2 + 8;
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    let (lo, hi) = equiv::SAMPLE_INTERVAL;
    for _ in 0..want * 4 {
        if rows.len() == want {
            break;
        }
        for s in &symbols {
            env.set(s, rng.gen_range(lo..hi));
        }
        let vals: Result<Vec<Complex64>, _> = funcs.iter().map(|f| kernel::eval_numeric(f, &env)).collect();
        if let Ok(v) = vals {
            if v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                rows.push(v);
            }
        }
    }
    if rows.len() < funcs.len() {
        return Err(SolverError::AllSamplesSingular);
    }
    let mut m = DMatrix::from_fn(rows.len(), funcs.len(), |i, j| rows[i][j]);
    for j in 0..funcs.len() {
        let norm = m.column(j).norm();
        if norm == 0.0 {
            return Ok(f64::INFINITY);
        }
        m.column_mut(j).unscale_mut(norm);
    }
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    Ok(if min == 0.0 { f64::INFINITY } else { max / min })
}

/// Monomial of a term (numeric coefficient stripped) used for dedup.
fn key(t: &Expr) -> Expr {
    t.as_coeff_monomial().1
}

/// Grow the vector-field basis by `depth` rounds of closure under
/// multiplication by the zero-order coefficient monomials and their
/// reciprocals, antiderivatives in the independent coordinate, and partial
/// derivatives. Antiderivatives outside the supported class are skipped and
/// returned as warnings.
pub fn extend_ansatz(
    a: &Ansatz,
    sys: &PerturbedSystem,
    depth: u32,
) -> Result<(Ansatz, Vec<String>), SolverError> {
    if depth > MAX_DEPTH {
        return Err(SolverError::DepthTooLarge(depth));
    }
    let mut factors: Vec<Expr> = Vec::new();
    for w in &sys.omega0 {
        for c in w.components() {
            for t in c.terms() {
                let m = key(&t);
                if !m.is_one() && !m.free_symbols().is_empty() {
                    factors.push(expr::recip(&m));
                    factors.push(m);
                }
            }
        }
    }
    let factors = sorted_unique(factors);
    let mut warnings = Vec::new();
    let mut known: BTreeMap<Expr, Expr> = BTreeMap::new();
    let mut order: Vec<Expr> = Vec::new();
    let admit = |e: Expr, known: &mut BTreeMap<Expr, Expr>, order: &mut Vec<Expr>| {
        for t in e.terms() {
            let k = key(&t);
            if !known.contains_key(&k) {
                known.insert(k, t.clone());
                order.push(t);
            }
        }
    };
    for t in &a.terms {
        // User terms are kept whole; their monomials block duplicates.
        if t.terms().len() == 1 {
            known.insert(key(t), t.clone());
        }
        order.push(t.clone());
    }
    let chart = sys.chart.clone();
    let mut frontier: Vec<Expr> = a.terms.iter().flat_map(|t| t.terms()).collect();
    for _ in 0..depth {
        let mut fresh = Vec::new();
        for t in &frontier {
            for f in &factors {
                fresh.push(expr::mul2(t, f));
            }
            if let Some(ind) = &sys.independent {
                match antiderivative(t, ind) {
                    Ok(i) => fresh.push(i),
                    Err(e) => warnings.push(e.to_string()),
                }
            }
            for x in chart.coords() {
                fresh.push(differentiate(t, x));
            }
        }
        let before = order.len();
        for e in fresh {
            admit(e, &mut known, &mut order);
        }
        frontier = order[before..].to_vec();
    }
    warnings.sort();
    warnings.dedup();
    Ok((Ansatz::new(order, a.multipliers.clone(), a.mask.clone()), warnings))
}
