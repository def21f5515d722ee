use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::forms::lie_derivative;
use crate::kernel::{equiv, eval_numeric, EvalEnv, Expr};

use super::{HomologicalSolution, PerturbedSystem, SolverError};

/// Per-symbol sampling intervals; unlisted symbols use `default`.
#[derive(Debug, Clone)]
pub struct SamplingBox {
    pub intervals: BTreeMap<String, (f64, f64)>,
    pub default: (f64, f64),
    /// Fixed parameter values and function definitions.
    pub env: EvalEnv,
    pub seed: u64,
}

impl Default for SamplingBox {
    fn default() -> Self {
        SamplingBox {
            intervals: BTreeMap::new(),
            default: equiv::SAMPLE_INTERVAL,
            env: EvalEnv::new(),
            seed: 7,
        }
    }
}

impl SamplingBox {
    fn points(&self, symbols: &BTreeSet<String>, n: usize) -> Vec<Vec<(String, f64)>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..n)
            .map(|_| {
                symbols
                    .iter()
                    .map(|s| {
                        let (lo, hi) = self.intervals.get(s).copied().unwrap_or(self.default);
                        (s.clone(), rng.gen_range(lo..hi))
                    })
                    .collect()
            })
            .collect()
    }
}

/// Max over `n_points` sample points and all `(i, k)` of the `dx_k`
/// coefficient of `ω1_i + L_X ω0_i - Σ_j λ_ij ω0_j`, with every piece
/// evaluated separately in floating point.
pub fn residual_norm_numeric(
    sol: &HomologicalSolution,
    sys: &PerturbedSystem,
    n_points: usize,
    sampling: &SamplingBox,
) -> Result<f64, SolverError> {
    let n = sys.chart.dim();
    let mut pieces: Vec<(Vec<Expr>, Vec<Expr>, Vec<(Expr, Vec<Expr>)>)> = Vec::new();
    let mut symbols: BTreeSet<String> = BTreeSet::new();
    let mut functions = BTreeSet::new();
    let mut note = |e: &Expr| {
        symbols.extend(e.free_symbols().iter().map(|s| s.to_string()));
        functions.extend(e.applied_functions());
    };
    for i in 0..sys.len() {
        let w1 = sys.omega1[i].components();
        let lx: Vec<Expr> = lie_derivative(&sol.x, &sys.omega0[i])?.components();
        let mut span = Vec::new();
        for (j, w0) in sys.omega0.iter().enumerate() {
            let l = sol.lambda.get(i).and_then(|r| r.get(j)).cloned().unwrap_or_else(Expr::zero);
            span.push((l, w0.components()));
        }
        for e in w1.iter().chain(&lx).chain(span.iter().flat_map(|(l, c)| std::iter::once(l).chain(c))) {
            note(e);
        }
        pieces.push((w1, lx, span));
    }
    let mut env = sampling.env.clone();
    for f in functions {
        if !env.functions().any(|(n, _)| *n == f) {
            env.define(&f, equiv::generic_test_function());
        }
    }
    symbols.retain(|s| env.get(s).is_none() && s != "pi");
    let points = sampling.points(&symbols, n_points);
    let results: Vec<Option<f64>> = points
        .par_iter()
        .map(|pt| {
            let mut env = env.clone();
            for (s, v) in pt {
                env.set(s, *v);
            }
            let ev = |e: &Expr| eval_numeric(e, &env).ok();
            let mut worst = 0f64;
            for (w1, lx, span) in &pieces {
                for k in 0..n {
                    let mut acc: Complex64 = ev(&w1[k])? + ev(&lx[k])?;
                    for (l, c) in span {
                        acc -= ev(l)? * ev(&c[k])?;
                    }
                    worst = worst.max(acc.norm());
                }
            }
            Some(worst)
        })
        .collect();
    let valid: Vec<f64> = results.into_iter().flatten().collect();
    if valid.is_empty() && n_points > 0 {
        return Err(SolverError::AllSamplesSingular);
    }
    Ok(valid.into_iter().fold(0.0, f64::max))
}
