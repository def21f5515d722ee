//! Symbolic linear algebra over the expression field.

use crate::kernel::{cancel, expr, is_zero_exact, Expr};

use super::{FormError, KForm, VectorField};

#[derive(Debug, Clone, PartialEq)]
pub enum SymbolicSolve {
    Unique(Vec<Expr>),
    Inconsistent,
    /// Columns are linearly dependent at generic points.
    Degenerate { rank: usize },
}

fn normalize(e: Expr) -> Expr {
    if !e.is_zero() && is_zero_exact(&e) {
        Expr::zero()
    } else {
        e
    }
}

/// Fraction-free row reduction of `rows` (each row has `cols` leading
/// coefficient columns plus any trailing columns). Returns pivot columns.
fn echelon(rows: &mut [Vec<Expr>], cols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows.len() {
            break;
        }
        let best = (r..rows.len())
            .filter(|&i| !rows[i][c].is_zero())
            .min_by_key(|&i| (rows[i][c].node_count(), i));
        let Some(p) = best else { continue };
        rows.swap(r, p);
        let pivot = rows[r][c].clone();
        for i in r + 1..rows.len() {
            let a = rows[i][c].clone();
            if a.is_zero() {
                continue;
            }
            for k in 0..rows[i].len() {
                let v = expr::sub(&expr::mul2(&pivot, &rows[i][k]), &expr::mul2(&a, &rows[r][k]));
                rows[i][k] = normalize(v);
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

/// Solve `A c = b` for square or tall `A` given as rows.
pub fn solve_symbolic(a: &[Vec<Expr>], b: &[Expr]) -> SymbolicSolve {
    let m = a.first().map_or(0, Vec::len);
    let mut rows: Vec<Vec<Expr>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            let mut r: Vec<Expr> = row.iter().cloned().map(normalize).collect();
            r.push(normalize(rhs.clone()));
            r
        })
        .collect();
    let pivots = echelon(&mut rows, m);
    if pivots.len() < m {
        return SymbolicSolve::Degenerate { rank: pivots.len() };
    }
    if rows[m..].iter().any(|r| !r[m].is_zero()) {
        return SymbolicSolve::Inconsistent;
    }
    let mut c = vec![Expr::zero(); m];
    for k in (0..m).rev() {
        let mut acc = vec![rows[k][m].clone()];
        for j in k + 1..m {
            acc.push(expr::neg(&expr::mul2(&rows[k][j], &c[j])));
        }
        c[k] = cancel(&expr::div(&expr::add(acc), &rows[k][k]));
    }
    SymbolicSolve::Unique(c)
}

fn check_basis(w: &KForm, basis: &[KForm]) -> Result<(), FormError> {
    for b in basis {
        if b.chart() != w.chart() {
            return Err(FormError::ChartMismatch);
        }
        if b.degree() != 1 {
            return Err(FormError::Degree {
                op: "in_span",
                degree: b.degree(),
            });
        }
    }
    Ok(())
}

/// Coefficients `c` with `w = Σ c_j basis_j`, or `None` when `w` is not in
/// the span. The returned coefficients are verified exactly.
pub fn in_span(w: &KForm, basis: &[KForm]) -> Result<Option<Vec<Expr>>, FormError> {
    check_basis(w, basis)?;
    if w.degree() != 1 {
        return Err(FormError::Degree {
            op: "in_span",
            degree: w.degree(),
        });
    }
    let n = w.chart().dim();
    let cols: Vec<Vec<Expr>> = basis.iter().map(KForm::components).collect();
    let a: Vec<Vec<Expr>> = (0..n).map(|k| cols.iter().map(|c| c[k].clone()).collect()).collect();
    match solve_symbolic(&a, &w.components()) {
        SymbolicSolve::Degenerate { rank } => Err(FormError::Degenerate {
            rank,
            len: basis.len(),
        }),
        SymbolicSolve::Inconsistent => Ok(None),
        SymbolicSolve::Unique(c) => {
            let mut residual = w.clone();
            for (cj, bj) in c.iter().zip(basis) {
                residual = residual.sub(&bj.scale(cj))?;
            }
            Ok(residual.is_zero_exact().then_some(c))
        }
    }
}

/// Vector fields spanning the common kernel of the 1-forms in `basis`.
pub fn annihilator(basis: &[KForm]) -> Result<Vec<VectorField>, FormError> {
    let Some(first) = basis.first() else {
        return Ok(vec![]);
    };
    check_basis(first, basis)?;
    let chart = first.chart();
    let n = chart.dim();
    let mut rows: Vec<Vec<Expr>> = basis
        .iter()
        .map(|b| b.components().into_iter().map(normalize).collect())
        .collect();
    let pivots = echelon(&mut rows, n);
    if pivots.len() < basis.len() {
        return Err(FormError::Degenerate {
            rank: pivots.len(),
            len: basis.len(),
        });
    }
    let mut out = Vec::new();
    for free in (0..n).filter(|c| !pivots.contains(c)) {
        let mut v = vec![Expr::zero(); n];
        v[free] = Expr::one();
        for (r, &pc) in pivots.iter().enumerate().rev() {
            let acc: Vec<Expr> = (pc + 1..n).map(|j| expr::mul2(&rows[r][j], &v[j])).collect();
            v[pc] = cancel(&expr::neg(&expr::div(&expr::add(acc), &rows[r][pc])));
        }
        out.push(VectorField::new(chart, v)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::Chart;
    use crate::kernel::{parse, ParseContext};

    fn forms(ch: &Chart, s: &[&str]) -> Vec<KForm> {
        s.iter()
            .map(|t| KForm::parse_one_form(t, ch, &ParseContext::default()).unwrap())
            .collect()
    }

    #[test]
    fn dy_in_boundary_layer_span() {
        let ch = Chart::new(&["x", "y", "z"]).unwrap();
        let b = forms(&ch, &["dy - z*dx", "dy + y*dx"]);
        let c = in_span(&KForm::basis(&ch, 1), &b).unwrap().unwrap();
        assert_eq!(c, vec![parse("y/(y+z)").unwrap(), parse("z/(y+z)").unwrap()]);
        assert_eq!(in_span(&b[0], &b).unwrap().unwrap(), vec![Expr::one(), Expr::zero()]);
        assert_eq!(in_span(&KForm::basis(&ch, 2), &b).unwrap(), None);
    }

    #[test]
    fn degenerate_basis_is_distinct() {
        let ch = Chart::new(&["x", "y"]).unwrap();
        let b = forms(&ch, &["dy - x*dx", "2*dy - 2*x*dx"]);
        assert!(matches!(in_span(&b[0], &b), Err(FormError::Degenerate { rank: 1, len: 2 })));
    }

    #[test]
    fn kernels() {
        let ch = Chart::new(&["x", "y", "z"]).unwrap();
        let k = annihilator(&forms(&ch, &["dy - z*dx", "dy + y*dx"])).unwrap();
        assert_eq!(k.len(), 1);
        assert_eq!(k[0].components(), &[Expr::zero(), Expr::zero(), Expr::one()]);
        let ch = Chart::new(&["t", "u", "th"]).unwrap();
        let k = annihilator(&forms(&ch, &["du", "u*dth"])).unwrap();
        assert_eq!(k[0].components(), &[Expr::one(), Expr::zero(), Expr::zero()]);
        let k = annihilator(&forms(&ch, &["dth - dt"])).unwrap();
        assert_eq!(k.len(), 2);
        for v in &k {
            assert!(crate::kernel::is_zero_exact(&forms(&ch, &["dth - dt"])[0].contract(v.components())));
        }
    }
}
