use crate::kernel::{differentiate, expr, Expr};

use crate::kernel::{substitute, Binding};

use super::{Chart, FormError, KForm, OdeSystem, VectorField};

pub fn exterior_derivative(w: &KForm) -> Result<KForm, FormError> {
    let chart = w.chart();
    let n = chart.dim();
    match w.degree() {
        0 => {
            let f = w.function();
            KForm::one_form(chart, (0..n).map(|k| differentiate(&f, chart.name(k))).collect())
        }
        1 => {
            let a = w.components();
            let mut out = KForm::zero(chart, 2);
            for i in 0..n {
                for j in i + 1..n {
                    let c = expr::sub(
                        &differentiate(&a[j], chart.name(i)),
                        &differentiate(&a[i], chart.name(j)),
                    );
                    out.set(vec![i, j], c);
                }
            }
            Ok(out)
        }
        degree => Err(FormError::Degree {
            op: "exterior_derivative",
            degree,
        }),
    }
}

pub fn wedge(a: &KForm, b: &KForm) -> Result<KForm, FormError> {
    if a.chart() != b.chart() {
        return Err(FormError::ChartMismatch);
    }
    match (a.degree(), b.degree()) {
        (0, _) => Ok(b.scale(&a.function())),
        (_, 0) => Ok(a.scale(&b.function())),
        (1, 1) => {
            let chart = a.chart();
            let (x, y) = (a.components(), b.components());
            let mut out = KForm::zero(chart, 2);
            for i in 0..chart.dim() {
                for j in i + 1..chart.dim() {
                    let c = expr::sub(&expr::mul2(&x[i], &y[j]), &expr::mul2(&x[j], &y[i]));
                    out.set(vec![i, j], c);
                }
            }
            Ok(out)
        }
        (p, q) => Err(FormError::Degree {
            op: "wedge",
            degree: p + q,
        }),
    }
}

pub fn interior_product(x: &VectorField, w: &KForm) -> Result<KForm, FormError> {
    if x.chart() != w.chart() {
        return Err(FormError::ChartMismatch);
    }
    let chart = w.chart();
    let v = x.components();
    match w.degree() {
        1 => Ok(KForm::scalar(chart, w.contract(v))),
        2 => {
            let mut acc = vec![Vec::new(); chart.dim()];
            for (idx, c) in w.terms() {
                let (i, j) = (idx[0], idx[1]);
                acc[j].push(expr::mul2(c, &v[i]));
                acc[i].push(expr::neg(&expr::mul2(c, &v[j])));
            }
            KForm::one_form(chart, acc.into_iter().map(expr::add).collect())
        }
        degree => Err(FormError::Degree {
            op: "interior_product",
            degree,
        }),
    }
}

/// Cartan formula `L_X w = i_X dw + d(i_X w)`; `L_X f = X f` on functions.
pub fn lie_derivative(x: &VectorField, w: &KForm) -> Result<KForm, FormError> {
    if x.chart() != w.chart() {
        return Err(FormError::ChartMismatch);
    }
    match w.degree() {
        0 => interior_product(x, &exterior_derivative(w)?),
        1 => {
            let a = interior_product(x, &exterior_derivative(w)?)?;
            let b = exterior_derivative(&interior_product(x, w)?)?;
            a.add(&b)
        }
        degree => Err(FormError::Degree {
            op: "lie_derivative",
            degree,
        }),
    }
}

/// `w_ij = F_i dx_j - F_j dx_i` for `i < j`.
pub fn ode_to_forms(sys: &OdeSystem) -> Vec<KForm> {
    let chart = sys.chart();
    let f = sys.rhs();
    let n = chart.dim();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let mut c = vec![Expr::zero(); n];
            c[j] = f[i].clone();
            c[i] = expr::neg(&f[j]);
            out.push(KForm::one_form(chart, c).expect("dimension matches"));
        }
    }
    out
}

/// Pull a 0- or 1-form back to `new` along `old_k = old_in_new[k]`.
pub fn pullback(w: &KForm, new: &Chart, old_in_new: &[Expr]) -> Result<KForm, FormError> {
    let old = w.chart();
    if old_in_new.len() != old.dim() {
        return Err(FormError::Length {
            expected: old.dim(),
            got: old_in_new.len(),
        });
    }
    let mut b = Binding::new();
    for (k, e) in old_in_new.iter().enumerate() {
        b.insert(old.name(k), e.clone())?;
    }
    match w.degree() {
        0 => Ok(KForm::scalar(new, substitute(&w.function(), &b))),
        1 => {
            let a: Vec<Expr> = w.components().iter().map(|c| substitute(c, &b)).collect();
            let mut acc = vec![Vec::new(); new.dim()];
            for (k, ak) in a.iter().enumerate() {
                if ak.is_zero() {
                    continue;
                }
                for (j, slot) in acc.iter_mut().enumerate() {
                    slot.push(expr::mul2(ak, &differentiate(&old_in_new[k], new.name(j))));
                }
            }
            KForm::one_form(new, acc.into_iter().map(expr::add).collect())
        }
        degree => Err(FormError::Degree { op: "pullback", degree }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::Chart;
    use crate::kernel::{parse, ParseContext};

    fn chart() -> Chart {
        Chart::new(&["x", "y", "z"]).unwrap()
    }

    fn form(s: &str) -> KForm {
        KForm::parse_one_form(s, &chart(), &ParseContext::default()).unwrap()
    }

    fn field(c: [&str; 3]) -> VectorField {
        VectorField::new(&chart(), c.iter().map(|s| parse(s).unwrap()).collect()).unwrap()
    }

    #[test]
    fn d_of_simple_forms() {
        let ch = chart();
        assert_eq!(exterior_derivative(&form("y*dx")).unwrap(), KForm::basis2(&ch, 1, 0));
        let f = KForm::scalar(&ch, parse("x - x0").unwrap());
        assert_eq!(exterior_derivative(&f).unwrap(), KForm::basis(&ch, 0));
        assert_eq!(exterior_derivative(&form("dy - z*dx")).unwrap(), KForm::basis2(&ch, 0, 2));
        let two = exterior_derivative(&form("y*dx")).unwrap();
        assert!(exterior_derivative(&two).is_err());
    }

    #[test]
    fn wedge_basics() {
        let ch = chart();
        let dx = KForm::basis(&ch, 0);
        let dy = KForm::basis(&ch, 1);
        assert_eq!(wedge(&dx, &dy).unwrap().coeff(&[0, 1]), Expr::one());
        assert!(wedge(&dx, &dx).unwrap().is_zero());
        let w = wedge(&form("y*dx"), &form("z*dy")).unwrap();
        assert_eq!(w.coeff(&[0, 1]), parse("y*z").unwrap());
        assert!(wedge(&w, &dx).is_err());
    }

    #[test]
    fn interior_basics() {
        let ch = chart();
        let ddx = field(["1", "0", "0"]);
        let w = interior_product(&ddx, &KForm::basis2(&ch, 1, 0)).unwrap();
        assert_eq!(w, KForm::basis(&ch, 1).neg());
        let f = interior_product(&ddx, &form("y*dx")).unwrap();
        assert_eq!(f.function(), parse("y").unwrap());
        let x = field(["ln(y+z)", "z - y*ln(y+z)", "0"]);
        let f = interior_product(&x, &form("dy - z*dx")).unwrap();
        assert_eq!(f.function(), parse("(z - y*ln(y+z)) - z*ln(y+z)").unwrap());
        assert!(interior_product(&x, &KForm::scalar(&ch, Expr::one())).is_err());
    }

    #[test]
    fn lie_examples() {
        let ddx = field(["1", "0", "0"]);
        assert!(lie_derivative(&ddx, &form("y*dx")).unwrap().is_zero());
        let x = field(["ln(y+z)", "z - y*ln(y+z)", "0"]);
        let l = lie_derivative(&x, &form("dy + y*dx")).unwrap();
        assert_eq!(l, form("dz - ln(y+z)*dy + (z - y*ln(y+z))*dx"));
    }

    #[test]
    fn oscillator_forms() {
        let ch = Chart::new(&["t", "y", "z"]).unwrap();
        let f = vec![Expr::one(), parse("z").unwrap(), parse("-y").unwrap()];
        let sys = OdeSystem::new(&ch, f, "s", &[]).unwrap();
        let ctx = ParseContext::default();
        let got = ode_to_forms(&sys);
        let want: Vec<KForm> = ["dy - z*dt", "dz + y*dt", "z*dz + y*dy"]
            .iter()
            .map(|s| KForm::parse_one_form(s, &ch, &ctx).unwrap())
            .collect();
        assert_eq!(got, want);

        let ch = Chart::new(&["t", "y"]).unwrap();
        let sys = OdeSystem::new(&ch, vec![Expr::one(), Expr::zero()], "s", &[]).unwrap();
        assert_eq!(ode_to_forms(&sys), vec![KForm::basis(&ch, 1)]);
        let sys = OdeSystem::new(&ch, vec![Expr::one(), Expr::one()], "s", &[]).unwrap();
        assert_eq!(ode_to_forms(&sys)[0], KForm::parse_one_form("dy - dt", &ch, &ctx).unwrap());
    }

    #[test]
    fn pullback_of_polar_amplitude() {
        let old = Chart::new(&["t", "R", "th"]).unwrap();
        let new = Chart::new(&["t", "u", "th"]).unwrap();
        let ctx = ParseContext::default();
        let w = KForm::parse_one_form("-2/R^3*dR + R^2*dt", &old, &ctx).unwrap();
        let map = vec![parse("t").unwrap(), parse("u^(-1/2)").unwrap(), parse("th").unwrap()];
        let p = pullback(&w, &new, &map).unwrap();
        assert_eq!(p.components(), vec![parse("1/u").unwrap(), parse("1").unwrap(), Expr::zero()]);
    }
}
