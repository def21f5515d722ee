//! Dormand–Prince 5(4) with 4th-order dense output.

use super::ValidateError;

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

const A: [&[f64]; 7] = [
    &[],
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];

/// 5th-order weights minus embedded 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Dense-output polynomial: stage `i` weight at fraction `θ` is
/// `Σ_k P[i][k] θ^(k+1)`.
pub(crate) const P: [[f64; 4]; 7] = [
    [1.0, -8048581381.0 / 2820520608.0, 8663915743.0 / 2820520608.0, -12715105075.0 / 11282082432.0],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200.0 / 32700410799.0, -68118460800.0 / 10900136933.0, 87487479700.0 / 32700410799.0],
    [0.0, -1754552775.0 / 470086768.0, 14199869525.0 / 1410260304.0, -10690763975.0 / 1880347072.0],
    [0.0, 127303824393.0 / 49829197408.0, -318862633887.0 / 49829197408.0, 701980252875.0 / 199316789632.0],
    [0.0, -282668133.0 / 205662961.0, 2019193451.0 / 616988883.0, -1453857185.0 / 822651844.0],
    [0.0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0, 69997945.0 / 29380423.0],
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RkOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on |h|; keeps samples dense for interpolation.
    pub max_step: f64,
    pub max_steps: usize,
}

impl RkOptions {
    pub fn new(tol: f64, span: (f64, f64)) -> Self {
        RkOptions {
            rtol: tol,
            atol: tol,
            max_step: (span.1 - span.0).abs() / 64.0,
            max_steps: 2_000_000,
        }
    }
}

/// One accepted step with the stages needed for dense output.
#[derive(Debug, Clone)]
pub(crate) struct Segment {
    pub t0: f64,
    pub h: f64,
    pub y0: Vec<f64>,
    pub k: [Vec<f64>; 7],
}

impl Segment {
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let th = (t - self.t0) / self.h;
        let pw = [th, th * th, th * th * th, th * th * th * th];
        let mut w = [0.0; 7];
        for (i, row) in P.iter().enumerate() {
            w[i] = row.iter().zip(&pw).map(|(p, q)| p * q).sum();
        }
        (0..self.y0.len())
            .map(|j| self.y0[j] + self.h * (0..7).map(|i| w[i] * self.k[i][j]).sum::<f64>())
            .collect()
    }
}

pub(crate) struct RkResult {
    pub segments: Vec<Segment>,
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub rejected: usize,
}

/// Max-norm of the scaled error estimate.
fn norm(err: &[f64], y0: &[f64], y1: &[f64], o: &RkOptions) -> f64 {
    err.iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| (e / (o.atol + o.rtol * a.abs().max(b.abs()))).abs())
        .fold(0.0, f64::max)
}

fn initial_step<F: Fn(f64, &[f64], &mut [f64])>(f: &F, t0: f64, y0: &[f64], f0: &[f64], dir: f64, o: &RkOptions) -> f64 {
    let scale: Vec<f64> = y0.iter().map(|y| o.atol + o.rtol * y.abs()).collect();
    let rms = |v: &[f64]| {
        let s: f64 = v.iter().zip(&scale).map(|(a, s)| (a / s).powi(2)).sum();
        (s / v.len().max(1) as f64).sqrt()
    };
    let d0 = rms(y0);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(o.max_step);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, d)| y + dir * h0 * d).collect();
    let mut f1 = vec![0.0; y0.len()];
    f(t0 + dir * h0, &y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 5.0)
    };
    (100.0 * h0).min(h1).min(o.max_step)
}

/// Integrate `y' = f(t, y)` from `span.0` to `span.1`.
pub(crate) fn integrate<F: Fn(f64, &[f64], &mut [f64])>(
    f: F,
    y0: &[f64],
    span: (f64, f64),
    o: &RkOptions,
) -> Result<RkResult, ValidateError> {
    let n = y0.len();
    let (t0, t1) = span;
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
    f(t, &y, &mut k[0]);
    let mut h = initial_step(&f, t, &y, &k[0], dir, o);
    let mut out = RkResult {
        segments: Vec::new(),
        t: vec![t],
        y: vec![y.clone()],
        rejected: 0,
    };
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut err = vec![0.0; n];
    while dir * (t1 - t) > 0.0 {
        if out.segments.len() + out.rejected >= o.max_steps {
            return Err(ValidateError::StepUnderflow { t, h });
        }
        let min_h = 16.0 * f64::EPSILON * t.abs().max(1.0);
        if h < min_h {
            return Err(ValidateError::StepUnderflow { t, h });
        }
        let mut last = false;
        if dir * (t + dir * h - t1) >= 0.0 {
            h = (t1 - t).abs();
            last = true;
        }
        let hs = dir * h;
        for s in 1..7 {
            for j in 0..n {
                tmp[j] = y[j] + hs * A[s].iter().enumerate().map(|(i, a)| a * k[i][j]).sum::<f64>();
            }
            f(t + C[s] * hs, &tmp, &mut k[s]);
        }
        // Stage 6 is evaluated at the 5th-order solution (FSAL).
        y_new.copy_from_slice(&tmp);
        for j in 0..n {
            err[j] = hs * (0..7).map(|i| E[i] * k[i][j]).sum::<f64>();
        }
        let en = norm(&err, &y, &y_new, o);
        if !en.is_finite() {
            out.rejected += 1;
            h *= 0.2;
            continue;
        }
        let factor = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
        if en <= 1.0 {
            out.segments.push(Segment {
                t0: t,
                h: hs,
                y0: y.clone(),
                k: k.clone(),
            });
            t = if last { t1 } else { t + hs };
            y.copy_from_slice(&y_new);
            out.t.push(t);
            out.y.push(y.clone());
            let fsal = k[6].clone();
            k[0] = fsal;
            h = (h * factor).min(o.max_step);
        } else {
            out.rejected += 1;
            h *= factor.min(1.0);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_weights_end_at_b() {
        for i in 0..7 {
            let w: f64 = P[i].iter().sum();
            let b = if i < 6 { A[6].get(i).copied().unwrap_or(0.0) } else { 0.0 };
            assert!((w - b).abs() < 1e-12, "stage {i}: {w} vs {b}");
        }
    }

    #[test]
    fn exponential_decay() {
        let o = RkOptions::new(1e-10, (0.0, 2.0));
        let r = integrate(|_, y, d| d[0] = -y[0], &[1.0], (0.0, 2.0), &o).unwrap();
        let last = r.y.last().unwrap()[0];
        assert!((last - (-2f64).exp()).abs() < 1e-9);
        let mid = r.segments[r.segments.len() / 2].clone();
        let tm = mid.t0 + 0.37 * mid.h;
        assert!((mid.eval(tm)[0] - (-tm).exp()).abs() < 1e-9);
    }

    #[test]
    fn stiff_problem_underflows() {
        let mut o = RkOptions::new(1e-12, (0.0, 1.0));
        o.max_steps = 2000;
        let r = integrate(|_, y, d| d[0] = -1e7 * (y[0] - 1.0), &[0.0], (0.0, 1.0), &o);
        assert!(matches!(r, Err(ValidateError::StepUnderflow { .. })));
    }
}
