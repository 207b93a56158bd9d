//! Adaptive Dormand–Prince 5(4) integration.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Tolerances and step budget for the integrator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step_count: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig { rel_tol: 1e-10, abs_tol: 1e-12, max_step_count: 100_000 }
    }
}

impl FlowConfig {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        FlowConfig { rel_tol, abs_tol, ..Default::default() }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// Step statistics of a completed integration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction).
///
/// `observe` is called after every accepted step and may abort the
/// integration by returning an error (used for chart confinement).
pub fn integrate<T, F, O>(mut f: F, t0: T, y0: &[T], t1: T, cfg: &FlowConfig, mut observe: O) -> Result<(Vec<T>, OdeStats)>
where
    T: Real,
    F: FnMut(T, &[T], &mut [T]) -> Result<()>,
    O: FnMut(T, &[T]) -> Result<()>,
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut stats = OdeStats::default();
    if t1 == t0 {
        return Ok((y, stats));
    }
    let c = |v: f64| T::from(v).expect("constant fits");
    let rtol = c(cfg.rel_tol);
    let atol = c(cfg.abs_tol);
    let span = t1 - t0;
    let dir = span.signum();
    let mut t = t0;
    let mut k: Vec<Vec<T>> = vec![vec![T::zero(); n]; 7];
    f(t, &y, &mut k[0])?;

    let scale_of = |yi: T, zi: T| atol + rtol * yi.abs().max(zi.abs());
    // Initial step from the usual two-evaluation heuristic.
    let mut h = {
        let d0 = rms(y.iter().zip(&y).map(|(&a, &b)| a / scale_of(a, b)));
        let d1 = rms(k[0].iter().zip(&y).map(|(&a, &b)| a / scale_of(b, b)));
        let h0 = if d0 < c(1e-5) || d1 < c(1e-5) { c(1e-6) } else { c(0.01) * d0 / d1 };
        let h0 = h0.min(span.abs());
        let y1: Vec<T> = y.iter().zip(&k[0]).map(|(&a, &b)| a + dir * h0 * b).collect();
        let mut f1 = vec![T::zero(); n];
        f(t + dir * h0, &y1, &mut f1)?;
        let d2 = rms(f1.iter().zip(&k[0]).zip(&y).map(|((&a, &b), &yy)| (a - b) / scale_of(yy, yy))) / h0;
        let h1 = if d1.max(d2) <= c(1e-15) { (h0 * c(1e-3)).max(c(1e-6)) } else { (c(0.01) / d1.max(d2)).powf(c(0.2)) };
        (c(100.0) * h0).min(h1).min(span.abs())
    };

    let mut ytmp = vec![T::zero(); n];
    let mut ynew = vec![T::zero(); n];
    let tiny = c(16.0) * T::epsilon() * (t0.abs() + t1.abs() + T::one());
    loop {
        if stats.accepted + stats.rejected >= cfg.max_step_count {
            return Err(Error::StepLimit(cfg.max_step_count));
        }
        let remaining = (t1 - t) * dir;
        if remaining <= tiny {
            break;
        }
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        let hs = dir * h;
        for s in 1..7 {
            for i in 0..n {
                let mut acc = T::zero();
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = A[s][j];
                    if a != 0.0 {
                        acc = acc + c(a) * kj[i];
                    }
                }
                ytmp[i] = y[i] + hs * acc;
            }
            let (head, tail) = k.split_at_mut(s);
            let _ = head;
            f(t + c(C[s]) * hs, &ytmp, &mut tail[0])?;
            if s == 6 {
                ynew.copy_from_slice(&ytmp);
            }
        }
        let mut err_acc = T::zero();
        for i in 0..n {
            let mut e = T::zero();
            for s in 0..7 {
                let d = B5[s] - B4[s];
                if d != 0.0 {
                    e = e + c(d) * k[s][i];
                }
            }
            let sc = scale_of(y[i], ynew[i]);
            let r = hs * e / sc;
            err_acc = err_acc + r * r;
        }
        let err = (err_acc / c(n.max(1) as f64)).sqrt();
        if !err.is_finite() {
            stats.rejected += 1;
            h = h * c(0.25);
            if h <= tiny {
                return Err(Error::StepUnderflow(t.to_f64().unwrap_or(f64::NAN)));
            }
            continue;
        }
        if err <= T::one() {
            stats.accepted += 1;
            t = if last { t1 } else { t + hs };
            y.copy_from_slice(&ynew);
            observe(t, &y)?;
            // First-same-as-last: stage 7 is f(t + h, y_new).
            let k6 = k[6].clone();
            k[0] = k6;
            let fac = if err == T::zero() { c(5.0) } else { (c(0.9) * err.powf(c(-0.2))).min(c(5.0)).max(c(0.2)) };
            h = h * fac;
            if last {
                break;
            }
        } else {
            stats.rejected += 1;
            let fac = (c(0.9) * err.powf(c(-0.2))).max(c(0.2));
            h = h * fac;
            if h <= tiny {
                return Err(Error::StepUnderflow(t.to_f64().unwrap_or(f64::NAN)));
            }
        }
    }
    Ok((y, stats))
}

fn rms<T: Real, I: Iterator<Item = T>>(it: I) -> T {
    let mut s = T::zero();
    let mut k = 0usize;
    for v in it {
        s = s + v * v;
        k += 1;
    }
    (s / T::from(k.max(1)).expect("count fits")).sqrt()
}

/// Integrates without an observer.
pub fn solve<T, F>(f: F, t0: T, y0: &[T], t1: T, cfg: &FlowConfig) -> Result<Vec<T>>
where
    T: Real,
    F: FnMut(T, &[T], &mut [T]) -> Result<()>,
{
    integrate(f, t0, y0, t1, cfg, |_, _| Ok(())).map(|(y, _)| y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let y = solve(
            |_, y: &[f64], dy: &mut [f64]| {
                dy[0] = -y[0];
                Ok(())
            },
            0.0,
            &[1.0],
            2.0,
            &FlowConfig::default(),
        )
        .unwrap();
        assert!((y[0] - (-2.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn harmonic_oscillator_backwards_f32() {
        let cfg = FlowConfig::with_tolerances(1e-6, 1e-6);
        let y = solve(
            |_, y: &[f32], dy: &mut [f32]| {
                dy[0] = y[1];
                dy[1] = -y[0];
                Ok(())
            },
            0.0f32,
            &[1.0, 0.0],
            -1.0,
            &cfg,
        )
        .unwrap();
        assert!((y[0] - 1.0f32.cos()).abs() < 1e-4);
        assert!((y[1] - 1.0f32.sin()).abs() < 1e-4);
    }

    #[test]
    fn observer_can_abort() {
        let r = integrate(
            |_, _: &[f64], dy: &mut [f64]| {
                dy[0] = 1.0;
                Ok(())
            },
            0.0,
            &[0.0],
            10.0,
            &FlowConfig::default(),
            |_, y| if y[0] > 2.0 { Err(Error::ChartEscape(y.to_vec())) } else { Ok(()) },
        );
        assert!(matches!(r, Err(Error::ChartEscape(_))));
    }
}
