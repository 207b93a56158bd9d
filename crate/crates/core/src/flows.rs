//! Flows of polynomial fields, exponential coordinates of the first kind,
//! anisotropic dilations and rescaled coordinate frames.

use nalgebra::{DMatrix, DVector};

use crate::compiled::FieldKernel;
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::frame::PrivilegedFrame;
use crate::linalg;
use crate::ode::{self, FlowConfig};
use crate::scalar::Real;

/// Axis-aligned box used to confine trajectories to the chart.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ChartBox {
    pub fn cube(n: usize, half_width: f64) -> Self {
        ChartBox { lo: vec![-half_width; n], hi: vec![half_width; n] }
    }

    pub fn unbounded(n: usize) -> Self {
        Self::cube(n, f64::INFINITY)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    /// Smallest half-width over all axes.
    pub fn min_half_width(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (h - l)).fold(f64::INFINITY, f64::min)
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if x.iter().all(|v| v.is_finite()) && self.contains(x) {
            Ok(())
        } else {
            Err(Error::ChartEscape(x.to_vec()))
        }
    }

    /// The box scaled by `s` about its centre.
    pub fn scaled(&self, s: f64) -> Self {
        let mid: Vec<f64> = self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect();
        ChartBox {
            lo: self.lo.iter().zip(&mid).map(|(l, m)| m + s * (l - m)).collect(),
            hi: self.hi.iter().zip(&mid).map(|(h, m)| m + s * (h - m)).collect(),
        }
    }
}

/// `exp(tX)(q)`, generic over the floating-point type.
pub fn flow<T: Real>(x: &VectorField<T>, q: &[T], t: T, cfg: &FlowConfig) -> Result<Vec<T>> {
    if q.len() != x.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), found: q.len() });
    }
    ode::solve(
        |_, y: &[T], dy: &mut [T]| {
            for (k, c) in x.coeffs().iter().enumerate() {
                dy[k] = c.eval(y);
            }
            if dy.iter().all(|v| v.is_finite()) {
                Ok(())
            } else {
                Err(Error::ChartEscape(y.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect()))
            }
        },
        T::zero(),
        q,
        t,
        cfg,
    )
}

/// `δ_r x = (r^{w_i} x_i)`.
pub fn dilate(x: &[f64], weights: &[u32], r: f64) -> Vec<f64> {
    x.iter().zip(weights).map(|(v, &w)| v * r.powi(w as i32)).collect()
}

/// Anisotropic dilation with fixed weights and factor.
#[derive(Clone, Debug, PartialEq)]
pub struct Dilation {
    pub weights: Vec<u32>,
    pub r: f64,
}

impl Dilation {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        dilate(x, &self.weights, self.r)
    }

    pub fn inverse(&self) -> Self {
        Dilation { weights: self.weights.clone(), r: 1.0 / self.r }
    }

    pub fn compose(&self, other: &Self) -> Self {
        Dilation { weights: self.weights.clone(), r: self.r * other.r }
    }
}

/// Exponential coordinates `F_q(x) = exp(Σ x_i X_i)(q)` for a fixed frame and
/// base point, with compiled field evaluation.
#[derive(Clone, Debug)]
pub struct ExpChart {
    kernel: FieldKernel,
    base: Vec<f64>,
    weights: Vec<u32>,
    chart: ChartBox,
    cfg: FlowConfig,
}

impl ExpChart {
    pub fn new(frame: &PrivilegedFrame<f64>, q: &[f64], chart: ChartBox, cfg: FlowConfig) -> Self {
        Self::from_fields(&frame.fields, &frame.weights, q, chart, cfg)
    }

    pub fn from_fields(fields: &[VectorField<f64>], weights: &[u32], q: &[f64], chart: ChartBox, cfg: FlowConfig) -> Self {
        ExpChart { kernel: FieldKernel::new(fields, 1), base: q.to_vec(), weights: weights.to_vec(), chart, cfg }
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn weights(&self) -> &[u32] {
        &self.weights
    }

    pub fn chart(&self) -> &ChartBox {
        &self.chart
    }

    pub fn config(&self) -> &FlowConfig {
        &self.cfg
    }

    /// The frame vectors `X_i(p)` as columns.
    pub fn frame_at(&self, p: &[f64]) -> DMatrix<f64> {
        let e = self.kernel.eval(p);
        let n = self.dim();
        DMatrix::from_fn(n, n, |k, i| e.value(i, k))
    }

    pub fn map(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: x.len() });
        }
        if x.iter().all(|v| *v == 0.0) {
            return Ok(self.base.clone());
        }
        let chart = &self.chart;
        ode::integrate(
            |_, y: &[f64], dy: &mut [f64]| {
                let e = self.kernel.eval(y);
                for (k, d) in dy.iter_mut().enumerate() {
                    *d = (0..n).map(|i| x[i] * e.value(i, k)).sum();
                }
                Ok(())
            },
            0.0,
            &self.base,
            1.0,
            &self.cfg,
            |_, y| chart.check(y),
        )
        .map(|(y, _)| y)
    }

    /// `F_q(x)` and its Jacobian `dF_q(x)`, by the variational equation.
    pub fn map_with_jacobian(&self, x: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: x.len() });
        }
        let mut y0 = self.base.clone();
        y0.extend(std::iter::repeat_n(0.0, n * n));
        let chart = &self.chart;
        let (y, _) = ode::integrate(
            |_, s: &[f64], ds: &mut [f64]| {
                let e = self.kernel.eval(&s[..n]);
                for k in 0..n {
                    ds[k] = (0..n).map(|i| x[i] * e.value(i, k)).sum();
                }
                // J' = (Σ x_i ∂X_i) J + [X_1 … X_n], J stored row-major.
                for k in 0..n {
                    for j in 0..n {
                        let mut acc = e.value(j, k);
                        for l in 0..n {
                            let a: f64 = (0..n).map(|i| x[i] * e.d1(i, k, l)).sum();
                            acc += a * s[n + l * n + j];
                        }
                        ds[n + k * n + j] = acc;
                    }
                }
                Ok(())
            },
            0.0,
            &y0,
            1.0,
            &self.cfg,
            |_, s| chart.check(&s[..n]),
        )?;
        let jac = DMatrix::from_fn(n, n, |k, j| y[n + k * n + j]);
        Ok((y[..n].to_vec(), jac))
    }

    /// Newton inversion of `F_q`, starting from `guess` (or 0).
    pub fn inverse(&self, p: &[f64], guess: Option<&[f64]>) -> Result<Vec<f64>> {
        let n = self.dim();
        if p.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: p.len() });
        }
        let mut x = guess.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
        let scale = 1.0 + linalg::norm(p);
        let target = 1e-12 * scale;
        for _ in 0..50 {
            let (fx, jac) = self.map_with_jacobian(&x)?;
            let res: Vec<f64> = fx.iter().zip(p).map(|(a, b)| a - b).collect();
            let rn = linalg::norm(&res);
            if rn <= target {
                return Ok(x);
            }
            let step = linalg::solve(&jac, &DVector::from_vec(res)).map_err(|_| Error::SingularFrame(fx.clone()))?;
            // Backtrack if the full step leaves the chart or increases the residual.
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a - lambda * s).collect();
                if let Ok(ft) = self.map(&trial) {
                    let rt = linalg::dist(&ft, p);
                    if rt < rn || rt <= target {
                        x = trial;
                        accepted = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let fx = self.map(&x)?;
        let rn = linalg::dist(&fx, p);
        if rn <= 1e-9 * scale {
            Ok(x)
        } else {
            Err(Error::NoConvergence { residual: rn })
        }
    }

    /// `X̃_i(x) = dF_q(x)⁻¹ X_i(F_q(x))`, returned as the columns of a matrix.
    pub fn coordinate_frame(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let (p, jac) = self.map_with_jacobian(x)?;
        let a = self.frame_at(&p);
        jac.lu().solve(&a).ok_or_else(|| Error::SingularFrame(p))
    }

    /// `X̃^{q,r}_i(x) = r^{w_i} (δ_{1/r})_* X̃_i(δ_r x)` as columns.
    pub fn rescaled_frame(&self, r: f64, x: &[f64]) -> Result<DMatrix<f64>> {
        let xr = dilate(x, &self.weights, r);
        let mut m = self.coordinate_frame(&xr)?;
        let n = self.dim();
        for i in 0..n {
            for k in 0..n {
                m[(k, i)] *= r.powi(self.weights[i] as i32 - self.weights[k] as i32);
            }
        }
        Ok(m)
    }
}

pub fn exp_coords(frame: &PrivilegedFrame<f64>, q: &[f64], x: &[f64], cfg: &FlowConfig) -> Result<Vec<f64>> {
    ExpChart::new(frame, q, ChartBox::unbounded(q.len()), *cfg).map(x)
}

pub fn exp_coords_inverse(frame: &PrivilegedFrame<f64>, q: &[f64], p: &[f64], cfg: &FlowConfig) -> Result<Vec<f64>> {
    ExpChart::new(frame, q, ChartBox::unbounded(q.len()), *cfg).inverse(p, None)
}

pub fn coordinate_frame(frame: &PrivilegedFrame<f64>, q: &[f64], sample: &[f64], cfg: &FlowConfig) -> Result<DMatrix<f64>> {
    ExpChart::new(frame, q, ChartBox::unbounded(q.len()), *cfg).coordinate_frame(sample)
}

pub fn rescaled_frame(frame: &PrivilegedFrame<f64>, q: &[f64], r: f64, sample: &[f64], cfg: &FlowConfig) -> Result<DMatrix<f64>> {
    ExpChart::new(frame, q, ChartBox::unbounded(q.len()), *cfg).rescaled_frame(r, sample)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{build_privileged_frame, MetricExtension};
    use crate::poly::Poly;

    fn heisenberg_frame() -> PrivilegedFrame<f64> {
        let x = Poly::<f64>::var(3, 0);
        let y = Poly::<f64>::var(3, 1);
        let h = vec![
            VectorField::new(vec![Poly::one(3), Poly::zero(3), y.scale(&-0.5)]).unwrap(),
            VectorField::new(vec![Poly::zero(3), Poly::one(3), x.scale(&0.5)]).unwrap(),
        ];
        build_privileged_frame(&h, &MetricExtension::FrameOrthonormal, &[0.0; 3]).unwrap()
    }

    #[test]
    fn constant_field_flow() {
        let x = VectorField::<f64>::basis(3, 0);
        let p = flow(&x, &[0.0, 0.0, 0.0], 1.0, &FlowConfig::default()).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-14 && p[1] == 0.0);
    }

    #[test]
    fn diagonal_flow_stays_flat() {
        let f = heisenberg_frame();
        let s = f.fields[0].add(&f.fields[1]).unwrap();
        let p = flow(&s, &[0.0; 3], 1.0, &FlowConfig::default()).unwrap();
        assert!(linalg::max_abs_diff(&p, &[1.0, 1.0, 0.0]) < 1e-12);
    }

    #[test]
    fn inverse_of_diagonal_point() {
        let f = heisenberg_frame();
        let x = exp_coords_inverse(&f, &[0.0; 3], &[1.0, 1.0, 0.0], &FlowConfig::default()).unwrap();
        assert!(linalg::max_abs_diff(&x, &[1.0, 1.0, 0.0]) < 1e-9);
    }

    #[test]
    fn dilation_examples() {
        assert_eq!(dilate(&[1.0, 1.0, 1.0], &[1, 1, 2], 2.0), vec![2.0, 2.0, 4.0]);
        let d = Dilation { weights: vec![1, 1, 2], r: 0.3 };
        let x = [0.2, -0.7, 1.1];
        let back = d.inverse().apply(&d.apply(&x));
        assert!(linalg::max_abs_diff(&back, &x) < 1e-15);
    }

    #[test]
    fn coordinate_frame_at_origin_is_standard_basis() {
        let f = heisenberg_frame();
        let m = coordinate_frame(&f, &[0.2, 0.1, -0.3], &[0.0; 3], &FlowConfig::default()).unwrap();
        assert!((m - DMatrix::identity(3, 3)).abs().max() < 1e-12);
    }
}
