//! Normal Hamiltonian flow `H = ½ Σ ⟨p, X_i(x)⟩²` and its sensitivity with
//! respect to the initial covector.

use crate::compiled::FieldKernel;
use crate::error::Result;
use crate::field::VectorField;
use crate::flows::ChartBox;
use crate::ode::{self, FlowConfig};

/// Horizontal fields compiled with first and second derivatives.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    kernel: FieldKernel,
    n: usize,
    m: usize,
    flat_second: bool,
}

/// A sampled normal extremal.
#[derive(Clone, Debug)]
pub struct GeodesicArc {
    pub initial_covector: Vec<f64>,
    pub duration: f64,
    /// `(t, x(t), p(t))` at every accepted integrator step.
    pub samples: Vec<(f64, Vec<f64>, Vec<f64>)>,
}

impl GeodesicArc {
    pub fn endpoint(&self) -> &[f64] {
        &self.samples.last().expect("arc has samples").1
    }

    /// Largest relative drift of the Hamiltonian along the stored samples.
    pub fn hamiltonian_drift(&self, h: &Hamiltonian) -> f64 {
        let h0 = h.energy(&self.samples[0].1, &self.samples[0].2);
        self.samples.iter().map(|(_, x, p)| (h.energy(x, p) - h0).abs() / h0.abs().max(1e-300)).fold(0.0, f64::max)
    }
}

impl Hamiltonian {
    pub fn new(horizontal: &[VectorField<f64>]) -> Self {
        let kernel = FieldKernel::new(horizontal, 2);
        let flat_second = kernel.second_derivatives_vanish();
        Hamiltonian { n: kernel.dim(), m: kernel.count(), kernel, flat_second }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.m
    }

    /// Controls `h_i = ⟨p, X_i(x)⟩`.
    pub fn controls(&self, x: &[f64], p: &[f64]) -> Vec<f64> {
        let e = self.kernel.eval(x);
        (0..self.m).map(|i| (0..self.n).map(|k| p[k] * e.value(i, k)).sum()).collect()
    }

    pub fn energy(&self, x: &[f64], p: &[f64]) -> f64 {
        0.5 * self.controls(x, p).iter().map(|h| h * h).sum::<f64>()
    }

    /// Horizontal field values `X_i(x)` as rows.
    pub fn horizontal_at(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let e = self.kernel.eval(x);
        (0..self.m).map(|i| e.vector(i).to_vec()).collect()
    }

    fn rhs(&self, s: &[f64], ds: &mut [f64], with_sensitivity: bool) {
        let n = self.n;
        let m = self.m;
        let (x, rest) = s.split_at(n);
        let p = &rest[..n];
        let e = self.kernel.eval(x);
        let mut h = vec![0.0; m];
        let mut g = vec![0.0; m * n];
        for i in 0..m {
            h[i] = (0..n).map(|k| p[k] * e.value(i, k)).sum();
            for l in 0..n {
                g[i * n + l] = (0..n).map(|k| p[k] * e.d1(i, k, l)).sum();
            }
        }
        for k in 0..n {
            ds[k] = (0..m).map(|i| h[i] * e.value(i, k)).sum();
        }
        for l in 0..n {
            ds[n + l] = -(0..m).map(|i| h[i] * g[i * n + l]).sum::<f64>();
        }
        if !with_sensitivity {
            return;
        }
        // hp[i][l][j] = Σ_k p_k ∂_j ∂_l X_i^k.
        let mut hp = Vec::new();
        if !self.flat_second {
            hp = vec![0.0; m * n * n];
            for i in 0..m {
                for l in 0..n {
                    for j in 0..n {
                        hp[(i * n + l) * n + j] = (0..n).map(|k| p[k] * e.d2(i, k, l, j)).sum();
                    }
                }
            }
        }
        let phx = &s[2 * n..2 * n + n * n];
        let php = &s[2 * n + n * n..2 * n + 2 * n * n];
        let mut dh = vec![0.0; m];
        for j in 0..n {
            let dx = |k: usize| phx[k * n + j];
            let dp = |k: usize| php[k * n + j];
            for i in 0..m {
                let mut v = 0.0;
                for k in 0..n {
                    v += dp(k) * e.value(i, k) + g[i * n + k] * dx(k);
                }
                dh[i] = v;
            }
            for k in 0..n {
                let mut v = 0.0;
                for i in 0..m {
                    let mut lin = 0.0;
                    for l in 0..n {
                        lin += e.d1(i, k, l) * dx(l);
                    }
                    v += dh[i] * e.value(i, k) + h[i] * lin;
                }
                ds[2 * n + k * n + j] = v;
            }
            for l in 0..n {
                let mut v = 0.0;
                for i in 0..m {
                    let mut dg = 0.0;
                    for k in 0..n {
                        dg += dp(k) * e.d1(i, k, l);
                    }
                    if !self.flat_second {
                        for jj in 0..n {
                            dg += hp[(i * n + l) * n + jj] * dx(jj);
                        }
                    }
                    v += dh[i] * g[i * n + l] + h[i] * dg;
                }
                ds[2 * n + n * n + l * n + j] = -v;
            }
        }
    }

    /// Endpoint `x(1)` of the extremal from `(q, P)`.
    pub fn endpoint(&self, q: &[f64], covector: &[f64], chart: &ChartBox, cfg: &FlowConfig) -> Result<Vec<f64>> {
        let n = self.n;
        let mut s0 = q.to_vec();
        s0.extend_from_slice(covector);
        let (s, _) = ode::integrate(
            |_, s: &[f64], ds: &mut [f64]| {
                self.rhs(s, ds, false);
                Ok(())
            },
            0.0,
            &s0,
            1.0,
            cfg,
            |_, s| chart.check(&s[..n]),
        )?;
        Ok(s[..n].to_vec())
    }

    /// Endpoint `x(1)` and the sensitivity `∂x(1)/∂P`, row-major `n × n`.
    pub fn endpoint_with_sensitivity(&self, q: &[f64], covector: &[f64], chart: &ChartBox, cfg: &FlowConfig) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.n;
        let mut s0 = q.to_vec();
        s0.extend_from_slice(covector);
        s0.extend(std::iter::repeat_n(0.0, n * n));
        for k in 0..n {
            for j in 0..n {
                s0.push(if k == j { 1.0 } else { 0.0 });
            }
        }
        let (s, _) = ode::integrate(
            |_, s: &[f64], ds: &mut [f64]| {
                self.rhs(s, ds, true);
                Ok(())
            },
            0.0,
            &s0,
            1.0,
            cfg,
            |_, s| chart.check(&s[..n]),
        )?;
        Ok((s[..n].to_vec(), s[2 * n..2 * n + n * n].to_vec()))
    }

    /// Integrates from `(q, p0)` for time `duration`, recording every step.
    pub fn arc(&self, q: &[f64], p0: &[f64], duration: f64, chart: &ChartBox, cfg: &FlowConfig) -> Result<GeodesicArc> {
        let n = self.n;
        let mut s0 = q.to_vec();
        s0.extend_from_slice(p0);
        let mut samples = vec![(0.0, q.to_vec(), p0.to_vec())];
        ode::integrate(
            |_, s: &[f64], ds: &mut [f64]| {
                self.rhs(s, ds, false);
                Ok(())
            },
            0.0,
            &s0,
            duration,
            cfg,
            |t, s| {
                chart.check(&s[..n])?;
                samples.push((t, s[..n].to_vec(), s[n..2 * n].to_vec()));
                Ok(())
            },
        )?;
        Ok(GeodesicArc { initial_covector: p0.to_vec(), duration, samples })
    }
}

/// Integrates the normal extremal from `(q, p0)` for time `duration`.
pub fn geodesic_shoot(horizontal: &[VectorField<f64>], q: &[f64], p0: &[f64], duration: f64, cfg: &FlowConfig) -> Result<GeodesicArc> {
    let h = Hamiltonian::new(horizontal);
    if h.energy(q, p0) <= 0.0 {
        return Err(crate::Error::InvalidInput("initial covector annihilates the distribution".into()));
    }
    h.arc(q, p0, duration, &ChartBox::unbounded(q.len()), cfg)
}
