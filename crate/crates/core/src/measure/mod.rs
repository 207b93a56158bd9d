//! Surface measures on hypersurfaces of sub-Riemannian manifolds, spherical
//! factors of tangent groups, Federer densities and the divergence identity.

mod ball;
mod divergence;
mod federer;
mod spherical;
mod surface;

pub use ball::BallOracle;
pub use divergence::{divergence_identity_check, BumpField, DivergenceReport, StarDomain};
pub use federer::{double_blowup_check, federer_density, DoubleBlowupReport, FedererConfig, FedererReport, RadiusSample};
pub use spherical::{spherical_factor, spherical_factor_at, CrossSection, Slicer, SphericalFactorConfig, SphericalFactorResult};
pub use surface::{extension_independence_check, sr_surface_measure, surface_density, ExtensionReport, QuadConfig, Region, SurfaceMeasure};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::frame::{metric_matrix, MetricExtension, PrivilegedFrame};
use crate::linalg;
use crate::poly::Poly;

/// Below this `|ν_D|_g` a point is characteristic.
pub const CHARACTERISTIC_TOL: f64 = 1e-8;

/// `ω = a(x) dx¹ ∧ … ∧ dxⁿ`.
#[derive(Clone, Debug, PartialEq)]
pub struct VolumeForm {
    pub density: Poly<f64>,
}

impl VolumeForm {
    pub fn new(density: Poly<f64>) -> Self {
        VolumeForm { density }
    }

    pub fn lebesgue(n: usize) -> Self {
        VolumeForm { density: Poly::one(n) }
    }

    pub fn scaled(&self, c: f64) -> Self {
        VolumeForm { density: self.density.scale(&c) }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.density.eval_f64(x)
    }

    /// Fails unless the density is positive at every probe point.
    pub fn validate(&self, probes: &[Vec<f64>]) -> Result<()> {
        match probes.iter().find(|p| self.eval(p) <= 0.0) {
            Some(p) => Err(Error::InvalidInput(format!("volume density is not positive at {p:?}"))),
            None => Ok(()),
        }
    }
}

/// Parametrized hypersurface `Φ: I ⊂ ℝⁿ⁻¹ → ℝⁿ` with optional defining
/// function `f` (`Σ = {f = 0}`).
#[derive(Clone, Debug, PartialEq)]
pub struct HypersurfacePatch {
    /// Components of `Φ`, polynomials in `n − 1` variables.
    pub map: Vec<Poly<f64>>,
    pub implicit: Option<Poly<f64>>,
    /// `±1`; flips the normal.
    pub orientation: f64,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl HypersurfacePatch {
    pub fn new(map: Vec<Poly<f64>>, implicit: Option<Poly<f64>>, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let n = map.len();
        if n < 2 {
            return Err(Error::InvalidInput("hypersurface needs ambient dimension at least 2".into()));
        }
        if let Some(bad) = map.iter().find(|p| p.nvars() != n - 1) {
            return Err(Error::DimensionMismatch { expected: n - 1, found: bad.nvars() });
        }
        if lo.len() != n - 1 || hi.len() != n - 1 {
            return Err(Error::DimensionMismatch { expected: n - 1, found: lo.len().min(hi.len()) });
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidInput("empty parameter box".into()));
        }
        if let Some(f) = &implicit {
            if f.nvars() != n {
                return Err(Error::DimensionMismatch { expected: n, found: f.nvars() });
            }
        }
        let patch = HypersurfacePatch { map, implicit, orientation: 1.0, lo, hi };
        patch.check_consistency()?;
        Ok(patch)
    }

    /// `{x_axis = value}` parametrized by the remaining coordinates in order.
    pub fn coordinate_plane(n: usize, axis: usize, value: f64, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let mut map = Vec::with_capacity(n);
        let mut k = 0;
        for j in 0..n {
            if j == axis {
                map.push(Poly::constant(n - 1, value));
            } else {
                map.push(Poly::var(n - 1, k));
                k += 1;
            }
        }
        let implicit = &Poly::var(n, axis) - &Poly::constant(n, value);
        Self::new(map, Some(implicit), lo, hi)
    }

    /// Graph `x_axis = h(remaining coordinates)`.
    pub fn graph(n: usize, axis: usize, height: Poly<f64>, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let mut map = Vec::with_capacity(n);
        let mut others = Vec::with_capacity(n - 1);
        let mut k = 0;
        for j in 0..n {
            if j == axis {
                map.push(height.clone());
            } else {
                map.push(Poly::var(n - 1, k));
                others.push(j);
                k += 1;
            }
        }
        let implicit = &Poly::var(n, axis) - &height.remap_vars(n, &others);
        Self::new(map, Some(implicit), lo, hi)
    }

    pub fn flipped(&self) -> Self {
        HypersurfacePatch { orientation: -self.orientation, ..self.clone() }
    }

    /// Restriction to a parameter sub-box.
    pub fn restricted(&self, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let mut p = Self::new(self.map.clone(), self.implicit.clone(), lo, hi)?;
        p.orientation = self.orientation;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.map.len()
    }

    pub fn param_dim(&self) -> usize {
        self.map.len() - 1
    }

    pub fn point(&self, s: &[f64]) -> Vec<f64> {
        self.map.iter().map(|p| p.eval_f64(s)).collect()
    }

    /// `dΦ(s)` as an `n × (n−1)` matrix.
    pub fn tangents(&self, s: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n - 1, |i, j| self.map[i].derivative(j).eval_f64(s))
    }

    /// Euclidean conormal `η` with `η(∂_j Φ) = 0` (generalized cross product
    /// of the tangents), times the orientation.
    pub fn conormal(&self, s: &[f64]) -> Vec<f64> {
        let t = self.tangents(s);
        let n = self.dim();
        (0..n)
            .map(|i| {
                let minor = t.clone().remove_row(i);
                let sign = if (i + n - 1) % 2 == 0 { 1.0 } else { -1.0 };
                self.orientation * sign * minor.determinant()
            })
            .collect()
    }

    fn check_consistency(&self) -> Result<()> {
        let Some(f) = &self.implicit else { return Ok(()) };
        for k in 0..8 {
            let u = crate::rng::halton(k, self.param_dim());
            let s: Vec<f64> = u.iter().zip(self.lo.iter().zip(&self.hi)).map(|(t, (a, b))| a + t * (b - a)).collect();
            let x = self.point(&s);
            let scale = 1.0 + linalg::norm(&x);
            if f.eval_f64(&x).abs() > 1e-9 * scale {
                return Err(Error::InvalidInput(format!("implicit and parametric forms disagree at parameter {s:?}")));
            }
            let grad: Vec<f64> = (0..self.dim()).map(|i| f.derivative(i).eval_f64(&x)).collect();
            let eta = self.conormal(&s);
            let gn = linalg::norm(&grad);
            let en = linalg::norm(&eta);
            if gn == 0.0 || en == 0.0 {
                return Err(Error::DegeneratePatch(s));
            }
            let cos = linalg::dot(&grad, &eta).abs() / (gn * en);
            if (cos - 1.0).abs() > 1e-8 {
                return Err(Error::InvalidInput(format!("implicit gradient is not normal to the parametrization at {s:?}")));
            }
        }
        Ok(())
    }
}

/// `‖ω(q)‖_g = |a(q)| / √det G(q)`: the value of `ω` on a g-orthonormal
/// frame.
pub fn volume_norm(omega: &VolumeForm, metric: &MetricExtension, frame: &PrivilegedFrame<f64>, q: &[f64]) -> Result<f64> {
    let g = metric_matrix(metric, frame, q)?;
    let det = g.determinant();
    if !(det > 0.0) {
        return Err(Error::SingularFrame(q.to_vec()));
    }
    Ok(omega.eval(q).abs() / det.sqrt())
}

/// Unit normal and its horizontal projection at a point of a hypersurface.
#[derive(Clone, Debug, PartialEq)]
pub struct HorizontalNormal {
    /// g-unit normal vector.
    pub normal: Vec<f64>,
    /// g-orthogonal projection of the normal onto the distribution.
    pub horizontal: Vec<f64>,
    /// Coefficients of `horizontal` in the horizontal fields.
    pub coefficients: Vec<f64>,
    pub horizontal_norm: f64,
    pub characteristic: bool,
}

/// Normal data at `q` for a hypersurface with Euclidean conormal `eta` at `q`.
pub fn horizontal_normal_from_conormal(
    eta: &[f64],
    metric: &MetricExtension,
    frame: &PrivilegedFrame<f64>,
    q: &[f64],
) -> Result<HorizontalNormal> {
    let g = metric_matrix(metric, frame, q)?;
    let ginv = linalg::inverse(&g).ok_or_else(|| Error::SingularFrame(q.to_vec()))?;
    let eta_v = DVector::from_row_slice(eta);
    let raw = &ginv * &eta_v;
    let len = eta_v.dot(&raw);
    if !(len > 0.0) {
        return Err(Error::DegeneratePatch(q.to_vec()));
    }
    let nu = raw / len.sqrt();
    let cols: Vec<Vec<f64>> = frame.horizontal().iter().map(|f| f.eval_f64(q)).collect();
    let h = linalg::from_columns(&cols);
    let gram = h.transpose() * &g * &h;
    let rhs = h.transpose() * &g * &nu;
    let coeffs = gram.lu().solve(&rhs).ok_or_else(|| Error::SingularFrame(q.to_vec()))?;
    let horizontal = &h * &coeffs;
    let hn = coeffs.dot(&(h.transpose() * &g * &horizontal)).max(0.0).sqrt();
    Ok(HorizontalNormal {
        normal: nu.as_slice().to_vec(),
        horizontal: horizontal.as_slice().to_vec(),
        coefficients: coeffs.as_slice().to_vec(),
        horizontal_norm: hn,
        characteristic: hn < CHARACTERISTIC_TOL,
    })
}

/// `horizontal_normal_from_conormal` at the patch point `Φ(s)`.
pub fn horizontal_normal(patch: &HypersurfacePatch, metric: &MetricExtension, frame: &PrivilegedFrame<f64>, s: &[f64]) -> Result<HorizontalNormal> {
    let q = patch.point(s);
    let eta = patch.conormal(s);
    if linalg::norm(&eta) == 0.0 {
        return Err(Error::DegeneratePatch(s.to_vec()));
    }
    horizontal_normal_from_conormal(&eta, metric, frame, &q)
}

/// Polynomial inverse of the frame matrix `A(x)`, available when `det A` is
/// a nonzero constant; rows are indexed by frame fields.
pub fn frame_inverse_polys(frame: &PrivilegedFrame<f64>) -> Result<Vec<Vec<Poly<f64>>>> {
    let n = frame.dim();
    let a: Vec<Vec<Poly<f64>>> = (0..n).map(|i| (0..n).map(|j| frame.fields[j].coeff(i).clone()).collect()).collect();
    let det = poly_det(&a);
    let c = det.constant_term();
    if c == 0.0 || (&det - &Poly::constant(n, c)).max_abs_coeff() > 1e-12 * c.abs() {
        return Err(Error::InvalidInput("frame determinant is not a nonzero constant".into()));
    }
    // inv[k][i] = cofactor(i, k) / det.
    Ok((0..n)
        .map(|k| {
            (0..n)
                .map(|i| {
                    let minor: Vec<Vec<Poly<f64>>> = (0..n)
                        .filter(|&r| r != i)
                        .map(|r| (0..n).filter(|&s| s != k).map(|s| a[r][s].clone()).collect())
                        .collect();
                    let sign = if (i + k) % 2 == 0 { 1.0 } else { -1.0 };
                    poly_det(&minor).scale(&(sign / c))
                })
                .collect()
        })
        .collect())
}

fn poly_det(a: &[Vec<Poly<f64>>]) -> Poly<f64> {
    let n = a.len();
    if n == 1 {
        return a[0][0].clone();
    }
    let nv = a[0][0].nvars();
    let mut acc = Poly::zero(nv);
    for j in 0..n {
        if a[0][j].is_zero() {
            continue;
        }
        let minor: Vec<Vec<Poly<f64>>> = a[1..].iter().map(|row| row.iter().enumerate().filter(|(s, _)| *s != j).map(|(_, p)| p.clone()).collect()).collect();
        let term = &a[0][j] * &poly_det(&minor);
        if j % 2 == 0 {
            acc += &term;
        } else {
            acc -= &term;
        }
    }
    acc
}
