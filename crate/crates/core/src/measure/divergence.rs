//! Divergence identity `∫_Ω div_ω X ω = ∫_∂Ω ‖ω‖ g(X, ν) dσ_g` on star-shaped
//! polynomial domains.

use super::surface::illinois;
use super::{horizontal_normal_from_conormal, volume_norm, VolumeForm};
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::frame::{metric_matrix, MetricExtension, PrivilegedFrame};
use crate::linalg;
use crate::poly::Poly;
use crate::quad::{gauss, gauss_unit, sphere_rule};

/// `Ω = {f < 0}`, star-shaped with respect to `center`, contained in the
/// Euclidean ball of radius `max_radius` about it.
#[derive(Clone, Debug, PartialEq)]
pub struct StarDomain {
    pub f: Poly<f64>,
    pub center: Vec<f64>,
    pub max_radius: f64,
}

impl StarDomain {
    pub fn new(f: Poly<f64>, center: Vec<f64>, max_radius: f64) -> Result<Self> {
        if f.eval(&center) >= 0.0 {
            return Err(Error::InvalidInput("domain center must satisfy f < 0".into()));
        }
        Ok(StarDomain { f, center, max_radius })
    }

    /// Euclidean ball `|x − c|² − R² < 0`.
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let n = center.len();
        let mut f = Poly::constant(n, -radius * radius);
        for (i, c) in center.iter().enumerate() {
            let d = &Poly::var(n, i) - &Poly::constant(n, *c);
            f = &f + &(&d * &d);
        }
        Self::new(f, center, 1.5 * radius)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    fn along(&self, u: &[f64], t: f64) -> Vec<f64> {
        self.center.iter().zip(u).map(|(c, v)| c + t * v).collect()
    }

    /// Distance from the center to the boundary along the unit direction `u`.
    pub fn boundary_radius(&self, u: &[f64]) -> Result<f64> {
        let steps = 64;
        let h = self.max_radius / steps as f64;
        let mut a = 0.0;
        let mut fa = self.f.eval(&self.center);
        for k in 1..=steps {
            let b = k as f64 * h;
            let fb = self.f.eval(&self.along(u, b));
            if fb >= 0.0 {
                let mut g = |t: f64| Ok(self.f.eval(&self.along(u, t)));
                return illinois(&mut g, a, b, fa, fb, 1e-15 * self.max_radius);
            }
            a = b;
            fa = fb;
        }
        Err(Error::InvalidInput(format!("no boundary within {} along {u:?}", self.max_radius)))
    }

    fn outward_normal(&self, x: &[f64]) -> Vec<f64> {
        let g: Vec<f64> = (0..self.dim()).map(|i| self.f.derivative(i).eval(x)).collect();
        let norm = linalg::norm(&g);
        g.iter().map(|v| v / norm).collect()
    }
}

/// `X = b V` with `b = (1 − |x − c|²/ρ²)₊^k`, or `X = V` without a bump.
#[derive(Clone, Debug, PartialEq)]
pub struct BumpField {
    pub field: VectorField<f64>,
    pub bump: Option<(Vec<f64>, f64, u32)>,
}

impl BumpField {
    pub fn plain(field: VectorField<f64>) -> Self {
        BumpField { field, bump: None }
    }

    pub fn bumped(field: VectorField<f64>, center: Vec<f64>, radius: f64, power: u32) -> Self {
        BumpField { field, bump: Some((center, radius, power)) }
    }

    /// Bump polynomial inside its support.
    fn bump_poly(&self) -> Option<Poly<f64>> {
        let (c, rho, k) = self.bump.as_ref()?;
        let n = c.len();
        let mut s = Poly::zero(n);
        for (i, ci) in c.iter().enumerate() {
            let d = &Poly::var(n, i) - &Poly::constant(n, *ci);
            s = &s + &(&d * &d);
        }
        Some((&Poly::one(n) - &s.scale(&(1.0 / (rho * rho)))).pow(*k))
    }

    fn in_support(&self, x: &[f64]) -> bool {
        match &self.bump {
            Some((c, rho, _)) => linalg::dist(x, c) < *rho,
            None => true,
        }
    }

    /// Parameters `t` where the ray `x0 + t u` crosses the support boundary.
    fn support_crossings(&self, x0: &[f64], u: &[f64]) -> Vec<f64> {
        let Some((c, rho, _)) = &self.bump else { return Vec::new() };
        let d: Vec<f64> = x0.iter().zip(c).map(|(a, b)| a - b).collect();
        let b = linalg::dot(&d, u);
        let disc = b * b - (linalg::dot(&d, &d) - rho * rho);
        if disc <= 0.0 {
            return Vec::new();
        }
        vec![-b - disc.sqrt(), -b + disc.sqrt()]
    }
}

/// Symbolic pieces of `div_ω X = div X + X(a)/a` valid inside the support.
struct DivergenceIntegrand {
    x: VectorField<f64>,
    div: Poly<f64>,
    xa: Poly<f64>,
    a: Poly<f64>,
}

impl DivergenceIntegrand {
    fn new(field: &BumpField, omega: &VolumeForm) -> Self {
        let x = match field.bump_poly() {
            Some(b) => field.field.mul_poly(&b),
            None => field.field.clone(),
        };
        let n = x.dim();
        let mut div = Poly::zero(n);
        for i in 0..n {
            div = &div + &x.coeff(i).derivative(i);
        }
        let xa = x.apply(&omega.density);
        DivergenceIntegrand { x, div, xa, a: omega.density.clone() }
    }

    /// `div_ω X · a`, the integrand against Lebesgue measure.
    fn weighted(&self, p: &[f64]) -> f64 {
        let a = self.a.eval(p);
        (self.div.eval(p) + self.xa.eval(p) / a) * a
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DivergenceReport {
    pub volume_integral: f64,
    pub boundary_integral: f64,
    /// `|vol − bdry| / max(|vol|, |bdry|)`, or the absolute mismatch when
    /// both sides vanish.
    pub mismatch: f64,
    /// Change of each side between the two quadrature levels.
    pub quad_change: f64,
}

fn integrals(
    omega: &VolumeForm,
    metric: &MetricExtension,
    frame: &PrivilegedFrame<f64>,
    domain: &StarDomain,
    field: &BumpField,
    integrand: &DivergenceIntegrand,
    level: usize,
    radial: usize,
) -> Result<(f64, f64)> {
    let n = domain.dim();
    let rule = sphere_rule(n, level).ok_or_else(|| Error::InvalidInput(format!("polar quadrature needs n ∈ {{2, 3}}, got {n}")))?;
    let gl = gauss_unit(radial);
    let (mut vol, mut bdry) = (0.0, 0.0);
    for (u, w) in &rule {
        let r = domain.boundary_radius(u)?;
        let mut cuts = vec![0.0];
        cuts.extend(field.support_crossings(&domain.center, u).into_iter().filter(|t| *t > 0.0 && *t < r));
        cuts.push(r);
        for seg in cuts.windows(2) {
            let mid = domain.along(u, 0.5 * (seg[0] + seg[1]));
            if !field.in_support(&mid) {
                continue;
            }
            vol += w * gauss(seg[0], seg[1], &gl, |t| integrand.weighted(&domain.along(u, t)) * t.powi(n as i32 - 1));
        }

        let x = domain.along(u, r);
        if !field.in_support(&x) {
            continue;
        }
        let ne = domain.outward_normal(&x);
        let g = metric_matrix(metric, frame, &x)?;
        let nu = horizontal_normal_from_conormal(&ne, metric, frame, &x)?.normal;
        let gnu = &g * nalgebra::DVector::from_column_slice(&nu);
        let xv = integrand.x.eval(&x);
        let g_x_nu = linalg::dot(&xv, gnu.as_slice());
        let ginv = linalg::inverse(&g).ok_or_else(|| Error::SingularFrame(x.clone()))?;
        let ne_v = nalgebra::DVector::from_column_slice(&ne);
        let area_ratio = g.determinant().sqrt() * (ne_v.transpose() * &ginv * &ne_v)[(0, 0)].sqrt();
        let polar_jac = r.powi(n as i32 - 1) / linalg::dot(u, &ne);
        bdry += w * volume_norm(omega, metric, frame, &x)? * g_x_nu * area_ratio * polar_jac;
    }
    Ok((vol, bdry))
}

/// Both sides of the divergence identity by polar quadrature about the
/// domain center (angular `level`, `radial` Gauss points per segment), with a
/// second pass at double resolution.
pub fn divergence_identity_check(
    omega: &VolumeForm,
    metric: &MetricExtension,
    frame: &PrivilegedFrame<f64>,
    domain: &StarDomain,
    field: &BumpField,
    level: usize,
    radial: usize,
) -> Result<DivergenceReport> {
    let integrand = DivergenceIntegrand::new(field, omega);
    let (v1, b1) = integrals(omega, metric, frame, domain, field, &integrand, level, radial)?;
    let (v2, b2) = integrals(omega, metric, frame, domain, field, &integrand, 2 * level, 2 * radial)?;
    let scale = v2.abs().max(b2.abs());
    let mismatch = if scale > 1e-300 { (v2 - b2).abs() / scale } else { (v2 - b2).abs() };
    let quad_change = (v2 - v1).abs().max((b2 - b1).abs()) / scale.max(1e-300);
    Ok(DivergenceReport { volume_integral: v2, boundary_integral: b2, mismatch, quad_change })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_boundary_radius() {
        let d = StarDomain::ball(vec![0.5, -0.5], 0.3).unwrap();
        let u = [0.6, 0.8];
        assert!((d.boundary_radius(&u).unwrap() - 0.3).abs() < 1e-12);
        assert!(StarDomain::new(d.f.clone(), vec![2.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn bump_vanishes_on_its_support_boundary() {
        let b = BumpField::bumped(VectorField::basis(2, 0), vec![0.0, 0.0], 0.5, 3);
        let p = b.bump_poly().unwrap();
        assert!(p.eval(&[0.3, 0.4]).abs() < 1e-15);
        assert_eq!(p.eval(&[0.0, 0.0]), 1.0);
        assert!(!b.in_support(&[0.3, 0.41]));
    }
}
