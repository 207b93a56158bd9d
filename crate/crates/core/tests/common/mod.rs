#![allow(dead_code)]

use srgeo_core::{build_privileged_frame, Frame, MetricExtension, Poly, VectorField};

pub fn field(coeffs: Vec<Poly<f64>>) -> VectorField<f64> {
    VectorField::new(coeffs).unwrap()
}

pub fn x(n: usize, i: usize) -> Poly<f64> {
    Poly::var(n, i)
}

pub fn c(n: usize, v: f64) -> Poly<f64> {
    Poly::constant(n, v)
}

pub fn heisenberg_fields() -> Vec<VectorField<f64>> {
    vec![
        field(vec![c(3, 1.0), c(3, 0.0), x(3, 1).scale(&-0.5)]),
        field(vec![c(3, 0.0), c(3, 1.0), x(3, 0).scale(&0.5)]),
    ]
}

pub fn perturbed_heisenberg_fields() -> Vec<VectorField<f64>> {
    let x1 = x(3, 0);
    vec![
        field(vec![c(3, 1.0), c(3, 0.0), x(3, 1).scale(&-0.5)]),
        field(vec![c(3, 0.0), c(3, 1.0), x1.scale(&0.5) + &x1 * &x1]),
    ]
}

pub fn engel_fields() -> Vec<VectorField<f64>> {
    vec![VectorField::basis(4, 0), field(vec![c(4, 0.0), c(4, 1.0), x(4, 0), x(4, 2)])]
}

pub fn euclidean_fields(n: usize) -> Vec<VectorField<f64>> {
    (0..n).map(|k| VectorField::basis(n, k)).collect()
}

pub fn frame(h: &[VectorField<f64>]) -> Frame {
    build_privileged_frame(h, &MetricExtension::FrameOrthonormal, &vec![0.0; h[0].dim()]).unwrap()
}

pub fn heisenberg() -> Frame {
    frame(&heisenberg_fields())
}

pub fn engel() -> Frame {
    frame(&engel_fields())
}

pub fn euclidean(n: usize) -> Frame {
    frame(&euclidean_fields(n))
}

/// Group law whose left-invariant fields are `heisenberg_fields`.
pub fn heisenberg_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    vec![a[0] + b[0], a[1] + b[1], a[2] + b[2] + 0.5 * (a[0] * b[1] - a[1] * b[0])]
}

/// Distance from the origin in the Heisenberg group, from the explicit
/// geodesics: a horizontal arc of angle `phi` on a circle of radius
/// `rho` has chord `2 rho sin(phi/2)`, length `rho phi` and encloses the
/// signed area `rho² (phi − sin phi)/2`, which equals the height.
pub fn heisenberg_distance(p: &[f64]) -> f64 {
    let r = p[0].hypot(p[1]);
    let z = p[2].abs();
    if z == 0.0 {
        return r;
    }
    if r < 1e-12 * z.sqrt() {
        return (4.0 * std::f64::consts::PI * z).sqrt();
    }
    // z / r² = (phi − sin phi) / (8 sin²(phi/2)), increasing on (0, 2π).
    let target = z / (r * r);
    let g = |phi: f64| (phi - phi.sin()) / (8.0 * (0.5 * phi).sin().powi(2)) - target;
    let (mut lo, mut hi) = (1e-9, 2.0 * std::f64::consts::PI - 1e-12);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let phi = 0.5 * (lo + hi);
    phi * r / (2.0 * (0.5 * phi).sin())
}
