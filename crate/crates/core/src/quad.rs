//! Quadrature rules shared by the measure layer.

use gauss_quad::GaussLegendre;

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_unit(points: usize) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(points.max(1).try_into().expect("at least one node"));
    rule.iter().map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect()
}

/// Integrates `f` over `[a, b]` with an `points`-node Gauss–Legendre rule.
pub fn gauss(a: f64, b: f64, rule: &[(f64, f64)], mut f: impl FnMut(f64) -> f64) -> f64 {
    let h = b - a;
    rule.iter().map(|&(x, w)| w * f(a + h * x)).sum::<f64>() * h
}

/// Directions and weights of a product rule on `S^{n−1}` for `n ∈ {2, 3}`.
///
/// `level` is the number of polar nodes (Gauss–Legendre in `cos θ`); the
/// azimuth uses `2·level` equispaced nodes.
pub fn sphere_rule(n: usize, level: usize) -> Option<Vec<(Vec<f64>, f64)>> {
    let tau = std::f64::consts::TAU;
    match n {
        2 => {
            let k = 2 * level;
            Some((0..k).map(|i| {
                let t = tau * (i as f64 + 0.5) / k as f64;
                (vec![t.cos(), t.sin()], tau / k as f64)
            }).collect())
        }
        3 => {
            let polar = GaussLegendre::new(level.max(1).try_into().expect("at least one node"));
            let k = 2 * level;
            let mut out = Vec::with_capacity(level * k);
            for (c, w) in polar.iter() {
                let s = (1.0 - c * c).max(0.0).sqrt();
                for i in 0..k {
                    let p = tau * (i as f64 + 0.5) / k as f64;
                    out.push((vec![s * p.cos(), s * p.sin(), *c], w * tau / k as f64));
                }
            }
            Some(out)
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_is_exact_for_polynomials() {
        let r = gauss_unit(5);
        assert!((gauss(0.0, 2.0, &r, |x| x.powi(9)) - 2f64.powi(10) / 10.0).abs() < 1e-10);
    }

    #[test]
    fn sphere_areas() {
        let s2: f64 = sphere_rule(2, 8).unwrap().iter().map(|p| p.1).sum();
        let s3: f64 = sphere_rule(3, 8).unwrap().iter().map(|p| p.1).sum();
        assert!((s2 - std::f64::consts::TAU).abs() < 1e-12);
        assert!((s3 - 4.0 * std::f64::consts::PI).abs() < 1e-12);
        let z2: f64 = sphere_rule(3, 8).unwrap().iter().map(|(d, w)| w * d[2] * d[2]).sum();
        assert!((z2 - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-12);
    }
}
