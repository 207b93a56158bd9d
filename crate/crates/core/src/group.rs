//! Group law of the stratified group defined by a nilpotent frame in
//! exponential coordinates.

use crate::compiled::PolySet;
use crate::field::VectorField;
use crate::jet::exp_series;
use crate::nilpotent::NilpotentFrame;
use crate::poly::Poly;
use crate::scalar::Scalar;

/// `x · y = exp(Σ y_i X̂_i)(x)`, exact as a polynomial map in `2n` variables
/// because the frame is nilpotent.
#[derive(Clone, Debug)]
pub struct CarnotGroup {
    weights: Vec<u32>,
    product: Vec<Poly<f64>>,
    compiled: PolySet,
}

impl CarnotGroup {
    pub fn new<T: Scalar>(nf: &NilpotentFrame<T>) -> Self {
        let n = nf.dim();
        let fields: Vec<VectorField<T>> = nf.fields.clone();
        let base: Vec<Poly<T>> = (0..n).map(|i| Poly::var(2 * n, i)).collect();
        let dir: Vec<usize> = (n..2 * n).collect();
        let mut w2 = nf.weights.clone();
        w2.extend(nf.weights.iter().copied());
        let step = nf.step();
        let prod = exp_series(&fields, &base, &dir, step, Some((&w2, step)));
        let product: Vec<Poly<f64>> = prod.iter().map(Poly::to_f64).collect();
        let compiled = PolySet::new(2 * n, &product);
        CarnotGroup { weights: nf.weights.clone(), product, compiled }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[u32] {
        &self.weights
    }

    /// The product as polynomials in `(x_1…x_n, y_1…y_n)`.
    pub fn product_polys(&self) -> &[Poly<f64>] {
        &self.product
    }

    pub fn mul(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut xy = Vec::with_capacity(2 * self.dim());
        xy.extend_from_slice(x);
        xy.extend_from_slice(y);
        self.compiled.eval(&xy)
    }

    /// Inverse in exponential coordinates of the first kind.
    pub fn inv(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| -v).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{build_privileged_frame, MetricExtension};
    use crate::nilpotent::nilpotent_at;

    #[test]
    fn heisenberg_product() {
        let x = Poly::<f64>::var(3, 0);
        let y = Poly::<f64>::var(3, 1);
        let h = vec![
            VectorField::new(vec![Poly::one(3), Poly::zero(3), y.scale(&-0.5)]).unwrap(),
            VectorField::new(vec![Poly::zero(3), Poly::one(3), x.scale(&0.5)]).unwrap(),
        ];
        let pf = build_privileged_frame(&h, &MetricExtension::FrameOrthonormal, &[0.0; 3]).unwrap();
        let g = CarnotGroup::new(&nilpotent_at(&pf, &[0.0; 3]).unwrap());
        let a = [0.3, -0.2, 0.5];
        let b = [-0.1, 0.7, 0.2];
        let p = g.mul(&a, &b);
        let expected_z = 0.5 + 0.2 + 0.5 * (0.3 * 0.7 - (-0.2) * (-0.1));
        assert!((p[0] - 0.2).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
        assert!((p[2] - expected_z).abs() < 1e-14);
        let e = g.mul(&a, &g.inv(&a));
        assert!(e.iter().all(|v| v.abs() < 1e-15));
    }
}
