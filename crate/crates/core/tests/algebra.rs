mod common;

use num_rational::BigRational;
use proptest::prelude::*;
use srgeo_core::frame::check_frame;
use srgeo_core::{compute_flag, lie_bracket, rng, ExactVectorField, Poly, VectorField};

fn rational_poly(terms: Vec<(u16, u16, u16, i64)>) -> Poly<BigRational> {
    Poly::from_terms(3, terms.into_iter().map(|(a, b, c, k)| (vec![a, b, c], BigRational::from_integer(k.into()))))
}

fn exact_field() -> impl Strategy<Value = ExactVectorField> {
    let term = (0u16..3, 0u16..3, 0u16..2, -4i64..=4);
    prop::collection::vec(prop::collection::vec(term, 0..4), 3).prop_map(|cs| VectorField::new(cs.into_iter().map(rational_poly).collect()).unwrap())
}

fn small_int() -> impl Strategy<Value = BigRational> {
    (-5i64..=5).prop_map(|k| BigRational::from_integer(k.into()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn jacobi_identity_is_exact(x in exact_field(), y in exact_field(), z in exact_field()) {
        let a = lie_bracket(&x, &lie_bracket(&y, &z).unwrap()).unwrap();
        let b = lie_bracket(&y, &lie_bracket(&z, &x).unwrap()).unwrap();
        let c = lie_bracket(&z, &lie_bracket(&x, &y).unwrap()).unwrap();
        prop_assert!(a.add(&b).unwrap().add(&c).unwrap().is_zero());
    }

    #[test]
    fn bracket_is_antisymmetric(x in exact_field(), y in exact_field()) {
        let xy = lie_bracket(&x, &y).unwrap();
        let yx = lie_bracket(&y, &x).unwrap();
        prop_assert!(xy.add(&yx).unwrap().is_zero());
    }

    #[test]
    fn bracket_is_bilinear(x in exact_field(), y in exact_field(), z in exact_field(), a in small_int(), b in small_int()) {
        let lhs = lie_bracket(&x.scale(&a).add(&y.scale(&b)).unwrap(), &z).unwrap();
        let rhs = lie_bracket(&x, &z).unwrap().scale(&a).add(&lie_bracket(&y, &z).unwrap().scale(&b)).unwrap();
        prop_assert!(lhs == rhs);
    }
}

fn probes(n: usize, count: usize) -> Vec<Vec<f64>> {
    let mut g = rng::stream(1, 0);
    (0..count).map(|_| (0..n).map(|_| rng::uniform(&mut g, -1.0, 1.0)).collect()).collect()
}

#[test]
fn builtin_flags_are_constant() {
    let cases: [(Vec<VectorField<f64>>, Vec<usize>); 4] = [
        (common::heisenberg_fields(), vec![2, 3]),
        (common::perturbed_heisenberg_fields(), vec![2, 3]),
        (common::engel_fields(), vec![2, 3, 4]),
        (common::euclidean_fields(3), vec![3]),
    ];
    for (h, growth) in cases {
        let n = h[0].dim();
        let r = compute_flag(&h, &probes(n, 20), n).unwrap();
        assert!(r.equiregular, "{growth:?}");
        assert_eq!(r.growth, growth);
    }
}

#[test]
fn perturbed_heisenberg_is_singular_on_a_plane() {
    // [X1, X2] = (1 + 2 x1) ∂3 vanishes on {x1 = −1/2}.
    let mut pts = probes(3, 5);
    pts.push(vec![-0.5, 0.3, 0.1]);
    assert!(!compute_flag(&common::perturbed_heisenberg_fields(), &pts, 3).unwrap().equiregular);
}

#[test]
fn martinet_is_not_equiregular() {
    let x1 = common::x(3, 0);
    let h = vec![VectorField::basis(3, 0), common::field(vec![common::c(3, 0.0), common::c(3, 1.0), &x1 * &x1])];
    let mut pts = probes(3, 20);
    pts.push(vec![0.0; 3]);
    let r = compute_flag(&h, &pts, 3).unwrap();
    assert!(!r.equiregular);
}

#[test]
fn privileged_frames_satisfy_the_flag_conditions() {
    for f in [common::heisenberg(), common::frame(&common::perturbed_heisenberg_fields()), common::engel(), common::euclidean(4)] {
        let n = f.dim();
        let at_base = check_frame(&f, &vec![0.0; n]).unwrap();
        assert!(at_base.spans_flag);
        assert!(at_base.full_orthonormality < 1e-12, "{}", at_base.full_orthonormality);
        for p in probes(n, 20) {
            let p: Vec<f64> = p.iter().map(|v| 0.5 * v).collect();
            let chk = check_frame(&f, &p).unwrap();
            assert!(chk.spans_flag, "{p:?}");
            assert!(chk.horizontal_orthonormality < 1e-8);
        }
    }
}

#[test]
fn engel_weights_and_dimension() {
    let f = common::engel();
    assert_eq!(f.weights, vec![1, 1, 2, 3]);
    assert_eq!(f.homogeneous_dim, 7);
    assert_eq!(f.step, 3);
}
