mod common;

use proptest::prelude::*;
use srgeo_core::nilpotent::{coefficient_jets, default_order, nilpotent_approximation, nilpotent_at, verify_stratified, STRATIFIED_TOL};

#[test]
fn approximation_is_idempotent() {
    for f in [common::frame(&common::perturbed_heisenberg_fields()), common::engel()] {
        let n = f.dim();
        let nf = nilpotent_at(&f, &vec![0.0; n]).unwrap();
        let jets = coefficient_jets(&nf.as_privileged(), &vec![0.0; n], default_order(&nf.weights)).unwrap();
        let again = nilpotent_approximation(&jets, &nf.weights, &vec![0.0; n]).unwrap();
        for (a, b) in nf.fields.iter().zip(&again.fields) {
            assert!(a.sub(b).unwrap().max_abs_coeff() < 1e-10);
        }
    }
}

#[test]
fn remainder_has_no_low_order_part() {
    let f = common::frame(&common::perturbed_heisenberg_fields());
    let n = f.dim();
    let w = f.weights.clone();
    let jets = coefficient_jets(&f, &[0.0; 3], default_order(&w)).unwrap();
    let nf = nilpotent_approximation(&jets, &w, &[0.0; 3]).unwrap();
    for i in 0..n {
        for j in 0..n {
            let rho = &jets[i][j].poly - nf.fields[i].coeff(j);
            assert!(rho.constant_term().abs() < 1e-12, "rho_{i}{j}(0)");
            if w[j] >= w[i] {
                let d = w[j] - w[i];
                assert!(jets[i][j].below(d).max_abs_coeff() < 1e-8, "a_{i}{j} below degree {d}");
                assert!(rho.homogeneous_part(&w, d).max_abs_coeff() < 1e-12);
            }
        }
    }
    // The perturbation survives only in the remainder.
    let rest = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| (&jets[i][j].poly - nf.fields[i].coeff(j)).max_abs_coeff()).fold(0.0, f64::max);
    assert!(rest > 0.5);
}

#[test]
fn structure_constants_form_a_lie_algebra() {
    for f in [common::heisenberg(), common::engel(), common::frame(&common::perturbed_heisenberg_fields())] {
        let n = f.dim();
        let c = nilpotent_at(&f, &vec![0.0; n]).unwrap().structure_constants;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    assert!((c[i][j][k] + c[j][i][k]).abs() < 1e-10);
                    for m in 0..n {
                        let jac: f64 = (0..n).map(|l| c[i][j][l] * c[l][k][m] + c[j][k][l] * c[l][i][m] + c[k][i][l] * c[l][j][m]).sum();
                        assert!(jac.abs() < 1e-10);
                    }
                }
            }
        }
    }
}

#[test]
fn engel_tangent_algebra() {
    let c = nilpotent_at(&common::engel(), &[0.0; 4]).unwrap().structure_constants;
    // X3 = [X1, X2], X4 = [X3, X2]; X1 commutes with X3.
    assert!((c[0][1][2] - 1.0).abs() < 1e-12);
    assert!((c[2][1][3] - 1.0).abs() < 1e-12);
    assert!(c[0][2].iter().all(|v| v.abs() < 1e-12));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn tangent_frames_are_stratified_everywhere(q in prop::array::uniform4(-0.5f64..0.5)) {
        let h = common::engel_fields();
        let f = srgeo_core::build_privileged_frame(&h, &srgeo_core::MetricExtension::FrameOrthonormal, &q).unwrap();
        let r = verify_stratified(&nilpotent_at(&f, &q).unwrap());
        prop_assert!(r.passed());
        prop_assert!(r.max_residual() < STRATIFIED_TOL);
    }
}
