mod common;

use srgeo_core::blowup::{
    coordinate_change_isometry, distance_convergence, frame_convergence, rescaled_distance, uniform_radius_estimate, ConvergenceConfig, IsometryConfig,
    RescaledChart, UniformRadiusConfig,
};
use srgeo_core::flows::ChartBox;

fn perturbed() -> srgeo_core::Frame {
    common::frame(&common::perturbed_heisenberg_fields())
}

#[test]
fn rescaled_distance_is_a_dilated_distance() {
    // On the Heisenberg group the rescaled frame is the frame itself.
    let f = common::heisenberg();
    let (x, y) = ([0.2, -0.1, 0.05], [-0.3, 0.2, 0.1]);
    let exact = {
        let g = [-x[0], -x[1], -x[2]];
        common::heisenberg_distance(&common::heisenberg_mul(&g, &y))
    };
    for r in [0.5, 0.1] {
        let d = rescaled_distance(&f, &[0.0; 3], r, &x, &y).unwrap();
        assert!((d - exact).abs() < 1e-6, "{r}: {d} vs {exact}");
    }
}

#[test]
fn rescaled_fields_approach_the_tangent_fields() {
    let chart = RescaledChart::new(&perturbed(), &[0.1, 0.0, 0.0]).unwrap();
    let tangent = &chart.nilpotent().fields;
    let gap = |r: f64| chart.fields_at(r).iter().zip(tangent).map(|(a, b)| a.sub(b).unwrap().max_abs_coeff()).fold(0.0, f64::max);
    let (g1, g2) = (gap(0.2), gap(0.1));
    assert!(g2 < g1 && g2 > 0.0);
    assert!((g1 / g2 - 2.0).abs() < 0.5, "{g1} {g2}");
}

#[test]
fn group_deviations_stay_at_noise_level() {
    let cfg = ConvergenceConfig { pairs: 8, ..Default::default() };
    let r = distance_convergence(&common::heisenberg(), &[vec![0.0; 3], vec![0.2, -0.2, 0.0]], &[0.4, 0.2], &cfg).unwrap();
    assert!(r.sup_deviation.iter().all(|&d| d < 5e-3), "{:?}", r.sup_deviation);
}

#[test]
fn non_group_deviations_decrease() {
    let cfg = ConvergenceConfig { pairs: 8, seed: 2, ..Default::default() };
    let r = distance_convergence(&perturbed(), &[vec![0.2, 0.0, 0.0]], &[0.4, 0.2, 0.1], &cfg).unwrap();
    assert!(r.sup_deviation.windows(2).all(|w| w[1] <= w[0]), "{:?}", r.sup_deviation);
    assert!(r.sup_deviation[0] > 1e-3);
}

#[test]
fn frame_remainder_is_first_order() {
    let r = frame_convergence(&perturbed(), &[0.1, 0.0, 0.0], &[0.2, 0.1, 0.05], 0.5, 1).unwrap();
    for w in r.deviation.windows(2) {
        assert!(w[1] < 0.6 * w[0], "{:?}", r.deviation);
    }
    let spread = r.ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max) / r.ratios.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(spread < 1.5, "{:?}", r.ratios);
}

#[test]
fn rotated_frames_differ_by_an_isometry() {
    let f = perturbed();
    let t = 0.4f64;
    let g = f.rotate_horizontal(&[vec![t.cos(), -t.sin()], vec![t.sin(), t.cos()]]).unwrap();
    let cfg = IsometryConfig { pairs: 6, seed: 1, ..Default::default() };
    let r = coordinate_change_isometry(&f, &g, &[0.0; 3], &[0.1, 0.01], &ChartBox::cube(3, 10.0), &cfg).unwrap();
    let (first, last) = (&r.per_epsilon[0], &r.per_epsilon[1]);
    assert!(last.orthogonality <= first.orthogonality + 1e-12);
    assert!(last.isometry_residual < 2e-2);
    assert!(last.derivative_gap < 1e-2);
    // The horizontal block of the fitted map is the rotation itself.
    assert!((last.fitted[(0, 0)] - t.cos()).abs() < 1e-2);
    assert!((last.fitted[(1, 0)] - t.sin()).abs() < 1e-2);
}

#[test]
fn uniform_radius_is_positive_on_a_grid() {
    let qs: Vec<Vec<f64>> = [-0.2, 0.0, 0.2].iter().map(|&a| vec![a, 0.0, 0.0]).collect();
    let cfg = UniformRadiusConfig { count: 8, ..Default::default() };
    let r = uniform_radius_estimate(&perturbed(), &qs, 0.5, &ChartBox::cube(3, 10.0), &cfg).unwrap();
    assert!(r.infimum > 0.05, "{:?}", r.per_point);
    assert!(r.infimum <= 4.0);
}
