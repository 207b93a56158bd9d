mod common;

use srgeo_core::distance::DistanceEngine;
use srgeo_core::flows::ChartBox;
use srgeo_core::gauge::{GaugeConfig, GaugeTable};
use srgeo_core::measure::{
    divergence_identity_check, double_blowup_check, extension_independence_check, federer_density, frame_inverse_polys, sr_surface_measure, BallOracle, BumpField,
    FedererConfig, HypersurfacePatch, QuadConfig, Region, Slicer, SphericalFactorConfig, StarDomain, VolumeForm,
};
use srgeo_core::nilpotent::nilpotent_at;
use srgeo_core::{MetricExtension, Poly, VectorField};

const FRAME: MetricExtension = MetricExtension::FrameOrthonormal;

fn quad() -> QuadConfig {
    QuadConfig::default()
}

#[test]
fn unit_square_has_unit_area() {
    let f = common::euclidean(3);
    let patch = HypersurfacePatch::coordinate_plane(3, 2, 0.4, vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
    let m = sr_surface_measure(&patch, &VolumeForm::lebesgue(3), &FRAME, &f, Region::All, &quad()).unwrap();
    assert!((m.value - 1.0).abs() < 1e-12);
    let doubled = sr_surface_measure(&patch, &VolumeForm::lebesgue(3).scaled(2.0), &FRAME, &f, Region::All, &quad()).unwrap();
    assert!((doubled.value - 2.0).abs() < 1e-12);
}

#[test]
fn measure_is_additive_over_sub_boxes() {
    let f = common::heisenberg();
    let height = &common::x(2, 0).scale(&0.3) + &(&common::x(2, 1) * &common::x(2, 1)).scale(&0.2);
    let patch = HypersurfacePatch::graph(3, 0, height, vec![-0.5, -0.5], vec![0.5, 0.5]).unwrap();
    let omega = VolumeForm::lebesgue(3);
    let whole = sr_surface_measure(&patch, &omega, &FRAME, &f, Region::All, &quad()).unwrap().value;
    let left = sr_surface_measure(&patch.restricted(vec![-0.5, -0.5], vec![0.1, 0.5]).unwrap(), &omega, &FRAME, &f, Region::All, &quad()).unwrap().value;
    let right = sr_surface_measure(&patch.restricted(vec![0.1, -0.5], vec![0.5, 0.5]).unwrap(), &omega, &FRAME, &f, Region::All, &quad()).unwrap().value;
    assert!((left + right - whole).abs() < 1e-8 * whole);
}

#[test]
fn heisenberg_plane_in_balls_scales_with_the_homogeneous_dimension() {
    let f = common::heisenberg();
    let patch = HypersurfacePatch::coordinate_plane(3, 0, 0.0, vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
    let oracle = BallOracle::for_frame(&f, ChartBox::cube(3, 10.0), &GaugeConfig::default()).unwrap();
    let omega = VolumeForm::lebesgue(3);
    let ball = |r: f64| {
        let region = Region::Ball { center: &[0.0; 3], radius: r, oracle: &oracle, refine: true };
        sr_surface_measure(&patch, &omega, &FRAME, &f, region, &quad()).unwrap().value
    };
    let (big, small) = (ball(0.5), ball(0.25));
    assert!((big / small / 8.0 - 1.0).abs() < 0.05, "{big} {small}");
    let exact = explicit_slice_area(0.0) * 0.125;
    assert!((big - exact).abs() < 0.01 * exact, "{big} vs {exact}");
}

/// Area of `{x = a} ∩ B(0, 1)` from the explicit distance: for each `y` the
/// section in `t` is `[−t*, t*]` with `d(a, y, t*) = 1`.
fn explicit_slice_area(a: f64) -> f64 {
    let n = 2000;
    let mut area = 0.0;
    for k in 0..n {
        let y = -1.0 + 2.0 * (k as f64 + 0.5) / n as f64;
        if a.hypot(y) >= 1.0 {
            continue;
        }
        let (mut lo, mut hi) = (0.0, 0.5);
        for _ in 0..60 {
            let m = 0.5 * (lo + hi);
            if common::heisenberg_distance(&[a, y, m]) <= 1.0 {
                lo = m;
            } else {
                hi = m;
            }
        }
        area += 2.0 * lo * 2.0 / n as f64;
    }
    area
}

#[test]
fn heisenberg_cross_sections_match_the_explicit_ball() {
    let f = common::heisenberg();
    let nf = nilpotent_at(&f, &[0.0; 3]).unwrap();
    let table = GaugeTable::shared(&nf, &GaugeConfig::default()).unwrap();
    let slicer = Slicer::new(table, &[1.0, 0.0, 0.0]).unwrap();
    for a in [0.0, 0.1, 0.25, 0.4] {
        let mc = slicer.cross_section(&[a, 0.0, 0.0], 40_000, 3, true).unwrap();
        let exact = explicit_slice_area(a);
        assert!((mc.value - exact).abs() < 4.0 * mc.std_error + 2e-3, "a {a}: {} +- {} vs {exact}", mc.value, mc.std_error);
    }
    // The off-center slice is larger: the maximum is not at the origin.
    assert!(explicit_slice_area(0.25) > explicit_slice_area(0.0) + 0.01);
}

#[test]
fn heisenberg_federer_density_finds_the_off_center_ball() {
    let f = common::heisenberg();
    let patch = HypersurfacePatch::coordinate_plane(3, 0, 0.0, vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
    let chart = ChartBox::cube(3, 10.0);
    let oracle = BallOracle::for_frame(&f, chart.clone(), &GaugeConfig::default()).unwrap();
    let engine = DistanceEngine::new(&f, chart);
    let cfg = FedererConfig { radii: vec![0.05], ..Default::default() };
    let d = federer_density(&patch, &VolumeForm::lebesgue(3), &FRAME, &f, &[0.0, 0.1], &oracle, &engine, &cfg).unwrap();
    let best = explicit_slice_area(0.25);
    assert!((d.value - best).abs() < 0.01 * best, "{} vs {best}", d.value);
}

#[test]
fn flat_federer_density_and_linearity() {
    let f = common::euclidean(2);
    let patch = HypersurfacePatch::coordinate_plane(2, 0, 0.0, vec![-2.0], vec![2.0]).unwrap();
    let chart = ChartBox::cube(2, 10.0);
    let oracle = BallOracle::for_frame(&f, chart.clone(), &GaugeConfig::default()).unwrap();
    let engine = DistanceEngine::new(&f, chart);
    let fcfg = FedererConfig { radii: vec![0.1], ..Default::default() };
    let scfg = SphericalFactorConfig { mc_points: 20_000, seed: 4, ..Default::default() };
    let base = double_blowup_check(&patch, &VolumeForm::lebesgue(2), &FRAME, &f, &[0.3], &oracle, &engine, &fcfg, &scfg).unwrap();
    assert!((base.density.value - 2.0).abs() < 0.1);
    assert!(base.discrepancy < 0.05);
    for c in [2.0, 10.0] {
        let r = double_blowup_check(&patch, &VolumeForm::lebesgue(2).scaled(c), &FRAME, &f, &[0.3], &oracle, &engine, &fcfg, &scfg).unwrap();
        assert!((r.density.value - c * base.density.value).abs() < 1e-9 * c);
        assert!((r.rhs - c * base.rhs).abs() < 1e-9 * c);
        assert!((r.discrepancy - base.discrepancy).abs() < 1e-9);
    }
}

#[test]
fn divergence_theorem_in_the_flat_case() {
    let f = common::euclidean(3);
    let x1 = common::x(3, 0);
    let field = BumpField::plain(VectorField::new(vec![x1, Poly::zero(3), Poly::zero(3)]).unwrap());
    let domain = StarDomain::ball(vec![0.1, 0.0, -0.2], 0.7).unwrap();
    let r = divergence_identity_check(&VolumeForm::lebesgue(3), &FRAME, &f, &domain, &field, 16, 8).unwrap();
    let volume = 4.0 / 3.0 * std::f64::consts::PI * 0.7f64.powi(3);
    assert!((r.volume_integral - volume).abs() < 1e-4 * volume);
    assert!((r.boundary_integral - volume).abs() < 1e-4 * volume);
}

#[test]
fn disjoint_support_gives_zero() {
    let f = common::heisenberg();
    let field = BumpField::bumped(f.fields[0].clone(), vec![3.0, 0.0, 0.0], 0.5, 4);
    let domain = StarDomain::ball(vec![0.0; 3], 1.0).unwrap();
    let r = divergence_identity_check(&VolumeForm::lebesgue(3), &FRAME, &f, &domain, &field, 8, 4).unwrap();
    assert_eq!(r.volume_integral, 0.0);
    assert_eq!(r.boundary_integral, 0.0);
}

#[test]
fn curved_surface_does_not_see_the_vertical_extension() {
    let f = common::heisenberg();
    let height = &common::x(2, 0).scale(&0.3) + &(&common::x(2, 1) * &common::x(2, 1)).scale(&0.2);
    let patch = HypersurfacePatch::graph(3, 0, height, vec![-0.5, -0.5], vec![0.5, 0.5]).unwrap();
    let inv = frame_inverse_polys(&f).unwrap();
    let omega = VolumeForm::new(&Poly::one(3) + &(&common::x(3, 0) * &common::x(3, 0)).scale(&0.1));
    let same = extension_independence_check(&patch, &omega, &f, Region::All, &FRAME, &FRAME, &quad()).unwrap();
    assert_eq!(same.discrepancy, 0.0);
    for scale in [0.25, 4.0] {
        let other = MetricExtension::scaled_frame(&inv, &[1.0, 1.0, scale]);
        let r = extension_independence_check(&patch, &omega, &f, Region::All, &FRAME, &other, &quad()).unwrap();
        assert!(r.discrepancy < 1e-3, "{scale}: {}", r.discrepancy);
    }
}
