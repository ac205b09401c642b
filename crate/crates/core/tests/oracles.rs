//! Frozen reference values, each computed independently of the code under test.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64 as C64;

use envsteer::channel::{kraus_from_model, natural_representation, ChannelAnalysis, SteeringClass};
use envsteer::linalg::{eig_general, Operator};
use envsteer::model::{presets, FrequencyConvention, ModelOperators};
use envsteer::stats::{commuting_peak_distribution, fixed_point_peak_centers};
use envsteer::trajectory::{brute_force_distribution, total_variation, MeasurementInstrument};

const TOL: f64 = 1e-12;

#[test]
fn t_zero_kraus_pair() {
    let ops = ModelOperators::new(Operator::real_diag(&[0.4, -1.1, 2.0]), Operator::identity(3)).unwrap();
    let dphi = 0.7;
    let k = kraus_from_model(&ops, 0.0, dphi).unwrap();
    let e = C64::from_polar(1.0, dphi);
    assert!(k.m0.distance(&Operator::identity(3).scale((C64::new(1.0, 0.0) - e) * 0.5)) < TOL);
    assert!(k.m1.distance(&Operator::identity(3).scale((C64::new(1.0, 0.0) + e) * 0.5)) < TOL);
}

#[test]
fn illustrative_gamma_zero_spectrum() {
    // Diagonal Kraus entries give the coherence eigenvalue cos 2t by hand.
    let model = presets::illustrative(0.0).build(FrequencyConvention::Angular).unwrap();
    let k = kraus_from_model(&model.ops, model.t, model.delta_phi).unwrap();
    let mut mods: Vec<f64> = eig_general(natural_representation(&k).matrix())
        .unwrap()
        .values
        .iter()
        .map(|l| l.re)
        .collect();
    mods.sort_by(|a, b| b.total_cmp(a));
    let c = 0.825_335_614_909_678_3; // cos(0.6)
    for (got, want) in mods.iter().zip([1.0, 1.0, c, c]) {
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
    let a = ChannelAnalysis::new(&model).unwrap();
    assert_eq!(a.classification, SteeringClass::Polarization);
    let mut centers = fixed_point_peak_centers(&a);
    centers.sort_by(f64::total_cmp);
    // (1 ∓ sin 0.6)/2
    assert!((centers[0] - 0.217_678_763_302_482_3).abs() < TOL);
    assert!((centers[1] - 0.782_321_236_697_517_6).abs() < TOL);
}

#[test]
fn secular_pair_sector_weights_from_mixed_state() {
    let model = presets::two_spin_bath(1000.0, true).build(FrequencyConvention::Angular).unwrap();
    let a = ChannelAnalysis::new(&model).unwrap();
    let w = a.fixed.weights(&Operator::maximally_mixed(4));
    assert_eq!(a.fixed.ranks, vec![1, 2, 1]);
    for (got, want) in w.iter().zip([0.25, 0.5, 0.25]) {
        assert!((got - want).abs() < 1e-12);
    }
}

#[test]
fn commuting_peak_shape_tracks_enumeration() {
    let model = presets::single_spin(0.0).build(FrequencyConvention::Angular).unwrap();
    let k = kraus_from_model(&model.ops, model.t, model.delta_phi).unwrap();
    let inst = MeasurementInstrument::from_kraus(&k);
    let rho0 = Operator::maximally_mixed(2);
    let m = 10;
    let exact = brute_force_distribution(&rho0, &inst, m).unwrap();
    let approx = commuting_peak_distribution(&rho0, &model.ops, model.t, FRAC_PI_2, m).unwrap();
    assert!(total_variation(&exact.ones, &approx) < 0.05);
}

#[test]
fn single_spin_zero_field_centers() {
    // ∓ sin(2π · 37.7e3 · 1e-6) / 2 in X.
    let model = presets::single_spin(0.0).build(FrequencyConvention::Angular).unwrap();
    let mut c = fixed_point_peak_centers(&ChannelAnalysis::new(&model).unwrap());
    c.sort_by(f64::total_cmp);
    assert!((c[0] - 0.5 + 0.117_333_547_646_330_1).abs() < 1e-12, "{}", c[0] - 0.5);
}
