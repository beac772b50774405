use rmf_core::tilt::*;
use rmf_core::*;

const X: u64 = 100_000_000;

fn table() -> PrimeTable {
    build_prime_table(1000).unwrap()
}

#[test]
fn full_space_has_probability_one() {
    let t = table();
    let spec = TiltSpec::equal_mass_scales(RmfModel::Steinhaus, X, 0.0, 0.0, 4.0, 0.08, 3, &t).unwrap();
    let p = tilted_probability(&spec, &BandEvent::everything(3), 2000, 1, &t).unwrap();
    assert_eq!(p.estimate, 1.0);
}

#[test]
fn oscillating_point_pulls_mean_toward_zero() {
    let t = table();
    let base = TiltSpec::increment_scales(RmfModel::Steinhaus, X, 0.0, 0.0, &[0]).unwrap();
    let mean_at = |tj: f64| {
        let s = sample_tilt_trials(&base.clone().t_points(vec![tj]), 20_000, 2, &t).unwrap();
        s.tilted_mean(|v| v[0][0])
    };
    let (m0, se0) = mean_at(0.0);
    let (m1, se1) = mean_at(40.0);
    let params = scale_params(&base.clone().t_points(vec![40.0]), &t).unwrap();
    assert!(params[0].mean.abs() < 0.1, "reference mean at t_j = 40 is {}", params[0].mean);
    assert!(m1.abs() + 4.0 * se1 < m0 - 4.0 * se0, "t_j = 0: {m0} ± {se0}; t_j = 40: {m1} ± {se1}");
}

#[test]
fn event_weight_matches_full_weight() {
    let t = build_prime_table(1000).unwrap();
    let spec = TiltSpec::equal_mass_scales(RmfModel::Steinhaus, X, 0.0, 0.0, 20.0, 0.1, 2, &t).unwrap();
    let params = scale_params(&spec, &t).unwrap();
    let lower: Vec<f64> = params.iter().map(|p| p.mean - p.var.sqrt()).collect();
    let upper: Vec<f64> = params.iter().map(|p| p.mean + p.var.sqrt()).collect();
    let ev = BandEvent::bands(lower, upper);
    let a = tilted_probability(&spec, &ev, 40_000, 3, &t).unwrap();
    let b = tilted_probability(&spec.clone().weight_range(WeightRange::Full), &ev, 40_000, 3, &t).unwrap();
    assert!((a.estimate - b.estimate).abs() <= 4.0 * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt(), "{} vs {}", a.estimate, b.estimate);
}

#[test]
fn mismatched_dimensions_are_rejected() {
    let t = table();
    let spec = TiltSpec::equal_mass_scales(RmfModel::Steinhaus, X, 0.0, 0.0, 4.0, 0.08, 3, &t).unwrap();
    assert!(tilted_probability(&spec, &BandEvent::everything(2), 2000, 1, &t).is_err());
    assert!(gaussian_band_reference(&spec, &BandEvent::everything(4), &t).is_err());
    let rad = TiltSpec::equal_mass_scales(RmfModel::Rademacher, X, 0.0, 1.0, 4.0, 0.08, 2, &t).unwrap().two_product(1.0);
    assert!(rad.validate(&t).is_err());
}

#[test]
fn rademacher_band_matches_reference() {
    let t = table();
    let spec = TiltSpec::equal_mass_scales(RmfModel::Rademacher, X, 0.0, 2.0, 20.0, 0.15, 1, &t).unwrap();
    let p = &scale_params(&spec, &t).unwrap()[0];
    let ev = BandEvent::bands(vec![p.mean - p.var.sqrt()], vec![p.mean + p.var.sqrt()]);
    let r = girsanov_compare(&spec, &ev, 40_000, 4, CompareRule::Absolute { k_se: 4.0, abs: 0.05 }, &t).unwrap();
    assert!(r.pass, "tilted {} ± {} vs reference {}", r.tilted.estimate, r.tilted.stderr, r.reference);
}
