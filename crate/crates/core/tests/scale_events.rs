use rmf_core::products::{scale_event_fail_prob, ScaleEventSpec};
use rmf_core::*;

// At x = 10^6 the scale range k..=floor(log log x) - B - 2 is nonempty only
// for B = 0.
#[test]
fn good_event_failure_is_rare() {
    let x = 1_000_000;
    let t = build_prime_table(x).unwrap();
    let (q, c) = (0.75, 2.0);
    let spec = ScaleEventSpec::good_event(RmfModel::Steinhaus, x, 0, q, c, 0).unwrap();
    let p = scale_event_fail_prob(&spec, 10_000, 31, &t).unwrap();
    let llx = (x as f64).ln().ln();
    let bound = 10.0 * (-2.0 * c * llx.sqrt().min(1.0 / (1.0 - q))).exp();
    assert!(p.estimate <= bound, "fail prob {} ± {} vs {bound}", p.estimate, p.stderr);
}
