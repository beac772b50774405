//! Acceptance run: one PASS/FAIL line per criterion A1..A13.
//!
//! Exits 0 regardless of outcome unless ACCEPTANCE_STRICT is set, so known
//! failures are reported without blocking the rest of the suite.

use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use rmf_core::characters::build_character_table;
use rmf_core::experiments::*;
use rmf_core::products::{log_product, mean_square_exact, parseval_check, parseval_check_coeffs, two_point_mean_square};
use rmf_core::stats::mean_se;
use rmf_core::tilt::*;
use rmf_core::walks::*;
use rmf_core::*;

type Check = Result<(bool, String)>;
type Criterion = (&'static str, fn() -> Check);

fn within(v: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&v)
}

/// Exact second moments at x = 10^3, 10^5 trials.
fn a1() -> Check {
    let t = build_prime_table(1000)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for model in [RmfModel::Steinhaus, RmfModel::Rademacher] {
        let m = estimate_moment(model, 1000, 1.0, 100_000, 101, &t)?;
        let exact = match model {
            RmfModel::Steinhaus => 1000.0,
            RmfModel::Rademacher => t.squarefree_count(1000)? as f64,
        };
        let z = m.z_score(exact);
        ok &= z.abs() <= 3.0;
        parts.push(format!("{model} {:.1}±{:.1} vs {exact} (z={z:.2})", m.estimate, m.stderr));
    }
    Ok((ok, parts.join("; ")))
}

/// Character oracle: exact orthogonality and agreement with E|S(100)|.
fn a2() -> Check {
    let small = build_character_table(11)?.char_sum_moment(10, 1.0)?;
    let big = build_character_table(10007)?.char_sum_moment(100, 0.5)?;
    let t = build_prime_table(100)?;
    let mc = estimate_moment(RmfModel::Steinhaus, 100, 0.5, 100_000, 102, &t)?;
    let exact_ok = small == 10.0;
    let close = (mc.estimate - big).abs() <= 0.05 * big + 3.0 * mc.stderr;
    Ok((exact_ok && close, format!("x=10,p=11: {small}; x=100,p=10007: {big:.4} vs MC {:.4}±{:.4}", mc.estimate, mc.stderr)))
}

fn mc_product_mean(spec: &ProductSpec, trials: u64, seed: u64, t: &PrimeTable, g: impl Fn(&RmfSample) -> f64 + Sync) -> Result<(f64, f64)> {
    let v: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| Ok(g(&sample_rmf(spec.model, spec.x, t, StreamId::new(seed, Domain::Rmf, i))?)))
        .collect::<Result<_>>()?;
    Ok(mean_se(&v))
}

/// Euler mean squares at x = 10^4, sigma = 2/log x, plus the p = 5 anchors.
fn a3() -> Check {
    let x = 10_000;
    let t = build_prime_table(x)?;
    let sigma = 2.0 / (x as f64).ln();
    let mut ok = true;
    let mut parts = Vec::new();
    for model in [RmfModel::Steinhaus, RmfModel::Rademacher] {
        let spec = ProductSpec::new(model, x).sigma(sigma);
        let exact = mean_square_exact(&spec, Power::Plus2, &t)?;
        let (m, se) = mc_product_mean(&spec, 100_000, 103, &t, |s| (2.0 * log_product(s, &spec, &t).unwrap().re).exp())?;
        let d = (m - exact).abs();
        ok &= d <= 3.0 * se && d <= 0.05 * exact;
        parts.push(format!("{model} {m:.4}±{se:.4} vs {exact:.4}"));
    }
    let w = 5f64.powf(-0.5);
    for (model, anchor) in [(RmfModel::Steinhaus, 1.25), (RmfModel::Rademacher, 1.2)] {
        let spec = ProductSpec::new(model, 5);
        let (m, se) = mc_product_mean(&spec, 100_000, 104, &t, |s| {
            let f = s.at_prime(5, &t);
            match model {
                RmfModel::Steinhaus => 1.0 / (Complex64::new(1.0, 0.0) - f * w).norm_sqr(),
                RmfModel::Rademacher => (Complex64::new(1.0, 0.0) + f * w).norm_sqr(),
            }
        })?;
        ok &= (m - anchor).abs() <= 3.0 * se;
        parts.push(format!("p=5 {model} {m:.4}±{se:.4} vs {anchor}"));
    }
    Ok((ok, parts.join("; ")))
}

/// Two-point formula at x = 10^4, gap 0.3.
fn a4() -> Check {
    let x = 10_000;
    let t = build_prime_table(x)?;
    let spec = ProductSpec::new(RmfModel::Steinhaus, x).sigma(2.0 / (x as f64).ln());
    let shifted = spec.t(0.3);
    let exact = two_point_mean_square(&spec, 0.3, &t)?;
    let (m, se) = mc_product_mean(&spec, 100_000, 105, &t, |s| {
        (2.0 * (log_product(s, &spec, &t).unwrap().re + log_product(s, &shifted, &t).unwrap().re)).exp()
    })?;
    Ok(((m - exact).abs() <= 3.0 * se + 0.05 * exact, format!("{m:.4}±{se:.4} vs oracle {exact:.4}")))
}

/// Single-scale Girsanov band at x = 10^8, top window, 10^5 trials.
fn a5() -> Check {
    let x = 100_000_000;
    let t = build_prime_table(1000)?;
    let spec = TiltSpec::increment_scales(RmfModel::Steinhaus, x, 0.0, 0.0, &[0])?;
    let p = &scale_params(&spec, &t)?[0];
    let s = p.var.sqrt();
    let ev = BandEvent::bands(vec![p.mean - s], vec![p.mean + s]);
    let r = girsanov_compare(&spec, &ev, 100_000, 106, CompareRule::Absolute { k_se: 4.0, abs: 0.02 }, &t)?;
    Ok((r.pass, format!("tilted {:.4}±{:.4} vs N(mu,s^2) band {:.4}; ESS {}", r.tilted.estimate, r.tilted.stderr, r.reference, r.tilted.snapshot["ess"])))
}

const TILT_X: u64 = 100_000_000;
const TILT_MASS: f64 = 0.08;

fn corridor_case(two: bool, n: usize, alpha: f64, trials: u64, t: &PrimeTable) -> Result<GirsanovRecord> {
    let mut spec = TiltSpec::equal_mass_scales(RmfModel::Steinhaus, TILT_X, 0.0, 0.0, 4.0, TILT_MASS, n, t)?;
    if two {
        spec = spec.two_product(1.0);
    }
    let params = scale_params(&spec, t)?;
    let sbar = params.iter().map(|p| p.var.sqrt()).sum::<f64>() / n as f64;
    let ev = BandEvent::drift_corridor(&spec, alpha * sbar, 10.0, &vec![0.0; n], t)?;
    girsanov_compare(&spec, &ev, trials, 107, CompareRule::Ratio { lo: 0.25, hi: 4.0 }, t)
}

/// Corridor scaling: n = 8 within [1/4, 4] of the DP reference, and the
/// two-product slope in [1.7, 2.3].
fn a6() -> Check {
    let t = build_prime_table(1000)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for two in [false, true] {
        let r = corridor_case(two, 8, 1.0, 100_000, &t)?;
        ok &= r.pass;
        parts.push(format!("n=8 {}: {:.4} vs ref {:.4} (ratio {:.2})", if two { "2-prod" } else { "1-prod" }, r.tilted.estimate, r.reference, r.ratio));
    }
    let mut slopes = Vec::new();
    for two in [false, true] {
        let (mut pts, mut refs) = (Vec::new(), Vec::new());
        for &(n, alpha) in &admissible_pairs(&[4, 8, 12], &[0.5, 1.0, 1.5]) {
            let r = corridor_case(two, n, alpha, 100_000, &t)?;
            pts.push((n as f64, alpha, r.tilted.estimate));
            refs.push((n as f64, alpha, r.reference));
        }
        slopes.push((scaling_fit(&pts)?.slope, scaling_fit(&refs)?.slope));
    }
    ok &= within(slopes[1].0, 1.7, 2.3);
    parts.push(format!(
        "slope 1-prod {:.2} (ref {:.2}), 2-prod {:.2} (ref {:.2}) vs [1.7, 2.3]",
        slopes[0].0, slopes[0].1, slopes[1].0, slopes[1].1
    ));
    Ok((ok, parts.join("; ")))
}

/// Walk probabilities: orthant, PR1 slope, constant-barrier facts at n = 400.
fn a7() -> Check {
    let orth = WalkSpec::unit(2, 0.0);
    let mc = walk_barrier_mc(&orth, 1_000_000, 108)?;
    let dp = walk_barrier_dp(&orth)?;
    let mut ok = mc.z_score(0.375).abs() <= 4.0 && (dp - 0.375).abs() <= 1e-4;
    let pts: Vec<_> = admissible_pairs(&[64, 256, 1024], &[2.0, 4.0, 8.0])
        .into_iter()
        .map(|(n, a)| Ok((n as f64, a, walk_barrier_mc(&WalkSpec::unit(n, a), 100_000, 109)?.estimate)))
        .collect::<Result<_>>()?;
    let slope = scaling_fit(&pts)?.slope;
    let v = vec![1.0; 400];
    let f1 = constant_barrier_prob(&v, 2.0, 100_000, 110)?.estimate * 20.0 / 2.0;
    let f2 = max_window_prob(&v, 0.0, 1.0, 100_000, 111)?.estimate * 20.0;
    ok &= within(slope, 0.8, 1.2) && within(f1, 0.25, 4.0) && f2 <= 4.0;
    Ok((ok, format!("orthant MC {:.4}±{:.4}, DP {dp:.6}; PR1 slope {slope:.3}; A1 scaled {f1:.3}; A2 scaled {f2:.3}", mc.estimate, mc.stderr)))
}

/// First-moment trend over 10^3..10^6 and theorem ratios, 10^4 trials.
fn a8() -> Check {
    let xs = [1_000, 10_000, 100_000, 1_000_000];
    let t = build_prime_table(1_000_000)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for (q, rows) in [0.5, 0.75].into_iter().zip(theorem_ratios(RmfModel::Steinhaus, &xs, &[0.5, 0.75], 10_000, 112, &t)?) {
        ok &= rows.iter().all(|r| within(r.ratio, 0.125, 8.0));
        let ratios: Vec<String> = rows.iter().map(|r| format!("{:.3}", r.ratio)).collect();
        parts.push(format!("q={q} ratios [{}]", ratios.join(", ")));
        if q == 0.5 {
            let norm: Vec<f64> = rows.iter().map(|r| r.normalized).collect();
            let strict = norm.windows(2).all(|w| w[1] < w[0]);
            let allowed = rows.iter().all(RatioRow::decrease_within_allowance);
            ok &= allowed;
            let shown: Vec<String> = norm.iter().map(|v| format!("{v:.4}")).collect();
            parts.push(format!("E|S|/sqrt(x) [{}] strict={strict} within-4se={allowed}", shown.join(", ")));
        }
    }
    Ok((ok, parts.join("; ")))
}

/// Chaos bridge ratio in [1/10, 10].
fn a9() -> Check {
    let t = build_prime_table(100_000)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for x in [10_000, 100_000] {
        for r in chaos_bridge_ratio(RmfModel::Steinhaus, x, &[0.5, 0.75], 2_000, 113, 10.0, default_grid_dt(x), &t)? {
            ok &= within(r.ratio, 0.1, 10.0);
            parts.push(format!("x={x} q={} ratio {:.3}", r.q, r.ratio));
        }
    }
    Ok((ok, parts.join("; ")))
}

/// Parseval at x = 100, sigma = 0.1, and the one-term case.
fn a10() -> Check {
    let t = build_prime_table(100)?;
    let mut worst: f64 = 0.0;
    for model in [RmfModel::Steinhaus, RmfModel::Rademacher] {
        for i in 0..5 {
            let s = sample_rmf(model, 100, &t, StreamId::new(114, Domain::Rmf, i))?;
            worst = worst.max(parseval_check(&s, 100, 0.1, &t)?.rel_gap());
        }
    }
    let one = parseval_check_coeffs(&[Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)], 0.1, 1000.0, 0.005)?;
    let ok = worst <= 0.01 && (one.lhs - 5.0).abs() <= 1e-6 && (one.rhs - 5.0).abs() <= 1e-6;
    Ok((ok, format!("max rel gap {worst:.2e}; one term lhs {:.9} rhs {:.9} vs 5", one.lhs, one.rhs)))
}

/// Tails at x = 10^5 and the Chebyshev sanity check.
fn a11() -> Check {
    let x = 100_000;
    let t = build_prime_table(x)?;
    let llx = (x as f64).ln().ln();
    let mut ok = true;
    let mut parts = Vec::new();
    for e in tail_probability(RmfModel::Steinhaus, x, &[2.0, 4.0], TailNorm::Scaled, 2.0, 20_000, 115, &t)? {
        let upper = 10.0 * e.lambda.ln().min(llx.sqrt()) / (e.lambda * e.lambda);
        let lower = 1e-2 / (e.lambda * e.lambda * llx * llx);
        ok &= e.estimate <= upper && e.estimate >= lower;
        parts.push(format!("lambda={} {:.4}±{:.4} in [{lower:.2e}, {upper:.3}]", e.lambda, e.estimate, e.stderr));
    }
    let c = &tail_probability(RmfModel::Steinhaus, x, &[3.0], TailNorm::Chebyshev, 2.0, 20_000, 116, &t)?[0];
    ok &= c.estimate <= 1.2 / 9.0;
    parts.push(format!("Chebyshev lambda=3 {:.4} <= {:.4}", c.estimate, 1.2 / 9.0));
    Ok((ok, parts.join("; ")))
}

/// Windowed log-modulus field at x = 10^6.
fn a12() -> Check {
    let x = 1_000_000;
    let t = build_prime_table(x)?;
    let grid = (x as f64).ln().floor() as usize;
    let f = field_max_experiment(x, grid, 2_000, 117, &t)?;
    let (_, var, se) = f.covariance[0];
    let rel = (var - f.variance_target).abs() / f.variance_target;
    let exact = field_covariance_exact(x, 0, &t)?;
    let dec = f.decreasing_on_range;
    let ok = rel <= 0.25 && dec.unwrap_or(true);
    let range = match dec {
        Some(b) => format!("decreasing over lag range: {b}"),
        None => format!("lag range [{:.2}, {:.4}] holds no grid lag (vacuous)", f.lag_range.0, f.lag_range.1),
    };
    Ok((ok, format!("lag-0 {var:.4}±{se:.4} (exact {exact:.4}) vs target {:.4}, off {:.0}%; {range}", f.variance_target, 100.0 * rel)))
}

/// Byte-identical CSV across runs and thread counts 1 and 8.
fn a13() -> Check {
    use ExperimentKind::*;
    let configs = [
        (Moments, "x = [1000, 10000]\nq = [0.5, 1.0]\ntrials = 2000"),
        (Tails, "x = [10000]\nlambda = [2.0]\ntrials = 5000"),
        (Walks, "n = [16, 64]\na = [1.0, 2.0]\ntrials = 5000"),
        (Tilt, "x = [100000000]\nn = [4]\na = [1.0]\ntrials = 5000"),
        (Bridge, "x = [10000]\nq = [0.5]\ntrials = 200"),
    ];
    let mut bad = Vec::new();
    for (kind, body) in configs {
        let base = Config::parse_for(body, kind)?;
        let mut outs = Vec::new();
        for threads in [1, 8, 8] {
            let mut c = base.clone();
            c.threads = Some(threads);
            outs.push(run_experiment(&c)?.table.to_csv()?);
        }
        if outs.iter().any(|o| o != &outs[0]) {
            bad.push(kind.name());
        }
    }
    Ok((bad.is_empty(), if bad.is_empty() { "5 experiments byte-identical".into() } else { format!("differs: {bad:?}") }))
}

fn main() {
    let checks: [Criterion; 13] = [
        ("A1", a1),
        ("A2", a2),
        ("A3", a3),
        ("A4", a4),
        ("A5", a5),
        ("A6", a6),
        ("A7", a7),
        ("A8", a8),
        ("A9", a9),
        ("A10", a10),
        ("A11", a11),
        ("A12", a12),
        ("A13", a13),
    ];
    let only = std::env::var("ACCEPTANCE_ONLY").ok();
    let mut failed = 0;
    for (name, f) in checks {
        if only.as_deref().is_some_and(|o| !o.split(',').any(|s| s == name)) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += usize::from(!pass);
        println!("{name} {} {detail} [{:.1}s]", if pass { "PASS" } else { "FAIL" }, start.elapsed().as_secs_f64());
    }
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
