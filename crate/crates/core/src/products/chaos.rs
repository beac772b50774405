//! Chaos integrals ∫|F_k(1/2+σ+it)|² dt and the Parseval identity for
//! Dirichlet polynomials.

use num_complex::Complex64;
use serde::Serialize;

use super::{p_minus_s, ProductSpec};
use crate::error::{ensure, Result};
use crate::numtheory::PrimeTable;
use crate::rmf::{RmfModel, RmfSample};
use crate::stats::Compensated;

/// Trapezoid nodes of |F(·+it)|² on [t_lo, t_hi].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChaosGrid {
    pub t_lo: f64,
    pub t_hi: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl ChaosGrid {
    pub fn integral(&self) -> f64 {
        let n = self.values.len();
        if n < 2 {
            return 0.0;
        }
        let mut acc = Compensated::new();
        acc.add(0.5 * (self.values[0] + self.values[n - 1]));
        for v in &self.values[1..n - 1] {
            acc.add(*v);
        }
        acc.value() * self.dt
    }
}

/// Primes handled between rescalings of the running node products.
const CHUNK: usize = 32;
/// Steps between exact re-anchoring of the rotated phases.
const REANCHOR: usize = 256;

/// Evaluates |F_k(1/2+σ+i(spec.t + τ))|² on the trapezoid grid over
/// τ ∈ [t_lo, t_hi] with step at most dt.
pub fn chaos_grid(sample: &RmfSample, spec: &ProductSpec, t_lo: f64, t_hi: f64, dt: f64, table: &PrimeTable) -> Result<ChaosGrid> {
    spec.validate(table)?;
    ensure(t_hi > t_lo, || format!("need t_hi > t_lo, got [{t_lo}, {t_hi}]"))?;
    let max_dt = 1.0 / (10.0 * spec.log_x());
    ensure(dt > 0.0 && dt <= max_dt * (1.0 + 1e-12), || format!("dt = {dt} must lie in (0, 1/(10 log x) = {max_dt}]"))?;
    let cap = spec.cap();
    ensure(table.pi(cap) <= sample.values.len(), || "sample does not cover the product's primes".into())?;
    let steps = ((t_hi - t_lo) / dt).ceil().max(1.0) as usize;
    let h = (t_hi - t_lo) / steps as f64;
    let nodes = steps + 1;
    let sigma = spec.effective_sigma();
    let range = table.prime_range(1.0, cap);
    let primes = &table.primes()[range.clone()];
    let vals = &sample.values[range];

    let mut log_acc = vec![0.0f64; nodes];
    let mut prod = vec![1.0f64; nodes];
    let mut in_chunk = 0;
    for (&p, &f) in primes.iter().zip(vals) {
        let lp = (p as f64).ln();
        let w0 = f * p_minus_s(p, sigma, spec.t + t_lo);
        let r2 = w0.norm_sqr();
        let step = Complex64::from_polar(1.0, -h * lp);
        let mut w = w0;
        for (i, pr) in prod.iter_mut().enumerate() {
            if i % REANCHOR == 0 && i > 0 {
                w = w0 * Complex64::from_polar(1.0, -(i as f64) * h * lp);
            }
            // |1 ∓ w|² = 1 ∓ 2 Re w + |w|²
            *pr *= match sample.model {
                RmfModel::Steinhaus => 1.0 - 2.0 * w.re + r2,
                RmfModel::Rademacher => 1.0 + 2.0 * w.re + r2,
            };
            w *= step;
        }
        in_chunk += 1;
        if in_chunk == CHUNK {
            for (a, pr) in log_acc.iter_mut().zip(prod.iter_mut()) {
                *a += pr.ln();
                *pr = 1.0;
            }
            in_chunk = 0;
        }
    }
    let sign = match sample.model {
        RmfModel::Steinhaus => -1.0,
        RmfModel::Rademacher => 1.0,
    };
    let values = log_acc.iter().zip(&prod).map(|(a, pr)| (sign * (a + pr.ln())).exp()).collect();
    Ok(ChaosGrid { t_lo, t_hi, dt: h, values })
}

/// Trapezoid quadrature of |F_k(1/2+σ+it)|² over [t_lo, t_hi].
pub fn chaos_integral(sample: &RmfSample, spec: &ProductSpec, t_lo: f64, t_hi: f64, dt: f64, table: &PrimeTable) -> Result<f64> {
    Ok(chaos_grid(sample, spec, t_lo, t_hi, dt, table)?.integral())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ParsevalResult {
    pub lhs: f64,
    pub rhs: f64,
    /// Analytic estimate of the discarded |t| > T part, already added to rhs.
    pub rhs_tail: f64,
}

impl ParsevalResult {
    pub fn rel_gap(&self) -> f64 {
        (self.lhs - self.rhs).abs() / self.lhs.abs()
    }
}

/// Both sides of ∫_0^∞ |Σ_{n≤u} a_n|² u^{-1-2σ} du = (1/2π)∫ |A(σ+it)|²/|σ+it|² dt
/// for the Dirichlet polynomial A(s) = Σ_{n≤N} a_n n^{-s}. `coeffs[n]` is
/// a_n; `coeffs[0]` is ignored.
///
/// The left side is exact: on [n, n+1) the partial sum is constant, and past
/// N the tail integral is |A(N)|² N^{-2σ}/(2σ). The right side is composite
/// Simpson on [−T, T]; beyond T, |A|² is replaced by its mean value
/// Σ|a_n|² n^{-2σ}, which is exact for a single term.
pub fn parseval_check_coeffs(coeffs: &[Complex64], sigma: f64, t_max: f64, h: f64) -> Result<ParsevalResult> {
    ensure(sigma > 0.0, || format!("sigma = {sigma} must be > 0"))?;
    ensure(coeffs.len() >= 2, || "need at least one coefficient a_1".into())?;
    ensure(t_max > 0.0 && h > 0.0, || "t_max and h must be positive".into())?;
    let n_max = coeffs.len() - 1;
    let two_s = 2.0 * sigma;

    let mut lhs = Compensated::new();
    let mut run = Complex64::new(0.0, 0.0);
    for n in 1..=n_max {
        run += coeffs[n];
        let a2 = run.norm_sqr();
        let nf = n as f64;
        let piece = if n < n_max {
            (nf.powf(-two_s) - (nf + 1.0).powf(-two_s)) / two_s
        } else {
            nf.powf(-two_s) / two_s
        };
        lhs.add(a2 * piece);
    }

    // Simpson over [−T, T] with an even number of panels.
    let mut panels = (2.0 * t_max / h).ceil() as usize;
    panels += panels % 2;
    let hh = 2.0 * t_max / panels as f64;
    let terms: Vec<(Complex64, Complex64, f64)> = (1..=n_max)
        .filter(|&n| coeffs[n] != Complex64::new(0.0, 0.0))
        .map(|n| {
            let ln = (n as f64).ln();
            let base = coeffs[n] * (-sigma * ln).exp();
            (base, Complex64::from_polar(1.0, -hh * ln), ln)
        })
        .collect();
    let mut z: Vec<Complex64> = terms.iter().map(|(b, _, ln)| b * Complex64::from_polar(1.0, t_max * ln)).collect();
    let mut rhs = Compensated::new();
    for i in 0..=panels {
        if i % REANCHOR == 0 && i > 0 {
            let t = -t_max + i as f64 * hh;
            for (zk, (b, _, ln)) in z.iter_mut().zip(&terms) {
                *zk = b * Complex64::from_polar(1.0, -t * ln);
            }
        }
        let t = -t_max + i as f64 * hh;
        let a: Complex64 = z.iter().sum();
        let w = if i == 0 || i == panels { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        rhs.add(w * a.norm_sqr() / (sigma * sigma + t * t));
        for (zk, (_, st, _)) in z.iter_mut().zip(&terms) {
            *zk *= st;
        }
    }
    let main = rhs.value() * hh / 3.0 / std::f64::consts::TAU;
    let mean_sq: f64 = (1..=n_max).map(|n| coeffs[n].norm_sqr() * (n as f64).powf(-two_s)).sum();
    let tail = mean_sq * (std::f64::consts::FRAC_PI_2 - (t_max / sigma).atan()) / sigma / std::f64::consts::PI;
    Ok(ParsevalResult { lhs: lhs.value(), rhs: main + tail, rhs_tail: tail })
}

/// Default quadrature range and step for [`parseval_check`].
pub const PARSEVAL_T_MAX: f64 = 1000.0;
pub const PARSEVAL_STEP: f64 = 0.005;

/// Parseval check for a_n = f(n), n ≤ x.
pub fn parseval_check(sample: &RmfSample, x: u64, sigma: f64, table: &PrimeTable) -> Result<ParsevalResult> {
    let coeffs = sample.dense_values(x, table)?;
    parseval_check_coeffs(&coeffs, sigma, PARSEVAL_T_MAX, PARSEVAL_STEP)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numtheory::build_prime_table;
    use crate::products::log_product;
    use crate::rmf::sample_rmf;
    use crate::rng::{Domain, StreamId};
    use approx::assert_abs_diff_eq;

    fn table() -> &'static PrimeTable {
        static T: std::sync::OnceLock<PrimeTable> = std::sync::OnceLock::new();
        T.get_or_init(|| build_prime_table(10_000).unwrap())
    }

    #[test]
    fn one_term_identity() {
        let mut c = vec![Complex64::new(0.0, 0.0); 2];
        c[1] = Complex64::new(1.0, 0.0);
        let r = parseval_check_coeffs(&c, 0.1, PARSEVAL_T_MAX, PARSEVAL_STEP).unwrap();
        assert_abs_diff_eq!(r.lhs, 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.rhs, 5.0, epsilon = 1e-6);
        assert!(parseval_check_coeffs(&c, 0.0, 10.0, 0.01).is_err());
    }

    #[test]
    fn random_sample_agrees() {
        let t = table();
        for model in [RmfModel::Steinhaus, RmfModel::Rademacher] {
            let s = sample_rmf(model, 100, t, StreamId::new(4, Domain::Rmf, 0)).unwrap();
            let r = parseval_check(&s, 100, 0.1, t).unwrap();
            assert!(r.rel_gap() < 0.01, "{model}: {r:?}");
            let coeffs = s.dense_values(100, t).unwrap();
            let r2 = parseval_check_coeffs(&coeffs, 0.1, 2.0 * PARSEVAL_T_MAX, PARSEVAL_STEP).unwrap();
            assert!((r2.rhs - r.rhs).abs() / r.rhs < 0.002);
        }
    }

    #[test]
    fn grid_matches_direct_product() {
        let t = table();
        for model in [RmfModel::Steinhaus, RmfModel::Rademacher] {
            let s = sample_rmf(model, 10_000, t, StreamId::new(5, Domain::Rmf, 1)).unwrap();
            let spec = ProductSpec::new(model, 10_000).sigma(0.05).t(0.2);
            let dt = 1.0 / (10.0 * spec.log_x());
            let g = chaos_grid(&s, &spec, -0.5, 0.5, dt, t).unwrap();
            for (i, v) in g.values.iter().enumerate().step_by(37) {
                let tau = -0.5 + i as f64 * g.dt;
                let z = log_product(&s, &spec.t(0.2 + tau), t).unwrap();
                assert!((v / (2.0 * z.re).exp() - 1.0).abs() < 1e-9, "{model} node {i}");
            }
        }
    }

    #[test]
    fn constant_integrand_and_guards() {
        let t = table();
        let s = sample_rmf(RmfModel::Steinhaus, 20, t, StreamId::new(6, Domain::Rmf, 0)).unwrap();
        let spec = ProductSpec::new(RmfModel::Steinhaus, 20).k(1);
        let dt = 1.0 / (10.0 * spec.log_x());
        assert_abs_diff_eq!(chaos_integral(&s, &spec, -0.3, 0.4, dt, t).unwrap(), 0.7, epsilon = 1e-12);
        assert!(chaos_integral(&s, &spec, -0.3, 0.4, 2.0 * dt, t).is_err());
        assert!(chaos_integral(&s, &spec, 0.4, 0.4, dt, t).is_err());
    }

    #[test]
    fn halving_dt_is_stable() {
        let t = table();
        let spec = ProductSpec::new(RmfModel::Steinhaus, 10_000).sigma(2.0 / 10_000f64.ln());
        let dt = 1.0 / (10.0 * spec.log_x());
        for trial in 0..5 {
            let s = sample_rmf(RmfModel::Steinhaus, 10_000, t, StreamId::new(7, Domain::Rmf, trial)).unwrap();
            let a = chaos_integral(&s, &spec, -0.5, 0.5, dt, t).unwrap();
            let b = chaos_integral(&s, &spec, -0.5, 0.5, dt / 2.0, t).unwrap();
            assert!((a - b).abs() / b < 0.01);
        }
    }
}
