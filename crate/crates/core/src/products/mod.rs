//! Random Euler products F_k(s) and their e-adic increments I_l(s), with
//! s = 1/2 + σ + it.
//!
//! Steinhaus factors are (1 − f(p)p^{-s})^{-1}; Rademacher factors are
//! (1 + f(p)p^{-s}). Logs are always sums of per-prime principal logs.

mod chaos;
mod events;

pub use chaos::{chaos_integral, parseval_check, parseval_check_coeffs, ChaosGrid, ParsevalResult};
pub use events::{ladder_density, scale_event_fail_prob, scale_event_holds, t_ladder, ScaleEventSpec, TPoints};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::numtheory::PrimeTable;
use crate::rmf::{RmfModel, RmfSample};
use crate::stats::{Compensated, CompensatedComplex};

/// x^{e^{-j}} for real j, computed as exp(log x · e^{-j}).
pub fn scale_point(x: f64, j: f64) -> f64 {
    (x.ln() * (-j).exp()).exp()
}

/// Prime window (x^{e^{-(l+2)}}, x^{e^{-(l+1)}}] of the increment I_l.
/// l = −1 gives the top window (x^{1/e}, x].
pub fn increment_window(x: f64, l: i32) -> (f64, f64) {
    (scale_point(x, l as f64 + 2.0), scale_point(x, l as f64 + 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductSpec {
    pub model: RmfModel,
    /// Shift off the half line, before the V shift.
    pub sigma: f64,
    pub t: f64,
    pub x: u64,
    /// Product over p ≤ x^{e^{-(k+1)}}; k = −1 is the full product over p ≤ x.
    pub k: i32,
    /// Adds 4V/log x to σ when positive.
    pub v: f64,
}

impl ProductSpec {
    pub fn new(model: RmfModel, x: u64) -> Self {
        ProductSpec { model, sigma: 0.0, t: 0.0, x, k: -1, v: 0.0 }
    }

    pub fn sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn t(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn k(mut self, k: i32) -> Self {
        self.k = k;
        self
    }

    pub fn v(mut self, v: f64) -> Self {
        self.v = v;
        self
    }

    pub fn log_x(&self) -> f64 {
        (self.x as f64).ln()
    }

    /// σ including the 4V/log x shift.
    pub fn effective_sigma(&self) -> f64 {
        if self.v > 0.0 {
            self.sigma + 4.0 * self.v / self.log_x()
        } else {
            self.sigma
        }
    }

    /// Largest prime admitted: x^{e^{-(k+1)}}.
    pub fn cap(&self) -> f64 {
        if self.k == -1 {
            self.x as f64
        } else {
            scale_point(self.x as f64, self.k as f64 + 1.0)
        }
    }

    pub fn validate(&self, table: &PrimeTable) -> Result<()> {
        ensure(self.x >= 2, || format!("x = {} must be >= 2", self.x))?;
        ensure(self.x <= table.limit(), || format!("x = {} exceeds table limit {}", self.x, table.limit()))?;
        ensure(self.k >= -1, || format!("k = {} must be >= -1", self.k))?;
        let llx = self.log_x().ln();
        ensure(self.k as f64 <= llx.floor().max(0.0), || {
            format!("k = {} exceeds floor(log log x) = {}", self.k, llx.floor())
        })?;
        ensure(self.effective_sigma().is_finite() && self.t.is_finite(), || "sigma and t must be finite".into())
    }

    /// Increments l = k, k+1, ... whose windows start at or above 2, then the
    /// residual block of primes below the last of them.
    pub fn increment_indices(&self) -> (Vec<i32>, f64) {
        let x = self.x as f64;
        let mut ls = Vec::new();
        let mut l = self.k;
        loop {
            let (lo, _) = increment_window(x, l);
            if lo < 2.0 {
                break;
            }
            ls.push(l);
            l += 1;
        }
        let residual_top = increment_window(x, l).1;
        (ls, residual_top)
    }
}

/// The per-prime factor of log F at one prime: w = f(p)p^{-s}.
#[inline]
fn factor_log(model: RmfModel, w: Complex64) -> Complex64 {
    match model {
        RmfModel::Steinhaus => -(Complex64::new(1.0, 0.0) - w).ln(),
        RmfModel::Rademacher => (Complex64::new(1.0, 0.0) + w).ln(),
    }
}

/// p^{-s} with s = 1/2 + σ + it.
#[inline]
pub fn p_minus_s(p: u32, sigma: f64, t: f64) -> Complex64 {
    let lp = (p as f64).ln();
    Complex64::from_polar((-(0.5 + sigma) * lp).exp(), -t * lp)
}

/// Σ over primes in (lo, hi] of the per-prime log factor at s = 1/2+σ+it.
pub fn window_log(sample: &RmfSample, sigma: f64, t: f64, lo: f64, hi: f64, table: &PrimeTable) -> Result<Complex64> {
    ensure(hi <= sample.x_max as f64 || table.pi(hi) <= sample.values.len(), || {
        format!("window top {hi} exceeds the sample range {}", sample.x_max)
    })?;
    let range = table.prime_range(lo, hi);
    let primes = &table.primes()[range.clone()];
    let mut acc = CompensatedComplex::default();
    for (p, f) in primes.iter().zip(&sample.values[range]) {
        let w = f * p_minus_s(*p, sigma, t);
        if w.norm() >= 1.0 {
            return Err(Error::Domain(format!("|f(p) p^(-s)| = {} >= 1 at p = {p}", w.norm())));
        }
        acc.add(factor_log(sample.model, w));
    }
    Ok(acc.value())
}

/// log I_l(s) for the spec's σ and t. l ≥ −1.
pub fn log_increment(sample: &RmfSample, spec: &ProductSpec, l: i32, table: &PrimeTable) -> Result<Complex64> {
    spec.validate(table)?;
    ensure(l >= -1, || format!("increment index l = {l} must be >= -1"))?;
    let (lo, hi) = increment_window(spec.x as f64, l);
    window_log(sample, spec.effective_sigma(), spec.t, lo, hi, table)
}

/// log F_k(s): every prime ≤ the cap, in one ascending pass.
pub fn log_product(sample: &RmfSample, spec: &ProductSpec, table: &PrimeTable) -> Result<Complex64> {
    spec.validate(table)?;
    window_log(sample, spec.effective_sigma(), spec.t, 1.0, spec.cap(), table)
}

/// log of the residual block below the last increment window.
pub fn log_residual(sample: &RmfSample, spec: &ProductSpec, table: &PrimeTable) -> Result<Complex64> {
    spec.validate(table)?;
    let (_, top) = spec.increment_indices();
    window_log(sample, spec.effective_sigma(), spec.t, 1.0, top.min(spec.cap()), table)
}

/// Which power of |F| an exact mean refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Power {
    /// E|F|²
    Plus2,
    /// E|F|^{-2}
    Minus2,
}

/// Exact per-prime E|factor|^{±2} with w = p^{-s}, r = |w|.
fn per_prime_mean(model: RmfModel, power: Power, w: Complex64) -> f64 {
    let r2 = w.norm_sqr();
    let one = Complex64::new(1.0, 0.0);
    match (model, power) {
        // E|1 − z w|^{-2} = Σ r^{2k}
        (RmfModel::Steinhaus, Power::Plus2) => 1.0 / (1.0 - r2),
        (RmfModel::Steinhaus, Power::Minus2) => 1.0 + r2,
        (RmfModel::Rademacher, Power::Plus2) => 1.0 + r2,
        (RmfModel::Rademacher, Power::Minus2) => 0.5 * (1.0 / (one + w).norm_sqr() + 1.0 / (one - w).norm_sqr()),
    }
}

/// Exact E|F|^{±2} over primes in (lo, hi].
pub fn mean_square_window(model: RmfModel, power: Power, sigma: f64, t: f64, lo: f64, hi: f64, table: &PrimeTable) -> Result<f64> {
    ensure(sigma > -0.5, || format!("sigma = {sigma} must exceed -1/2"))?;
    let mut acc = Compensated::new();
    for &p in table.primes_in(lo, hi) {
        let w = p_minus_s(p, sigma, t);
        if w.norm() >= 1.0 {
            return Err(Error::Domain(format!("p^(-s) has modulus >= 1 at p = {p}")));
        }
        acc.add(per_prime_mean(model, power, w).ln());
    }
    Ok(acc.value().exp())
}

/// Exact E|F_k(s)|^{±2} for the spec.
pub fn mean_square_exact(spec: &ProductSpec, power: Power, table: &PrimeTable) -> Result<f64> {
    spec.validate(table)?;
    mean_square_window(spec.model, power, spec.effective_sigma(), spec.t, 1.0, spec.cap(), table)
}

/// Number of trapezoid nodes on the unit circle making the aliasing error of
/// an analytic integrand with radius r below 1e-18.
fn circle_nodes(r: f64) -> usize {
    let mut n = 64;
    while r.powi(n as i32) > 1e-18 && n < 1 << 16 {
        n *= 2;
    }
    n
}

/// Per-prime E|factor(w1)|²|factor(w2)|² by exact averaging over f(p).
pub fn two_point_prime_average(model: RmfModel, w1: Complex64, w2: Complex64) -> f64 {
    let one = Complex64::new(1.0, 0.0);
    match model {
        RmfModel::Steinhaus => {
            let n = circle_nodes(w1.norm().max(w2.norm()));
            let mut acc = Compensated::new();
            for i in 0..n {
                let z = Complex64::from_polar(1.0, std::f64::consts::TAU * i as f64 / n as f64);
                acc.add(1.0 / ((one - z * w1).norm_sqr() * (one - z * w2).norm_sqr()));
            }
            acc.value() / n as f64
        }
        RmfModel::Rademacher => {
            0.5 * ((one + w1).norm_sqr() * (one + w2).norm_sqr() + (one - w1).norm_sqr() * (one - w2).norm_sqr())
        }
    }
}

/// E[|F(1/2+σ+it)|²·|F(1/2+σ+i(t+t_gap))|²] by per-prime exact averages.
pub fn two_point_mean_square(spec: &ProductSpec, t_gap: f64, table: &PrimeTable) -> Result<f64> {
    spec.validate(table)?;
    let sigma = spec.effective_sigma();
    ensure(sigma > -0.5, || format!("sigma = {sigma} must exceed -1/2"))?;
    let mut acc = Compensated::new();
    for &p in table.primes_in(1.0, spec.cap()) {
        let w1 = p_minus_s(p, sigma, spec.t);
        let w2 = p_minus_s(p, sigma, spec.t + t_gap);
        acc.add(two_point_prime_average(spec.model, w1, w2).ln());
    }
    Ok(acc.value().exp())
}

/// Precomputed per-prime data for fast repeated evaluation of log|F|² over a
/// fixed prime range at a fixed s. Used by the Monte Carlo loops.
#[derive(Clone, Debug)]
pub struct PrimeBlock {
    pub model: RmfModel,
    /// Index range into the prime table (and into sample values).
    pub range: std::ops::Range<usize>,
    /// p^{-s} per prime.
    pub w: Vec<Complex64>,
}

impl PrimeBlock {
    pub fn new(model: RmfModel, sigma: f64, t: f64, lo: f64, hi: f64, table: &PrimeTable) -> Result<Self> {
        let range = table.prime_range(lo, hi);
        let w: Vec<Complex64> = table.primes()[range.clone()].iter().map(|&p| p_minus_s(p, sigma, t)).collect();
        if let Some(bad) = w.iter().position(|z| z.norm() >= 1.0) {
            return Err(Error::Domain(format!("p^(-s) has modulus >= 1 at p = {}", table.primes()[range.start + bad])));
        }
        Ok(PrimeBlock { model, range, w })
    }

    /// log|F|² restricted to this block, reading f(p) from `values` indexed
    /// by prime index.
    #[inline]
    pub fn log_abs_sq(&self, values: &[Complex64]) -> f64 {
        let vals = &values[self.range.clone()];
        let mut acc = 0.0;
        match self.model {
            RmfModel::Steinhaus => {
                for (f, w) in vals.iter().zip(&self.w) {
                    acc -= (Complex64::new(1.0, 0.0) - f * w).norm_sqr().ln();
                }
            }
            RmfModel::Rademacher => {
                for (f, w) in vals.iter().zip(&self.w) {
                    acc += (Complex64::new(1.0, 0.0) + f * w).norm_sqr().ln();
                }
            }
        }
        acc
    }
}
