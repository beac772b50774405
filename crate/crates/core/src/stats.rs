//! Estimators, error bars and small numerical helpers shared by the modules.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use libm::erfc;

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct Compensated {
    sum: f64,
    c: f64,
}

impl Compensated {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.c += (self.sum - t) + v;
        } else {
            self.c += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.c
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedComplex {
    re: Compensated,
    im: Compensated,
}

impl CompensatedComplex {
    #[inline]
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut acc = Compensated::new();
    for v in it {
        acc.add(v);
    }
    acc.value()
}

/// A Monte Carlo estimate with its standard error and a snapshot of the
/// parameters that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub quantity: String,
    pub estimate: f64,
    pub stderr: f64,
    pub trials: u64,
    #[serde(default)]
    pub snapshot: BTreeMap<String, String>,
}

impl MomentEstimate {
    pub fn new(quantity: impl Into<String>, estimate: f64, stderr: f64, trials: u64) -> Self {
        MomentEstimate {
            quantity: quantity.into(),
            estimate,
            stderr,
            trials,
            snapshot: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.snapshot.insert(key.to_string(), value.to_string());
        self
    }

    /// |estimate - target| in units of the standard error (infinite if se = 0
    /// and the values differ).
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.estimate - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.stderr
        }
    }
}

/// Sample mean and the iid standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = compensated_sum(xs.iter().copied()) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = compensated_sum(xs.iter().map(|x| (x - mean).powi(2))) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Overall mean with a batch-means standard error using floor(sqrt(n))
/// contiguous batches.
pub fn batch_means(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let mean = compensated_sum(xs.iter().copied()) / n as f64;
    let b = (n as f64).sqrt().floor() as usize;
    if b < 2 {
        return (mean, 0.0);
    }
    let means: Vec<f64> = (0..b)
        .map(|i| {
            let (lo, hi) = (i * n / b, (i + 1) * n / b);
            compensated_sum(xs[lo..hi].iter().copied()) / (hi - lo) as f64
        })
        .collect();
    let (_, se) = mean_se(&means);
    (mean, se)
}

/// Binomial proportion with its standard error.
pub fn binomial(hits: u64, n: u64) -> (f64, f64) {
    let p = hits as f64 / n as f64;
    (p, (p * (1.0 - p) / n as f64).sqrt())
}

pub fn normal_cdf(z: f64) -> f64 {
    if z == f64::INFINITY {
        return 1.0;
    }
    if z == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// P(lo ≤ X ≤ hi) for X ~ N(mu, sd²).
pub fn normal_interval(mu: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    (normal_cdf((hi - mu) / sd) - normal_cdf((lo - mu) / sd)).max(0.0)
}

/// P(X ∈ [lo0, hi0], Y ∈ [lo1, hi1]) for a bivariate normal with means `mu`,
/// standard deviations `sd` and correlation `rho`, by conditioning on X and
/// composite Simpson quadrature.
pub fn bivariate_normal_rect(mu: [f64; 2], sd: [f64; 2], rho: f64, lo: [f64; 2], hi: [f64; 2]) -> f64 {
    let rho = rho.clamp(-1.0, 1.0);
    if rho.abs() < 1e-15 {
        return normal_interval(mu[0], sd[0], lo[0], hi[0]) * normal_interval(mu[1], sd[1], lo[1], hi[1]);
    }
    let a = ((lo[0] - mu[0]) / sd[0]).max(-9.0);
    let b = ((hi[0] - mu[0]) / sd[0]).min(9.0);
    if b <= a {
        return 0.0;
    }
    let c = (1.0 - rho * rho).max(1e-300).sqrt();
    let (ly, hy) = ((lo[1] - mu[1]) / sd[1], (hi[1] - mu[1]) / sd[1]);
    let g = |z: f64| normal_pdf(z) * (normal_cdf((hy - rho * z) / c) - normal_cdf((ly - rho * z) / c));
    let panels = 2000;
    let h = (b - a) / panels as f64;
    let mut acc = Compensated::new();
    acc.add(g(a) + g(b));
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc.add(w * g(a + i as f64 * h));
    }
    (acc.value() * h / 3.0).clamp(0.0, 1.0)
}

/// Ordinary least squares y = slope·x + intercept.
pub fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn compensated_beats_naive() {
        let mut acc = Compensated::new();
        acc.add(1.0);
        for _ in 0..10 {
            acc.add(1e-16);
        }
        acc.add(-1.0);
        assert_abs_diff_eq!(acc.value(), 1e-15, epsilon = 1e-30);
    }

    #[test]
    fn normal_spot_values() {
        assert_abs_diff_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(normal_cdf(1.0) - normal_cdf(-1.0), 0.682_689_492_137_086, epsilon = 1e-12);
    }

    #[test]
    fn bivariate_orthant_matches_arcsine_law() {
        // P(X ≤ 0, Y ≤ 0) = 1/4 + arcsin(ρ)/(2π)
        for rho in [-0.6, 0.3, 0.9] {
            let p = bivariate_normal_rect([0.0; 2], [1.0; 2], rho, [f64::NEG_INFINITY; 2], [0.0; 2]);
            let want = 0.25 + f64::asin(rho) / (2.0 * std::f64::consts::PI);
            assert_abs_diff_eq!(p, want, epsilon = 1e-7);
        }
    }

    #[test]
    fn batch_means_of_constant() {
        let xs = vec![2.5; 100];
        let (m, se) = batch_means(&xs);
        assert_abs_diff_eq!(m, 2.5, epsilon = 1e-15);
        assert_abs_diff_eq!(se, 0.0, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn ols_recovers_lines(slope in -3.0f64..3.0, icpt in -5.0f64..5.0) {
            let xs: Vec<f64> = (0..7).map(|i| i as f64 * 0.7 - 1.0).collect();
            let ys: Vec<f64> = xs.iter().map(|x| slope * x + icpt).collect();
            let (s, c) = ols(&xs, &ys);
            prop_assert!((s - slope).abs() < 1e-10);
            prop_assert!((c - icpt).abs() < 1e-10);
        }

        #[test]
        fn compensated_sum_is_permutation_stable(v in proptest::collection::vec(-1e6f64..1e6, 1..200)) {
            let a = compensated_sum(v.iter().copied());
            let mut r = v.clone();
            r.reverse();
            let b = compensated_sum(r.iter().copied());
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }
}
