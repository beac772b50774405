//! Primes, factorization, smoothness and prime sums.
//!
//! Everything hangs off a [`PrimeTable`]: a linear sieve that stores the
//! smallest prime factor of every n up to the limit, so factoring any n in
//! range costs O(log n).

use crate::error::{ensure, Error, Result};
use crate::stats::Compensated;

/// Largest sieve limit accepted. The spf array costs 4 bytes per integer, so
/// this is a 2 GB table.
pub const MAX_LIMIT: u64 = 500_000_000;

/// Beyond this many e-folds every prime window (x^{e^{-(k+1)}}, x^{e^{-k}}]
/// has collapsed to (1, 1] for any x in range.
pub const MAX_BLOCK_K: u32 = 64;

#[derive(Clone, Debug)]
pub struct PrimeTable {
    limit: u32,
    primes: Vec<u32>,
    spf: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Factorization {
    pub factors: Vec<(u32, u32)>,
}

impl Factorization {
    pub fn value(&self) -> u64 {
        self.factors.iter().map(|&(p, a)| (p as u64).pow(a)).product()
    }
}

/// Weight w(p) in Σ w(p)/p^{1+2σ}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PrimeWeight {
    One,
    /// cos(t log p)
    Cos,
    /// cos(2t log p)
    Cos2,
    /// log p
    Log,
}

pub fn build_prime_table(limit: u64) -> Result<PrimeTable> {
    ensure(limit >= 2, || format!("prime table limit must be >= 2, got {limit}"))?;
    if limit > MAX_LIMIT {
        return Err(Error::Resource(format!(
            "prime table limit {limit} exceeds the supported maximum {MAX_LIMIT} ({} MB of spf entries)",
            limit * 4 / 1_000_000
        )));
    }
    let n = limit as usize;
    let mut spf: Vec<u32> = Vec::new();
    spf.try_reserve_exact(n + 1)
        .map_err(|_| Error::Resource(format!("cannot allocate {} MB for the spf array", (n + 1) * 4 / 1_000_000)))?;
    spf.resize(n + 1, 0);
    let mut primes: Vec<u32> = Vec::with_capacity(estimate_pi(limit));
    for i in 2..=n {
        if spf[i] == 0 {
            spf[i] = i as u32;
            primes.push(i as u32);
        }
        let si = spf[i];
        for &p in &primes {
            if p > si || i * p as usize > n {
                break;
            }
            spf[i * p as usize] = p;
        }
    }
    Ok(PrimeTable { limit: limit as u32, primes, spf })
}

fn estimate_pi(x: u64) -> usize {
    let xf = x as f64;
    (1.3 * xf / xf.ln().max(1.0)) as usize + 10
}

impl PrimeTable {
    pub fn limit(&self) -> u64 {
        self.limit as u64
    }

    pub fn primes(&self) -> &[u32] {
        &self.primes
    }

    /// Smallest prime factor table, indexed by n (entries 0 and 1 are 0).
    pub fn spf(&self) -> &[u32] {
        &self.spf
    }

    pub fn spf_of(&self, n: u64) -> u32 {
        self.spf[n as usize]
    }

    pub fn is_prime(&self, n: u64) -> bool {
        n >= 2 && n <= self.limit() && self.spf[n as usize] as u64 == n
    }

    /// Number of primes ≤ y.
    pub fn pi(&self, y: f64) -> usize {
        self.primes.partition_point(|&p| (p as f64) <= y)
    }

    /// Primes in the half-open real window (lo, hi].
    pub fn primes_in(&self, lo: f64, hi: f64) -> &[u32] {
        let a = self.pi(lo);
        let b = self.pi(hi).max(a);
        &self.primes[a..b]
    }

    /// Index range of the primes in (lo, hi].
    pub fn prime_range(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let a = self.pi(lo);
        a..self.pi(hi).max(a)
    }

    fn check_n(&self, n: u64) -> Result<()> {
        ensure(n >= 1 && n <= self.limit(), || format!("n = {n} outside [1, {}]", self.limit))
    }

    pub fn factorize(&self, n: u64) -> Result<Factorization> {
        self.check_n(n)?;
        let mut factors: Vec<(u32, u32)> = Vec::new();
        let mut m = n as usize;
        while m > 1 {
            let p = self.spf[m];
            m /= p as usize;
            match factors.last_mut() {
                Some((q, a)) if *q == p => *a += 1,
                _ => factors.push((p, 1)),
            }
        }
        Ok(Factorization { factors })
    }

    /// P(n), with P(1) = 1.
    pub fn largest_prime_factor(&self, n: u64) -> Result<u64> {
        self.check_n(n)?;
        Ok(self.lpf_unchecked(n as usize) as u64)
    }

    #[inline]
    fn lpf_unchecked(&self, mut m: usize) -> u32 {
        let mut last = 1;
        while m > 1 {
            last = self.spf[m];
            m /= last as usize;
        }
        last
    }

    pub fn is_squarefree(&self, n: u64) -> Result<bool> {
        self.check_n(n)?;
        Ok(self.squarefree_unchecked(n as usize))
    }

    #[inline]
    fn squarefree_unchecked(&self, mut m: usize) -> bool {
        let mut prev = 0;
        while m > 1 {
            let p = self.spf[m];
            if p == prev {
                return false;
            }
            prev = p;
            m /= p as usize;
        }
        true
    }

    /// Whether every prime factor of n is ≤ y (n = 1 is smooth for all y).
    pub fn is_smooth(&self, n: u64, y: f64) -> Result<bool> {
        Ok(self.largest_prime_factor(n)? as f64 <= y)
    }

    /// Σ_{x0 < p ≤ y} w(p)/p^{1+2σ}, ascending in p with compensated summation.
    pub fn prime_power_sum(&self, x0: f64, y: f64, sigma: f64, t: f64, weight: PrimeWeight) -> Result<f64> {
        ensure(x0 >= 1.0 && x0 <= y && y <= self.limit() as f64, || {
            format!("prime sum range ({x0}, {y}] must satisfy 1 <= x0 <= y <= {}", self.limit)
        })?;
        if y >= 3.0 {
            ensure(sigma > -1.0 / y.ln(), || format!("sigma = {sigma} must exceed -1/log y = {}", -1.0 / y.ln()))?;
        }
        let mut acc = Compensated::new();
        for &p in self.primes_in(x0, y) {
            let lp = (p as f64).ln();
            let w = match weight {
                PrimeWeight::One => 1.0,
                PrimeWeight::Cos => (t * lp).cos(),
                PrimeWeight::Cos2 => (2.0 * t * lp).cos(),
                PrimeWeight::Log => lp,
            };
            acc.add(w * (-(1.0 + 2.0 * sigma) * lp).exp());
        }
        Ok(acc.value())
    }

    /// Ψ(x, y) = #{n ≤ x : n is y-smooth}.
    pub fn smooth_count(&self, x: u64, y: f64) -> Result<u64> {
        self.check_n(x)?;
        ensure(y >= 1.0, || format!("smoothness bound y = {y} must be >= 1"))?;
        Ok((1..=x as usize).filter(|&n| self.lpf_unchecked(n) as f64 <= y).count() as u64)
    }

    /// Number of squarefree n ≤ x.
    pub fn squarefree_count(&self, x: u64) -> Result<u64> {
        self.check_n(x)?;
        Ok((1..=x as usize).filter(|&n| self.squarefree_unchecked(n)).count() as u64)
    }

    /// #{d ≤ x : every prime factor of d lies in (x^{e^{-(k+1)}}, x^{e^{-k}}]},
    /// counting d = 1.
    ///
    /// Any k up to [`MAX_BLOCK_K`] is accepted. Past ⌊log log x⌋ the window
    /// drops below 2 and the count is 1.
    pub fn prime_block_count(&self, x: u64, k: u32) -> Result<u64> {
        self.check_n(x)?;
        ensure(k <= MAX_BLOCK_K, || format!("k = {k} out of range 0..={MAX_BLOCK_K}"))?;
        let lx = (x as f64).ln();
        let lo = (lx * (-(k as f64 + 1.0)).exp()).exp();
        let hi = (lx * (-(k as f64)).exp()).exp();
        let mut count = 1u64;
        for d in 2..=x as usize {
            if (self.spf[d] as f64) > lo && (self.lpf_unchecked(d) as f64) <= hi {
                count += 1;
            }
        }
        Ok(count)
    }
}
