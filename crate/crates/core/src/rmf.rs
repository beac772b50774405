//! Steinhaus and Rademacher random multiplicative functions and their
//! partial sums.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::numtheory::PrimeTable;
use crate::rng::StreamId;
use crate::stats::CompensatedComplex;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RmfModel {
    /// Totally multiplicative, f(p) uniform on the unit circle.
    Steinhaus,
    /// Supported on squarefree n, f(p) = ±1 with equal probability.
    Rademacher,
}

impl RmfModel {
    pub fn name(&self) -> &'static str {
        match self {
            RmfModel::Steinhaus => "steinhaus",
            RmfModel::Rademacher => "rademacher",
        }
    }
}

impl std::fmt::Display for RmfModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for RmfModel {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "steinhaus" => Ok(RmfModel::Steinhaus),
            "rademacher" => Ok(RmfModel::Rademacher),
            other => Err(format!("unknown model `{other}` (expected steinhaus or rademacher)")),
        }
    }
}

/// One realization of f on the primes up to `x_max`. `values[i]` is f at the
/// i-th prime.
#[derive(Clone, Debug, PartialEq)]
pub struct RmfSample {
    pub model: RmfModel,
    pub x_max: u64,
    pub values: Vec<Complex64>,
    pub stream: Option<StreamId>,
}

/// Draws f(p) for `count` consecutive primes from `rng`, appending to `out`.
pub fn draw_values<R: Rng>(model: RmfModel, count: usize, rng: &mut R, out: &mut Vec<Complex64>) {
    out.reserve(count);
    match model {
        RmfModel::Steinhaus => {
            for _ in 0..count {
                let u: f64 = rng.random();
                let (s, c) = (TAU * u).sin_cos();
                let r = c.hypot(s);
                out.push(Complex64::new(c / r, s / r));
            }
        }
        RmfModel::Rademacher => {
            for _ in 0..count {
                let v = if rng.random::<bool>() { 1.0 } else { -1.0 };
                out.push(Complex64::new(v, 0.0));
            }
        }
    }
}

pub fn sample_rmf(model: RmfModel, x_max: u64, table: &PrimeTable, stream: StreamId) -> Result<RmfSample> {
    let mut s = RmfSample { model, x_max, values: Vec::new(), stream: None };
    s.resample(table, stream)?;
    Ok(s)
}

impl RmfSample {
    /// Builds a sample from explicit prime values (tests, injected functions).
    pub fn from_values(model: RmfModel, x_max: u64, values: Vec<Complex64>, table: &PrimeTable) -> Result<Self> {
        ensure(x_max <= table.limit(), || format!("x_max = {x_max} exceeds table limit {}", table.limit()))?;
        let need = table.pi(x_max as f64);
        ensure(values.len() == need, || format!("expected {need} prime values, got {}", values.len()))?;
        let ok = match model {
            RmfModel::Steinhaus => values.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12),
            RmfModel::Rademacher => values.iter().all(|z| z.im == 0.0 && z.re.abs() == 1.0),
        };
        ensure(ok, || format!("values outside the {model} law's support"))?;
        Ok(RmfSample { model, x_max, values, stream: None })
    }

    /// The deterministic sample f(p) = 1 for every p.
    pub fn ones(model: RmfModel, x_max: u64, table: &PrimeTable) -> Result<Self> {
        let n = table.pi(x_max as f64);
        Self::from_values(model, x_max, vec![Complex64::new(1.0, 0.0); n], table)
    }

    /// Redraws in place, reusing the allocation.
    pub fn resample(&mut self, table: &PrimeTable, stream: StreamId) -> Result<()> {
        ensure(self.x_max <= table.limit(), || {
            format!("x_max = {} exceeds table limit {}", self.x_max, table.limit())
        })?;
        let n = table.pi(self.x_max as f64);
        self.values.clear();
        draw_values(self.model, n, &mut stream.rng(), &mut self.values);
        self.stream = Some(stream);
        Ok(())
    }

    /// f(p) for a prime p ≤ x_max.
    pub fn at_prime(&self, p: u32, table: &PrimeTable) -> Complex64 {
        let i = table.primes().partition_point(|&q| q < p);
        self.values[i]
    }

    fn check(&self, n: u64) -> Result<()> {
        ensure(n >= 1 && n <= self.x_max, || format!("n = {n} outside [1, {}]", self.x_max))
    }

    pub fn value_at(&self, n: u64, table: &PrimeTable) -> Result<Complex64> {
        self.check(n)?;
        let mut v = Complex64::new(1.0, 0.0);
        for (p, a) in table.factorize(n)?.factors {
            if self.model == RmfModel::Rademacher && a > 1 {
                return Ok(Complex64::new(0.0, 0.0));
            }
            v *= self.at_prime(p, table).powu(a);
        }
        Ok(v)
    }

    /// f(0..=x) as a dense array (f(0) = 0), by one multiplicative sweep.
    pub fn dense_values(&self, x: u64, table: &PrimeTable) -> Result<Vec<Complex64>> {
        ensure(x <= self.x_max, || format!("x = {x} exceeds sample range {}", self.x_max))?;
        let mut f = vec![Complex64::new(0.0, 0.0); x as usize + 1];
        if x >= 1 {
            f[1] = Complex64::new(1.0, 0.0);
        }
        sweep(&mut f, &self.values, table, self.model);
        Ok(f)
    }

    pub fn partial_sum(&self, x: u64, table: &PrimeTable) -> Result<Complex64> {
        Ok(self.partial_sum_series(&[x], table)?.sums[0])
    }

    pub fn partial_sum_series(&self, checkpoints: &[u64], table: &PrimeTable) -> Result<PartialSumSeries> {
        let mut ws = SumWorkspace::default();
        let sums = ws.sums(self, checkpoints, table)?;
        Ok(PartialSumSeries { checkpoints: checkpoints.to_vec(), sums })
    }

    pub fn restricted_sum(&self, x: u64, table: &PrimeTable, restriction: Restriction) -> Result<Complex64> {
        self.check(x.max(1))?;
        let f = self.dense_values(x, table)?;
        let mut acc = CompensatedComplex::default();
        for n in 1..=x {
            let big_p = table.largest_prime_factor(n)? as f64;
            let keep = match restriction {
                Restriction::LargestPrimeAbove(y) => big_p > y,
                Restriction::Smooth(y) => big_p <= y,
                Restriction::LargestPrimeIn(lo, hi) => big_p > lo && big_p <= hi,
            };
            if keep {
                acc.add(f[n as usize]);
            }
        }
        Ok(acc.value())
    }

    /// Σ_{√x < p ≤ x} f(p)·S(x/p), the largest-prime-factor decomposition of
    /// the sum over n ≤ x with P(n) > √x.
    pub fn largest_prime_decomposition(&self, x: u64, table: &PrimeTable) -> Result<Complex64> {
        let f = self.dense_values(x, table)?;
        let mut prefix = Vec::with_capacity(f.len());
        let mut run = CompensatedComplex::default();
        for v in &f {
            run.add(*v);
            prefix.push(run.value());
        }
        let mut acc = CompensatedComplex::default();
        for &p in table.primes_in((x as f64).sqrt(), x as f64) {
            acc.add(f[p as usize] * prefix[(x / p as u64) as usize]);
        }
        Ok(acc.value())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Restriction {
    /// P(n) > y
    LargestPrimeAbove(f64),
    /// P(n) ≤ y
    Smooth(f64),
    /// lo < P(n) ≤ hi
    LargestPrimeIn(f64, f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartialSumSeries {
    pub checkpoints: Vec<u64>,
    pub sums: Vec<Complex64>,
}

/// Reusable buffers for repeated partial-sum sweeps inside Monte Carlo loops.
#[derive(Default)]
pub struct SumWorkspace {
    complex: Vec<Complex64>,
    real: Vec<f64>,
}

const BLOCK: usize = 4096;

impl SumWorkspace {
    /// S(c) for each checkpoint c, in a single ascending pass.
    ///
    /// Terms are added plainly within blocks of 4096 and the block totals are
    /// combined with compensated summation.
    pub fn sums(&mut self, sample: &RmfSample, checkpoints: &[u64], table: &PrimeTable) -> Result<Vec<Complex64>> {
        ensure(checkpoints.windows(2).all(|w| w[0] <= w[1]), || "checkpoints must be ascending".into())?;
        let Some(&last) = checkpoints.last() else {
            return Ok(Vec::new());
        };
        ensure(checkpoints[0] >= 1, || "checkpoints must be >= 1".into())?;
        ensure(last <= sample.x_max, || format!("checkpoint {last} exceeds sample range {}", sample.x_max))?;
        let n = last as usize;
        match sample.model {
            RmfModel::Steinhaus => {
                let f = &mut self.complex;
                f.clear();
                f.resize(n + 1, Complex64::new(0.0, 0.0));
                f[1] = Complex64::new(1.0, 0.0);
                sweep(f, &sample.values, table, sample.model);
                Ok(block_prefix(f, checkpoints, |z| z))
            }
            RmfModel::Rademacher => {
                let f = &mut self.real;
                f.clear();
                f.resize(n + 1, 0.0);
                f[1] = 1.0;
                let spf = table.spf();
                let mut next = 0usize;
                for m in 2..=n {
                    let p = spf[m] as usize;
                    f[m] = if p == m {
                        next += 1;
                        sample.values[next - 1].re
                    } else {
                        let r = m / p;
                        if spf[r] as usize == p {
                            0.0
                        } else {
                            f[p] * f[r]
                        }
                    };
                }
                Ok(block_prefix(f, checkpoints, |v| Complex64::new(v, 0.0)))
            }
        }
    }
}

fn block_prefix<T: Copy>(f: &[T], checkpoints: &[u64], lift: impl Fn(T) -> Complex64) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut total = CompensatedComplex::default();
    let mut block = Complex64::new(0.0, 0.0);
    let mut ci = 0;
    for (m, &v) in f.iter().enumerate().skip(1) {
        block += lift(v);
        while ci < checkpoints.len() && checkpoints[ci] as usize == m {
            let mut t = total;
            t.add(block);
            out.push(t.value());
            ci += 1;
        }
        if m % BLOCK == 0 {
            total.add(block);
            block = Complex64::new(0.0, 0.0);
        }
    }
    out
}

/// Fills f[2..] multiplicatively from the prime values, given f[1] = 1.
fn sweep(f: &mut [Complex64], values: &[Complex64], table: &PrimeTable, model: RmfModel) {
    let spf = table.spf();
    let mut next = 0usize;
    for m in 2..f.len() {
        let p = spf[m] as usize;
        f[m] = if p == m {
            next += 1;
            values[next - 1]
        } else {
            let r = m / p;
            match model {
                RmfModel::Steinhaus => f[p] * f[r],
                RmfModel::Rademacher => {
                    if spf[r] as usize == p {
                        Complex64::new(0.0, 0.0)
                    } else {
                        f[p] * f[r]
                    }
                }
            }
        };
    }
}
