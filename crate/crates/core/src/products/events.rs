//! The discretization ladder t(j) and the multi-scale barrier events built on
//! products of increments.

use rayon::prelude::*;

use super::{increment_window, window_log};
use crate::error::{ensure, Result};
use crate::numtheory::PrimeTable;
use crate::rmf::{sample_rmf, RmfModel, RmfSample};
use crate::rng::{Domain, StreamId};
use crate::stats::{binomial, MomentEstimate};

/// D_j = ((log x)/e^{j+1})·log((log x)/e^{j+1}), the ladder's grid density.
pub fn ladder_density(log_x: f64, j: u32) -> f64 {
    let y = log_x / (j as f64 + 1.0).exp();
    y * y.ln()
}

/// Largest u ≤ v on the grid (1/d)ℤ. The tolerance absorbs rounding when v
/// already lies on the grid.
fn floor_to_grid(v: f64, d: f64) -> f64 {
    (v * d + 1e-9).floor() / d
}

/// t(0), ..., t(j_max), starting from t(−1) = t.
pub fn t_ladder(x: u64, t: f64, j_max: u32) -> Result<Vec<f64>> {
    ensure(t.abs() <= 1.0, || format!("|t| = {} must be <= 1", t.abs()))?;
    let lx = (x as f64).ln();
    ensure(x >= 16 && j_max as f64 <= lx.ln() - 2.0, || {
        format!("j range 0..={j_max} exceeds log log x - 2 = {:.3}", lx.ln() - 2.0)
    })?;
    Ok(ladder_from(lx, t, 0, j_max))
}

fn ladder_from(lx: f64, t: f64, j_from: u32, j_max: u32) -> Vec<f64> {
    let mut out = Vec::with_capacity((j_max + 1) as usize);
    let mut prev = t;
    for j in j_from..=j_max {
        let d = ladder_density(lx, j);
        let u = floor_to_grid(prev, d);
        out.push(u);
        prev = u;
    }
    out
}

/// Evaluation points of an event.
#[derive(Clone, Debug, PartialEq)]
pub enum TPoints {
    /// Every |t| ∈ [lo, hi], represented exactly by the finitely many ladder
    /// chains (t(0) ranges over the finest grid).
    Ladder { lo: f64, hi: f64 },
    /// The listed t values, used unchanged in every increment.
    Fixed(Vec<f64>),
}

/// A two-sided barrier on the partial products
/// Π_{l=j}^{l_top} |I_l(1/2 + σ + i t(l))| for j_lo ≤ j ≤ l_top, stored in
/// log form: lower[j − j_lo] ≤ Σ_{l=j}^{l_top} log|I_l| ≤ upper[j − j_lo].
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleEventSpec {
    pub model: RmfModel,
    pub x: u64,
    pub sigma: f64,
    pub j_lo: u32,
    pub l_top: u32,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub points: TPoints,
}

fn top_index(x: u64, b: u32) -> Result<i64> {
    let llx = (x as f64).ln().ln();
    Ok(llx.floor() as i64 - b as i64 - 2)
}

impl ScaleEventSpec {
    /// The event that for all |t| ≤ 1/2 and k ≤ j ≤ log log x − B − 2,
    /// |Σ_{l=j}^{L} log|I_l(1/2 − k/log x + i t(l))|| ≤ log(log x/e^{j+1}) + g(x, j),
    /// g(x, j) = C·min{√(log log x), 1/(1−q)} + 2 log log(log x/e^{j+1}).
    pub fn good_event(model: RmfModel, x: u64, k: u32, q: f64, c: f64, b: u32) -> Result<Self> {
        ensure((0.0..1.0).contains(&q), || format!("q = {q} must lie in [0, 1)"))?;
        let top = top_index(x, b)?;
        ensure(top >= k as i64, || {
            format!("empty scale range: k = {k} > floor(log log x) - B - 2 = {top}")
        })?;
        let lx = (x as f64).ln();
        let m = c * f64::min(lx.ln().sqrt(), 1.0 / (1.0 - q));
        let mut upper = Vec::new();
        for j in k..=top as u32 {
            let y = lx / (j as f64 + 1.0).exp();
            upper.push(y.ln() + m + 2.0 * y.ln().ln());
        }
        let lower = upper.iter().map(|u| -u).collect();
        Ok(ScaleEventSpec {
            model,
            x,
            sigma: -(k as f64) / lx,
            j_lo: k,
            l_top: top as u32,
            lower,
            upper,
            points: TPoints::Ladder { lo: -0.5, hi: 0.5 },
        })
    }

    /// The event L(t): for ⌊log V⌋ + 3 ≤ j ≤ log log x − B − 2,
    /// −B log(log x/e^{j+1}) − m ≤ Σ_{l=j}^{L} log|I_l(1/2 + 4V/log x + it)|
    ///   ≤ log(log x/e^{j+1}) + m − 2 log log(log x/e^{j+1}),
    /// with m = min{√(log log x), 1/(1−q)}.
    pub fn l_event(model: RmfModel, x: u64, q: f64, v: f64, b: u32, t: f64) -> Result<Self> {
        ensure((0.0..1.0).contains(&q), || format!("q = {q} must lie in [0, 1)"))?;
        ensure(v >= 1.0, || format!("V = {v} must be >= 1"))?;
        let top = top_index(x, b)?;
        let j_lo = v.ln().floor() as i64 + 3;
        ensure(top >= j_lo, || format!("empty scale range: {j_lo} > floor(log log x) - B - 2 = {top}"))?;
        let lx = (x as f64).ln();
        let m = f64::min(lx.ln().sqrt(), 1.0 / (1.0 - q));
        let (mut lower, mut upper) = (Vec::new(), Vec::new());
        for j in j_lo..=top {
            let y = lx / (j as f64 + 1.0).exp();
            lower.push(-(b as f64) * y.ln() - m);
            upper.push(y.ln() + m - 2.0 * y.ln().ln());
        }
        Ok(ScaleEventSpec {
            model,
            x,
            sigma: 4.0 * v / lx,
            j_lo: j_lo as u32,
            l_top: top as u32,
            lower,
            upper,
            points: TPoints::Fixed(vec![t]),
        })
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.j_lo <= self.l_top, || "empty scale range".into())?;
        let n = (self.l_top - self.j_lo + 1) as usize;
        ensure(self.lower.len() == n && self.upper.len() == n, || {
            format!("barrier arrays must have {n} entries")
        })
    }

    /// Largest prime any increment of the event touches.
    pub fn prime_cap(&self) -> f64 {
        increment_window(self.x as f64, self.j_lo as i32).1
    }

    /// The t(l) chains (indexed by l = 0..=l_top) the event is evaluated on.
    pub fn chains(&self) -> Vec<Vec<f64>> {
        let lx = (self.x as f64).ln();
        match &self.points {
            TPoints::Fixed(ts) => ts.iter().map(|&t| vec![t; self.l_top as usize + 1]).collect(),
            TPoints::Ladder { lo, hi } => {
                let d0 = ladder_density(lx, 0);
                // t ∈ [lo, hi] maps onto t(0) = ⌊t·D_0⌋/D_0
                let n_lo = (lo * d0 + 1e-9).floor() as i64;
                let n_hi = (hi * d0 + 1e-9).floor() as i64;
                (n_lo..=n_hi)
                    .map(|n| {
                        let t0 = n as f64 / d0;
                        let mut chain = vec![t0];
                        if self.l_top > 0 {
                            chain.extend(ladder_from(lx, t0, 1, self.l_top));
                        }
                        chain
                    })
                    .collect()
            }
        }
    }

    pub fn holds(&self, sample: &RmfSample, table: &PrimeTable) -> Result<bool> {
        self.validate()?;
        let x = self.x as f64;
        for chain in self.chains() {
            let mut s = 0.0;
            for j in (self.j_lo..=self.l_top).rev() {
                let (lo, hi) = increment_window(x, j as i32);
                s += window_log(sample, self.sigma, chain[j as usize], lo, hi, table)?.re;
                let i = (j - self.j_lo) as usize;
                if !(self.lower[i] <= s && s <= self.upper[i]) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

pub fn scale_event_holds(sample: &RmfSample, spec: &ScaleEventSpec, table: &PrimeTable) -> Result<bool> {
    spec.holds(sample, table)
}

/// Monte Carlo P(event fails) with a binomial standard error.
pub fn scale_event_fail_prob(spec: &ScaleEventSpec, trials: u64, seed: u64, table: &PrimeTable) -> Result<MomentEstimate> {
    spec.validate()?;
    ensure(trials >= 1, || "trials must be >= 1".into())?;
    let cap = spec.prime_cap().floor() as u64;
    ensure(cap <= table.limit(), || format!("event needs primes up to {cap}, table has {}", table.limit()))?;
    let fails: Vec<bool> = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<bool> {
            let s = sample_rmf(spec.model, cap.max(2), table, StreamId::new(seed, Domain::Rmf, trial))?;
            Ok(!spec.holds(&s, table)?)
        })
        .collect::<Result<_>>()?;
    let hits = fails.iter().filter(|&&f| f).count() as u64;
    let (p, se) = binomial(hits, trials);
    Ok(MomentEstimate::new("scale_event_fail_prob", p, se, trials)
        .with("x", spec.x)
        .with("model", spec.model)
        .with("j_lo", spec.j_lo)
        .with("l_top", spec.l_top)
        .with("seed", seed))
}
