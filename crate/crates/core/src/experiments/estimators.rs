//! Monte Carlo estimators of the headline quantities.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::numtheory::PrimeTable;
use crate::products::{chaos_integral, ProductSpec};
use crate::rmf::{RmfModel, RmfSample, SumWorkspace};
use crate::rng::{Domain, StreamId};
use crate::stats::{batch_means, binomial, MomentEstimate};

/// Per-trial |S(x)|² at each requested x (ascending), from one sweep per
/// trial. Indexed [trial][x].
pub fn partial_sum_squares(model: RmfModel, xs: &[u64], trials: u64, seed: u64, table: &PrimeTable) -> Result<Vec<Vec<f64>>> {
    ensure(!xs.is_empty(), || "need at least one x".into())?;
    ensure(xs.windows(2).all(|w| w[0] < w[1]) && xs[0] >= 1, || "x values must be ascending and >= 1".into())?;
    let x_max = *xs.last().unwrap();
    ensure(x_max <= table.limit(), || format!("x = {x_max} exceeds the prime table limit {}", table.limit()))?;
    (0..trials)
        .into_par_iter()
        .map_init(
            || (SumWorkspace::default(), RmfSample { model, x_max, values: Vec::new(), stream: None }),
            |(ws, sample), trial| {
                sample.resample(table, StreamId::new(seed, Domain::Rmf, trial))?;
                Ok(ws.sums(sample, xs, table)?.iter().map(Complex64::norm_sqr).collect())
            },
        )
        .collect()
}

/// E|S(x)|^{2} exactly: ⌊x⌋ (Steinhaus) or the squarefree count (Rademacher).
pub fn exact_second_moment(model: RmfModel, x: u64, table: &PrimeTable) -> Result<f64> {
    Ok(match model {
        RmfModel::Steinhaus => x as f64,
        RmfModel::Rademacher => table.squarefree_count(x)? as f64,
    })
}

fn check_q(q: f64) -> Result<()> {
    ensure((0.0..=1.0).contains(&q), || format!("q = {q} outside [0, 1]"))
}

fn moment_estimate(model: RmfModel, x: u64, q: f64, vals: &[f64], seed: u64, table: &PrimeTable) -> Result<MomentEstimate> {
    let (est, se) = if q == 0.0 { (1.0, 0.0) } else { batch_means(vals) };
    let mut m = MomentEstimate::new("moment", est, se, vals.len() as u64)
        .with("model", model)
        .with("x", x)
        .with("q", q)
        .with("seed", seed);
    if q == 1.0 {
        m = m.with("exact", exact_second_moment(model, x, table)?);
    }
    Ok(m)
}

/// E|S(x)|^{2q} for every (x, q), ordered x-major.
pub fn moment_sweep(model: RmfModel, xs: &[u64], qs: &[f64], trials: u64, seed: u64, table: &PrimeTable) -> Result<Vec<MomentEstimate>> {
    ensure(trials >= 100, || format!("moment estimates need >= 100 trials, got {trials}"))?;
    for &q in qs {
        check_q(q)?;
    }
    let sq = partial_sum_squares(model, xs, trials, seed, table)?;
    let mut out = Vec::new();
    for (i, &x) in xs.iter().enumerate() {
        for &q in qs {
            let vals: Vec<f64> = sq.iter().map(|r| r[i].powf(q)).collect();
            out.push(moment_estimate(model, x, q, &vals, seed, table)?);
        }
    }
    Ok(out)
}

pub fn estimate_moment(model: RmfModel, x: u64, q: f64, trials: u64, seed: u64, table: &PrimeTable) -> Result<MomentEstimate> {
    check_q(q)?;
    if q == 0.0 {
        ensure(trials >= 100, || format!("moment estimates need >= 100 trials, got {trials}"))?;
        return moment_estimate(model, x, 0.0, &vec![1.0; trials as usize], seed, table);
    }
    Ok(moment_sweep(model, &[x], &[q], trials, seed, table)?.remove(0))
}

/// (x / (1 + (1−q)√(log log x)))^q.
pub fn theorem_target(x: f64, q: f64) -> f64 {
    (x / (1.0 + (1.0 - q) * x.ln().ln().sqrt())).powf(q)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioRow {
    pub x: u64,
    pub q: f64,
    pub moment: MomentEstimate,
    pub target: f64,
    pub ratio: f64,
    pub ratio_se: f64,
    /// E|S|^{2q}/x^q (E|S|/√x at q = 1/2).
    pub normalized: f64,
    pub normalized_se: f64,
    /// Paired difference normalized(x) − normalized(next x) on common
    /// samples, with its standard error; None for the last x.
    pub drop_to_next: Option<(f64, f64)>,
}

impl RatioRow {
    /// The drop to the next x is not a significant increase (4-se allowance).
    pub fn decrease_within_allowance(&self) -> bool {
        self.drop_to_next.is_none_or(|(d, se)| d >= -4.0 * se)
    }
}

pub fn theorem_ratio(model: RmfModel, xs: &[u64], q: f64, trials: u64, seed: u64, table: &PrimeTable) -> Result<Vec<RatioRow>> {
    Ok(theorem_ratios(model, xs, &[q], trials, seed, table)?.remove(0))
}

/// [`theorem_ratio`] for several q on one set of samples.
pub fn theorem_ratios(model: RmfModel, xs: &[u64], qs: &[f64], trials: u64, seed: u64, table: &PrimeTable) -> Result<Vec<Vec<RatioRow>>> {
    ensure(xs.len() >= 3, || format!("theorem ratio needs >= 3 x values, got {}", xs.len()))?;
    for &q in qs {
        ensure(q > 0.0 && q <= 1.0, || format!("q = {q} outside (0, 1]"))?;
    }
    ensure(trials >= 100, || format!("ratio estimates need >= 100 trials, got {trials}"))?;
    let sq = partial_sum_squares(model, xs, trials, seed, table)?;
    qs.iter().map(|&q| ratio_rows(model, xs, q, &sq, seed, table)).collect()
}

fn ratio_rows(model: RmfModel, xs: &[u64], q: f64, sq: &[Vec<f64>], seed: u64, table: &PrimeTable) -> Result<Vec<RatioRow>> {
    let norm: Vec<Vec<f64>> = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| sq.iter().map(|r| r[i].powf(q) / (x as f64).powf(q)).collect())
        .collect();
    let mut rows = Vec::new();
    for (i, &x) in xs.iter().enumerate() {
        let vals: Vec<f64> = sq.iter().map(|r| r[i].powf(q)).collect();
        let moment = moment_estimate(model, x, q, &vals, seed, table)?;
        let target = theorem_target(x as f64, q);
        let (normalized, normalized_se) = batch_means(&norm[i]);
        let drop_to_next = (i + 1 < xs.len()).then(|| {
            let d: Vec<f64> = norm[i].iter().zip(&norm[i + 1]).map(|(a, b)| a - b).collect();
            batch_means(&d)
        });
        rows.push(RatioRow {
            x,
            q,
            ratio: moment.estimate / target,
            ratio_se: moment.stderr / target,
            target,
            moment,
            normalized,
            normalized_se,
            drop_to_next,
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BridgeRow {
    pub x: u64,
    pub q: f64,
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    pub ratio: f64,
    pub trials: u64,
}

/// Default chaos grid step 1/(10 log x).
pub fn default_grid_dt(x: u64) -> f64 {
    1.0 / (10.0 * (x as f64).ln())
}

/// Per-trial chaos integrals ∫_{-1/2}^{1/2} |F(1/2 + σ + 4V/log x + it)|² dt
/// over p ≤ x, paired with |S(x)|².
pub fn chaos_samples(
    model: RmfModel,
    x: u64,
    sigma: f64,
    v: f64,
    dt: f64,
    trials: u64,
    seed: u64,
    table: &PrimeTable,
) -> Result<Vec<(f64, f64)>> {
    ensure(x >= 2 && x <= table.limit(), || format!("x = {x} outside [2, {}]", table.limit()))?;
    let spec = ProductSpec::new(model, x).sigma(sigma).v(v);
    spec.validate(table)?;
    (0..trials)
        .into_par_iter()
        .map_init(
            || (SumWorkspace::default(), RmfSample { model, x_max: x, values: Vec::new(), stream: None }),
            |(ws, sample), trial| {
                sample.resample(table, StreamId::new(seed, Domain::Rmf, trial))?;
                let s = ws.sums(sample, &[x], table)?[0].norm_sqr();
                let c = chaos_integral(sample, &spec, -0.5, 0.5, dt, table)?;
                Ok((s, c))
            },
        )
        .collect()
}

/// lhs = E|S(x)|^{2q}, rhs = x^q E[(chaos/log x)^q] at σ = 4V/log x, from
/// common samples.
pub fn chaos_bridge_ratio(
    model: RmfModel,
    x: u64,
    qs: &[f64],
    trials: u64,
    seed: u64,
    v: f64,
    dt: f64,
    table: &PrimeTable,
) -> Result<Vec<BridgeRow>> {
    ensure(trials >= 100, || format!("bridge estimates need >= 100 trials, got {trials}"))?;
    for &q in qs {
        check_q(q)?;
    }
    let samples = chaos_samples(model, x, 0.0, v, dt, trials, seed, table)?;
    let lx = (x as f64).ln();
    Ok(qs
        .iter()
        .map(|&q| {
            let (lhs, lhs_se) = if q == 0.0 { (1.0, 0.0) } else { batch_means(&samples.iter().map(|s| s.0.powf(q)).collect::<Vec<_>>()) };
            let (m, m_se) = if q == 0.0 { (1.0, 0.0) } else { batch_means(&samples.iter().map(|s| (s.1 / lx).powf(q)).collect::<Vec<_>>()) };
            let scale = (x as f64).powf(q);
            BridgeRow { x, q, lhs, lhs_se, rhs: scale * m, rhs_se: scale * m_se, ratio: lhs / (scale * m), trials }
        })
        .collect())
}

/// Normalization of the tail threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailNorm {
    /// λ√x/(log log x)^{1/4}
    Scaled,
    /// λ√x
    Chebyshev,
}

/// Minimum hit count accepted by [`tail_probability`].
pub const HIT_GATE: u64 = 25;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailEstimate {
    pub lambda: f64,
    pub norm: TailNorm,
    pub threshold: f64,
    pub hits: u64,
    pub trials: u64,
    pub estimate: f64,
    pub stderr: f64,
    /// min{log λ, √(log log x)}/λ².
    pub upper_ref: f64,
    /// 1/(λ² (log log x)^{c_band}).
    pub lower_ref: f64,
}

pub fn tail_probability(
    model: RmfModel,
    x: u64,
    lambdas: &[f64],
    norm: TailNorm,
    c_band: f64,
    trials: u64,
    seed: u64,
    table: &PrimeTable,
) -> Result<Vec<TailEstimate>> {
    ensure(x >= 16, || format!("x = {x} too small for log log x > 1"))?;
    for &l in lambdas {
        match norm {
            TailNorm::Scaled => ensure(l >= 2.0, || format!("lambda = {l} must be >= 2"))?,
            TailNorm::Chebyshev => ensure(l > 0.0, || format!("lambda = {l} must be > 0"))?,
        }
    }
    let sq = partial_sum_squares(model, &[x], trials, seed, table)?;
    let llx = (x as f64).ln().ln();
    lambdas
        .iter()
        .map(|&lambda| {
            let threshold = match norm {
                TailNorm::Scaled => lambda * (x as f64).sqrt() / llx.powf(0.25),
                TailNorm::Chebyshev => lambda * (x as f64).sqrt(),
            };
            let t2 = threshold * threshold;
            let hits = sq.iter().filter(|r| r[0] >= t2).count() as u64;
            if hits < HIT_GATE {
                return Err(Error::Unstable { what: format!("tail probability at lambda = {lambda}"), gauge: "hits", value: hits as f64, need: HIT_GATE as f64 });
            }
            let (estimate, stderr) = binomial(hits, trials);
            Ok(TailEstimate {
                lambda,
                norm,
                threshold,
                hits,
                trials,
                estimate,
                stderr,
                upper_ref: lambda.ln().min(llx.sqrt()) / (lambda * lambda),
                lower_ref: 1.0 / (lambda * lambda * llx.powf(c_band)),
            })
        })
        .collect()
}

/// Summary of the windowed log|F| field on the grid k/log x.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldSummary {
    pub x: u64,
    pub sigma: f64,
    pub ks: Vec<i64>,
    pub trials: u64,
    /// max_k X(k) per trial.
    pub maxima: Vec<f64>,
    /// (lag, covariance, stderr) for lags 0..grid_count.
    pub covariance: Vec<(usize, f64, f64)>,
    /// (1/2)(log log x − 2 log log log x).
    pub variance_target: f64,
    /// Stated lag range [log log x, log x/(500 log log x)].
    pub lag_range: (f64, f64),
    /// Whether the covariance decreases over the stated range; None when no
    /// grid lag falls inside it.
    pub decreasing_on_range: Option<bool>,
}

struct FieldPrime {
    /// Index into the sample's values.
    idx: usize,
    r: f64,
    /// e^{-i log p / log x}
    rot: Complex64,
    /// sinc(m log p/(2 log x))/m for m = 1, 2, ...
    weights: Vec<f64>,
}

/// X(k) = log x ∫_{|t| ≤ 1/(2 log x)} log|F(1/2 + log log x/log x + i(k/log x + t))| dt
/// over the grid |k| ≤ (grid_count − 1)/2, Steinhaus, via the exact series
/// Σ_p Σ_m Re((f(p) p^{-s_k})^m) sinc(m log p/(2 log x))/m.
pub fn field_max_experiment(x: u64, grid_count: usize, trials: u64, seed: u64, table: &PrimeTable) -> Result<FieldSummary> {
    ensure(x >= 10_000 && x <= table.limit(), || format!("x = {x} outside [10^4, {}]", table.limit()))?;
    let lx = (x as f64).ln();
    let llx = lx.ln();
    ensure(grid_count >= 1 && grid_count as f64 <= lx, || format!("grid_count = {grid_count} must lie in [1, log x = {lx:.2}]"))?;
    ensure(trials >= 2, || "need at least 2 trials".into())?;
    let sigma = llx / lx;
    let half = (grid_count as i64 - 1) / 2;
    let ks: Vec<i64> = (-half..=half + (grid_count as i64 - 1) % 2).collect();
    let primes: Vec<FieldPrime> = table
        .primes_in(1.0, x as f64)
        .iter()
        .enumerate()
        .map(|(idx, &p)| {
            let lp = (p as f64).ln();
            let r = (-(0.5 + sigma) * lp).exp();
            let mut weights = Vec::new();
            let mut rm = r;
            let mut m = 1.0;
            while rm / m > 1e-17 {
                let u = m * lp / (2.0 * lx);
                weights.push(u.sin() / u / m);
                rm *= r;
                m += 1.0;
            }
            FieldPrime { idx, r, rot: Complex64::from_polar(1.0, -lp / lx), weights }
        })
        .collect();
    let k0 = ks[0];
    let fields: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map_init(Vec::new, |vals: &mut Vec<Complex64>, trial| {
            let mut rng = StreamId::new(seed, Domain::Aux, trial).rng();
            vals.clear();
            crate::rmf::draw_values(RmfModel::Steinhaus, primes.len(), &mut rng, vals);
            let mut field = vec![0.0; ks.len()];
            for fp in &primes {
                let mut z = vals[fp.idx] * fp.r * fp.rot.powi(k0 as i32);
                for acc in field.iter_mut() {
                    let mut zm = z;
                    let mut s = 0.0;
                    for w in &fp.weights {
                        s += zm.re * w;
                        zm *= z;
                    }
                    *acc += s;
                    z *= fp.rot;
                }
            }
            field
        })
        .collect();
    let maxima = fields.iter().map(|f| f.iter().cloned().fold(f64::NEG_INFINITY, f64::max)).collect();
    let n = ks.len();
    let means: Vec<f64> = (0..n).map(|k| fields.iter().map(|f| f[k]).sum::<f64>() / trials as f64).collect();
    let covariance: Vec<(usize, f64, f64)> = (0..n)
        .map(|h| {
            let per: Vec<f64> = fields
                .iter()
                .map(|f| (0..n - h).map(|k| (f[k] - means[k]) * (f[k + h] - means[k + h])).sum::<f64>() / (n - h) as f64)
                .collect();
            let (c, se) = batch_means(&per);
            (h, c * trials as f64 / (trials - 1) as f64, se)
        })
        .collect();
    let lag_range = (llx, lx / (500.0 * llx));
    let inside: Vec<f64> = covariance
        .iter()
        .filter(|(h, _, _)| (*h as f64) >= lag_range.0 && (*h as f64) <= lag_range.1)
        .map(|c| c.1)
        .collect();
    let decreasing_on_range = (!inside.is_empty()).then(|| inside.windows(2).all(|w| w[1] < w[0]));
    Ok(FieldSummary {
        x,
        sigma,
        ks,
        trials,
        maxima,
        covariance,
        variance_target: 0.5 * (llx - 2.0 * llx.ln()),
        lag_range,
        decreasing_on_range,
    })
}

/// Exact lag covariance of the field, Σ_p Σ_m r^{2m} w_m² cos(m h log p/log x)/2.
pub fn field_covariance_exact(x: u64, lag: usize, table: &PrimeTable) -> Result<f64> {
    ensure(x >= 3 && x <= table.limit(), || format!("x = {x} outside [3, {}]", table.limit()))?;
    let lx = (x as f64).ln();
    let sigma = lx.ln() / lx;
    let mut acc = crate::stats::Compensated::new();
    for &p in table.primes_in(1.0, x as f64) {
        let lp = (p as f64).ln();
        let r2 = (-(1.0 + 2.0 * sigma) * lp).exp();
        let mut rm = r2;
        let mut m = 1.0;
        while rm / (m * m) > 1e-20 {
            let u = m * lp / (2.0 * lx);
            let w = u.sin() / u / m;
            acc.add(0.5 * rm * w * w * (m * lag as f64 * lp / lx).cos());
            rm *= r2;
            m += 1.0;
        }
    }
    Ok(acc.value())
}
