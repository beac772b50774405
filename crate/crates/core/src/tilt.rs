//! Tilted measures: the plain law reweighted by |F|² (or |F|²|F(·+it)|²),
//! estimated by self-normalized importance sampling and compared with the
//! shifted-Gaussian reference laws.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::numtheory::PrimeTable;
use crate::products::{increment_window, scale_point, PrimeBlock};
use crate::rmf::{draw_values, RmfModel};
use crate::rng::{Domain, StreamId};
use crate::stats::{bivariate_normal_rect, normal_interval, Compensated, MomentEstimate};
use crate::walks::{corridor_dp, Corridor, DpGrid};

/// Minimum effective sample size accepted by [`tilted_probability`].
pub const ESS_GATE: f64 = 50.0;

/// Which primes enter the weight W.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightRange {
    /// Only primes inside the event's windows; the rest cancel.
    Event,
    /// Every prime ≤ x^{1/e}.
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TiltSpec {
    pub model: RmfModel,
    pub x: u64,
    pub sigma: f64,
    /// Rademacher tilt location, or the gap of the second product.
    pub t: f64,
    /// Weight by two Steinhaus products, at s and s + it.
    pub two_product: bool,
    /// Prime windows (lo, hi], ascending and disjoint; scale j is windows[j−1].
    pub windows: Vec<(f64, f64)>,
    /// Evaluation point t_j of each scale (ignored by the two-product tilt,
    /// which reads its increments at 0 and t).
    pub t_points: Vec<f64>,
    pub weight_range: WeightRange,
}

impl TiltSpec {
    /// Windows of the increments I_{l_j} for strictly decreasing l_j ≥ 0.
    pub fn increment_scales(model: RmfModel, x: u64, sigma: f64, t: f64, ls: &[i32]) -> Result<Self> {
        ensure(!ls.is_empty(), || "need at least one scale".into())?;
        ensure(ls.windows(2).all(|w| w[0] > w[1]) && *ls.last().unwrap() >= 0, || {
            "scale indices l_j must be strictly decreasing and non-negative".into()
        })?;
        let llx = (x as f64).ln().ln();
        ensure(ls[0] as f64 <= llx - 2.0, || format!("l_1 = {} exceeds log log x - 2 = {:.3}", ls[0], llx - 2.0))?;
        let windows = ls.iter().map(|&l| increment_window(x as f64, l)).collect();
        Ok(Self::with_windows(model, x, sigma, t, windows))
    }

    /// n consecutive windows starting above `lo`, each closed at the first
    /// prime where its mass Σ 1/p^{1+2σ} reaches `mass`. Total variance then
    /// grows linearly in n, as for the e-adic scales of a large x.
    pub fn equal_mass_scales(model: RmfModel, x: u64, sigma: f64, t: f64, lo: f64, mass: f64, n: usize, table: &PrimeTable) -> Result<Self> {
        ensure(n >= 1 && lo >= 1.0 && mass > 0.0, || "need n >= 1, lo >= 1 and mass > 0".into())?;
        let top = scale_point(x as f64, 1.0).min(table.limit() as f64);
        let mut windows = Vec::with_capacity(n);
        let (mut start, mut acc) = (lo, 0.0);
        for &p in table.primes_in(lo, top) {
            acc += (-(1.0 + 2.0 * sigma) * (p as f64).ln()).exp();
            if acc >= mass {
                windows.push((start, p as f64));
                start = p as f64;
                acc = 0.0;
                if windows.len() == n {
                    break;
                }
            }
        }
        ensure(windows.len() == n, || format!("only {} windows of mass {mass} fit below x^(1/e) = {top:.1}", windows.len()))?;
        Ok(Self::with_windows(model, x, sigma, t, windows))
    }

    fn with_windows(model: RmfModel, x: u64, sigma: f64, t: f64, windows: Vec<(f64, f64)>) -> Self {
        let tj = if model == RmfModel::Rademacher { t } else { 0.0 };
        let n = windows.len();
        TiltSpec { model, x, sigma, t, two_product: false, windows, t_points: vec![tj; n], weight_range: WeightRange::Event }
    }

    pub fn two_product(mut self, gap: f64) -> Self {
        self.two_product = true;
        self.t = gap;
        self
    }

    pub fn t_points(mut self, t_points: Vec<f64>) -> Self {
        self.t_points = t_points;
        self
    }

    pub fn weight_range(mut self, r: WeightRange) -> Self {
        self.weight_range = r;
        self
    }

    pub fn n(&self) -> usize {
        self.windows.len()
    }

    pub fn components(&self) -> usize {
        if self.two_product {
            2
        } else {
            1
        }
    }

    /// Upper end x^{1/e} of the weight's prime range.
    pub fn weight_top(&self) -> f64 {
        scale_point(self.x as f64, 1.0)
    }

    pub fn validate(&self, table: &PrimeTable) -> Result<()> {
        let n = self.n();
        ensure(n >= 1, || "need at least one scale".into())?;
        ensure(self.t_points.len() == n, || format!("need {n} evaluation points, got {}", self.t_points.len()))?;
        ensure(!self.two_product || self.model == RmfModel::Steinhaus, || "the two-product tilt is Steinhaus only".into())?;
        ensure(self.t.is_finite() && self.t_points.iter().all(|t| t.is_finite()), || "t values must be finite".into())?;
        let top = self.weight_top();
        ensure(top <= table.limit() as f64, || format!("x^(1/e) = {top} exceeds the prime table"))?;
        for (j, &(lo, hi)) in self.windows.iter().enumerate() {
            ensure(lo >= 1.0 && hi > lo && hi <= top * (1.0 + 1e-12), || {
                format!("window {} = ({lo}, {hi}] must lie in [1, x^(1/e)]", j + 1)
            })?;
            ensure(!table.primes_in(lo, hi).is_empty(), || format!("window {} = ({lo}, {hi}] has no primes", j + 1))?;
            if j > 0 {
                ensure(lo >= self.windows[j - 1].1, || "windows must be ascending and disjoint".into())?;
            }
        }
        let log_xn = self.windows[n - 1].1.ln();
        ensure(self.sigma.abs() <= 1.0 / log_xn, || {
            format!("|sigma| = {} exceeds 1/log x_n = {}", self.sigma.abs(), 1.0 / log_xn)
        })
    }

    fn weight_blocks(&self, table: &PrimeTable) -> Result<Vec<PrimeBlock>> {
        let ranges: Vec<(f64, f64)> = match self.weight_range {
            WeightRange::Event => self.windows.clone(),
            WeightRange::Full => vec![(1.0, self.weight_top())],
        };
        let mut out = Vec::new();
        for (lo, hi) in ranges {
            if self.two_product {
                out.push(PrimeBlock::new(RmfModel::Steinhaus, self.sigma, 0.0, lo, hi, table)?);
                out.push(PrimeBlock::new(RmfModel::Steinhaus, self.sigma, self.t, lo, hi, table)?);
            } else {
                let t = if self.model == RmfModel::Rademacher { self.t } else { 0.0 };
                out.push(PrimeBlock::new(self.model, self.sigma, t, lo, hi, table)?);
            }
        }
        Ok(out)
    }

    fn stat_blocks(&self, table: &PrimeTable) -> Result<Vec<Vec<PrimeBlock>>> {
        self.windows
            .iter()
            .zip(&self.t_points)
            .map(|(&(lo, hi), &tj)| {
                let ts = if self.two_product { vec![0.0, self.t] } else { vec![tj] };
                ts.into_iter().map(|t| PrimeBlock::new(self.model, self.sigma, t, lo, hi, table)).collect()
            })
            .collect()
    }
}

/// Per-scale parameters of the Gaussian reference law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    pub mean: f64,
    pub var: f64,
    /// Covariance of the two components (two-product tilt only).
    pub cov: f64,
}

/// Means and variances of the shifted Gaussians N_j. Both components of the
/// two-product law share mean and variance.
pub fn scale_params(spec: &TiltSpec, table: &PrimeTable) -> Result<Vec<ScaleParams>> {
    spec.validate(table)?;
    let mut out = Vec::with_capacity(spec.n());
    for (&(lo, hi), &tj) in spec.windows.iter().zip(&spec.t_points) {
        let (mut m, mut v, mut c) = (Compensated::new(), Compensated::new(), Compensated::new());
        for &p in table.primes_in(lo, hi) {
            let lp = (p as f64).ln();
            let w = (-(1.0 + 2.0 * spec.sigma) * lp).exp();
            if spec.two_product {
                let ct = (spec.t * lp).cos();
                m.add((1.0 + ct) * w);
                v.add(0.5 * w);
                c.add(0.5 * ct * w);
            } else {
                match spec.model {
                    RmfModel::Steinhaus => {
                        m.add((tj * lp).cos() * w);
                        v.add(0.5 * w);
                    }
                    RmfModel::Rademacher => {
                        let cc = 2.0 * (spec.t * lp).cos() * (tj * lp).cos() - 0.5 * (2.0 * tj * lp).cos();
                        m.add(cc * w);
                        v.add(0.5 * (1.0 + (2.0 * tj * lp).cos()) * w);
                    }
                }
            }
        }
        out.push(ScaleParams { mean: m.value(), var: v.value(), cov: c.value() });
    }
    Ok(out)
}

/// Which statistic the bands constrain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    /// log|I_{l_j}| itself.
    Increment,
    /// Σ_{m≤j} log|I_{l_m}|.
    Cumulative,
}

/// lower_j ≤ statistic_j ≤ upper_j for every scale j, applied to every
/// component of a two-product tilt (with `second` overriding the bands of
/// the second component).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandEvent {
    pub statistic: Statistic,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub second: Option<(Vec<f64>, Vec<f64>)>,
}

impl BandEvent {
    pub fn bands(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        BandEvent { statistic: Statistic::Increment, lower, upper, second: None }
    }

    pub fn corridor(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        BandEvent { statistic: Statistic::Cumulative, lower, upper, second: None }
    }

    /// The whole space.
    pub fn everything(n: usize) -> Self {
        Self::bands(vec![f64::NEG_INFINITY; n], vec![f64::INFINITY; n])
    }

    /// −a − Bj ≤ Σ_{m≤j} ≤ a + M_j + h(j), where M_j is the cumulative mean of
    /// the reference Gaussians (≈ j for windows of one e-fold in log p).
    pub fn drift_corridor(spec: &TiltSpec, a: f64, b: f64, h: &[f64], table: &PrimeTable) -> Result<Self> {
        ensure(h.len() == spec.n(), || format!("h must have {} entries", spec.n()))?;
        let params = scale_params(spec, table)?;
        let mut m = 0.0;
        let mut upper = Vec::with_capacity(spec.n());
        for (j, p) in params.iter().enumerate() {
            m += p.mean;
            upper.push(a + m + h[j]);
        }
        let lower = (1..=spec.n()).map(|j| -a - b * j as f64).collect();
        Ok(Self::corridor(lower, upper))
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let ok = |lo: &Vec<f64>, hi: &Vec<f64>| lo.len() == n && hi.len() == n && lo.iter().chain(hi).all(|v| !v.is_nan());
        ensure(ok(&self.lower, &self.upper), || format!("bands must have {n} non-NaN entries"))?;
        if let Some((lo, hi)) = &self.second {
            ensure(ok(lo, hi), || format!("second-component bands must have {n} non-NaN entries"))?;
        }
        Ok(())
    }

    fn bands_of(&self, comp: usize) -> (&[f64], &[f64]) {
        match (&self.second, comp) {
            (Some((lo, hi)), 1) => (lo, hi),
            _ => (&self.lower, &self.upper),
        }
    }

    /// Whether the finite bands respect the size hypothesis of the Gaussian
    /// comparison: |v_j| ≤ (1/40)√log x_j + 2 for increments, |u_j|, |v_j| ≤
    /// (1/80)√log x_j for corridors. Desk-scale corridors usually do not.
    pub fn within_hypotheses(&self, spec: &TiltSpec) -> bool {
        let within = |v: f64, j: usize| {
            let lx = spec.windows[j].1.ln();
            let bound = match self.statistic {
                Statistic::Increment => lx.sqrt() / 40.0 + 2.0,
                Statistic::Cumulative => lx.sqrt() / 80.0,
            };
            !v.is_finite() || v.abs() <= bound
        };
        (0..spec.components()).all(|c| {
            let (lo, hi) = self.bands_of(c);
            (0..spec.n()).all(|j| within(lo[j], j) && within(hi[j], j))
        })
    }

    fn holds(&self, stats: &[[f64; 2]], comps: usize) -> bool {
        (0..comps).all(|c| {
            let (lo, hi) = self.bands_of(c);
            let mut s = 0.0;
            stats.iter().enumerate().all(|(j, v)| {
                let y = match self.statistic {
                    Statistic::Increment => v[c],
                    Statistic::Cumulative => {
                        s += v[c];
                        s
                    }
                };
                lo[j] <= y && y <= hi[j]
            })
        })
    }
}

/// Plain-law draws: per trial the log weight and log|I| per scale and
/// component.
#[derive(Clone, Debug)]
pub struct TiltSamples {
    pub log_w: Vec<f64>,
    pub stats: Vec<Vec<[f64; 2]>>,
    pub components: usize,
}

impl TiltSamples {
    pub fn trials(&self) -> usize {
        self.log_w.len()
    }

    /// Weights rescaled by the largest one.
    pub fn weights(&self) -> Vec<f64> {
        let m = self.log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        self.log_w.iter().map(|l| (l - m).exp()).collect()
    }

    /// (Σ W)² / Σ W².
    pub fn ess(&self) -> f64 {
        let w = self.weights();
        let s: f64 = w.iter().sum();
        s * s / w.iter().map(|v| v * v).sum::<f64>()
    }

    /// Self-normalized Ẽ[g] with a delta-method standard error.
    pub fn tilted_mean(&self, g: impl Fn(&[[f64; 2]]) -> f64) -> (f64, f64) {
        let w = self.weights();
        let vals: Vec<f64> = self.stats.iter().map(|s| g(s)).collect();
        let (mut sw, mut swg) = (Compensated::new(), Compensated::new());
        for (wi, gi) in w.iter().zip(&vals) {
            sw.add(*wi);
            swg.add(wi * gi);
        }
        let (sw, est) = (sw.value(), swg.value() / sw.value());
        let mut var = Compensated::new();
        for (wi, gi) in w.iter().zip(&vals) {
            var.add((wi * (gi - est)).powi(2));
        }
        (est, var.value().sqrt() / sw)
    }

    /// Plain-law E[W] (unnormalized) with its iid standard error.
    pub fn weight_mean(&self) -> (f64, f64) {
        let w: Vec<f64> = self.log_w.iter().map(|l| l.exp()).collect();
        crate::stats::mean_se(&w)
    }
}

/// Draws `trials` plain-law samples of the primes the tilt needs.
pub fn sample_tilt_trials(spec: &TiltSpec, trials: u64, seed: u64, table: &PrimeTable) -> Result<TiltSamples> {
    spec.validate(table)?;
    ensure(trials >= 1, || "trials must be >= 1".into())?;
    let wblocks = spec.weight_blocks(table)?;
    let sblocks = spec.stat_blocks(table)?;
    let start = wblocks.iter().chain(sblocks.iter().flatten()).map(|b| b.range.start).min().unwrap_or(0);
    let end = wblocks.iter().chain(sblocks.iter().flatten()).map(|b| b.range.end).max().unwrap_or(0);
    let rows: Vec<(f64, Vec<[f64; 2]>)> = (0..trials)
        .into_par_iter()
        .map_init(Vec::new, |vals: &mut Vec<Complex64>, trial| {
            let mut rng = StreamId::new(seed, Domain::Tilt, trial).rng();
            vals.clear();
            vals.resize(start, Complex64::new(0.0, 0.0));
            draw_values(spec.model, end - start, &mut rng, vals);
            let log_w: f64 = wblocks.iter().map(|b| b.log_abs_sq(vals)).sum();
            let stats = sblocks
                .iter()
                .map(|bs| {
                    let mut v = [0.0; 2];
                    for (c, b) in bs.iter().enumerate() {
                        v[c] = 0.5 * b.log_abs_sq(vals);
                    }
                    v
                })
                .collect();
            (log_w, stats)
        })
        .collect();
    let (log_w, stats) = rows.into_iter().unzip();
    Ok(TiltSamples { log_w, stats, components: spec.components() })
}

/// P̃(event) from shared samples; errors when the ESS is below the gate.
pub fn tilted_probability_from(samples: &TiltSamples, event: &BandEvent) -> Result<MomentEstimate> {
    let n = samples.stats.first().map_or(0, |s| s.len());
    event.validate(n)?;
    let ess = samples.ess();
    // negated so a NaN ESS also trips the gate
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(ess >= ESS_GATE) {
        return Err(Error::Unstable { what: "tilted probability".into(), gauge: "ESS", value: ess, need: ESS_GATE });
    }
    let comps = samples.components;
    let (p, se) = samples.tilted_mean(|s| f64::from(u8::from(event.holds(s, comps))));
    Ok(MomentEstimate::new("tilted_probability", p, se, samples.trials() as u64).with("ess", format!("{ess:.1}")))
}

pub fn tilted_probability(spec: &TiltSpec, event: &BandEvent, trials: u64, seed: u64, table: &PrimeTable) -> Result<MomentEstimate> {
    ensure(trials >= 1000, || format!("tilted probability needs >= 1000 trials, got {trials}"))?;
    event.validate(spec.n())?;
    let samples = sample_tilt_trials(spec, trials, seed, table)?;
    Ok(tilted_probability_from(&samples, event)?.with("seed", seed).with("x", spec.x))
}

/// Probability of the event under the independent shifted Gaussians.
/// Corridors go through the walk oracle with the means subtracted; the
/// two-product corridor uses the zero-covariance (product) form.
pub fn gaussian_band_reference(spec: &TiltSpec, event: &BandEvent, table: &PrimeTable) -> Result<f64> {
    event.validate(spec.n())?;
    let params = scale_params(spec, table)?;
    let comps = spec.components();
    match event.statistic {
        Statistic::Increment => {
            let mut p = 1.0;
            for (j, sp) in params.iter().enumerate() {
                let sd = sp.var.sqrt();
                if comps == 1 {
                    p *= normal_interval(sp.mean, sd, event.lower[j], event.upper[j]);
                } else {
                    let (lo2, hi2) = event.bands_of(1);
                    let rho = sp.cov / sp.var;
                    p *= bivariate_normal_rect(
                        [sp.mean; 2],
                        [sd; 2],
                        rho,
                        [event.lower[j], lo2[j]],
                        [event.upper[j], hi2[j]],
                    );
                }
            }
            Ok(p)
        }
        Statistic::Cumulative => {
            let mut p = 1.0;
            for c in 0..comps {
                let (lo, hi) = event.bands_of(c);
                let mut m = 0.0;
                let mut corr = Corridor { variances: Vec::new(), lower: Vec::new(), upper: Vec::new() };
                for (j, sp) in params.iter().enumerate() {
                    m += sp.mean;
                    corr.variances.push(sp.var);
                    corr.lower.push(lo[j] - m);
                    corr.upper.push(hi[j] - m);
                }
                p *= corridor_dp(&corr, DpGrid::default())?;
            }
            Ok(p)
        }
    }
}

/// How a comparison is judged.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum CompareRule {
    /// |tilted − reference| ≤ k·se + abs.
    Absolute { k_se: f64, abs: f64 },
    /// tilted/reference ∈ [lo, hi].
    Ratio { lo: f64, hi: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GirsanovRecord {
    pub tilted: MomentEstimate,
    pub reference: f64,
    pub ratio: f64,
    pub combined_se: f64,
    pub within_hypotheses: bool,
    pub rule: CompareRule,
    pub pass: bool,
}

pub fn judge(tilted: &MomentEstimate, reference: f64, rule: CompareRule) -> bool {
    match rule {
        CompareRule::Absolute { k_se, abs } => (tilted.estimate - reference).abs() <= k_se * tilted.stderr + abs,
        CompareRule::Ratio { lo, hi } => {
            let r = tilted.estimate / reference;
            r.is_finite() && lo <= r && r <= hi
        }
    }
}

pub fn girsanov_compare(
    spec: &TiltSpec,
    event: &BandEvent,
    trials: u64,
    seed: u64,
    rule: CompareRule,
    table: &PrimeTable,
) -> Result<GirsanovRecord> {
    let reference = gaussian_band_reference(spec, event, table)?;
    let tilted = tilted_probability(spec, event, trials, seed, table)?;
    let pass = judge(&tilted, reference, rule);
    Ok(GirsanovRecord {
        ratio: tilted.estimate / reference,
        combined_se: tilted.stderr,
        within_hypotheses: event.within_hypotheses(spec),
        reference,
        tilted,
        rule,
        pass,
    })
}
