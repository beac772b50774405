//! Gaussian random walks S_j = G_1 + ... + G_j under barriers: Monte Carlo
//! estimators and a density-convolution oracle.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::rng::{Domain, StreamId};
use crate::stats::{binomial, normal_pdf, ols, MomentEstimate};

/// Steps and two-sided barriers of a centered walk, indexed by j − 1.
/// No hypothesis checks: this is the raw input of the estimators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corridor {
    pub variances: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Corridor {
    pub fn one_sided(variances: Vec<f64>, upper: Vec<f64>) -> Self {
        let lower = vec![f64::NEG_INFINITY; variances.len()];
        Corridor { variances, lower, upper }
    }

    pub fn n(&self) -> usize {
        self.variances.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        ensure(n >= 1, || "walk needs at least one step".into())?;
        ensure(self.lower.len() == n && self.upper.len() == n, || format!("barrier arrays must have {n} entries"))?;
        ensure(self.variances.iter().all(|v| v.is_finite() && *v > 0.0), || "variances must be positive".into())?;
        ensure(self.lower.iter().chain(&self.upper).all(|b| !b.is_nan()), || "barriers must not be NaN".into())
    }

    fn contains(&self, j: usize, s: f64) -> bool {
        self.lower[j] <= s && s <= self.upper[j]
    }
}

/// The walks of the ballot-type results: variances in [1/20, 20], upper
/// barrier min{a, Bj} + h(j) (or a + h(j) without the cap), optional lower
/// barrier g(j) ≤ −Bj.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkSpec {
    pub variances: Vec<f64>,
    pub a: f64,
    pub h: Vec<f64>,
    pub g: Option<Vec<f64>>,
    pub b: f64,
    pub cap: bool,
}

impl WalkSpec {
    /// Unit variances, h ≡ 0, no lower barrier, no cap.
    pub fn unit(n: usize, a: f64) -> Self {
        WalkSpec { variances: vec![1.0; n], a, h: vec![0.0; n], g: None, b: 0.0, cap: false }
    }

    pub fn with_h(mut self, h: impl Fn(usize) -> f64) -> Self {
        self.h = (1..=self.variances.len()).map(h).collect();
        self
    }

    pub fn n(&self) -> usize {
        self.variances.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        ensure(n >= 1, || "walk needs at least one step".into())?;
        ensure(self.h.len() == n, || format!("h must have {n} entries"))?;
        ensure(self.variances.iter().all(|v| (1.0 / 20.0..=20.0).contains(v)), || {
            "step variances must lie in [1/20, 20]".into()
        })?;
        for (j, h) in self.h.iter().enumerate() {
            let bound = 10.0 * ((j + 1) as f64).ln();
            ensure(h.abs() <= bound + 1e-12, || format!("|h({})| = {} exceeds 10 log j = {bound}", j + 1, h.abs()))?;
        }
        if let Some(g) = &self.g {
            ensure(g.len() == n, || format!("g must have {n} entries"))?;
            for (j, v) in g.iter().enumerate() {
                let bound = -self.b * (j + 1) as f64;
                ensure(*v <= bound + 1e-12, || format!("g({}) = {v} exceeds -B j = {bound}", j + 1))?;
            }
        }
        Ok(())
    }

    pub fn upper(&self, j: usize) -> f64 {
        let base = if self.cap { self.a.min(self.b * j as f64) } else { self.a };
        base + self.h[j - 1]
    }

    pub fn corridor(&self) -> Corridor {
        let n = self.n();
        Corridor {
            variances: self.variances.clone(),
            lower: self.g.clone().unwrap_or_else(|| vec![f64::NEG_INFINITY; n]),
            upper: (1..=n).map(|j| self.upper(j)).collect(),
        }
    }
}

fn walk_stream(seed: u64, trial: u64) -> rand_chacha::ChaCha8Rng {
    StreamId::new(seed, Domain::Walk, trial).rng()
}

/// Monte Carlo P(lower_j ≤ S_j ≤ upper_j for all j).
pub fn corridor_mc(c: &Corridor, trials: u64, seed: u64) -> Result<MomentEstimate> {
    c.validate()?;
    ensure(trials >= 1, || "trials must be >= 1".into())?;
    let sds: Vec<f64> = c.variances.iter().map(|v| v.sqrt()).collect();
    let hits: u64 = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = walk_stream(seed, trial);
            let mut s = 0.0;
            for (j, sd) in sds.iter().enumerate() {
                let z: f64 = rng.sample(StandardNormal);
                s += sd * z;
                if !c.contains(j, s) {
                    return 0;
                }
            }
            1
        })
        .sum();
    let (p, se) = binomial(hits, trials);
    Ok(MomentEstimate::new("walk_corridor", p, se, trials).with("n", c.n()).with("seed", seed))
}

pub fn walk_barrier_mc(spec: &WalkSpec, trials: u64, seed: u64) -> Result<MomentEstimate> {
    spec.validate()?;
    Ok(corridor_mc(&spec.corridor(), trials, seed)?.with("a", spec.a))
}

/// Fact A1: P(S_j ≤ c for all j ≤ n).
pub fn constant_barrier_prob(variances: &[f64], c: f64, trials: u64, seed: u64) -> Result<MomentEstimate> {
    let corr = Corridor::one_sided(variances.to_vec(), vec![c; variances.len()]);
    Ok(corridor_mc(&corr, trials, seed)?.with("c", c))
}

/// Fact A2: P(max_j S_j ∈ [b, b + c]).
pub fn max_window_prob(variances: &[f64], b: f64, c: f64, trials: u64, seed: u64) -> Result<MomentEstimate> {
    ensure(!variances.is_empty() && c >= 0.0, || "need n >= 1 and c >= 0".into())?;
    let sds: Vec<f64> = variances.iter().map(|v| v.sqrt()).collect();
    let hits: u64 = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = walk_stream(seed, trial);
            let (mut s, mut m) = (0.0, f64::NEG_INFINITY);
            for sd in &sds {
                let z: f64 = rng.sample(StandardNormal);
                s += sd * z;
                m = m.max(s);
                if m > b + c {
                    return 0;
                }
            }
            u64::from(m >= b)
        })
        .sum();
    let (p, se) = binomial(hits, trials);
    Ok(MomentEstimate::new("max_window", p, se, trials).with("n", variances.len()).with("b", b).with("c", c))
}

/// Density-convolution grid for [`corridor_dp`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpGrid {
    pub nodes: usize,
    /// Half-width of the grid in standard deviations of the free walk.
    pub width_sd: f64,
}

impl Default for DpGrid {
    fn default() -> Self {
        DpGrid { nodes: 4096, width_sd: 12.0 }
    }
}

pub const DP_MAX_STEPS: usize = 64;

/// Integration weights of the end-corrected trapezoid rule
/// (3/8, 7/6, 23/24, 1, ..., 1, 23/24, 7/6, 3/8), O(h⁴).
fn corrected_weight(k: usize, count: usize) -> f64 {
    if count < 6 {
        return if k == 0 || k + 1 == count { 0.5 } else { 1.0 };
    }
    let e = k.min(count - 1 - k);
    match e {
        0 => 3.0 / 8.0,
        1 => 7.0 / 6.0,
        2 => 23.0 / 24.0,
        _ => 1.0,
    }
}

struct Grid {
    y0: f64,
    h: f64,
    n: usize,
}

impl Grid {
    fn y(&self, k: usize) -> f64 {
        self.y0 + k as f64 * self.h
    }

    /// Quadratic interpolation of nodal values at z.
    fn interp(&self, v: &[f64], z: f64) -> f64 {
        let u = (z - self.y0) / self.h;
        let k = (u.round() as isize).clamp(1, self.n as isize - 2) as usize;
        let s = u - k as f64;
        let (a, b, c) = (v[k - 1], v[k], v[k + 1]);
        b + 0.5 * s * (c - a) + 0.5 * s * s * (a - 2.0 * b + c)
    }

    /// ∫_c^d g with g known at nodes through `node(k)` and anywhere through
    /// `at(z)`: corrected trapezoid on interior nodes, Simpson on the two
    /// partial end cells.
    fn integrate(&self, c: f64, d: f64, node: impl Fn(usize) -> f64, at: impl Fn(f64) -> f64) -> f64 {
        if d <= c {
            return 0.0;
        }
        let simpson = |a: f64, b: f64| (b - a) / 6.0 * (at(a) + 4.0 * at(0.5 * (a + b)) + at(b));
        let kl = ((c - self.y0) / self.h).ceil().max(0.0) as usize;
        let ku_f = ((d - self.y0) / self.h).floor();
        if ku_f < kl as f64 {
            return simpson(c, d);
        }
        let ku = (ku_f as usize).min(self.n - 1);
        let count = ku - kl + 1;
        let mut s = 0.0;
        if count >= 2 {
            for k in kl..=ku {
                s += corrected_weight(k - kl, count) * node(k);
            }
            s *= self.h;
        }
        s + simpson(c, self.y(kl)) + simpson(self.y(ku), d)
    }
}

/// P(lower_j ≤ S_j ≤ upper_j for all j) by propagating the sub-density of the
/// walk on a grid: ρ_{m}(y) = ∫_{corridor_{m−1}} ρ_{m−1}(z) φ_{σ_m}(y − z) dz.
pub fn corridor_dp(c: &Corridor, grid: DpGrid) -> Result<f64> {
    c.validate()?;
    ensure(c.n() <= DP_MAX_STEPS, || format!("DP oracle supports n <= {DP_MAX_STEPS}, got {}", c.n()))?;
    ensure(grid.nodes >= 64, || "DP grid needs at least 64 nodes".into())?;
    let sd_tot = c.variances.iter().sum::<f64>().sqrt();
    let sd_min = c.variances.iter().cloned().fold(f64::INFINITY, f64::min).sqrt();
    let r = grid.width_sd * sd_tot;
    // keep at least 4 nodes per standard deviation of the narrowest step
    let mut nodes = grid.nodes;
    while 2.0 * r / (nodes - 1) as f64 > sd_min / 4.0 && nodes < 1 << 18 {
        nodes *= 2;
    }
    let g = Grid { y0: -r, h: 2.0 * r / (nodes - 1) as f64, n: nodes };
    let edge = |b: f64| b.clamp(g.y(1), g.y(nodes - 2));

    let sd1 = c.variances[0].sqrt();
    let mut rho: Vec<f64> = (0..nodes).map(|k| normal_pdf(g.y(k) / sd1) / sd1).collect();
    for m in 1..c.n() {
        let (lo, hi) = (edge(c.lower[m - 1]), edge(c.upper[m - 1]));
        let sd = c.variances[m].sqrt();
        let reach = 9.0 * sd;
        let kern: Vec<f64> = {
            let w = (reach / g.h).ceil() as usize + 1;
            (0..=w).map(|d| normal_pdf(d as f64 * g.h / sd) / sd).collect()
        };
        let prev = &rho;
        let next: Vec<f64> = (0..nodes)
            .into_par_iter()
            .map(|i| {
                let y = g.y(i);
                let (a, b) = ((y - reach).max(lo), (y + reach).min(hi));
                g.integrate(
                    a,
                    b,
                    |k| prev[k] * kern[k.abs_diff(i).min(kern.len() - 1)],
                    |z| g.interp(prev, z) * normal_pdf((y - z) / sd) / sd,
                )
            })
            .collect();
        rho = next;
    }
    let n = c.n();
    let (lo, hi) = (edge(c.lower[n - 1]), edge(c.upper[n - 1]));
    let p = g.integrate(lo, hi, |k| rho[k], |z| g.interp(&rho, z));
    Ok(p.clamp(0.0, 1.0))
}

/// DP value at the given grid and its change when the node count is halved.
pub fn corridor_dp_with_error(c: &Corridor, grid: DpGrid) -> Result<(f64, f64)> {
    let fine = corridor_dp(c, grid)?;
    let coarse = corridor_dp(c, DpGrid { nodes: grid.nodes / 2, ..grid })?;
    Ok((fine, (fine - coarse).abs()))
}

pub fn walk_barrier_dp(spec: &WalkSpec) -> Result<f64> {
    spec.validate()?;
    corridor_dp(&spec.corridor(), DpGrid::default())
}

/// k-fold iterated logarithm, None once a stage drops to ≤ 0.
pub fn iterated_log(n: f64, k: u32) -> Option<f64> {
    let mut v = n;
    for _ in 0..k {
        if v <= 0.0 {
            return None;
        }
        v = v.ln();
    }
    (v > 0.0).then_some(v)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CapComparison {
    pub p_full: MomentEstimate,
    pub p_capped: MomentEstimate,
    /// Cap point log_k^{20} n.
    pub cap: f64,
    pub diff: f64,
    /// Standard error of the paired difference.
    pub diff_se: f64,
    /// tol·n^{-1/2}·Σ_{i≤k} 1/log_i² n + 4·diff_se.
    pub band: f64,
}

impl CapComparison {
    pub fn within_band(&self) -> bool {
        self.diff.abs() <= self.band
    }
}

/// Compares the barrier a + h(j) with a + h(min{j, log_k^{20} n}) on common
/// paths.
pub fn barrier_cap_equivalence(spec: &WalkSpec, k: u32, trials: u64, seed: u64, tol: f64) -> Result<CapComparison> {
    spec.validate()?;
    let n = spec.n() as f64;
    let lk = iterated_log(n, k).ok_or_else(|| crate::Error::invalid(format!("log_{k} n is not positive for n = {n}")))?;
    ensure(lk >= spec.a / 1000.0, || format!("hypothesis log_k n = {lk} >= a/1000 fails"))?;
    let cap = if k == 0 { f64::INFINITY } else { lk.powi(20) };
    let full = spec.corridor();
    let mut capped = full.clone();
    for j in 1..=spec.n() {
        let jc = if (j as f64) > cap { cap.floor().max(1.0) as usize } else { j };
        let base = if spec.cap { spec.a.min(spec.b * j as f64) } else { spec.a };
        capped.upper[j - 1] = base + spec.h[jc - 1];
    }
    let sds: Vec<f64> = spec.variances.iter().map(|v| v.sqrt()).collect();
    let pairs: Vec<(bool, bool)> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = walk_stream(seed, trial);
            let (mut s, mut a, mut b) = (0.0, true, true);
            for (j, sd) in sds.iter().enumerate() {
                let z: f64 = rng.sample(StandardNormal);
                s += sd * z;
                a &= full.contains(j, s);
                b &= capped.contains(j, s);
                if !a && !b {
                    break;
                }
            }
            (a, b)
        })
        .collect();
    let ha = pairs.iter().filter(|p| p.0).count() as u64;
    let hb = pairs.iter().filter(|p| p.1).count() as u64;
    let (pa, sa) = binomial(ha, trials);
    let (pb, sb) = binomial(hb, trials);
    let d: Vec<f64> = pairs.iter().map(|&(a, b)| a as u8 as f64 - b as u8 as f64).collect();
    let (diff, diff_se) = crate::stats::mean_se(&d);
    let sum: f64 = (1..=k).filter_map(|i| iterated_log(n, i)).map(|l| 1.0 / (l * l)).sum();
    Ok(CapComparison {
        p_full: MomentEstimate::new("cap_full", pa, sa, trials),
        p_capped: MomentEstimate::new("cap_capped", pb, sb, trials),
        cap,
        diff,
        diff_se,
        band: tol * sum / n.sqrt() + 4.0 * diff_se,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Least-squares fit of log P against log(a/√n) over (n, a, P) triples.
pub fn scaling_fit(points: &[(f64, f64, f64)]) -> Result<ScalingFit> {
    ensure(points.len() >= 6, || format!("need at least 6 (n, a) pairs, got {}", points.len()))?;
    for &(n, a, p) in points {
        ensure(n >= 1.0 && a > 0.0 && a <= n.sqrt() / 2.0, || format!("pair (n = {n}, a = {a}) violates 0 < a <= sqrt(n)/2"))?;
        ensure(p > 0.0 && p <= 1.0, || format!("probability {p} must lie in (0, 1]"))?;
    }
    let xs: Vec<f64> = points.iter().map(|&(n, a, _)| (a / n.sqrt()).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, _, p)| p.ln()).collect();
    let spread = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - xs.iter().cloned().fold(f64::INFINITY, f64::min);
    ensure(spread > 1e-9, || "degenerate grid: all a/sqrt(n) equal".into())?;
    let (slope, intercept) = ols(&xs, &ys);
    Ok(ScalingFit { slope, intercept })
}

/// (n, a) pairs of a family that satisfy a ≤ √n/2.
pub fn admissible_pairs(ns: &[usize], as_: &[f64]) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for &n in ns {
        for &a in as_ {
            if a <= (n as f64).sqrt() / 2.0 {
                out.push((n, a));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::normal_cdf;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn single_step() {
        let p = walk_barrier_dp(&WalkSpec::unit(1, 1.0)).unwrap();
        assert_abs_diff_eq!(p, normal_cdf(1.0), epsilon = 1e-6);
        let mut spec = WalkSpec::unit(1, 0.7);
        spec.variances = vec![2.5];
        assert_abs_diff_eq!(walk_barrier_dp(&spec).unwrap(), normal_cdf(0.7 / 2.5f64.sqrt()), epsilon = 1e-6);
        let mc = walk_barrier_mc(&WalkSpec::unit(1, 1.0), 100_000, 3).unwrap();
        assert!(mc.z_score(normal_cdf(1.0)) < 4.0);
    }

    #[test]
    fn orthant_two_steps() {
        let p = walk_barrier_dp(&WalkSpec::unit(2, 0.0)).unwrap();
        let want = 0.25 + (std::f64::consts::FRAC_1_SQRT_2).asin() / std::f64::consts::TAU;
        assert_abs_diff_eq!(want, 0.375, epsilon = 1e-15);
        assert_abs_diff_eq!(p, 0.375, epsilon = 1e-4);
    }

    #[test]
    fn grid_halving_is_small() {
        let spec = WalkSpec::unit(16, 2.0).with_h(|j| (j as f64).ln());
        let (p, err) = corridor_dp_with_error(&spec.corridor(), DpGrid::default()).unwrap();
        assert!(err < 1e-4, "p = {p}, err = {err}");
    }

    #[test]
    fn spec_validation() {
        let mut s = WalkSpec::unit(4, 1.0);
        s.variances[2] = 30.0;
        assert!(s.validate().is_err());
        let s = WalkSpec::unit(4, 1.0).with_h(|j| 11.0 * (j as f64).ln());
        assert!(s.validate().is_err());
        let mut s = WalkSpec::unit(4, 1.0);
        s.b = 1.0;
        s.g = Some(vec![-0.5; 4]);
        assert!(s.validate().is_err());
        assert!(walk_barrier_dp(&WalkSpec::unit(65, 1.0)).is_err());
    }

    #[test]
    fn huge_constant_barrier() {
        let n = 100;
        let p = constant_barrier_prob(&vec![1.0; n], 50.0 * (n as f64).sqrt(), 2000, 1).unwrap();
        assert!(p.estimate >= 0.999);
    }

    #[test]
    fn cap_k0_is_identity() {
        let spec = WalkSpec::unit(500, 5.0).with_h(|j| 10.0 * (j as f64).ln());
        let r = barrier_cap_equivalence(&spec, 0, 2000, 4, 10.0).unwrap();
        assert_eq!(r.diff, 0.0);
        assert_eq!(r.p_full.estimate, r.p_capped.estimate);
    }

    #[test]
    fn fit_recovers_power_law() {
        let mut pts = Vec::new();
        for n in [64.0, 256.0, 1024.0] {
            for a in [1.0, 2.0, 4.0] {
                pts.push((n, a, 0.7 * a / f64::sqrt(n)));
            }
        }
        let f = scaling_fit(&pts).unwrap();
        assert_abs_diff_eq!(f.slope, 1.0, epsilon = 1e-10);
        assert!(scaling_fit(&pts[..5]).is_err());
        let same: Vec<_> = (0..6).map(|_| (64.0, 2.0, 0.1)).collect();
        assert!(scaling_fit(&same).is_err());
        assert!(scaling_fit(&[(64.0, 8.0, 0.5); 6]).is_err());
    }

    #[test]
    fn admissible_family() {
        let pairs = admissible_pairs(&[64, 256, 1024], &[2.0, 4.0, 8.0]);
        assert_eq!(pairs.len(), 8);
        assert!(!pairs.contains(&(64, 8.0)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn dp_monotone_in_barrier(n in 1usize..10, a in 0.0f64..3.0, da in 0.05f64..1.0) {
            let p1 = walk_barrier_dp(&WalkSpec::unit(n, a)).unwrap();
            let p2 = walk_barrier_dp(&WalkSpec::unit(n, a + da)).unwrap();
            let p3 = walk_barrier_dp(&WalkSpec::unit(n + 1, a)).unwrap();
            prop_assert!(p2 >= p1 - 1e-9);
            prop_assert!(p3 <= p1 + 1e-9);
        }
    }
}
