//! Headline estimators, run configuration and persistence.

pub mod config;
pub mod estimators;
pub mod output;

pub use config::{Config, Constants, ExperimentKind, Format};
pub use estimators::{
    chaos_bridge_ratio, chaos_samples, default_grid_dt, estimate_moment, exact_second_moment, field_covariance_exact,
    field_max_experiment, moment_sweep, partial_sum_squares, tail_probability, theorem_ratio, theorem_ratios, theorem_target, BridgeRow,
    FieldSummary, RatioRow, TailEstimate, TailNorm, HIT_GATE,
};
pub use output::{manifest_path, write_results, Cell, RunManifest, Table};

use std::time::Instant;

use rayon::prelude::*;

use crate::characters::build_character_table;
use crate::error::{Error, Result};
use crate::numtheory::{build_prime_table, PrimeTable};
use crate::products::{parseval_check, scale_point};
use crate::rmf::{sample_rmf, RmfModel};
use crate::rng::{Domain, StreamId};
use crate::tilt::{girsanov_compare, BandEvent, CompareRule, TiltSpec};
use crate::walks::{admissible_pairs, corridor_dp, scaling_fit, walk_barrier_mc, DpGrid, WalkSpec, DP_MAX_STEPS};

/// Result of one configured run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub table: Table,
    pub manifest: RunManifest,
}

fn table_limit(config: &Config) -> u64 {
    let x_max = config.x.iter().copied().max().unwrap_or(2);
    match config.experiment {
        ExperimentKind::Tilt => scale_point(x_max as f64, 1.0).ceil() as u64 + 1,
        ExperimentKind::Walks | ExperimentKind::Characters => 2,
        _ => x_max,
    }
    .max(2)
}

/// Runs the configured experiment on a dedicated pool of `config.threads`
/// workers (all cores by default). Output does not depend on the count.
pub fn run_experiment(config: &Config) -> Result<RunOutput> {
    config.validate()?;
    let threads = config.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Resource(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let mut manifest = RunManifest::new(config, threads);
    let mut table = pool.install(|| {
        let primes = build_prime_table(table_limit(config))?;
        dispatch(config, &primes, &mut manifest)
    })?;
    let elapsed = start.elapsed().as_secs_f64();
    manifest.wallclock_s = elapsed;
    if config.record_wallclock {
        if let Some(i) = table.column("wallclock_s") {
            for row in &mut table.rows {
                row[i] = Cell::Float(elapsed);
            }
        }
    }
    Ok(RunOutput { table, manifest })
}

/// Runs and, when `config.out` is set, writes the table and manifest.
pub fn run_and_write(config: &Config) -> Result<RunOutput> {
    let mut out = run_experiment(config)?;
    if let Some(path) = &config.out {
        write_results(&out.table, &mut out.manifest, path, config.format)?;
    }
    Ok(out)
}

fn dispatch(c: &Config, primes: &PrimeTable, manifest: &mut RunManifest) -> Result<Table> {
    match c.experiment {
        ExperimentKind::Moments => moments(c, primes),
        ExperimentKind::Ratio => ratio(c, primes, manifest),
        ExperimentKind::Chaos => chaos(c, primes),
        ExperimentKind::Bridge => bridge(c, primes),
        ExperimentKind::Walks => walks(c, manifest),
        ExperimentKind::Tilt => tilt(c, primes, manifest),
        ExperimentKind::Tails => tails(c, primes),
        ExperimentKind::Characters => characters(c),
        ExperimentKind::Parseval => parseval(c, primes, manifest),
        ExperimentKind::Fieldmax => fieldmax(c, primes, manifest),
    }
}

fn sorted_xs(c: &Config) -> Vec<u64> {
    let mut xs = c.x.clone();
    xs.sort_unstable();
    xs.dedup();
    xs
}

fn moments(c: &Config, primes: &PrimeTable) -> Result<Table> {
    let mut t = Table::new(&["experiment", "model", "x", "q", "trials", "estimate", "stderr", "seed", "wallclock_s"]);
    for m in moment_sweep(c.model, &sorted_xs(c), &c.q, c.trials, c.seed, primes)? {
        let x: u64 = m.snapshot["x"].parse().unwrap_or_default();
        let q: f64 = m.snapshot["q"].parse().unwrap_or_default();
        t.push(vec!["moments".into(), c.model.name().into(), x.into(), q.into(), m.trials.into(), m.estimate.into(), m.stderr.into(), c.seed.into(), 0.0.into()]);
    }
    Ok(t)
}

fn ratio(c: &Config, primes: &PrimeTable, manifest: &mut RunManifest) -> Result<Table> {
    let mut t = Table::new(&[
        "experiment", "model", "x", "q", "trials", "estimate", "stderr", "target", "ratio", "normalized", "normalized_se",
        "drop_to_next", "drop_se", "seed", "wallclock_s",
    ]);
    for (&q, rows) in c.q.iter().zip(theorem_ratios(c.model, &sorted_xs(c), &c.q, c.trials, c.seed, primes)?) {
        let ok = rows.iter().all(RatioRow::decrease_within_allowance);
        manifest.summary.insert(format!("q={q}:decrease_within_4se"), ok.to_string());
        for r in rows {
            t.push(vec![
                "ratio".into(),
                c.model.name().into(),
                r.x.into(),
                q.into(),
                r.moment.trials.into(),
                r.moment.estimate.into(),
                r.moment.stderr.into(),
                r.target.into(),
                r.ratio.into(),
                r.normalized.into(),
                r.normalized_se.into(),
                r.drop_to_next.map(|d| d.0).into(),
                r.drop_to_next.map(|d| d.1).into(),
                c.seed.into(),
                0.0.into(),
            ]);
        }
    }
    Ok(t)
}

fn chaos(c: &Config, primes: &PrimeTable) -> Result<Table> {
    let mut t = Table::new(&["experiment", "model", "x", "sigma", "v", "trial", "chaos_integral", "normalized", "seed"]);
    let sigma = c.sigma.unwrap_or(0.0);
    for x in sorted_xs(c) {
        let dt = c.grid_dt.unwrap_or_else(|| default_grid_dt(x));
        let s = chaos_samples(c.model, x, sigma, c.constants.v, dt, c.trials, c.seed, primes)?;
        let lx = (x as f64).ln();
        for (i, (_, ci)) in s.iter().enumerate() {
            t.push(vec!["chaos".into(), c.model.name().into(), x.into(), sigma.into(), c.constants.v.into(), i.into(), (*ci).into(), (ci / lx).into(), c.seed.into()]);
        }
    }
    Ok(t)
}

fn bridge(c: &Config, primes: &PrimeTable) -> Result<Table> {
    let mut t = Table::new(&["experiment", "model", "x", "q", "trials", "lhs", "lhs_se", "rhs", "rhs_se", "ratio", "seed", "wallclock_s"]);
    for x in sorted_xs(c) {
        let dt = c.grid_dt.unwrap_or_else(|| default_grid_dt(x));
        for r in chaos_bridge_ratio(c.model, x, &c.q, c.trials, c.seed, c.constants.v, dt, primes)? {
            t.push(vec![
                "bridge".into(), c.model.name().into(), x.into(), r.q.into(), r.trials.into(), r.lhs.into(), r.lhs_se.into(),
                r.rhs.into(), r.rhs_se.into(), r.ratio.into(), c.seed.into(), 0.0.into(),
            ]);
        }
    }
    Ok(t)
}

fn walks(c: &Config, manifest: &mut RunManifest) -> Result<Table> {
    let mut t = Table::new(&["experiment", "n", "a", "trials", "estimate", "stderr", "dp", "scaled", "seed", "wallclock_s"]);
    let mut pts = Vec::new();
    let pairs: Vec<(usize, f64)> = c.n.iter().flat_map(|&n| c.a.iter().map(move |&a| (n, a))).collect();
    for (n, a) in pairs {
        let spec = WalkSpec::unit(n, a);
        let est = walk_barrier_mc(&spec, c.trials, c.seed)?;
        let dp = if n <= DP_MAX_STEPS { Some(corridor_dp(&spec.corridor(), DpGrid::default())?) } else { None };
        let scaled = est.estimate * (n as f64).sqrt() / a;
        if admissible_pairs(&[n], &[a]).len() == 1 && est.estimate > 0.0 {
            pts.push((n as f64, a, est.estimate));
        }
        t.push(vec!["walks".into(), n.into(), a.into(), c.trials.into(), est.estimate.into(), est.stderr.into(), dp.into(), scaled.into(), c.seed.into(), 0.0.into()]);
    }
    match scaling_fit(&pts) {
        Ok(f) => {
            manifest.summary.insert("fit_slope".into(), format!("{}", f.slope));
            manifest.summary.insert("fit_intercept".into(), format!("{}", f.intercept));
        }
        Err(e) => {
            manifest.summary.insert("fit".into(), e.to_string());
        }
    }
    Ok(t)
}

fn tilt(c: &Config, primes: &PrimeTable, manifest: &mut RunManifest) -> Result<Table> {
    let mut t = Table::new(&[
        "experiment", "model", "x", "n", "a", "trials", "tilted", "stderr", "reference", "ratio", "ess", "pass", "seed", "wallclock_s",
    ]);
    let k = &c.constants;
    let sigma = c.sigma.unwrap_or(0.0);
    let tt = c.t.unwrap_or(if c.two_product { 1.0 } else { 0.0 });
    let rule = CompareRule::Ratio { lo: k.band_lo, hi: k.band_hi };
    let mut pts = Vec::new();
    for x in sorted_xs(c) {
        for &n in &c.n {
            let mut spec = TiltSpec::equal_mass_scales(c.model, x, sigma, tt, k.window_lo, k.window_mass, n, primes)?;
            if c.two_product {
                spec = spec.two_product(tt);
            }
            for &a in &c.a {
                let event = BandEvent::drift_corridor(&spec, a, k.b, &vec![0.0; n], primes)?;
                let r = girsanov_compare(&spec, &event, c.trials, c.seed, rule, primes)?;
                if a <= (n as f64).sqrt() / 2.0 && r.tilted.estimate > 0.0 {
                    pts.push((n as f64, a, r.tilted.estimate));
                }
                let ess: f64 = r.tilted.snapshot.get("ess").and_then(|s| s.parse().ok()).unwrap_or(f64::NAN);
                t.push(vec![
                    "tilt".into(), c.model.name().into(), x.into(), n.into(), a.into(), c.trials.into(), r.tilted.estimate.into(),
                    r.tilted.stderr.into(), r.reference.into(), r.ratio.into(), ess.into(), r.pass.into(), c.seed.into(), 0.0.into(),
                ]);
            }
        }
    }
    if let Ok(f) = scaling_fit(&pts) {
        manifest.summary.insert("fit_slope".into(), format!("{}", f.slope));
    }
    Ok(t)
}

fn tails(c: &Config, primes: &PrimeTable) -> Result<Table> {
    let mut t = Table::new(&[
        "experiment", "model", "x", "lambda", "norm", "threshold", "trials", "hits", "estimate", "stderr", "upper_ref", "lower_ref", "seed", "wallclock_s",
    ]);
    let norm = c.tail_norm.unwrap_or(TailNorm::Scaled);
    for x in sorted_xs(c) {
        for e in tail_probability(c.model, x, &c.lambda, norm, c.constants.c_band, c.trials, c.seed, primes)? {
            let norm_name = match e.norm {
                TailNorm::Scaled => "scaled",
                TailNorm::Chebyshev => "chebyshev",
            };
            t.push(vec![
                "tails".into(), c.model.name().into(), x.into(), e.lambda.into(), norm_name.into(), e.threshold.into(), e.trials.into(),
                e.hits.into(), e.estimate.into(), e.stderr.into(), e.upper_ref.into(), e.lower_ref.into(), c.seed.into(), 0.0.into(),
            ]);
        }
    }
    Ok(t)
}

fn characters(c: &Config) -> Result<Table> {
    let p = c.p.ok_or_else(|| Error::Config("experiment `characters` needs key `p`".into()))?;
    let chars = build_character_table(p)?;
    let mut t = Table::new(&["experiment", "p", "x", "q", "value"]);
    for x in sorted_xs(c) {
        for &q in &c.q {
            t.push(vec!["characters".into(), (p as u64).into(), x.into(), q.into(), chars.char_sum_moment(x, q)?.into()]);
        }
    }
    Ok(t)
}

fn parseval(c: &Config, primes: &PrimeTable, manifest: &mut RunManifest) -> Result<Table> {
    let sigma = c.sigma.unwrap_or(0.1);
    let mut t = Table::new(&["experiment", "model", "x", "sigma", "trial", "lhs", "rhs", "rel_gap", "seed"]);
    let mut worst: f64 = 0.0;
    for x in sorted_xs(c) {
        let results: Vec<_> = (0..c.trials)
            .into_par_iter()
            .map(|trial| {
                let s = sample_rmf(c.model, x, primes, StreamId::new(c.seed, Domain::Rmf, trial))?;
                parseval_check(&s, x, sigma, primes)
            })
            .collect::<Result<_>>()?;
        for (i, r) in results.iter().enumerate() {
            worst = worst.max(r.rel_gap());
            t.push(vec!["parseval".into(), c.model.name().into(), x.into(), sigma.into(), i.into(), r.lhs.into(), r.rhs.into(), r.rel_gap().into(), c.seed.into()]);
        }
    }
    manifest.summary.insert("max_rel_gap".into(), format!("{worst}"));
    Ok(t)
}

fn fieldmax(c: &Config, primes: &PrimeTable, manifest: &mut RunManifest) -> Result<Table> {
    if c.model != RmfModel::Steinhaus {
        return Err(Error::Config("experiment `fieldmax` is Steinhaus only".into()));
    }
    let mut t = Table::new(&["experiment", "x", "lag", "covariance", "stderr", "exact", "trials", "seed"]);
    for x in sorted_xs(c) {
        let lx = (x as f64).ln();
        let grid = c.grid_count.unwrap_or(2 * ((lx - 1.0) / 2.0).floor() as usize + 1);
        let f = field_max_experiment(x, grid, c.trials, c.seed, primes)?;
        let mean_max = f.maxima.iter().sum::<f64>() / f.maxima.len() as f64;
        manifest.summary.insert(format!("x={x}:variance_target"), format!("{}", f.variance_target));
        manifest.summary.insert(format!("x={x}:mean_max"), format!("{mean_max}"));
        manifest.summary.insert(
            format!("x={x}:decreasing_on_range"),
            f.decreasing_on_range.map_or("empty range".to_string(), |b| b.to_string()),
        );
        for &(lag, cov, se) in &f.covariance {
            let exact = field_covariance_exact(x, lag, primes)?;
            t.push(vec!["fieldmax".into(), x.into(), lag.into(), cov.into(), se.into(), exact.into(), c.trials.into(), c.seed.into()]);
        }
    }
    Ok(t)
}
