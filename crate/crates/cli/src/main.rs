use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rmf_core::error::Error;
use rmf_core::experiments::{run_and_write, Config, ExperimentKind, Format, TailNorm};
use rmf_core::rmf::RmfModel;

#[derive(Parser)]
#[command(name = "rmflab", version, about = "Random multiplicative function and multiplicative chaos lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// E|S(x)|^{2q} by Monte Carlo
    Moments(Flags),
    /// Moments over the predicted order, with decrease checks
    Ratio(Flags),
    /// Critical chaos integral per trial
    Chaos(Flags),
    /// Moment of |S|^2/x against the chaos moment
    Bridge(Flags),
    /// Gaussian random walk barrier probabilities
    Walks(Flags),
    /// Tilted product events against their Gaussian references
    Tilt(Flags),
    /// Tail probabilities P(|S(x)| >= threshold)
    Tails(Flags),
    /// Moments of Dirichlet character sums mod p
    Characters(Flags),
    /// Plancherel identity on the line Re s = 1/2 + sigma
    Parseval(Flags),
    /// Windowed log-modulus field: maxima and covariance
    Fieldmax(Flags),
}

#[derive(Args, Clone, Default)]
struct Flags {
    /// TOML config; flags given here override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    x: Vec<u64>,
    #[arg(long, value_delimiter = ',')]
    q: Vec<f64>,
    /// steinhaus or rademacher
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    sigma: Option<f64>,
    #[arg(long)]
    grid_dt: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json
    #[arg(long)]
    format: Option<String>,
    #[arg(long, value_delimiter = ',')]
    lambda: Vec<f64>,
    /// scaled (lambda sqrt(x)/(log log x)^{1/4}) or chebyshev (lambda sqrt(x))
    #[arg(long)]
    tail_norm: Option<String>,
    #[arg(long)]
    p: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    a: Vec<f64>,
    #[arg(long, allow_hyphen_values = true)]
    t: Option<f64>,
    #[arg(long)]
    two_product: bool,
    #[arg(long)]
    grid_count: Option<usize>,
    #[arg(long)]
    record_wallclock: bool,
}

impl Command {
    fn split(self) -> (ExperimentKind, Flags) {
        use ExperimentKind as K;
        match self {
            Command::Moments(f) => (K::Moments, f),
            Command::Ratio(f) => (K::Ratio, f),
            Command::Chaos(f) => (K::Chaos, f),
            Command::Bridge(f) => (K::Bridge, f),
            Command::Walks(f) => (K::Walks, f),
            Command::Tilt(f) => (K::Tilt, f),
            Command::Tails(f) => (K::Tails, f),
            Command::Characters(f) => (K::Characters, f),
            Command::Parseval(f) => (K::Parseval, f),
            Command::Fieldmax(f) => (K::Fieldmax, f),
        }
    }
}

fn build_config(kind: ExperimentKind, f: Flags) -> Result<Config, Error> {
    let mut c = match &f.config {
        Some(path) => Config::load_for(path, kind)?,
        None => Config::new(kind),
    };
    macro_rules! set {
        ($($field:ident),*) => {$(
            if let Some(v) = f.$field { c.$field = v; }
        )*};
    }
    macro_rules! set_opt {
        ($($field:ident),*) => {$(
            if f.$field.is_some() { c.$field = f.$field; }
        )*};
    }
    macro_rules! set_vec {
        ($($field:ident),*) => {$(
            if !f.$field.is_empty() { c.$field = f.$field; }
        )*};
    }
    set!(trials, seed);
    set_opt!(threads, sigma, grid_dt, out, p, t, grid_count);
    set_vec!(x, q, lambda, n, a);
    if let Some(m) = f.model {
        c.model = m.parse::<RmfModel>().map_err(|e| Error::Config(e.to_string()))?;
    }
    if let Some(fmt) = f.format {
        c.format = match fmt.as_str() {
            "csv" => Format::Csv,
            "json" => Format::Json,
            other => return Err(Error::Config(format!("unknown format `{other}` (csv or json)"))),
        };
    }
    if let Some(norm) = f.tail_norm {
        c.tail_norm = Some(match norm.as_str() {
            "scaled" => TailNorm::Scaled,
            "chebyshev" => TailNorm::Chebyshev,
            other => return Err(Error::Config(format!("unknown tail norm `{other}`"))),
        });
    }
    c.two_product |= f.two_product;
    c.record_wallclock |= f.record_wallclock;
    Ok(c)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) => 2,
        Error::Unstable { .. } => 3,
        Error::Io { .. } => 4,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let (kind, flags) = cli.command.split();
    let config = build_config(kind, flags)?;
    let out = run_and_write(&config)?;
    if config.out.is_none() {
        // no file target: the table goes to stdout
        let bytes = match config.format {
            Format::Csv => out.table.to_csv()?,
            Format::Json => out.table.to_json(&out.manifest)?,
        };
        std::io::stdout()
            .write_all(&bytes)
            .map_err(|source| Error::Io { path: "<stdout>".into(), source })?;
    }
    for (k, v) in &out.manifest.summary {
        eprintln!("{k}: {v}");
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rmflab: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
