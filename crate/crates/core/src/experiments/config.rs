//! TOML run configuration. Every table rejects unknown keys.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::estimators::TailNorm;
use crate::error::{Error, Result};
use crate::rmf::RmfModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Moments,
    Ratio,
    Chaos,
    Bridge,
    Walks,
    Tilt,
    Tails,
    Characters,
    Parseval,
    Fieldmax,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Moments => "moments",
            ExperimentKind::Ratio => "ratio",
            ExperimentKind::Chaos => "chaos",
            ExperimentKind::Bridge => "bridge",
            ExperimentKind::Walks => "walks",
            ExperimentKind::Tilt => "tilt",
            ExperimentKind::Tails => "tails",
            ExperimentKind::Characters => "characters",
            ExperimentKind::Parseval => "parseval",
            ExperimentKind::Fieldmax => "fieldmax",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// The "sufficiently large constants" and engineering bands, in one place.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Constants {
    /// σ shift 4V/log x of the chaos bridge.
    pub v: f64,
    /// Barrier constant C of the good events.
    pub c: f64,
    /// Slope constant B of the lower barriers.
    pub b: f64,
    /// Exponent of log log x in the tail lower reference.
    pub c_band: f64,
    /// Mertens mass Σ 1/p of each tilt window.
    pub window_mass: f64,
    /// Lower end of the first tilt window.
    pub window_lo: f64,
    /// Ratio band for ≍ comparisons.
    pub band_lo: f64,
    pub band_hi: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Constants { v: 10.0, c: 2.0, b: 10.0, c_band: 2.0, window_mass: 0.08, window_lo: 4.0, band_lo: 0.25, band_hi: 4.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub experiment: ExperimentKind,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Worker threads; results do not depend on it.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Write measured wallclock into result rows (breaks byte-identity).
    #[serde(default)]
    pub record_wallclock: bool,
    #[serde(default = "default_model")]
    pub model: RmfModel,
    #[serde(default)]
    pub x: Vec<u64>,
    #[serde(default)]
    pub q: Vec<f64>,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub grid_dt: Option<f64>,
    #[serde(default)]
    pub lambda: Vec<f64>,
    #[serde(default)]
    pub tail_norm: Option<TailNorm>,
    /// Character modulus.
    #[serde(default)]
    pub p: Option<u32>,
    /// Walk lengths or tilt scale counts.
    #[serde(default)]
    pub n: Vec<usize>,
    /// Barrier heights.
    #[serde(default)]
    pub a: Vec<f64>,
    /// Tilt location or two-product gap.
    #[serde(default)]
    pub t: Option<f64>,
    #[serde(default)]
    pub two_product: bool,
    #[serde(default)]
    pub grid_count: Option<usize>,
    #[serde(default)]
    pub constants: Constants,
}

fn default_seed() -> u64 {
    1
}

fn default_trials() -> u64 {
    1000
}

fn default_model() -> RmfModel {
    RmfModel::Steinhaus
}

impl Config {
    pub fn new(experiment: ExperimentKind) -> Self {
        Config {
            experiment,
            seed: default_seed(),
            threads: None,
            trials: default_trials(),
            format: Format::Csv,
            out: None,
            record_wallclock: false,
            model: default_model(),
            x: Vec::new(),
            q: Vec::new(),
            sigma: None,
            grid_dt: None,
            lambda: Vec::new(),
            tail_norm: None,
            p: None,
            n: Vec::new(),
            a: Vec::new(),
            t: None,
            two_product: false,
            grid_count: None,
            constants: Constants::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parses a file meant for `kind`; `experiment` may be omitted but must
    /// agree when present.
    pub fn parse_for(text: &str, kind: ExperimentKind) -> Result<Self> {
        let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        match doc.get("experiment").and_then(|v| v.as_str()) {
            Some(name) if name != kind.name() => {
                return Err(Error::Config(format!("config is for `{name}`, not `{}`", kind.name())));
            }
            Some(_) => {}
            None => {
                doc.insert("experiment".into(), toml::Value::String(kind.name().into()));
            }
        }
        doc.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(path, Self::parse)
    }

    pub fn load_for(path: &Path, kind: ExperimentKind) -> Result<Self> {
        Self::read(path, |t| Self::parse_for(t, kind))
    }

    fn read(path: &Path, parse: impl FnOnce(&str) -> Result<Self>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// SHA-256 of the canonical serialization; insensitive to formatting,
    /// key order and comments in the source file.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    fn need<T>(&self, v: &[T], key: &str) -> Result<()> {
        if v.is_empty() {
            Err(Error::Config(format!("experiment `{}` needs key `{key}`", self.experiment.name())))
        } else {
            Ok(())
        }
    }

    /// Experiment-specific required keys.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("`trials` must be >= 1".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("`threads` must be >= 1".into()));
        }
        use ExperimentKind::*;
        match self.experiment {
            Moments | Ratio | Bridge => {
                self.need(&self.x, "x")?;
                self.need(&self.q, "q")
            }
            Chaos | Parseval | Fieldmax => self.need(&self.x, "x"),
            Tails => {
                self.need(&self.x, "x")?;
                self.need(&self.lambda, "lambda")
            }
            Characters => {
                self.need(&self.x, "x")?;
                self.need(&self.q, "q")?;
                self.p.map(|_| ()).ok_or_else(|| Error::Config("experiment `characters` needs key `p`".into()))
            }
            Walks | Tilt => {
                self.need(&self.n, "n")?;
                self.need(&self.a, "a")?;
                if self.experiment == Tilt {
                    self.need(&self.x, "x")?;
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_parses() {
        let c = Config::parse("experiment = \"moments\"\nx = [1000]\nq = [1.0]\ntrials = 1000\n").unwrap();
        assert_eq!(c.experiment, ExperimentKind::Moments);
        assert_eq!(c.constants, Constants::default());
        c.validate().unwrap();
    }

    #[test]
    fn unknown_key_is_named() {
        let err = Config::parse("experiment = \"moments\"\nx = [1000]\nq = [1.0]\ntrails = 5\n").unwrap_err();
        assert!(err.to_string().contains("trails"), "{err}");
        let err = Config::parse("experiment = \"moments\"\n[constants]\nvv = 3\n").unwrap_err();
        assert!(err.to_string().contains("vv"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn missing_key() {
        let c = Config::parse("experiment = \"tails\"\nx = [1000]\n").unwrap();
        assert!(c.validate().unwrap_err().to_string().contains("lambda"));
    }

    #[test]
    fn parse_for_fills_and_checks_kind() {
        let c = Config::parse_for("x = [10000]\nq = [1.0]\n", ExperimentKind::Moments).unwrap();
        assert_eq!(c.experiment, ExperimentKind::Moments);
        assert!(Config::parse_for("experiment = \"tails\"\n", ExperimentKind::Moments).is_err());
    }

    #[test]
    fn hash_ignores_formatting() {
        let a = Config::parse("experiment = \"moments\"\nx = [1000]\nq = [1.0]\n").unwrap();
        let b = Config::parse("# comment\nq = [ 1.0 ]\nexperiment=\"moments\"\n\nx=[1000]\nseed = 1\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = Config::parse("experiment = \"moments\"\nx = [1000]\nq = [0.5]\n").unwrap();
        assert_ne!(a.hash(), c.hash());
    }
}
