//! Experiment configuration: flags layered over an optional JSON file.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use decoupling_core::constants::{Direction, Family};
use decoupling_core::probmodel::ENUMERATION_CAP;
use decoupling_core::stochint::{ProcessFamily, GAMMA_INNER};
use decoupling_core::suites::Suite;
use decoupling_core::SpaceDescriptor;

pub const SEED_ENV: &str = "DECOUPLING_LAB_SEED";

/// Keys left out of the config hash and the report envelope.
const UNHASHED: [&str; 2] = ["workers", "out"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Verify,
    Estimate,
    Bounds,
    Bdg,
    Atlas,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
pub enum Formula {
    #[serde(rename = "prop32-c")]
    #[value(name = "prop32-c")]
    Prop32C,
    #[serde(rename = "prop32-c-banach")]
    #[value(name = "prop32-c-banach")]
    Prop32CBanach,
    #[serde(rename = "thm41-k")]
    #[value(name = "thm41-k")]
    Thm41K,
    #[serde(rename = "thm41-dq")]
    #[value(name = "thm41-dq")]
    Thm41Dq,
    #[serde(rename = "hilbert-phi")]
    #[value(name = "hilbert-phi")]
    HilbertPhi,
    #[serde(rename = "linf-upper")]
    #[value(name = "linf-upper")]
    LinfUpper,
    #[serde(rename = "garling-lower")]
    #[value(name = "garling-lower")]
    GarlingLower,
}

/// Everything settable from the command line or a config file. Unset
/// fields fall back to the config file, then to per-command defaults.
#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Options {
    #[arg(skip)]
    pub command: Option<Command>,
    /// Space such as `l2:8`, `lp:0.5:4`, `linf:16` or `nested:1x2,3x2`; repeatable.
    #[arg(long)]
    pub space: Vec<String>,
    /// Moment exponents, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub p: Vec<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    /// Suite name, or `all`.
    #[arg(long)]
    pub suite: Option<String>,
    /// Search family for `estimate`/`atlas`, process family for `bdg`.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub direction: Option<Direction>,
    #[arg(long)]
    pub formula: Option<Formula>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Monte Carlo replicas (search) or Brownian paths (bdg).
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub budget: Option<usize>,
    /// Largest enumeration before falling back to Monte Carlo.
    #[arg(long)]
    pub cap: Option<u64>,
    #[arg(long)]
    pub max_exponent: Option<u32>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub intervals: Option<usize>,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Gaussian draws per γ-norm outside Hilbert spaces.
    #[arg(long)]
    pub inner: Option<usize>,
    #[arg(skip)]
    pub process: Option<ProcessFamily>,
    #[arg(long = "Dp")]
    #[serde(rename = "Dp")]
    pub dp: Option<f64>,
    /// Scalar decoupling constant; defaults to the placeholder 1.
    #[arg(long = "DR")]
    #[serde(rename = "DR")]
    pub dr: Option<f64>,
    #[arg(long = "A")]
    #[serde(rename = "A")]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub dim: Option<u64>,
    /// Fixed Kahane–Khintchine constant instead of the orthogonality policy.
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub k: Option<f64>,
    /// Falls back to the config file, then $DECOUPLING_LAB_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Estimate reports to tabulate instead of running a sweep (atlas).
    #[arg(long)]
    pub input: Vec<PathBuf>,
    /// Estimate report whose witness seeds the first restart.
    #[arg(long)]
    pub warm_start: Option<PathBuf>,
}

impl Options {
    /// `self` wins wherever it is set.
    pub fn over(self, base: Options) -> Options {
        macro_rules! pick {
            ($($f:ident),*) => { Options { $($f: self.$f.or(base.$f),)* ..Options::default() } };
        }
        let mut out = pick!(
            command,
            q,
            suite,
            family,
            direction,
            formula,
            depth,
            trials,
            samples,
            restarts,
            budget,
            cap,
            max_exponent,
            steps,
            intervals,
            rank,
            scale,
            horizon,
            inner,
            process,
            dp,
            dr,
            a,
            b,
            r,
            dim,
            k,
            seed,
            workers,
            out,
            format,
            warm_start
        );
        fn vec_or<T>(a: Vec<T>, b: Vec<T>) -> Vec<T> {
            if a.is_empty() {
                b
            } else {
                a
            }
        }
        out.space = vec_or(self.space, base.space);
        out.p = vec_or(self.p, base.p);
        out.input = vec_or(self.input, base.input);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    pub space: Vec<SpaceDescriptor>,
    pub p: Vec<f64>,
    pub q: Option<f64>,
    /// `None` runs every suite.
    pub suite: Option<Suite>,
    pub family: Option<String>,
    pub direction: Direction,
    pub formula: Option<Formula>,
    pub depth: usize,
    pub trials: usize,
    pub samples: usize,
    pub restarts: usize,
    pub budget: usize,
    pub cap: u64,
    pub max_exponent: u32,
    pub steps: usize,
    pub intervals: usize,
    pub rank: usize,
    pub scale: f64,
    pub horizon: f64,
    pub inner: usize,
    pub process: Option<ProcessFamily>,
    #[serde(rename = "Dp")]
    pub dp: Option<f64>,
    #[serde(rename = "DR")]
    pub dr: Option<f64>,
    #[serde(rename = "A")]
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub r: Option<f64>,
    pub dim: Option<u64>,
    #[serde(rename = "K")]
    pub k: Option<f64>,
    pub seed: u64,
    pub workers: usize,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub input: Vec<PathBuf>,
    pub warm_start: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

fn positive(name: &str, x: f64) -> Result<f64, ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(bad(format!("--{name} must be positive, got {x}")))
    }
}

pub fn read_options(path: &std::path::Path) -> Result<Options, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))
}

/// Builds the final config for `command`. `env_seed` is the raw value of
/// the seed environment variable.
pub fn resolve(command: Command, o: Options, env_seed: Option<&str>) -> Result<ExperimentConfig, ConfigError> {
    if let Some(c) = o.command {
        if c != command {
            return Err(bad(format!("config file is for `{c:?}`, not `{command:?}`").to_lowercase()));
        }
    }
    let seed = match (o.seed, env_seed) {
        (Some(s), _) => s,
        (None, Some(raw)) => raw.trim().parse().map_err(|_| bad(format!("{SEED_ENV}=`{raw}` is not a u64")))?,
        (None, None) => 0,
    };
    let default_spaces: &[&str] = match command {
        Command::Atlas => &["l2:4", "lp:1:4", "linf:4"],
        _ => &["l2:4"],
    };
    let space = if o.space.is_empty() {
        default_spaces.iter().map(|s| s.parse().unwrap()).collect()
    } else {
        o.space
            .iter()
            .map(|s| s.parse::<SpaceDescriptor>().map_err(|e| bad(format!("--space {s}: {e}"))))
            .collect::<Result<_, _>>()?
    };
    let p = match (o.p.is_empty(), command) {
        (false, _) => o.p,
        (true, Command::Atlas) => vec![1.5, 2.0, 4.0],
        (true, _) => vec![2.0],
    };
    for &x in &p {
        positive("p", x)?;
    }
    if let Some(q) = o.q {
        positive("q", q)?;
    }
    let suite = match o.suite.as_deref() {
        None | Some("all") => None,
        Some(s) => Some(s.parse::<Suite>().map_err(|e| bad(e.to_string()))?),
    };
    let steps = o.steps.unwrap_or(64);
    let intervals = o.intervals.unwrap_or(8);
    let rank = o.rank.unwrap_or(2);
    let scale = o.scale.unwrap_or(1.0);
    let (family, process) = match command {
        Command::Estimate | Command::Atlas => {
            let f = o.family.as_deref().unwrap_or("paley-walsh-multipliers");
            (Some(f.parse::<Family>().map_err(|e| bad(e.to_string()))?.as_str().to_string()), None)
        }
        Command::Bdg => {
            let process = match (o.process, o.family.as_deref().unwrap_or("sign-feedback")) {
                (Some(p), _) => p,
                (None, "zero") => ProcessFamily::Zero { intervals, rank },
                (None, "sign-feedback") => ProcessFamily::SignFeedback { intervals, rank, scale },
                (None, "cosine-feedback") => ProcessFamily::CosineFeedback { intervals, rank, scale },
                (None, other) => {
                    return Err(bad(format!(
                        "bdg family `{other}` needs a `process` entry in the config file \
                         (built-in: zero, sign-feedback, cosine-feedback)"
                    )))
                }
            };
            let name = serde_json::to_value(&process).unwrap()["family"].as_str().map(str::to_string);
            (name, Some(process))
        }
        _ => (o.family, None),
    };
    let formula = match command {
        Command::Bounds => Some(o.formula.ok_or_else(|| bad("bounds needs --formula"))?),
        _ => o.formula,
    };
    let depth = o.depth.unwrap_or(3);
    let trials = o.trials.unwrap_or(100);
    if depth == 0 || trials == 0 {
        return Err(bad("--depth and --trials must be positive"));
    }
    let samples = o.samples.unwrap_or(if command == Command::Bdg { 10_000 } else { 20_000 });
    if samples < 2 {
        return Err(bad("--samples must be at least 2"));
    }
    let horizon = positive("horizon", o.horizon.unwrap_or(1.0))?;
    Ok(ExperimentConfig {
        command,
        space,
        p,
        q: o.q,
        suite,
        family,
        direction: o.direction.unwrap_or(Direction::DecoupleUpper),
        formula,
        depth,
        trials,
        samples,
        restarts: o.restarts.unwrap_or(4).max(1),
        budget: o.budget.unwrap_or(64),
        cap: o.cap.unwrap_or(ENUMERATION_CAP as u64),
        max_exponent: o.max_exponent.unwrap_or(2),
        steps,
        intervals,
        rank,
        scale,
        horizon,
        inner: o.inner.unwrap_or(GAMMA_INNER),
        process,
        dp: o.dp,
        dr: o.dr,
        a: o.a,
        b: o.b,
        r: o.r,
        dim: o.dim,
        k: o.k,
        seed,
        workers: o.workers.unwrap_or(0),
        out: o.out,
        format: o.format.unwrap_or(if command == Command::Atlas { Format::Csv } else { Format::Json }),
        input: o.input,
        warm_start: o.warm_start,
    })
}

impl ExperimentConfig {
    /// The config without scheduling and output-location keys.
    pub fn canonical(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        let map = v.as_object_mut().expect("config is an object");
        for k in UNHASHED {
            map.remove(k);
        }
        v
    }

    /// sha256 of the canonical JSON (keys sorted).
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.canonical()).expect("config serializes");
        Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> Options {
        Options { space: vec!["linf:3".into()], p: vec![1.0, 2.0], seed: Some(5), ..Options::default() }
    }

    #[test]
    fn round_trips_through_json() {
        for c in [Command::Verify, Command::Estimate, Command::Bounds, Command::Bdg, Command::Atlas] {
            let o = Options { formula: Some(Formula::Thm41Dq), ..opts() };
            let cfg = resolve(c, o, None).unwrap();
            let text = serde_json::to_string(&cfg).unwrap();
            assert_eq!(serde_json::from_str::<ExperimentConfig>(&text).unwrap(), cfg);
            // a dumped config is also a valid config file
            let back: Options = serde_json::from_str(&text).unwrap();
            assert_eq!(resolve(c, back, None).unwrap(), cfg);
        }
    }

    #[test]
    fn hash_ignores_workers_and_out() {
        let a = resolve(Command::Verify, opts(), None).unwrap();
        let b =
            resolve(Command::Verify, Options { workers: Some(3), out: Some("x.json".into()), ..opts() }, None).unwrap();
        let c = resolve(Command::Verify, Options { seed: Some(6), ..opts() }, None).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn seed_fallback_order() {
        let base = Options { seed: Some(9), ..Options::default() };
        let seed = |flags: Options, file: Options, env| resolve(Command::Verify, flags.over(file), env).unwrap().seed;
        assert_eq!(seed(Options { seed: Some(1), ..Options::default() }, base.clone(), Some("4")), 1);
        assert_eq!(seed(Options::default(), base, Some("4")), 9);
        assert_eq!(seed(Options::default(), Options::default(), Some("4")), 4);
        assert_eq!(seed(Options::default(), Options::default(), None), 0);
        assert!(resolve(Command::Verify, Options::default(), Some("x")).is_err());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(resolve(Command::Verify, Options { space: vec!["l7".into()], ..Options::default() }, None).is_err());
        assert!(resolve(Command::Verify, Options { p: vec![-1.0], ..Options::default() }, None).is_err());
        assert!(resolve(Command::Bounds, Options::default(), None).is_err());
        assert!(
            resolve(Command::Estimate, Options { family: Some("nope".into()), ..Options::default() }, None).is_err()
        );
        assert!(resolve(Command::Bdg, Options { family: Some("constant".into()), ..Options::default() }, None).is_err());
    }
}
