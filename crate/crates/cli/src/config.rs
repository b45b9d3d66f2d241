//! Experiment configuration: a plain `key = value` file, overridden by
//! environment variables and then by command-line settings.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use modelcheck::armodels::SyntheticCase;
use modelcheck::ssm::TankVariant;

use crate::error::{config, io, Result};

/// Seed used when neither the file, the environment nor a flag sets one.
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Experiment {
    /// One of the AR data-generating processes, checked against the AR(1) class.
    Ar(SyntheticCase),
    WatertankSynthetic,
    WatertankData,
}

impl Experiment {
    pub fn is_watertank(&self) -> bool {
        !matches!(self, Experiment::Ar(_))
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Experiment::Ar(case) => case.fmt(f),
            Experiment::WatertankSynthetic => f.write_str("watertank-synthetic"),
            Experiment::WatertankData => f.write_str("watertank-data"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Itmc,
    LjungBox,
    Smw,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Itmc => "itmc",
            Method::LjungBox => "ljung-box",
            Method::Smw => "smw",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = crate::error::CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "itmc" => Ok(Method::Itmc),
            "ljung-box" | "ljungbox" | "lb" => Ok(Method::LjungBox),
            "smw" => Ok(Method::Smw),
            other => Err(config(format!("unknown method '{other}' (expected itmc, ljung-box or smw)"))),
        }
    }
}

/// Parameters of the `custom` AR experiment.
#[derive(Debug, Clone, PartialEq, Default)]
struct CustomAr {
    coeffs: Option<Vec<f64>>,
    noise_var: Option<f64>,
    floor: Option<f64>,
    model_var: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Trajectory length T.
    pub len: usize,
    pub replications: usize,
    /// Parameter draws N.
    pub draws: usize,
    /// Replicates per draw M.
    pub replicates: usize,
    pub seed: u64,
    /// Requested methods, deduplicated, in the order given.
    pub methods: Vec<Method>,
    pub output: PathBuf,
    /// Ljung-Box lag; `None` uses the log-length rule.
    pub lag: Option<usize>,
    /// Gaussian prior on the AR(1) coefficient.
    pub prior_mean: f64,
    pub prior_var: f64,
    /// Row spacing of the cumulative trace.
    pub stride: usize,
    pub particles: usize,
    pub chain_iterations: usize,
    pub burn_in: usize,
    pub dt: f64,
    pub variant: TankVariant,
    pub synthetic_sets: usize,
    /// Extra sets generated at the nominal rates with every noise variance
    /// multiplied by `corruption_factor`.
    pub corrupted_sets: usize,
    pub corruption_factor: f64,
    pub data: Option<PathBuf>,
    pub input_column: String,
    pub output_column: String,
    /// Fill the `wall_time` column. Off by default so that reruns are byte-identical.
    pub timing: bool,
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Ar(SyntheticCase::I),
            len: 100,
            replications: 100,
            draws: 20,
            replicates: 50,
            seed: DEFAULT_SEED,
            methods: vec![Method::Itmc],
            output: PathBuf::from("out"),
            lag: None,
            prior_mean: 0.0,
            prior_var: 1.0,
            stride: 10,
            particles: 200,
            chain_iterations: 1000,
            burn_in: 300,
            dt: 4.0,
            variant: TankVariant::Extended,
            synthetic_sets: 6,
            corrupted_sets: 0,
            corruption_factor: 10.0,
            data: None,
            input_column: "u".into(),
            output_column: "y".into(),
            timing: false,
            threads: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value.trim().parse().map_err(|e| config(format!("{key} = '{value}': {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(config(format!("{key} = '{value}': expected a boolean"))),
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| parse(key, v)).collect()
}

/// Parses a seed in decimal or `0x` hexadecimal.
pub fn parse_seed(value: &str) -> Result<u64> {
    let v = value.trim();
    let parsed = match v.strip_prefix("0x").or_else(|| v.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => v.parse(),
    };
    parsed.map_err(|e| config(format!("seed = '{value}': {e}")))
}

/// Accumulates `key = value` settings and validates them once at the end.
#[derive(Debug, Clone, Default)]
pub struct ConfigBuilder {
    cfg: ExperimentConfig,
    experiment: Option<String>,
    custom: CustomAr,
}

impl ConfigBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Apply every `key = value` line of a file; `#` starts a comment.
    pub fn file(mut self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io(path))?;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| config(format!("{}:{}: expected key = value, got '{line}'", path.display(), n + 1)))?;
            self = self.set(k, v).map_err(|e| config(format!("{}:{}: {e}", path.display(), n + 1)))?;
        }
        Ok(self)
    }

    /// Apply `CHECK_SEED` and `CHECK_THREADS` if present.
    pub fn env(self) -> Result<Self> {
        self.env_from(|k| std::env::var(k).ok())
    }

    pub fn env_from(mut self, get: impl Fn(&str) -> Option<String>) -> Result<Self> {
        if let Some(v) = get("CHECK_SEED") {
            self = self.set("seed", &v)?;
        }
        if let Some(v) = get("CHECK_THREADS") {
            self = self.set("threads", &v)?;
        }
        Ok(self)
    }

    /// Apply a `key=value` pair as given on the command line.
    pub fn assignment(self, pair: &str) -> Result<Self> {
        let (k, v) = pair.split_once('=').ok_or_else(|| config(format!("expected key=value, got '{pair}'")))?;
        self.set(k, v)
    }

    pub fn set(mut self, key: &str, value: &str) -> Result<Self> {
        let key = key.trim().to_ascii_lowercase().replace('-', "_");
        let k = key.as_str();
        let c = &mut self.cfg;
        match k {
            "experiment" => self.experiment = Some(value.trim().to_ascii_lowercase()),
            "t" | "len" | "length" => c.len = parse(k, value)?,
            "replications" => c.replications = parse(k, value)?,
            "n" | "draws" => c.draws = parse(k, value)?,
            "m" | "replicates" => c.replicates = parse(k, value)?,
            "seed" => c.seed = parse_seed(value)?,
            "methods" | "method" => {
                let mut methods = Vec::new();
                for m in value.split(',').filter(|s| !s.trim().is_empty()) {
                    let m: Method = m.parse()?;
                    if !methods.contains(&m) {
                        methods.push(m);
                    }
                }
                c.methods = methods;
            }
            "output" | "output_dir" => c.output = PathBuf::from(value.trim()),
            "lag" | "h" => c.lag = Some(parse(k, value)?),
            "prior_mean" => c.prior_mean = parse(k, value)?,
            "prior_var" => c.prior_var = parse(k, value)?,
            "stride" => c.stride = parse(k, value)?,
            "particles" => c.particles = parse(k, value)?,
            "chain_iterations" => c.chain_iterations = parse(k, value)?,
            "burn_in" => c.burn_in = parse(k, value)?,
            "dt" => c.dt = parse(k, value)?,
            "variant" => {
                c.variant = match value.trim().to_ascii_lowercase().as_str() {
                    "original" => TankVariant::Original,
                    "extended" => TankVariant::Extended,
                    other => return Err(config(format!("unknown water-tank variant '{other}'"))),
                }
            }
            "synthetic_sets" => c.synthetic_sets = parse(k, value)?,
            "corrupted_sets" => c.corrupted_sets = parse(k, value)?,
            "corruption_factor" => c.corruption_factor = parse(k, value)?,
            "data" | "input" => c.data = Some(PathBuf::from(value.trim())),
            "input_column" => c.input_column = value.trim().to_string(),
            "output_column" => c.output_column = value.trim().to_string(),
            "timing" => c.timing = parse_bool(k, value)?,
            "threads" => c.threads = Some(parse(k, value)?),
            "ar_coeffs" => self.custom.coeffs = Some(parse_list(k, value)?),
            "noise_var" => self.custom.noise_var = Some(parse(k, value)?),
            "floor" => self.custom.floor = Some(parse(k, value)?),
            "model_var" => self.custom.model_var = Some(parse(k, value)?),
            _ => return Err(config(format!("unknown key '{key}'"))),
        }
        Ok(self)
    }

    pub fn build(self) -> Result<ExperimentConfig> {
        let mut cfg = self.cfg;
        if let Some(name) = self.experiment {
            cfg.experiment = match name.as_str() {
                "watertank-synthetic" | "watertank_synthetic" => Experiment::WatertankSynthetic,
                "watertank-data" | "watertank_data" => Experiment::WatertankData,
                "custom" => {
                    let c = self.custom;
                    let coeffs = c.coeffs.ok_or_else(|| config("custom experiment needs ar_coeffs"))?;
                    let sigma2 = c.noise_var.unwrap_or(1.0);
                    Experiment::Ar(SyntheticCase::Custom {
                        coeffs,
                        sigma2,
                        floor: c.floor,
                        model_sigma2: c.model_var.unwrap_or(sigma2),
                    })
                }
                other => Experiment::Ar(other.parse().map_err(|_| config(format!("unknown experiment '{other}'")))?),
            };
        }
        validate(&cfg)?;
        Ok(cfg)
    }
}

fn validate(c: &ExperimentConfig) -> Result<()> {
    let counts = [
        ("T", c.len),
        ("replications", c.replications),
        ("N", c.draws),
        ("M", c.replicates),
        ("stride", c.stride),
        ("particles", c.particles),
        ("chain_iterations", c.chain_iterations),
        ("synthetic_sets", c.synthetic_sets + c.corrupted_sets),
    ];
    if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
        return Err(config(format!("{name} must be positive")));
    }
    if c.threads == Some(0) {
        return Err(config("threads must be positive"));
    }
    if c.methods.is_empty() {
        return Err(config("at least one method is required"));
    }
    if !(c.prior_var > 0.0) {
        return Err(config("prior_var must be positive"));
    }
    if !(c.dt > 0.0) {
        return Err(config("dt must be positive"));
    }
    if !(c.corruption_factor > 0.0) {
        return Err(config("corruption_factor must be positive"));
    }
    if c.burn_in >= c.chain_iterations {
        return Err(config(format!(
            "burn_in ({}) must be smaller than chain_iterations ({}), which includes it",
            c.burn_in, c.chain_iterations
        )));
    }
    for &m in &c.methods {
        match (m, c.experiment.is_watertank()) {
            (Method::LjungBox, true) => {
                return Err(config(
                    "ljung-box needs one-step prediction errors of a linear model; the water-tank class has none, use itmc or smw",
                ))
            }
            (Method::Smw, false) => {
                return Err(config("smw recovers process noise from a state-space model; use it with a water-tank experiment"))
            }
            _ => {}
        }
    }
    if c.experiment == Experiment::WatertankData && c.data.is_none() {
        return Err(config("watertank-data needs a CSV path (data = <path>)"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn later_settings_override_earlier_ones() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(
            &path,
            "experiment = case-iv  # variance too small\nT = 50\nseed = 7\nmethods = itmc, ljung-box\n",
        )
        .unwrap();
        let cfg = ConfigBuilder::new()
            .file(&path)
            .unwrap()
            .env_from(|k| (k == "CHECK_SEED").then(|| "0x10".to_string()))
            .unwrap()
            .assignment("T=80")
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(cfg.experiment, Experiment::Ar(SyntheticCase::IV));
        assert_eq!((cfg.len, cfg.seed), (80, 16));
        assert_eq!(cfg.methods, vec![Method::Itmc, Method::LjungBox]);
    }

    #[test]
    fn file_errors_carry_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.cfg");
        std::fs::write(&path, "T = 5\nreplications = many\n").unwrap();
        let err = ConfigBuilder::new().file(&path).unwrap_err().to_string();
        assert!(err.contains(":2:") && err.contains("replications"), "{err}");
    }

    #[test]
    fn incompatible_methods_are_rejected() {
        let lb =
            ConfigBuilder::new().set("experiment", "watertank-synthetic").unwrap().set("methods", "ljung-box").unwrap();
        assert!(lb.build().unwrap_err().to_string().contains("ljung-box"));
        let smw = ConfigBuilder::new().set("methods", "smw").unwrap();
        assert!(smw.build().unwrap_err().to_string().contains("smw"));
    }

    #[test]
    fn watertank_data_requires_a_path() {
        let b = ConfigBuilder::new().set("experiment", "watertank-data").unwrap();
        assert!(b.build().unwrap_err().to_string().contains("CSV path"));
    }

    #[test]
    fn zero_counts_and_unknown_keys_are_rejected() {
        assert!(ConfigBuilder::new().set("M", "0").unwrap().build().is_err());
        assert!(ConfigBuilder::new().set("colour", "red").is_err());
        assert!(ConfigBuilder::new().set("burn_in", "1000").unwrap().build().is_err());
    }

    #[test]
    fn custom_case_takes_its_own_process() {
        let cfg = ConfigBuilder::new()
            .set("experiment", "custom")
            .unwrap()
            .set("ar_coeffs", "0.5, -0.2")
            .unwrap()
            .set("noise_var", "2")
            .unwrap()
            .build()
            .unwrap();
        let Experiment::Ar(case) = cfg.experiment else { panic!("not an AR experiment") };
        assert_eq!(case.model_sigma2(), 2.0);
    }
}
