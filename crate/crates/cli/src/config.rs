//! Flat `key = value` run configuration with per-command defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use wind::{BonMode, LossKind};

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Parse { line: usize, message: String },
    Value { key: String, message: String },
    Io(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse { line, message } => write!(f, "config line {line}: {message}"),
            ConfigError::Value { key, message } => write!(f, "invalid `{key}`: {message}"),
            ConfigError::Io(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

fn value_err(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        key: key.to_string(),
        message: message.into(),
    }
}

/// Every key accepted in a config file, in the order they are echoed.
pub const KEYS: &[&str] = &[
    "game",
    "num_prompts",
    "num_responses",
    "seed",
    "num_seeds",
    "beta",
    "eta",
    "n",
    "T",
    "M",
    "loss",
    "nce_p",
    "mode",
    "mc_samples",
    "grid",
    "init",
    "delta",
    "top_mass",
    "tol",
    "inner_steps",
    "inner_lr",
];

/// Parse `key = value` lines; `#` starts a comment, blank lines are
/// ignored, unknown and repeated keys are errors.
pub fn parse_config_str(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| ConfigError::Parse {
            line: k + 1,
            message,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(format!("expected `key = value`, got `{line}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(parse_err(format!("unknown key `{key}`")));
        }
        if value.is_empty() {
            return Err(parse_err(format!("missing value for `{key}`")));
        }
        if out.insert(key.to_string(), value.to_string()).is_some() {
            return Err(parse_err(format!("duplicate key `{key}`")));
        }
    }
    Ok(out)
}

pub fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io(format!("cannot read config {}: {e}", path.display())))?;
    parse_config_str(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Ibon,
    WindExact,
    WindSample,
    SweepBeta,
    BoundCheck,
    NashGap,
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Ibon => "ibon",
            Command::WindExact => "wind-exact",
            Command::WindSample => "wind-sample",
            Command::SweepBeta => "sweep-beta",
            Command::BoundCheck => "bound-check",
            Command::NashGap => "nash-gap",
            Command::Selftest => "selftest",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GameChoice {
    /// Built-in two-response game with rewards (1, 0).
    Demo,
    /// Standard-normal rewards of size `num_prompts × num_responses`.
    Random,
}

/// β grid as given: evenly spaced `LO:HI:COUNT` or an explicit list.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let values = match parts.as_slice() {
            [lo, hi, count] => {
                let lo: f64 = lo.parse().map_err(|_| format!("bad lower bound `{lo}`"))?;
                let hi: f64 = hi.parse().map_err(|_| format!("bad upper bound `{hi}`"))?;
                let count: usize = count.parse().map_err(|_| format!("bad count `{count}`"))?;
                if count == 0 || hi < lo {
                    return Err("need COUNT >= 1 and LO <= HI".into());
                }
                wind::experiments::linspace(lo, hi, count)
            }
            [list] => list
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| format!("bad grid value `{v}`"))
                })
                .collect::<Result<Vec<_>, _>>()?,
            _ => return Err(format!("expected LO:HI:COUNT or a comma list, got `{s}`")),
        };
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err("grid values must be finite and > 0".into());
        }
        Ok(Grid(values))
    }
}

/// Fully resolved run parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub game: GameChoice,
    pub num_prompts: usize,
    pub num_responses: usize,
    pub seed: u64,
    pub num_seeds: usize,
    pub beta: f64,
    pub eta: f64,
    pub n: usize,
    pub iters: usize,
    pub batch_size: usize,
    pub loss: LossKind,
    pub nce_p: f64,
    pub mode: String,
    pub mc_samples: usize,
    pub grid: Vec<f64>,
    pub dirichlet_init: bool,
    pub delta: f64,
    pub top_mass: f64,
    pub tol: f64,
    pub inner_steps: usize,
    pub inner_lr: f64,
}

impl RunConfig {
    /// Defaults of the contextual-bandit experiments for `cmd`.
    pub fn defaults(cmd: Command) -> Self {
        let mut c = RunConfig {
            game: GameChoice::Random,
            num_prompts: 20,
            num_responses: 100,
            seed: 0,
            num_seeds: 1,
            beta: 0.1,
            eta: 1.0,
            n: 2,
            iters: 10_000,
            batch_size: 4096,
            loss: LossKind::Sq,
            nce_p: 0.5,
            mode: "paper".into(),
            mc_samples: 10_000,
            grid: vec![0.1],
            dirichlet_init: false,
            delta: 0.0,
            top_mass: 0.9,
            tol: 1e-10,
            inner_steps: 200,
            inner_lr: 0.5,
        };
        match cmd {
            Command::Ibon => {
                c.eta = 16.0;
                c.iters = 50;
                c.dirichlet_init = true;
            }
            Command::SweepBeta => {
                c.iters = 5000;
                c.num_seeds = 3;
                c.grid = wind::experiments::linspace(0.01, 0.1, 10);
            }
            Command::BoundCheck => {
                c.num_prompts = 4;
                c.num_responses = 3;
                c.num_seeds = 5;
                c.grid = vec![0.005, 0.01, 0.02];
            }
            Command::WindSample => {
                c.beta = 1.0;
                c.iters = 30;
            }
            Command::WindExact | Command::NashGap => c.game = GameChoice::Demo,
            Command::Selftest => {}
        }
        c
    }

    /// Apply `key = value` overrides on top of `self`.
    pub fn apply(&mut self, values: &BTreeMap<String, String>) -> Result<(), ConfigError> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
            v.parse()
                .map_err(|_| value_err(key, format!("cannot parse `{v}`")))
        }
        for (key, v) in values {
            let v = v.as_str();
            match key.as_str() {
                "game" => {
                    self.game = match v {
                        "demo" => GameChoice::Demo,
                        "random" => GameChoice::Random,
                        _ => return Err(value_err(key, "expected demo|random")),
                    }
                }
                "num_prompts" => self.num_prompts = num(key, v)?,
                "num_responses" => self.num_responses = num(key, v)?,
                "seed" => self.seed = num(key, v)?,
                "num_seeds" => self.num_seeds = num(key, v)?,
                "beta" => self.beta = num(key, v)?,
                "eta" => self.eta = num(key, v)?,
                "n" => self.n = num(key, v)?,
                "T" => self.iters = num(key, v)?,
                "M" => self.batch_size = num(key, v)?,
                "loss" => {
                    self.loss = v
                        .parse()
                        .map_err(|_| value_err(key, "expected sq|kl|nce"))?
                }
                "nce_p" => self.nce_p = num(key, v)?,
                "mode" => self.mode = v.to_string(),
                "mc_samples" => self.mc_samples = num(key, v)?,
                "grid" => self.grid = v.parse::<Grid>().map_err(|m| value_err(key, m))?.0,
                "init" => {
                    self.dirichlet_init = match v {
                        "dirichlet" => true,
                        "uniform" => false,
                        _ => return Err(value_err(key, "expected dirichlet|uniform")),
                    }
                }
                "delta" => self.delta = num(key, v)?,
                "top_mass" => self.top_mass = num(key, v)?,
                "tol" => self.tol = num(key, v)?,
                "inner_steps" => self.inner_steps = num(key, v)?,
                "inner_lr" => self.inner_lr = num(key, v)?,
                other => return Err(value_err(other, "unknown key")),
            }
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |key: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(value_err(key, format!("must be finite and > 0, got {v}")))
            }
        };
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(value_err(
                "beta",
                format!("must be finite and >= 0, got {}", self.beta),
            ));
        }
        positive("eta", self.eta)?;
        positive("tol", self.tol)?;
        positive("inner_lr", self.inner_lr)?;
        if !(self.nce_p > 0.0 && self.nce_p < 1.0) {
            return Err(value_err(
                "nce_p",
                format!("must lie in (0, 1), got {}", self.nce_p),
            ));
        }
        if !(0.0..0.5).contains(&self.delta) {
            return Err(value_err(
                "delta",
                format!("must lie in [0, 0.5), got {}", self.delta),
            ));
        }
        if !(self.top_mass > 0.0 && self.top_mass < 1.0) {
            return Err(value_err(
                "top_mass",
                format!("must lie in (0, 1), got {}", self.top_mass),
            ));
        }
        for (key, v) in [
            ("num_prompts", self.num_prompts),
            ("num_responses", self.num_responses),
            ("num_seeds", self.num_seeds),
            ("n", self.n),
            ("T", self.iters),
            ("M", self.batch_size),
            ("mc_samples", self.mc_samples),
            ("inner_steps", self.inner_steps),
        ] {
            if v == 0 {
                return Err(value_err(key, "must be >= 1"));
            }
        }
        self.bon_mode()?;
        Ok(())
    }

    pub fn bon_mode(&self) -> Result<BonMode, ConfigError> {
        match self.mode.as_str() {
            "paper" => Ok(BonMode::ClosedForm),
            "order" => Ok(BonMode::OrderStatistics),
            "mc" => Ok(BonMode::MonteCarlo {
                samples: self.mc_samples,
                seed: self.seed,
            }),
            other => Err(value_err(
                "mode",
                format!("expected paper|order|mc, got `{other}`"),
            )),
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.num_seeds as u64).map(|k| self.seed + k).collect()
    }

    /// Resolved values keyed like the config file; parsing this back
    /// reproduces `self`.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let grid = self
            .grid
            .iter()
            .map(|v| format!("{v:?}"))
            .collect::<Vec<_>>()
            .join(",");
        vec![
            (
                "game",
                match self.game {
                    GameChoice::Demo => "demo".into(),
                    GameChoice::Random => "random".into(),
                },
            ),
            ("num_prompts", self.num_prompts.to_string()),
            ("num_responses", self.num_responses.to_string()),
            ("seed", self.seed.to_string()),
            ("num_seeds", self.num_seeds.to_string()),
            ("beta", format!("{:?}", self.beta)),
            ("eta", format!("{:?}", self.eta)),
            ("n", self.n.to_string()),
            ("T", self.iters.to_string()),
            ("M", self.batch_size.to_string()),
            ("loss", self.loss.to_string()),
            ("nce_p", format!("{:?}", self.nce_p)),
            ("mode", self.mode.clone()),
            ("mc_samples", self.mc_samples.to_string()),
            ("grid", grid),
            (
                "init",
                if self.dirichlet_init {
                    "dirichlet"
                } else {
                    "uniform"
                }
                .into(),
            ),
            ("delta", format!("{:?}", self.delta)),
            ("top_mass", format!("{:?}", self.top_mass)),
            ("tol", format!("{:?}", self.tol)),
            ("inner_steps", self.inner_steps.to_string()),
            ("inner_lr", format!("{:?}", self.inner_lr)),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_rejects_unknown() {
        let m = parse_config_str("# header\nbeta = 0.5  # inline\n\nT=20\n").unwrap();
        assert_eq!(m["beta"], "0.5");
        assert_eq!(m["T"], "20");
        match parse_config_str("beta = 1\nbogus = 2\n") {
            Err(ConfigError::Parse { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_config_str("beta\n"),
            Err(ConfigError::Parse { line: 1, .. })
        ));
        assert!(parse_config_str("beta = 1\nbeta = 2").is_err());
    }

    #[test]
    fn range_errors_name_the_key() {
        let mut c = RunConfig::defaults(Command::WindExact);
        let m = parse_config_str("beta = -1").unwrap();
        match c.apply(&m) {
            Err(ConfigError::Value { key, .. }) => assert_eq!(key, "beta"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn grids() {
        assert_eq!("0.01:0.1:10".parse::<Grid>().unwrap().0.len(), 10);
        assert_eq!("0.1,0.2".parse::<Grid>().unwrap().0, vec![0.1, 0.2]);
        assert!("0.1:0.01:3".parse::<Grid>().is_err());
        assert!("0:1:3".parse::<Grid>().is_err());
    }

    #[test]
    fn pairs_round_trip() {
        for cmd in [Command::Ibon, Command::SweepBeta, Command::WindSample] {
            let c = RunConfig::defaults(cmd);
            let text: String = c
                .to_pairs()
                .iter()
                .map(|(k, v)| format!("{k} = {v}\n"))
                .collect();
            let mut back = RunConfig::defaults(Command::WindExact);
            back.apply(&parse_config_str(&text).unwrap()).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn empty_file_gives_defaults() {
        let mut c = RunConfig::defaults(Command::SweepBeta);
        c.apply(&parse_config_str("").unwrap()).unwrap();
        assert_eq!((c.num_prompts, c.num_responses, c.eta), (20, 100, 1.0));
        assert_eq!(RunConfig::defaults(Command::Ibon).eta, 16.0);
    }
}
