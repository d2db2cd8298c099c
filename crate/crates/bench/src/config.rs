//! TOML experiment description.
//!
//! ```toml
//! seed = 7
//! out_dir = "out/fixture"
//! target_gap = 1e-6
//!
//! [stop]
//! max_iters = 200
//!
//! [problem]
//! kind = "synthetic"
//! n = 500
//! d = 50
//! separation = 3.0
//!
//! [start]
//! kind = "ones"
//! scale = 1.0
//!
//! [[method]]
//! kind = "adaptive"
//! policy = "lbfgs-history"
//! ```

use std::path::{Path, PathBuf};

use cubicqn::solvers::{HessianPolicy, StopCriteria};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Subtracted from the best value seen when forming the `f*` proxy.
    #[serde(default)]
    pub gap_slack: f64,
    /// Gap used for the "iterations to target" column of the summary.
    #[serde(default = "default_target")]
    pub target_gap: f64,
    #[serde(default)]
    pub stop: StopConfig,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub start: StartConfig,
    #[serde(rename = "method")]
    pub methods: Vec<MethodConfig>,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_target() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopConfig {
    #[serde(default = "default_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub grad_tol: f64,
    /// Record wall-clock times. Off by default so outputs are reproducible.
    #[serde(default)]
    pub timing: bool,
}

fn default_iters() -> usize {
    200
}

impl Default for StopConfig {
    fn default() -> Self {
        Self { max_iters: default_iters(), grad_tol: 0.0, timing: false }
    }
}

impl From<StopConfig> for StopCriteria {
    fn from(s: StopConfig) -> Self {
        StopCriteria { max_iters: s.max_iters, grad_tol: s.grad_tol, timing: s.timing }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemConfig {
    /// Gaussian features with a planted hyperplane; `separation = inf` gives
    /// separable data. `seed` defaults to the experiment seed.
    Synthetic {
        n: usize,
        d: usize,
        #[serde(default = "default_separation")]
        separation: f64,
        seed: Option<u64>,
        #[serde(default)]
        mu: f64,
    },
    /// LIBSVM file (`.gz` accepted); relative paths resolve against the
    /// config file's directory.
    Libsvm {
        path: PathBuf,
        #[serde(default)]
        mu: f64,
        #[serde(default = "yes")]
        normalize: bool,
        /// Treat label 0 as −1 (for `{0, 1}` files).
        #[serde(default)]
        zero_as_negative: bool,
    },
    /// `½xᵀdiag(diagonal)x − ⟨linear, x⟩`.
    Quadratic { diagonal: Vec<f64>, linear: Option<Vec<f64>> },
}

fn default_separation() -> f64 {
    f64::INFINITY
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartConfig {
    pub kind: StartKind,
    #[serde(default = "unit")]
    pub scale: f64,
}

fn unit() -> f64 {
    1.0
}

impl Default for StartConfig {
    fn default() -> Self {
        Self { kind: StartKind::Zeros, scale: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartKind {
    Zeros,
    /// `scale·e`
    Ones,
}

impl StartConfig {
    pub fn point(&self, d: usize) -> Vec<f64> {
        match self.kind {
            StartKind::Zeros => vec![0.0; d],
            StartKind::Ones => vec![self.scale; d],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    Gd,
    ExactCrn,
    Adaptive,
    Accelerated,
    AltAdaptive,
    DampedNewton,
    Lbfgs,
    Lsr1,
}

impl MethodKind {
    pub fn label(self) -> &'static str {
        match self {
            MethodKind::Gd => "gd",
            MethodKind::ExactCrn => "exact-crn",
            MethodKind::Adaptive => "adaptive",
            MethodKind::Accelerated => "accelerated",
            MethodKind::AltAdaptive => "alt-adaptive",
            MethodKind::DampedNewton => "damped-newton",
            MethodKind::Lbfgs => "lbfgs",
            MethodKind::Lsr1 => "lsr1",
        }
    }

    fn is_cubic(self) -> bool {
        matches!(self, MethodKind::ExactCrn | MethodKind::Adaptive | MethodKind::Accelerated | MethodKind::AltAdaptive)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Exact,
    LbfgsHistory,
    LbfgsDamped,
    Lsr1History,
    Sampling,
    Combined,
}

impl PolicyKind {
    pub fn label(self) -> &'static str {
        match self {
            PolicyKind::Exact => "exact",
            PolicyKind::LbfgsHistory => "lbfgs-history",
            PolicyKind::LbfgsDamped => "lbfgs-damped",
            PolicyKind::Lsr1History => "lsr1-history",
            PolicyKind::Sampling => "sampling",
            PolicyKind::Combined => "combined",
        }
    }
}

/// One solver run. Unset numeric fields take the solver defaults.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    /// Output file stem; defaults to `kind` or `kind-policy`.
    pub name: Option<String>,
    pub kind: MethodKind,
    pub policy: Option<PolicyKind>,
    /// Step size for `gd`, `lbfgs` and `lsr1`.
    pub lr: Option<f64>,
    /// Damping for `damped-newton`.
    pub gamma: Option<f64>,
    /// Cubic weight `M`; defaults to `2·L2`.
    pub cubic_weight: Option<f64>,
    pub delta0: Option<f64>,
    pub gamma_inc: Option<f64>,
    pub gamma_dec: Option<f64>,
    pub memory: Option<usize>,
    pub upsilon: Option<f64>,
    /// Sampled directions added to the history model by the `combined` policy.
    pub samples: Option<usize>,
}

impl MethodConfig {
    pub fn display_name(&self) -> String {
        if let Some(name) = &self.name {
            return name.clone();
        }
        match (self.kind.is_cubic() && self.kind != MethodKind::ExactCrn, self.policy) {
            (true, Some(p)) => format!("{}-{}", self.kind.label(), p.label()),
            _ => self.kind.label().to_string(),
        }
    }

    pub fn hessian_policy(&self) -> HessianPolicy {
        let upsilon = self.upsilon.unwrap_or(1.0);
        match self.policy.unwrap_or(PolicyKind::LbfgsHistory) {
            PolicyKind::Exact => HessianPolicy::Exact,
            PolicyKind::LbfgsHistory => HessianPolicy::LbfgsHistory,
            PolicyKind::LbfgsDamped => HessianPolicy::LbfgsHistoryDamped,
            PolicyKind::Lsr1History => HessianPolicy::Lsr1History,
            PolicyKind::Sampling => HessianPolicy::BroydenSampling { upsilon },
            PolicyKind::Combined => HessianPolicy::Combined { upsilon, samples: self.samples.unwrap_or(1) },
        }
    }
}

impl ExperimentConfig {
    /// Reads and validates a config; relative data paths are resolved
    /// against the config's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        let mut cfg = Self::from_toml(&text)?;
        if let ProblemConfig::Libsvm { path: data, .. } = &mut cfg.problem {
            if data.is_relative() {
                if let Some(dir) = path.parent() {
                    *data = dir.join(&*data);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses without touching the filesystem; call [`validate`](Self::validate)
    /// before running.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.methods.is_empty() {
            return invalid("at least one [[method]] is required");
        }
        let mut names: Vec<String> = self.methods.iter().map(MethodConfig::display_name).collect();
        for name in &names {
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
                return invalid(format!("method name {name:?} must be non-empty and use [A-Za-z0-9._-]"));
            }
        }
        names.sort();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return invalid(format!("duplicate method name {:?}; set `name` to tell them apart", w[0]));
        }
        if !(self.gap_slack >= 0.0) || !(self.target_gap > 0.0) {
            return invalid("gap_slack must be >= 0 and target_gap > 0");
        }
        match &self.problem {
            ProblemConfig::Synthetic { n, d, separation, mu, .. } => {
                if *n == 0 || *d == 0 {
                    return invalid("synthetic problem needs n, d >= 1");
                }
                if !(*separation >= 0.0) || !(*mu >= 0.0) {
                    return invalid("separation and mu must be >= 0");
                }
            }
            ProblemConfig::Libsvm { path, mu, .. } => {
                if !path.is_file() {
                    return invalid(format!("data file {} does not exist", path.display()));
                }
                if !(*mu >= 0.0) {
                    return invalid("mu must be >= 0");
                }
            }
            ProblemConfig::Quadratic { diagonal, linear } => {
                if diagonal.is_empty() || diagonal.iter().any(|v| !(*v >= 0.0)) {
                    return invalid("quadratic diagonal must be non-empty and >= 0");
                }
                if linear.as_ref().is_some_and(|b| b.len() != diagonal.len()) {
                    return invalid("quadratic linear term must match the diagonal length");
                }
            }
        }
        for m in &self.methods {
            let name = m.display_name();
            let needs_policy = m.kind.is_cubic() && m.kind != MethodKind::ExactCrn;
            match (needs_policy, m.policy.is_some()) {
                (true, false) => return invalid(format!("method {name}: `policy` is required for {}", m.kind.label())),
                (false, true) => {
                    return invalid(format!("method {name}: `policy` does not apply to {}", m.kind.label()))
                }
                _ => {}
            }
            for (field, v) in [("lr", m.lr), ("cubic_weight", m.cubic_weight)] {
                if v.is_some_and(|v| !(v > 0.0 && v.is_finite())) {
                    return invalid(format!("method {name}: {field} must be positive"));
                }
            }
        }
        Ok(())
    }
}
