//! Experiment configuration, read from TOML.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dppca_core::PrivacyBudget;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Annotated example accepted by [`ExperimentConfig::from_toml`]; printed by
/// `dppca --print-config-schema`.
pub const CONFIG_SCHEMA: &str = r#"# dppca experiment configuration (TOML).
# Keys marked (optional) may be omitted.

master_seed = 7                 # u64; every trial seed is derived from it
trials = 20                     # trials per grid point, >= 1
algorithms = ["oja", "private_oja", "minibatch_oja", "dppca", "baseline"]
output = "results.csv"          # (optional) CSV path; --out takes precedence
record_runtime = false          # (optional) fill runtime_ms; rows then differ between runs

[model]
kind = "gaussian"               # "gaussian" or "toy"
spiked = { lambda1 = 2.0, lambda2 = 1.0, d = 20 }
# gaussian alternative: diagonal = [2.0, 1.0, 1.0]
# toy model: kind = "toy" and d = 10; x = +-e_1 + N(0, sigma_noise_sq I)

[grid]                          # full cross product; every list non-empty
n = [10000, 40000]
epsilon = [0.89]                # baseline needs epsilon < 1
delta = [1e-5]
# sigma_noise_sq = [0.1, 0.01]  # toy model only, required there

[schedule]                      # (optional) overrides
# alpha = 2.0                   # eta_t = alpha / (gap t); default ln n
# c1 = 1.0                      # with c2: eta_t = c1 / (c2 + t) instead
# c2 = 10.0
# batch_size = 50000            # dp-pca batch; default n / ln(n)^2, doubled until it fits
# minibatch_steps = 100         # minibatch oja steps; default ln(n)^2
# zeta = 0.01                   # failure probability
# k_tail = 1.0                  # tail constant K; default 4 (gaussian), 1 (toy)
# subsets_constant = 16.0       # dp-pca eigenvalue estimator subsets
"#;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Oja,
    PrivateOja,
    MinibatchOja,
    Dppca,
    Baseline,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Oja,
        Algorithm::PrivateOja,
        Algorithm::MinibatchOja,
        Algorithm::Dppca,
        Algorithm::Baseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Oja => "oja",
            Algorithm::PrivateOja => "private_oja",
            Algorithm::MinibatchOja => "minibatch_oja",
            Algorithm::Dppca => "dppca",
            Algorithm::Baseline => "baseline",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| CliError::config("algorithms", format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Spiked {
    pub lambda1: f64,
    pub lambda2: f64,
    pub d: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Gaussian {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        diagonal: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        spiked: Option<Spiked>,
    },
    Toy {
        d: usize,
    },
}

impl ModelSpec {
    /// Diagonal of the Gaussian covariance.
    pub fn gaussian_diagonal(&self) -> Option<Vec<f64>> {
        match self {
            ModelSpec::Gaussian {
                diagonal: Some(diag), ..
            } => Some(diag.clone()),
            ModelSpec::Gaussian {
                spiked: Some(s), ..
            } => {
                let mut diag = vec![s.lambda2; s.d];
                if let Some(first) = diag.first_mut() {
                    *first = s.lambda1;
                }
                Some(diag)
            }
            _ => None,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ModelSpec::Toy { d } => *d,
            _ => self.gaussian_diagonal().map_or(0, |v| v.len()),
        }
    }

    pub fn is_toy(&self) -> bool {
        matches!(self, ModelSpec::Toy { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub n: Vec<usize>,
    pub epsilon: Vec<f64>,
    pub delta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sigma_noise_sq: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minibatch_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_tail: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsets_constant: Option<f64>,
}

fn default_trials() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub algorithms: Vec<Algorithm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub record_runtime: bool,
    pub model: ModelSpec,
    pub grid: Grid,
    #[serde(default)]
    pub schedule: ScheduleOverrides,
}

fn check(ok: bool, field: &str, message: impl Into<String>) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::config(field, message))
    }
}

fn positive_finite(x: f64) -> bool {
    x > 0.0 && x.is_finite()
}

impl ExperimentConfig {
    /// Parses and validates a TOML document.
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::config("config", e.to_string().trim().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        check(self.trials >= 1, "trials", "must be at least 1")?;
        check(!self.algorithms.is_empty(), "algorithms", "must not be empty")?;
        let unique: BTreeSet<_> = self.algorithms.iter().collect();
        check(unique.len() == self.algorithms.len(), "algorithms", "contains duplicates")?;

        match &self.model {
            ModelSpec::Gaussian { diagonal, spiked } => {
                check(
                    diagonal.is_some() != spiked.is_some(),
                    "model",
                    "a gaussian model needs exactly one of `diagonal` or `spiked`",
                )?;
                if let Some(s) = spiked {
                    check(s.d >= 1, "model.spiked.d", "must be at least 1")?;
                    check(
                        s.lambda1 > s.lambda2 && s.lambda2 >= 0.0 && s.lambda1.is_finite(),
                        "model.spiked",
                        "need lambda1 > lambda2 >= 0",
                    )?;
                }
                if let Some(diag) = diagonal {
                    check(!diag.is_empty(), "model.diagonal", "must not be empty")?;
                    check(
                        diag.iter().all(|x| *x >= 0.0 && x.is_finite()),
                        "model.diagonal",
                        "entries must be finite and nonnegative",
                    )?;
                    let mut sorted = diag.clone();
                    sorted.sort_by(|a, b| b.total_cmp(a));
                    check(
                        sorted.len() == 1 || sorted[0] > sorted[1],
                        "model.diagonal",
                        "the largest entry must be unique (no spectral gap otherwise)",
                    )?;
                }
                check(
                    self.grid.sigma_noise_sq.is_empty(),
                    "grid.sigma_noise_sq",
                    "only used by the toy model",
                )?;
            }
            ModelSpec::Toy { d } => {
                check(*d >= 1, "model.d", "must be at least 1")?;
                check(
                    !self.grid.sigma_noise_sq.is_empty(),
                    "grid.sigma_noise_sq",
                    "the toy model needs at least one noise level",
                )?;
                check(
                    self.grid.sigma_noise_sq.iter().all(|s| *s >= 0.0 && s.is_finite()),
                    "grid.sigma_noise_sq",
                    "entries must be finite and nonnegative",
                )?;
            }
        }

        check(!self.grid.n.is_empty(), "grid.n", "must not be empty")?;
        check(self.grid.n.iter().all(|&n| n >= 1), "grid.n", "entries must be at least 1")?;
        check(!self.grid.epsilon.is_empty(), "grid.epsilon", "must not be empty")?;
        check(!self.grid.delta.is_empty(), "grid.delta", "must not be empty")?;
        for &e in &self.grid.epsilon {
            for &d in &self.grid.delta {
                PrivacyBudget::new(e, d).map_err(|err| CliError::config("grid.epsilon/grid.delta", err.to_string()))?;
            }
        }
        if self.algorithms.contains(&Algorithm::Baseline) {
            check(
                self.grid.epsilon.iter().all(|&e| e < 1.0),
                "grid.epsilon",
                "the baseline needs epsilon < 1",
            )?;
        }

        let s = &self.schedule;
        if let Some(alpha) = s.alpha {
            check(alpha > 0.5 && alpha.is_finite(), "schedule.alpha", "must exceed 1/2")?;
        }
        check(
            s.c1.is_some() == s.c2.is_some(),
            "schedule.c1/schedule.c2",
            "give both or neither",
        )?;
        if let (Some(c1), Some(c2)) = (s.c1, s.c2) {
            check(positive_finite(c1), "schedule.c1", "must be positive")?;
            check(c2 >= 0.0 && c2.is_finite(), "schedule.c2", "must be nonnegative")?;
        }
        if let Some(b) = s.batch_size {
            check(b >= dppca_core::dppca::MIN_BATCH, "schedule.batch_size", "must be at least 4")?;
        }
        if let Some(t) = s.minibatch_steps {
            check(t >= 1, "schedule.minibatch_steps", "must be at least 1")?;
        }
        if let Some(z) = s.zeta {
            check(z > 0.0 && z < 1.0, "schedule.zeta", "must lie in (0, 1)")?;
        }
        if let Some(k) = s.k_tail {
            check(positive_finite(k), "schedule.k_tail", "must be positive")?;
        }
        if let Some(c) = s.subsets_constant {
            check(positive_finite(c), "schedule.subsets_constant", "must be positive")?;
        }
        Ok(())
    }

    /// Keeps only the listed algorithms, in config order.
    pub fn restrict_to(&mut self, keep: &[Algorithm]) -> Result<(), CliError> {
        for a in keep {
            check(
                self.algorithms.contains(a),
                "filter",
                format!("algorithm {a} is not in the config"),
            )?;
        }
        self.algorithms.retain(|a| keep.contains(a));
        Ok(())
    }

    pub fn zeta(&self) -> f64 {
        self.schedule.zeta.unwrap_or(dppca_core::oja::DEFAULT_ZETA)
    }
}

/// Parses `algo=a,b,...`.
pub fn parse_filter(spec: &str) -> Result<Vec<Algorithm>, CliError> {
    let (key, list) = spec
        .split_once('=')
        .ok_or_else(|| CliError::config("filter", "expected algo=<name>[,<name>...]"))?;
    check(key.trim() == "algo", "filter", format!("unknown filter key {key:?}"))?;
    let algos = list
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<Result<Vec<Algorithm>, _>>()
        .map_err(|e| CliError::config("filter", e.to_string()))?;
    check(!algos.is_empty(), "filter", "no algorithms given")?;
    Ok(algos)
}
