use std::fmt;
use std::path::{Path, PathBuf};

use cpa_core::baselines::{MfocussParams, DEFAULT_MBMP_MAX_ITERS};
use cpa_core::cpa::DEFAULT_LAMBDA;
use cpa_core::signal::DEFAULT_NOISE_RATIO;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Cpa,
    Icpa,
    Mbmp,
    Mfocuss,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Cpa => "cpa",
            Algorithm::Icpa => "icpa",
            Algorithm::Mbmp => "mbmp",
            Algorithm::Mfocuss => "mfocuss",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cpa" => Some(Algorithm::Cpa),
            "icpa" => Some(Algorithm::Icpa),
            "mbmp" => Some(Algorithm::Mbmp),
            "mfocuss" => Some(Algorithm::Mfocuss),
            _ => None,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Complexity,
    Novel,
    Masking,
    LambdaSweep,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Complexity => "complexity",
            Experiment::Novel => "novel",
            Experiment::Masking => "masking",
            Experiment::LambdaSweep => "lambda-sweep",
        }
    }
}

/// Serializable mirror of [`MfocussParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MfocussConfig {
    pub lambda: f64,
    pub p_norm: f64,
    pub epsilon: f64,
    pub prune_gamma: f64,
    pub max_iters: usize,
}

impl From<MfocussParams> for MfocussConfig {
    fn from(p: MfocussParams) -> Self {
        MfocussConfig {
            lambda: p.lambda,
            p_norm: p.p_norm,
            epsilon: p.epsilon,
            prune_gamma: p.prune_gamma,
            max_iters: p.max_iters,
        }
    }
}

impl From<MfocussConfig> for MfocussParams {
    fn from(c: MfocussConfig) -> Self {
        MfocussParams {
            lambda: c.lambda,
            p_norm: c.p_norm,
            epsilon: c.epsilon,
            prune_gamma: c.prune_gamma,
            max_iters: c.max_iters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_dims: usize,
    pub n_atoms: usize,
    pub n_steps: usize,
    pub k_values: Vec<usize>,
    pub noise_ratio: f64,
    /// Amplitude std of the novel atom; `None` or 0 means no novel atom.
    pub novel_std: Option<f64>,
    pub cpa_lambda: f64,
    pub mfocuss_params: MfocussConfig,
    pub mbmp_max_iters: usize,
    pub n_trials: usize,
    pub base_seed: u64,
    pub algorithms: Vec<Algorithm>,
    /// Directory receiving `results.csv` and `summary.json`.
    pub output_path: PathBuf,
}

pub const LARGE_N_DIMS: usize = 500;
pub const LARGE_N_ATOMS: usize = 10_000;
pub const DEFAULT_NOVEL_STD: f64 = 10.0;

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_dims: 200,
            n_atoms: 2000,
            n_steps: 10,
            k_values: vec![1, 5, 10, 20, 40],
            noise_ratio: DEFAULT_NOISE_RATIO,
            novel_std: Some(DEFAULT_NOVEL_STD),
            cpa_lambda: DEFAULT_LAMBDA,
            mfocuss_params: MfocussParams::default().into(),
            mbmp_max_iters: DEFAULT_MBMP_MAX_ITERS,
            n_trials: 10,
            base_seed: 0,
            algorithms: vec![Algorithm::Cpa, Algorithm::Mbmp, Algorithm::Mfocuss],
            output_path: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    /// Desk-scale defaults with the k values each experiment is run at.
    pub fn for_experiment(experiment: Experiment) -> Self {
        let k_values = match experiment {
            Experiment::Complexity => vec![1, 5, 10, 20, 40],
            Experiment::Novel => vec![1],
            Experiment::Masking | Experiment::LambdaSweep => vec![2],
        };
        ExperimentConfig {
            k_values,
            output_path: PathBuf::from("results").join(experiment.name()),
            ..Self::default()
        }
    }

    /// Experiment defaults overlaid with the fields present in a JSON file.
    pub fn load(path: &Path, experiment: Experiment) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text, experiment)
    }

    pub fn from_json(text: &str, experiment: Experiment) -> Result<Self, BenchError> {
        let overlay: Value = serde_json::from_str(text)
            .map_err(|e| BenchError::Config(format!("invalid JSON: {e}")))?;
        let Value::Object(fields) = overlay else {
            return Err(BenchError::Config("config must be a JSON object".into()));
        };
        let mut merged = serde_json::to_value(Self::for_experiment(experiment))
            .expect("config serializes");
        let target = merged.as_object_mut().expect("config is an object");
        for (key, value) in fields {
            if key == "mfocuss_params" {
                if let (Some(Value::Object(base)), Value::Object(over)) =
                    (target.get_mut("mfocuss_params"), &value)
                {
                    for (k, v) in over {
                        base.insert(k.clone(), v.clone());
                    }
                    continue;
                }
            }
            target.insert(key, value);
        }
        let config: Self = serde_json::from_value(merged)
            .map_err(|e| BenchError::Config(format!("invalid config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    /// Switches to the large problem size (N=500, M=10000).
    pub fn paper_scale(mut self) -> Self {
        self.n_dims = LARGE_N_DIMS;
        self.n_atoms = LARGE_N_ATOMS;
        self
    }

    pub fn mfocuss(&self) -> MfocussParams {
        self.mfocuss_params.into()
    }

    /// The novel-atom std, with 0 meaning none.
    pub fn novel_std_or_zero(&self) -> f64 {
        self.novel_std.unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let fail = |msg: String| Err(BenchError::Config(msg));
        if self.n_dims == 0 || self.n_atoms == 0 || self.n_steps == 0 {
            return fail(format!(
                "n_dims, n_atoms and n_steps must be positive, got {}, {}, {}",
                self.n_dims, self.n_atoms, self.n_steps
            ));
        }
        if self.n_trials == 0 {
            return fail("n_trials must be at least 1".into());
        }
        if self.k_values.is_empty() {
            return fail("k_values must not be empty".into());
        }
        if let Some(&k) = self.k_values.iter().find(|&&k| k == 0 || k >= self.n_atoms) {
            return fail(format!("k={k} must lie in 1..{}", self.n_atoms));
        }
        if !(self.noise_ratio >= 0.0 && self.noise_ratio.is_finite()) {
            return fail(format!("noise_ratio must be >= 0, got {}", self.noise_ratio));
        }
        if let Some(s) = self.novel_std {
            if !(s >= 0.0 && s.is_finite()) {
                return fail(format!("novel_std must be >= 0, got {s}"));
            }
        }
        if !(self.cpa_lambda > 0.0 && self.cpa_lambda.is_finite()) {
            return fail(format!("cpa_lambda must be > 0, got {}", self.cpa_lambda));
        }
        if let Err(e) = self.mfocuss().validate() {
            return fail(e.to_string());
        }
        if self.mbmp_max_iters == 0 {
            return fail("mbmp_max_iters must be at least 1".into());
        }
        if self.algorithms.is_empty() {
            return fail("algorithms must not be empty".into());
        }
        let mut seen = self.algorithms.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.algorithms.len() {
            return fail("algorithms must not repeat".into());
        }
        Ok(())
    }
}
