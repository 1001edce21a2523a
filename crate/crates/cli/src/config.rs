//! Versioned TOML experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use seplab_core::profile::ProfileSpec;
use seplab_core::theory::{self, Regime, ScalingPair};
use seplab_core::walk::KernelSpec;
use seplab_core::zero_range::AsepParams;
use seplab_core::{Coupling, JumpKernel, StepProfile};

use crate::criteria::ALL_CRITERIA;
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub kernel: KernelSpec,
    pub profile: ProfileSpec,
    #[serde(default)]
    pub regime: RegimeSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub simulation: SimulationSpec,
    #[serde(default)]
    pub eps: EpsSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub asep: AsepSpec,
    #[serde(default)]
    pub verify: VerifySpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeSpec {
    pub kind: Regime,
    /// Required for `l_fast`: L(t) = ⌈c·√(t/log t)⌉.
    #[serde(default)]
    pub c: Option<f64>,
}

impl Default for RegimeSpec {
    fn default() -> Self {
        Self {
            kind: Regime::Full,
            c: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_t_grid")]
    pub t: Vec<f64>,
    #[serde(default = "default_x_grid")]
    pub x: Vec<f64>,
}

fn default_t_grid() -> Vec<f64> {
    vec![1e2, 1e3, 1e4]
}

fn default_x_grid() -> Vec<f64> {
    (-8..=16).map(|i| i as f64 * 0.25).collect()
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            t: default_t_grid(),
            x: default_x_grid(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_coupling")]
    pub coupling: Coupling,
    #[serde(default = "default_m_max")]
    pub m_max: usize,
}

fn default_replicates() -> usize {
    1000
}

fn default_coupling() -> Coupling {
    Coupling::Suppressed
}

fn default_m_max() -> usize {
    seplab_core::sim::DEFAULT_M_MAX
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            replicates: default_replicates(),
            seed: 0,
            coupling: default_coupling(),
            m_max: default_m_max(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsSpec {
    /// Total-variation budget of the simulated left cut.
    #[serde(default = "default_cut_eps")]
    pub cut: f64,
    /// Error budget of exact means.
    #[serde(default = "default_mean_eps")]
    pub mean: f64,
}

fn default_cut_eps() -> f64 {
    seplab_core::sim::DEFAULT_CUT_EPS
}

fn default_mean_eps() -> f64 {
    1e-6
}

impl Default for EpsSpec {
    fn default() -> Self {
        Self {
            cut: default_cut_eps(),
            mean: default_mean_eps(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: default_out_dir() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsepSpec {
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_asep_t")]
    pub t: Vec<f64>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
}

fn default_p() -> f64 {
    0.3
}

fn default_asep_t() -> Vec<f64> {
    vec![10.0, 50.0, 200.0]
}

impl Default for AsepSpec {
    fn default() -> Self {
        Self {
            p: default_p(),
            t: default_asep_t(),
            replicates: default_replicates(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    #[serde(default = "default_criteria")]
    pub criteria: Vec<u8>,
}

fn default_criteria() -> Vec<u8> {
    ALL_CRITERIA.to_vec()
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self {
            criteria: default_criteria(),
        }
    }
}

/// A parsed, validated configuration.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub kernel: JumpKernel,
    pub profile: StepProfile,
}

fn invalid(field: &str, err: impl std::fmt::Display) -> CliError {
    CliError::ConfigInvalid(format!("{field}: {err}"))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::ConfigInvalid(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::ConfigInvalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// SHA-256 of the canonical JSON form, hex encoded. The output
    /// directory does not enter the hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputSpec::default();
        let canonical = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn validate(self) -> Result<Experiment, CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        let kernel = self.kernel.build().map_err(|e| invalid("kernel", e))?;
        let profile = self.profile.build().map_err(|e| invalid("profile", e))?;
        if self.regime.kind == Regime::LFast && !self.regime.c.is_some_and(|c| c > 0.0) {
            return Err(invalid("regime.c", "l_fast needs a positive c"));
        }
        if self.grid.t.is_empty() {
            return Err(invalid("grid.t", "empty"));
        }
        if self.grid.x.iter().any(|x| !x.is_finite()) {
            return Err(invalid("grid.x", "values must be finite"));
        }
        if self.simulation.replicates == 0 {
            return Err(invalid("simulation.replicates", "must be at least 1"));
        }
        for (field, eps) in [("eps.cut", self.eps.cut), ("eps.mean", self.eps.mean)] {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(invalid(field, format!("must lie in (0, 1), got {eps}")));
            }
        }
        if !(self.asep.p > 0.0) {
            return Err(invalid("asep.p", "must be positive"));
        }
        AsepParams::new(self.asep.p).map_err(|e| invalid("asep.p", e))?;
        if self.asep.t.iter().any(|t| !(*t >= 0.0)) {
            return Err(invalid("asep.t", "times must be nonnegative"));
        }
        if let Some(bad) = self.verify.criteria.iter().find(|c| !ALL_CRITERIA.contains(c)) {
            return Err(invalid("verify.criteria", format!("unknown criterion {bad}")));
        }
        let experiment = Experiment {
            config: self,
            kernel,
            profile,
        };
        for &t in &experiment.config.grid.t {
            experiment.at(t).map_err(|e| invalid("grid.t", e))?;
        }
        Ok(experiment)
    }
}

impl Experiment {
    /// Profile and scaling used at horizon `t`; L-regimes truncate the
    /// profile at the regime's L(t).
    pub fn at(&self, t: f64) -> Result<(StepProfile, ScalingPair), CliError> {
        let rc = &self.config.regime;
        Ok(match rc.kind {
            Regime::Full => (self.profile.clone(), theory::scaling_full(t)?),
            Regime::LFast => {
                let s = theory::scaling_l_fast(t, rc.c.unwrap_or(0.0))?;
                (self.profile.with_l_cut(s.l), s)
            }
            Regime::LSlow => {
                let l = theory::l_slow_length(t);
                (self.profile.with_l_cut(Some(l)), theory::scaling_L(t, l)?)
            }
        })
    }

    pub fn hash(&self) -> String {
        self.config.hash()
    }
}
