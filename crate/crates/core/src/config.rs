//! TOML run configuration shared by every CLI subcommand. The raw config
//! text is hashed and echoed into all output artifacts, so any result file
//! can be traced back to the exact inputs.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::first_passage::Dynamics;
use crate::model::{
    CoxParams, HawkesParams, JumpFn, JumpSpec, ModelKind, SimGrid, ValidationReport,
    validate_cox, validate_hawkes,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: String,
    pub mu: f64,
    pub sigma1: f64,
    pub kappa: f64,
    pub theta: f64,
    #[serde(default)]
    pub sigma2: Option<f64>,
    #[serde(default)]
    pub eta: Option<f64>,
    pub lambda0: f64,
    #[serde(default = "default_s0")]
    pub s0: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    /// Mark atoms as `[[z, weight], ...]`; empty disables jumps.
    #[serde(default)]
    pub nu_atoms: Vec<[f64; 2]>,
    #[serde(default)]
    pub jump: Option<JumpConfig>,
    pub grid: GridConfig,
    #[serde(default)]
    pub rng: RngConfig,
    /// Cox tilt exponent alpha1 (must be > 1); engine default when absent.
    #[serde(default)]
    pub alpha1: Option<f64>,
}

fn default_s0() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpConfig {
    pub kind: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_steps: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RngConfig {
    #[serde(default)]
    pub seed: u64,
}

/// A parsed config plus the SHA-256 of its source text.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub run: RunConfig,
    pub hash: String,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn model_kind(&self) -> Result<ModelKind> {
        match self.model.as_str() {
            "cox" => Ok(ModelKind::Cox),
            "hawkes" => Ok(ModelKind::Hawkes),
            other => Err(Error::Config(format!("unknown model '{other}'"))),
        }
    }

    pub fn cox_params(&self) -> Result<CoxParams> {
        let sigma2 = self
            .sigma2
            .ok_or_else(|| Error::Config("cox model needs sigma2".into()))?;
        Ok(CoxParams {
            mu: self.mu,
            sigma1: self.sigma1,
            kappa: self.kappa,
            theta: self.theta,
            sigma2,
            lambda0: self.lambda0,
            s0: self.s0,
            horizon: self.horizon,
        })
    }

    pub fn hawkes_params(&self) -> Result<HawkesParams> {
        let eta = self.eta.ok_or_else(|| Error::Config("hawkes model needs eta".into()))?;
        Ok(HawkesParams {
            mu: self.mu,
            sigma1: self.sigma1,
            kappa: self.kappa,
            theta: self.theta,
            eta,
            lambda0: self.lambda0,
            s0: self.s0,
            horizon: self.horizon,
        })
    }

    pub fn jump_spec(&self) -> Result<JumpSpec> {
        if self.nu_atoms.is_empty() {
            return Ok(JumpSpec::none());
        }
        let jump = self
            .jump
            .as_ref()
            .ok_or_else(|| Error::Config("nu_atoms given but no [jump] table".into()))?;
        let jump_fn = match jump.kind.as_str() {
            "const" => JumpFn::Const(jump.value),
            "linear_in_mark" => JumpFn::LinearInMark(jump.value),
            other => return Err(Error::Config(format!("unknown jump kind '{other}'"))),
        };
        let spec = JumpSpec {
            atoms: self.nu_atoms.iter().map(|a| (a[0], a[1])).collect(),
            jump_fn,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn sim_grid(&self) -> Result<SimGrid> {
        SimGrid::new(self.grid.n_steps, self.horizon)
    }

    pub fn validate(&self) -> Result<ValidationReport> {
        let report = match self.model_kind()? {
            ModelKind::Cox => validate_cox(&self.cox_params()?),
            ModelKind::Hawkes => validate_hawkes(&self.hawkes_params()?),
        };
        self.jump_spec()?;
        self.sim_grid()?;
        report.into_result()
    }
}

impl LoadedConfig {
    pub fn from_text(text: &str) -> Result<LoadedConfig> {
        let run = RunConfig::parse(text)?;
        let mut h = Sha256::new();
        h.update(text.as_bytes());
        let hash = h
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect::<String>();
        Ok(LoadedConfig { run, hash })
    }

    pub fn from_path(path: &std::path::Path) -> Result<LoadedConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    /// Borrow the parameters as simulation dynamics. The returned enum
    /// borrows from `params`, which the caller keeps alive.
    pub fn dynamics<'a>(
        &self,
        cox: &'a mut Option<CoxParams>,
        hawkes: &'a mut Option<HawkesParams>,
    ) -> Result<Dynamics<'a>> {
        match self.run.model_kind()? {
            ModelKind::Cox => {
                *cox = Some(self.run.cox_params()?);
                Ok(Dynamics::Cox(cox.as_ref().unwrap()))
            }
            ModelKind::Hawkes => {
                *hawkes = Some(self.run.hawkes_params()?);
                Ok(Dynamics::Hawkes(hawkes.as_ref().unwrap()))
            }
        }
    }
}
