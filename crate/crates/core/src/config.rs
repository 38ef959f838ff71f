//! Run configuration: one flat JSON object, every field optional.
//!
//! Missing fields take the defaults of the reference experiment
//! (β as in [`crate::envsim::REFERENCE_BETA`], σ_s = 1, σ_r = 3, p = 3, T = 210,
//! ζ = λ = 0.001, τ = 1, N = 50, ψ = 4%, ν = 5).

use crate::actor::ActorConfig;
use crate::critic::CriticConfig;
use crate::envsim::{identity_rows, OutlierConfig, SimConfig};
use crate::error::{Error, Result};
use crate::evalharness::{EvalConfig, LearnerConfig};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::path::Path;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub beta: Option<Vec<f64>>,
    pub p: Option<usize>,
    pub sigma_s: Option<f64>,
    pub sigma_r: Option<f64>,
    pub init_cov: Option<Vec<Vec<f64>>>,
    #[serde(rename = "horizon_T")]
    pub horizon_t: Option<usize>,
    pub psi: Option<f64>,
    pub nu: Option<f64>,
    pub zeta: Option<f64>,
    pub tau: Option<f64>,
    pub critic_max_iters: Option<usize>,
    pub lambda: Option<f64>,
    pub actor_max_iters: Option<usize>,
    pub grad_tol: Option<f64>,
    pub theta_init: Option<Vec<f64>>,
    pub alpha_ucb: Option<f64>,
    pub eval_horizon: Option<usize>,
    pub tail: Option<usize>,
    pub n_users: Option<usize>,
    pub base_seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub sim: SimConfig,
    pub outliers: OutlierConfig,
    pub critic: CriticConfig,
    pub actor: ActorConfig,
    pub eval: EvalConfig,
    pub alpha_ucb: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::resolve(ConfigFile::default()).expect("defaults are valid")
    }
}

impl RunConfig {
    pub fn resolve(file: ConfigFile) -> Result<Self> {
        let p = file.p.unwrap_or(3);
        let base = SimConfig::with_dim(p);
        let sim = SimConfig {
            beta: file.beta.unwrap_or(base.beta),
            p,
            sigma_s: file.sigma_s.unwrap_or(base.sigma_s),
            sigma_r: file.sigma_r.unwrap_or(base.sigma_r),
            init_cov: file.init_cov.unwrap_or_else(|| identity_rows(p)),
            horizon_t: file.horizon_t.unwrap_or(base.horizon_t),
        };
        let od = OutlierConfig::default();
        let outliers = OutlierConfig {
            psi: file.psi.unwrap_or(od.psi),
            nu: file.nu.unwrap_or(od.nu),
        };
        let cd = CriticConfig::default();
        let critic = CriticConfig {
            zeta: file.zeta.unwrap_or(cd.zeta),
            tau: file.tau.unwrap_or(cd.tau),
            max_iters: file.critic_max_iters.unwrap_or(cd.max_iters),
            capped: true,
        };
        let ad = ActorConfig::default();
        let actor = ActorConfig {
            lambda: file.lambda.unwrap_or(ad.lambda),
            max_iters: file.actor_max_iters.unwrap_or(ad.max_iters),
            grad_tol: file.grad_tol.unwrap_or(ad.grad_tol),
            theta_init: file.theta_init,
        };
        let ed = EvalConfig::default();
        let eval = EvalConfig {
            eval_horizon: file.eval_horizon.unwrap_or(ed.eval_horizon),
            tail: file.tail.unwrap_or(ed.tail),
            n_users: file.n_users.unwrap_or(ed.n_users),
            base_seed: file.base_seed.unwrap_or(ed.base_seed),
        };
        let cfg = Self {
            sim,
            outliers,
            critic,
            actor,
            eval,
            alpha_ucb: file.alpha_ucb.unwrap_or(1.0),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.outliers.validate()?;
        self.critic.validate()?;
        self.actor.validate()?;
        self.eval.validate()?;
        if let Some(t) = &self.actor.theta_init {
            if t.len() != self.sim.p + 1 {
                return Err(Error::config(format!(
                    "theta_init: expected {} entries, got {}",
                    self.sim.p + 1,
                    t.len()
                )));
            }
        }
        if !(self.alpha_ucb.is_finite() && self.alpha_ucb >= 0.0) {
            return Err(Error::config("alpha_ucb: must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn learners(&self) -> LearnerConfig {
        LearnerConfig {
            critic: self.critic,
            actor: self.actor.clone(),
            alpha_ucb: self.alpha_ucb,
        }
    }

    /// The flat file form; loading it back gives the same config.
    pub fn to_file(&self) -> ConfigFile {
        ConfigFile {
            beta: Some(self.sim.beta.clone()),
            p: Some(self.sim.p),
            sigma_s: Some(self.sim.sigma_s),
            sigma_r: Some(self.sim.sigma_r),
            init_cov: Some(self.sim.init_cov.clone()),
            horizon_t: Some(self.sim.horizon_t),
            psi: Some(self.outliers.psi),
            nu: Some(self.outliers.nu),
            zeta: Some(self.critic.zeta),
            tau: Some(self.critic.tau),
            critic_max_iters: Some(self.critic.max_iters),
            lambda: Some(self.actor.lambda),
            actor_max_iters: Some(self.actor.max_iters),
            grad_tol: Some(self.actor.grad_tol),
            theta_init: self.actor.theta_init.clone(),
            alpha_ucb: Some(self.alpha_ucb),
            eval_horizon: Some(self.eval.eval_horizon),
            tail: Some(self.eval.tail),
            n_users: Some(self.eval.n_users),
            base_seed: Some(self.eval.base_seed),
        }
    }
}

/// Splits `key=value`; the value is read as JSON when it parses, otherwise
/// as a bare string.
pub fn parse_override(spec: &str) -> Result<(String, Value)> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override `{spec}` is not key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(Error::config(format!("override `{spec}` has an empty key")));
    }
    let raw = raw.trim();
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

/// Parses config text (empty text means `{}`), applies overrides in order,
/// then validates.
pub fn parse_config(text: &str, overrides: &[(String, Value)]) -> Result<RunConfig> {
    let mut root: Value = if text.trim().is_empty() {
        Value::Object(Map::new())
    } else {
        serde_json::from_str(text).map_err(|e| Error::config(format!("JSON syntax: {e}")))?
    };
    let obj = root
        .as_object_mut()
        .ok_or_else(|| Error::config("top level must be a JSON object"))?;
    for (k, v) in overrides {
        obj.insert(k.clone(), v.clone());
    }
    let file: ConfigFile = serde_path_to_error::deserialize(root).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            Error::config(e.inner().to_string())
        } else {
            Error::config(format!("{path}: {}", e.inner()))
        }
    })?;
    RunConfig::resolve(file)
}

pub fn load_config(path: &Path, overrides: &[(String, Value)]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
    parse_config(&text, overrides)
}
