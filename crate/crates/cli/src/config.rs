//! JSON configuration. Every field is optional and defaults to the
//! forest-trail setup; powers are given in dBm, distances in meters.

use anyhow::{bail, Context, Result};
use asyougo::acoe::choose_b;
use asyougo::adaptive::{Bounds, Constraints, MultiplierSchedules};
use asyougo::channel::{dbm_to_mw, CostWeights, Environment, FadingModel, PowerSet, PropagationParams};
use asyougo::experiment::{
    default_adaptive_schedules, default_constraints, default_learning_schedule, default_weights, Controller, ExperimentCase,
    DEFAULT_KAPPA,
};
use asyougo::learning::StepSchedule;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prior {
    pub eta: f64,
    pub sigma_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptiveConfig {
    pub xi0: CostWeights,
    pub fast: StepSchedule,
    pub slow: MultiplierSchedules,
    pub constraints: Constraints,
    /// Calibrated when absent.
    pub bounds: Option<Bounds>,
    pub kappa: f64,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        let (fast, slow) = default_adaptive_schedules();
        Self {
            xi0: CostWeights { xi_out: 100.0, xi_relay: 3.0 },
            fast,
            slow,
            constraints: default_constraints(),
            bounds: None,
            kappa: DEFAULT_KAPPA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub eta: f64,
    pub c_db: f64,
    pub r0_m: f64,
    pub sigma_db: f64,
    pub delta_m: f64,
    pub p_rcv_min_dbm: f64,
    pub power_levels_dbm: Vec<f64>,
    /// Chosen from `workable_outage` and `min_prob` when absent.
    pub b: Option<usize>,
    pub workable_outage: f64,
    pub min_prob: f64,
    pub weights: CostWeights,
    /// Guessed `(eta, sigma_db)` the initial policy is solved for.
    pub prior: Option<Prior>,
    pub learning: StepSchedule,
    pub adaptive: AdaptiveConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            eta: 4.7,
            c_db: 1.7,
            r0_m: 1.0,
            sigma_db: 7.7,
            delta_m: 20.0,
            p_rcv_min_dbm: -97.0,
            power_levels_dbm: vec![-18.0, -7.0, -4.0, 0.0, 5.0],
            b: None,
            workable_outage: 0.03,
            min_prob: 0.2,
            weights: default_weights(),
            prior: None,
            learning: default_learning_schedule(),
            adaptive: AdaptiveConfig::default(),
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text).context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        self.truth().validate()?;
        self.powers()?;
        CostWeights::new(self.weights.xi_out, self.weights.xi_relay).context("weights")?;
        StepSchedule::new(self.learning.gain, self.learning.exponent).context("learning")?;
        if let Some(p) = self.prior {
            self.truth().with_eta_sigma(p.eta, p.sigma_db).validate().context("prior")?;
        }
        if self.b == Some(0) {
            bail!("b must be at least 1");
        }
        if !(self.workable_outage > 0.0 && self.workable_outage < 1.0 && self.min_prob > 0.0 && self.min_prob < 1.0) {
            bail!("workable_outage and min_prob must lie in (0, 1)");
        }
        self.case("custom", self.adaptive_controller(), 1, 1)?.validate().context("adaptive")?;
        Ok(())
    }

    pub fn truth(&self) -> PropagationParams {
        PropagationParams {
            eta: self.eta,
            c_ref: 10f64.powf(self.c_db / 10.0),
            r0: self.r0_m,
            sigma_db: self.sigma_db,
            delta: self.delta_m,
            p_rcv_min: dbm_to_mw(self.p_rcv_min_dbm),
            fading: FadingModel::Rayleigh,
        }
    }

    pub fn prior_params(&self) -> Option<PropagationParams> {
        self.prior.map(|p| self.truth().with_eta_sigma(p.eta, p.sigma_db))
    }

    pub fn powers(&self) -> Result<PowerSet> {
        PowerSet::from_dbm(&self.power_levels_dbm).context("power_levels_dbm")
    }

    pub fn true_env(&self) -> Result<Environment> {
        Ok(Environment::new(self.truth(), self.powers()?)?)
    }

    /// Environment the initial policy is solved in.
    pub fn prior_env(&self) -> Result<Environment> {
        Ok(Environment::new(self.prior_params().unwrap_or_else(|| self.truth()), self.powers()?)?)
    }

    /// Explicit `b`, or the largest workable horizon in the true environment.
    pub fn horizon(&self) -> Result<usize> {
        match self.b {
            Some(b) => Ok(b),
            None => Ok(choose_b(&self.true_env()?, self.workable_outage, self.min_prob)?),
        }
    }

    pub fn learning_controller(&self) -> Controller {
        Controller::Learning { weights: self.weights, schedule: self.learning }
    }

    pub fn adaptive_controller(&self) -> Controller {
        let a = &self.adaptive;
        Controller::Adaptive {
            xi0: a.xi0,
            fast: a.fast,
            slow: a.slow,
            constraints: a.constraints,
            bounds: a.bounds,
            kappa: a.kappa,
        }
    }

    pub fn case(&self, name: &str, controller: Controller, n_paths: usize, horizon: usize) -> Result<ExperimentCase> {
        Ok(ExperimentCase {
            name: name.to_string(),
            truth: self.truth(),
            prior: self.prior_params(),
            powers: self.powers()?,
            b: self.horizon()?,
            controller,
            n_paths,
            horizon,
        })
    }
}
