//! Named deployment experiments.
//!
//! Every case deploys in the forest-trail environment. Cases differ in the
//! controller and in the propagation parameters the initial policy was solved
//! for:
//!
//! | name          | controller                         | initial policy solved for |
//! |---------------|------------------------------------|---------------------------|
//! | `OAYG`        | fixed, `(125, 2)`                  | true parameters           |
//! | `OAYGL-1/2`   | fixed-weight learner, `(125, 2)`   | eta/sigma = 5/8, 4/7      |
//! | `FPWU-1/2`    | fixed, `(125, 2)`                  | eta/sigma = 5/8, 4/7      |
//! | `OAYGAL-1/2`  | constrained learner from `(100, 3)`| eta/sigma = 5/8, 4/7      |
//! | `FPWU-3/4`    | fixed, `(100, 3)`                  | eta/sigma = 5/8, 4/7      |

use serde::{Deserialize, Serialize};

use crate::acoe::{solve_acoe, ValueVector};
use crate::adaptive::{calibrate_bounds, Bounds, Constraints, MultiplierSchedules, OaygalState};
use crate::channel::{CostWeights, Environment, PowerSet, PropagationParams};
use crate::error::{Error, Result};
use crate::learning::{OayglState, StepSchedule};
use crate::policy::FixedPolicy;
use crate::simulator::{monte_carlo, McCurves, RunOptions, StepPoint};

pub const DEFAULT_PATHS: usize = 2000;
pub const DEFAULT_HORIZON: usize = 2000;
pub const DEFAULT_B: usize = 5;
pub const DEFAULT_KAPPA: f64 = 0.05;

pub const CASE_NAMES: [&str; 9] =
    ["OAYG", "OAYGL-1", "OAYGL-2", "FPWU-1", "FPWU-2", "OAYGAL-1", "OAYGAL-2", "FPWU-3", "FPWU-4"];

/// Cases plotted together for the fixed-multiplier comparison.
pub const FIG_LEARNING: [&str; 5] = ["OAYG", "OAYGL-1", "OAYGL-2", "FPWU-1", "FPWU-2"];
/// Cases plotted together for the constrained comparison.
pub const FIG_ADAPTIVE: [&str; 5] = ["OAYG", "OAYGAL-1", "OAYGAL-2", "FPWU-3", "FPWU-4"];

/// The two mis-specified `(eta, sigma_db)` guesses.
pub const PRIORS: [(f64, f64); 2] = [(5.0, 8.0), (4.0, 7.0)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Controller {
    Fixed {
        weights: CostWeights,
    },
    Learning {
        weights: CostWeights,
        schedule: StepSchedule,
    },
    Adaptive {
        xi0: CostWeights,
        fast: StepSchedule,
        slow: MultiplierSchedules,
        constraints: Constraints,
        /// Calibrated against the prior when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bounds: Option<Bounds>,
        #[serde(default = "default_kappa")]
        kappa: f64,
    },
}

fn default_kappa() -> f64 {
    DEFAULT_KAPPA
}

impl Controller {
    /// Multipliers the initial value vector is solved for.
    pub fn initial_weights(&self) -> CostWeights {
        match self {
            Controller::Fixed { weights } | Controller::Learning { weights, .. } => *weights,
            Controller::Adaptive { xi0, .. } => *xi0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentCase {
    pub name: String,
    pub truth: PropagationParams,
    /// Parameters the initial policy is solved for; the truth when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PropagationParams>,
    pub powers: PowerSet,
    pub b: usize,
    pub controller: Controller,
    pub n_paths: usize,
    pub horizon: usize,
}

pub fn default_weights() -> CostWeights {
    CostWeights { xi_out: 125.0, xi_relay: 2.0 }
}

pub fn default_constraints() -> Constraints {
    Constraints { q_bar: 0.0044, n_bar: 1.0 / 2.285 }
}

/// `a(n) = 120 / n`.
pub fn default_learning_schedule() -> StepSchedule {
    StepSchedule { gain: 120.0, exponent: 1.0 }
}

/// `a(n) = 1 / n^0.55`, `b_out(n) = 100 / n^0.8`, `b_relay(n) = 1 / n^0.8`.
pub fn default_adaptive_schedules() -> (StepSchedule, MultiplierSchedules) {
    (
        StepSchedule { gain: 1.0, exponent: 0.55 },
        MultiplierSchedules {
            xi_out: StepSchedule { gain: 100.0, exponent: 0.8 },
            xi_relay: StepSchedule { gain: 1.0, exponent: 0.8 },
        },
    )
}

impl ExperimentCase {
    /// One of [`CASE_NAMES`], with default paths and horizon.
    pub fn named(name: &str) -> Result<Self> {
        let truth = PropagationParams::forest_trail();
        let prior = |i: usize| Some(truth.with_eta_sigma(PRIORS[i].0, PRIORS[i].1));
        let xi0 = CostWeights { xi_out: 100.0, xi_relay: 3.0 };
        let (fast, slow) = default_adaptive_schedules();
        let adaptive = Controller::Adaptive {
            xi0,
            fast,
            slow,
            constraints: default_constraints(),
            bounds: None,
            kappa: DEFAULT_KAPPA,
        };
        let learning = Controller::Learning { weights: default_weights(), schedule: default_learning_schedule() };
        let (prior, controller) = match name {
            "OAYG" => (None, Controller::Fixed { weights: default_weights() }),
            "OAYGL-1" => (prior(0), learning),
            "OAYGL-2" => (prior(1), learning),
            "FPWU-1" => (prior(0), Controller::Fixed { weights: default_weights() }),
            "FPWU-2" => (prior(1), Controller::Fixed { weights: default_weights() }),
            "OAYGAL-1" => (prior(0), adaptive),
            "OAYGAL-2" => (prior(1), adaptive),
            "FPWU-3" => (prior(0), Controller::Fixed { weights: xi0 }),
            "FPWU-4" => (prior(1), Controller::Fixed { weights: xi0 }),
            other => return Err(Error::Config(format!("unknown case {other:?}; expected one of {CASE_NAMES:?}"))),
        };
        Ok(Self {
            name: name.to_string(),
            truth,
            prior,
            powers: PowerSet::iwise(),
            b: DEFAULT_B,
            controller,
            n_paths: DEFAULT_PATHS,
            horizon: DEFAULT_HORIZON,
        })
    }

    pub fn with_size(mut self, n_paths: usize, horizon: usize) -> Self {
        self.n_paths = n_paths;
        self.horizon = horizon;
        self
    }

    pub fn true_env(&self) -> Result<Environment> {
        Environment::new(self.truth, self.powers.clone())
    }

    pub fn prior_env(&self) -> Result<Environment> {
        Environment::new(self.prior.unwrap_or(self.truth), self.powers.clone())
    }

    /// Value vector solved under the prior for the initial multipliers.
    pub fn initial_values(&self) -> Result<ValueVector> {
        solve_acoe(&self.prior_env()?, self.b, &self.controller.initial_weights())
    }

    /// Re-checks everything a deserialized case may have gotten wrong.
    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 || self.horizon == 0 || self.b == 0 {
            return Err(Error::Config("n_paths, horizon and b must be positive".into()));
        }
        self.truth.validate()?;
        if let Some(p) = &self.prior {
            p.validate()?;
        }
        PowerSet::new(self.powers.levels().to_vec())?;
        match &self.controller {
            Controller::Fixed { weights } => {
                CostWeights::new(weights.xi_out, weights.xi_relay)?;
            }
            Controller::Learning { weights, schedule } => {
                CostWeights::new(weights.xi_out, weights.xi_relay)?;
                StepSchedule::new(schedule.gain, schedule.exponent)?;
            }
            Controller::Adaptive { xi0, fast, slow, constraints, bounds, kappa } => {
                CostWeights::new(xi0.xi_out, xi0.xi_relay)?;
                StepSchedule::new(fast.gain, fast.exponent)?;
                MultiplierSchedules::new(
                    StepSchedule::new(slow.xi_out.gain, slow.xi_out.exponent)?,
                    StepSchedule::new(slow.xi_relay.gain, slow.xi_relay.exponent)?,
                )?;
                Constraints::new(constraints.q_bar, constraints.n_bar)?;
                if let Some(b) = bounds {
                    Bounds::new(b.a1, b.a2)?;
                }
                crate::error::check(*kappa > 0.0 && *kappa < 1.0, "kappa", *kappa)?;
            }
        }
        Ok(())
    }

    /// Runs the Monte-Carlo experiment.
    pub fn run(&self, master_seed: u64, opts: &RunOptions) -> Result<McCurves> {
        self.validate()?;
        let env = self.true_env()?;
        let v0 = self.initial_values()?;
        let curves = match &self.controller {
            Controller::Fixed { weights } => {
                let pol = FixedPolicy::new(v0, *weights, self.powers.clone());
                monte_carlo(|_| pol.clone(), &env, self.n_paths, self.horizon, master_seed, opts)
            }
            Controller::Learning { weights, schedule } => {
                let st = OayglState::new(v0, *weights, *schedule, self.powers.clone());
                monte_carlo(|_| st.clone(), &env, self.n_paths, self.horizon, master_seed, opts)
            }
            Controller::Adaptive { xi0, fast, slow, constraints, bounds, kappa } => {
                let bounds = match bounds {
                    Some(b) => *b,
                    None => calibrate_bounds(&self.prior_env()?, self.b, constraints, *kappa)?,
                };
                let st = OaygalState::new(v0, *xi0, *fast, *slow, *constraints, bounds, self.powers.clone())?;
                monte_carlo(|_| st.clone(), &env, self.n_paths, self.horizon, master_seed, opts)
            }
        };
        Ok(curves)
    }
}

/// Column names of the curve CSV: `k`, the metrics, then their standard errors.
pub fn csv_header() -> Vec<String> {
    std::iter::once("k".to_string())
        .chain(StepPoint::FIELDS.iter().map(|s| s.to_string()))
        .chain(StepPoint::FIELDS.iter().map(|s| format!("{s}_se")))
        .collect()
}

/// One CSV row per step, matching [`csv_header`].
pub fn csv_rows(curves: &McCurves) -> impl Iterator<Item = Vec<f64>> + '_ {
    curves.mean.iter().zip(&curves.stderr).enumerate().map(|(i, (m, s))| {
        std::iter::once((i + 1) as f64).chain(m.to_array()).chain(s.to_array()).collect()
    })
}
