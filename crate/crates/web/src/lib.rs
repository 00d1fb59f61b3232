//! WebAssembly bindings for the demo page in `www/`.
//!
//! Every export takes a JSON object of [`DemoParams`] overrides and returns
//! JSON. The `*_json` functions do the work and are plain Rust so they can be
//! tested natively; the exported wrappers only turn errors into JS exceptions.

use asyougo::acoe::{lambda_surface, renewal_metrics, solve_acoe, thresholds};
use asyougo::channel::{CostWeights, Environment, PowerSet, PropagationParams};
use asyougo::learning::{OayglState, StepSchedule};
use asyougo::simulator::{path_rng, run_path, RunOptions};
use serde::{Deserialize, Serialize};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Page controls. Missing fields take the forest-trail defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoParams {
    pub eta: f64,
    pub sigma_db: f64,
    pub b: usize,
    pub xi_out: f64,
    pub xi_relay: f64,
    /// Path-loss guess the learner starts from.
    pub prior_eta: f64,
    pub prior_sigma_db: f64,
    pub gain: f64,
    pub exponent: f64,
}

impl Default for DemoParams {
    fn default() -> Self {
        Self {
            eta: 4.7,
            sigma_db: 7.7,
            b: 5,
            xi_out: 125.0,
            xi_relay: 2.0,
            prior_eta: 5.0,
            prior_sigma_db: 8.0,
            gain: 1.0,
            exponent: 0.55,
        }
    }
}

// Keeps the page responsive; a walk this long already shows convergence.
const MAX_STEPS: usize = 20_000;
const MAX_GRID: usize = 200;

type Res<T> = Result<T, String>;

impl DemoParams {
    pub fn parse(json: &str) -> Res<Self> {
        let p: Self = if json.trim().is_empty() { Self::default() } else { serde_json::from_str(json).map_err(|e| e.to_string())? };
        if !(1..=12).contains(&p.b) {
            return Err("b must be between 1 and 12".into());
        }
        Ok(p)
    }

    fn env(&self, eta: f64, sigma_db: f64) -> Res<Environment> {
        let params = PropagationParams::forest_trail().with_eta_sigma(eta, sigma_db);
        Environment::new(params, PowerSet::iwise()).map_err(|e| e.to_string())
    }

    fn weights(&self) -> Res<CostWeights> {
        CostWeights::new(self.xi_out, self.xi_relay).map_err(|e| e.to_string())
    }
}

pub fn solve_policy_json(params: &str) -> Res<String> {
    let p = DemoParams::parse(params)?;
    let env = p.env(p.eta, p.sigma_db)?;
    let w = p.weights()?;
    let v = solve_acoe(&env, p.b, &w).map_err(|e| e.to_string())?;
    let m = renewal_metrics(&env, &w, &v);
    Ok(json!({
        "lambda": v.lambda(),
        "values": v.as_slice(),
        "thresholds": thresholds(&v).as_slice(),
        "spacing_law": m.spacing_law(),
        "power_per_step": m.power_per_step,
        "outage_per_step": m.outage_per_step,
        "relays_per_step": m.relays_per_step,
        "mean_spacing": m.u_bar,
    })
    .to_string())
}

/// Optimal cost and metrics as `xi_out` sweeps a log grid, `xi_relay` held.
pub fn tradeoff_curve_json(params: &str, xi_out_min: f64, xi_out_max: f64, n: usize) -> Res<String> {
    let p = DemoParams::parse(params)?;
    if !(xi_out_min > 0.0 && xi_out_max > xi_out_min && (2..=MAX_GRID).contains(&n)) {
        return Err(format!("need 0 < min < max and 2 <= n <= {MAX_GRID}"));
    }
    let env = p.env(p.eta, p.sigma_db)?;
    let ratio = (xi_out_max / xi_out_min).ln();
    let grid = (0..n)
        .map(|i| CostWeights::new(xi_out_min * (ratio * i as f64 / (n - 1) as f64).exp(), p.xi_relay))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let points = lambda_surface(&env, p.b, &grid).map_err(|e| e.to_string())?;
    let rows: Vec<_> = points
        .iter()
        .map(|s| {
            json!({
                "xi_out": s.weights.xi_out,
                "lambda": s.lambda,
                "power_per_step": s.metrics.power_per_step,
                "outage_per_step": s.metrics.outage_per_step,
                "relays_per_step": s.metrics.relays_per_step,
            })
        })
        .collect();
    Ok(serde_json::Value::from(rows).to_string())
}

/// One walk of the value learner started from the prior's policy, with
/// the optimum for the true channel alongside for reference.
pub fn simulate_learning_json(params: &str, seed: u64, steps: usize) -> Res<String> {
    let p = DemoParams::parse(params)?;
    if !(1..=MAX_STEPS).contains(&steps) {
        return Err(format!("steps must be between 1 and {MAX_STEPS}"));
    }
    let truth = p.env(p.eta, p.sigma_db)?;
    let prior = p.env(p.prior_eta, p.prior_sigma_db)?;
    let w = p.weights()?;
    let schedule = StepSchedule::new(p.gain, p.exponent).map_err(|e| e.to_string())?;
    let v0 = solve_acoe(&prior, p.b, &w).map_err(|e| e.to_string())?;
    let optimum = solve_acoe(&truth, p.b, &w).map_err(|e| e.to_string())?;
    let mut learner = OayglState::new(v0, w, schedule, PowerSet::iwise());
    let trace = run_path(&mut learner, &truth, steps, &mut path_rng(seed, 0), &RunOptions::default());
    let col = |f: fn(&asyougo::simulator::StepPoint) -> f64| trace.curve.iter().map(f).collect::<Vec<_>>();
    Ok(json!({
        "v1": col(|s| s.v1_estimate),
        "power_per_step": col(|s| s.power_per_step),
        "outage_per_step": col(|s| s.outage_per_step),
        "mean_spacing": col(|s| s.mean_placement_distance),
        "relays": trace.placed_positions[1..],
        "optimal_lambda": optimum.lambda(),
        "final_values": learner.values(),
        "optimal_values": optimum.as_slice(),
    })
    .to_string())
}

fn js(r: Res<String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn solve_policy(params: &str) -> Result<String, JsError> {
    js(solve_policy_json(params))
}

#[wasm_bindgen]
pub fn tradeoff_curve(params: &str, xi_out_min: f64, xi_out_max: f64, n: usize) -> Result<String, JsError> {
    js(tradeoff_curve_json(params, xi_out_min, xi_out_max, n))
}

#[wasm_bindgen]
pub fn simulate_learning(params: &str, seed: u64, steps: usize) -> Result<String, JsError> {
    js(simulate_learning_json(params, seed, steps))
}
