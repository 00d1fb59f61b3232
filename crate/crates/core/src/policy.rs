//! The stationary threshold rule: place at distance `r` iff the cheapest
//! placement cost does not exceed `c_th(r)`, and always place at `r = B`.
//!
//! Decisions depend only on the measured outage curve, never on the
//! shadowing value itself, so the same code serves simulation and field use.

use serde::{Deserialize, Serialize};

use crate::acoe::{PolicyThresholds, ValueVector};
use crate::channel::{cheapest_power, CostWeights, Environment, PowerSet};
use crate::error::{check, Error, Result};

/// Outage probabilities measured on one link, one entry per power level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredLink {
    pub r_steps: usize,
    pub outage_by_power: Vec<f64>,
}

impl MeasuredLink {
    pub fn new(r_steps: usize, outage_by_power: Vec<f64>) -> Result<Self> {
        if r_steps == 0 {
            return Err(Error::InvalidParameter { name: "r_steps", value: 0.0 });
        }
        for &q in &outage_by_power {
            check((0.0..=1.0).contains(&q), "outage probability", q)?;
        }
        Ok(Self { r_steps, outage_by_power })
    }

    /// Empirical outage from `(sent, received)` packet counts per power level.
    pub fn from_packet_counts(r_steps: usize, counts: &[(u64, u64)]) -> Result<Self> {
        let outages = counts
            .iter()
            .map(|&(sent, received)| {
                if sent == 0 || received > sent {
                    Err(Error::Config(format!("invalid packet counts {received}/{sent}")))
                } else {
                    Ok((sent - received) as f64 / sent as f64)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(r_steps, outages)
    }

    /// Model-generated measurement for shadowing gain `w`.
    pub fn from_shadowing(env: &Environment, r_steps: usize, w: f64) -> Self {
        Self { r_steps, outage_by_power: env.outage_curve(r_steps, w) }
    }

    /// Field data can violate this; model-generated curves never do.
    pub fn is_non_increasing(&self) -> bool {
        self.outage_by_power.windows(2).all(|p| p[1] <= p[0])
    }

    /// `(min_gamma (gamma + xi_out q(gamma)) + xi_relay, argmin index)`.
    pub fn placement_cost(&self, weights: &CostWeights, powers: &PowerSet) -> (f64, usize) {
        let (c, i) = cheapest_power(weights, powers, &self.outage_by_power);
        (c + weights.xi_relay, i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "lowercase")]
pub enum Decision {
    Continue,
    Place { power: f64, power_index: usize, link_outage: f64 },
}

impl Decision {
    pub fn is_place(&self) -> bool {
        matches!(self, Decision::Place { .. })
    }
}

/// Place iff `cost <= threshold`, with the threshold `None` meaning forced placement.
pub(crate) fn threshold_decision(
    link: &MeasuredLink,
    weights: &CostWeights,
    powers: &PowerSet,
    threshold: Option<f64>,
) -> Decision {
    let (cost, idx) = link.placement_cost(weights, powers);
    match threshold {
        Some(t) if cost > t => Decision::Continue,
        _ => Decision::Place {
            power: powers.get(idx),
            power_index: idx,
            link_outage: link.outage_by_power[idx],
        },
    }
}

pub(crate) fn check_link(link: &MeasuredLink, b: usize, powers: &PowerSet) -> Result<()> {
    if link.r_steps == 0 || link.r_steps > b {
        return Err(Error::DistanceOutOfRange { r: link.r_steps, b });
    }
    if link.outage_by_power.len() != powers.len() {
        return Err(Error::Config(format!(
            "expected {} outage values, got {}",
            powers.len(),
            link.outage_by_power.len()
        )));
    }
    Ok(())
}

pub fn decide(
    thresholds: &PolicyThresholds,
    weights: &CostWeights,
    powers: &PowerSet,
    link: &MeasuredLink,
) -> Result<Decision> {
    let b = thresholds.b();
    check_link(link, b, powers)?;
    let t = (link.r_steps < b).then(|| thresholds.get(link.r_steps));
    Ok(threshold_decision(link, weights, powers, t))
}

pub fn decide_from_shadowing(
    thresholds: &PolicyThresholds,
    weights: &CostWeights,
    env: &Environment,
    r_steps: usize,
    w: f64,
) -> Result<Decision> {
    decide(thresholds, weights, &env.powers, &MeasuredLink::from_shadowing(env, r_steps, w))
}

/// A threshold policy that never changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPolicy {
    pub values: ValueVector,
    pub thresholds: PolicyThresholds,
    pub weights: CostWeights,
    pub powers: PowerSet,
}

impl FixedPolicy {
    pub fn new(values: ValueVector, weights: CostWeights, powers: PowerSet) -> Self {
        let thresholds = crate::acoe::thresholds(&values);
        Self { values, thresholds, weights, powers }
    }

    pub fn b(&self) -> usize {
        self.values.b()
    }

    pub fn decide(&self, link: &MeasuredLink) -> Result<Decision> {
        decide(&self.thresholds, &self.weights, &self.powers, link)
    }
}
