//! Online learning of the value vector for fixed multipliers.
//!
//! The learner deploys with the threshold rule built from its current
//! estimate and, after each step, moves every measured entry `V(r)` towards
//! the one-sample ACOE target using an asynchronous step size `a(nu(r))`.

use serde::{Deserialize, Serialize};

use crate::acoe::ValueVector;
use crate::channel::{CostWeights, PowerSet};
use crate::error::{check, Result};
use crate::policy::{check_link, threshold_decision, Decision, MeasuredLink};
use crate::simulator::{DecisionSource, MeasurementSet, RelayRecord};

/// `a(n) = gain / n^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub gain: f64,
    pub exponent: f64,
}

impl StepSchedule {
    /// `exponent` must lie in `(0.5, 1]` so that the steps are not summable
    /// but their squares are. A zero gain freezes the iterate.
    pub fn new(gain: f64, exponent: f64) -> Result<Self> {
        check(gain.is_finite() && gain >= 0.0, "gain", gain)?;
        check(exponent > 0.5 && exponent <= 1.0, "exponent", exponent)?;
        Ok(Self { gain, exponent })
    }

    pub fn harmonic(gain: f64) -> Result<Self> {
        Self::new(gain, 1.0)
    }

    /// Step size for the `n`-th update, `n >= 1`.
    pub fn at(&self, n: u64) -> f64 {
        debug_assert!(n >= 1);
        if self.exponent == 1.0 {
            self.gain / n as f64
        } else {
            self.gain / (n as f64).powf(self.exponent)
        }
    }
}

/// Threshold decision against the estimate `v` (0-based: `v[r-1] = V(r)`).
pub(crate) fn estimate_decision(v: &[f64], weights: &CostWeights, powers: &PowerSet, link: &MeasuredLink) -> Decision {
    let r = link.r_steps;
    let t = (r < v.len()).then(|| v[r] - v[0]);
    threshold_decision(link, weights, powers, t)
}

/// One synchronous update of all measured entries.
///
/// Every right-hand side uses the pre-step vector. Entries are visited in
/// ascending `r`, so `v[r]` (i.e. `V(r+1)`) is still untouched when `V(r)` is
/// updated; only `V(1)` needs to be saved.
pub(crate) fn sa_update(
    v: &mut [f64],
    nu: &mut [u64],
    weights: &CostWeights,
    powers: &PowerSet,
    schedule: &StepSchedule,
    m: &MeasurementSet,
) {
    let b = v.len();
    let v1 = v[0];
    for link in m.entries() {
        let r = link.r_steps;
        nu[r - 1] += 1;
        let a = schedule.at(nu[r - 1]);
        let (c, _) = link.placement_cost(weights, powers);
        let target = if r < b { c.min(v[r] - v1) } else { c };
        v[r - 1] += a * (target - v[r - 1]);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OayglState {
    v: Vec<f64>,
    nu: Vec<u64>,
    pub weights: CostWeights,
    pub schedule: StepSchedule,
    pub powers: PowerSet,
    k: u64,
}

impl OayglState {
    pub fn new(v0: ValueVector, weights: CostWeights, schedule: StepSchedule, powers: PowerSet) -> Self {
        let b = v0.b();
        Self { v: v0.into_vec(), nu: vec![0; b], weights, schedule, powers, k: 0 }
    }

    /// Cold start from `V = 0`.
    pub fn zeros(b: usize, weights: CostWeights, schedule: StepSchedule, powers: PowerSet) -> Result<Self> {
        Ok(Self::new(ValueVector::zeros(b)?, weights, schedule, powers))
    }

    pub fn b(&self) -> usize {
        self.v.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.v
    }

    pub fn value_vector(&self) -> ValueVector {
        ValueVector::new(self.v.clone()).expect("estimate keeps its length")
    }

    /// `nu[r-1]`: number of updates applied to `V(r)`.
    pub fn nu(&self) -> &[u64] {
        &self.nu
    }

    /// Number of measurement sets processed.
    pub fn steps(&self) -> u64 {
        self.k
    }

    pub fn decide(&self, link: &MeasuredLink) -> Result<Decision> {
        check_link(link, self.b(), &self.powers)?;
        Ok(estimate_decision(&self.v, &self.weights, &self.powers, link))
    }

    /// Applies the step's measurements; call after the decision.
    pub fn update(&mut self, m: &MeasurementSet) -> Result<()> {
        for link in m.entries() {
            check_link(link, self.b(), &self.powers)?;
        }
        sa_update(&mut self.v, &mut self.nu, &self.weights, &self.powers, &self.schedule, m);
        self.k += 1;
        Ok(())
    }
}

impl DecisionSource for OayglState {
    fn b(&self) -> usize {
        self.v.len()
    }

    fn decide(&mut self, link: &MeasuredLink) -> Decision {
        estimate_decision(&self.v, &self.weights, &self.powers, link)
    }

    fn observe(&mut self, m: &MeasurementSet, _placed: Option<&RelayRecord>) {
        sa_update(&mut self.v, &mut self.nu, &self.weights, &self.powers, &self.schedule, m);
        self.k += 1;
    }

    fn v1_estimate(&self) -> f64 {
        self.v[0]
    }

    fn multipliers(&self) -> CostWeights {
        self.weights
    }
}

/// Learns while a separate, fixed policy makes the decisions.
#[derive(Debug, Clone)]
pub struct ShadowLearner<P> {
    pub control: P,
    pub learner: OayglState,
}

impl<P: DecisionSource> DecisionSource for ShadowLearner<P> {
    fn b(&self) -> usize {
        self.control.b()
    }

    fn decide(&mut self, link: &MeasuredLink) -> Decision {
        self.control.decide(link)
    }

    fn observe(&mut self, m: &MeasurementSet, placed: Option<&RelayRecord>) {
        self.control.observe(m, placed);
        DecisionSource::observe(&mut self.learner, m, placed);
    }

    fn v1_estimate(&self) -> f64 {
        self.learner.v[0]
    }

    fn multipliers(&self) -> CostWeights {
        self.learner.weights
    }
}
