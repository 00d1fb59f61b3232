//! Learning under outage and relay-density constraints.
//!
//! The multipliers `(xi_out, xi_relay)` are adapted on a slower timescale than
//! the value vector: after every placement they move by
//! `b(N) (Q - q_bar U)` and `b(N) (1 - n_bar U)`, then are clipped to the box
//! `[0, a1] x [0, a2]`. The bounds must be large enough to contain the
//! multipliers that make both constraints tight; [`calibrate_bounds`] searches
//! a ladder of candidates for them.

use serde::{Deserialize, Serialize};

use crate::acoe::{renewal_metrics, solve_acoe, ValueVector};
use crate::channel::{CostWeights, Environment, PowerSet};
use crate::error::{check, Error, Result};
use crate::learning::{estimate_decision, sa_update, StepSchedule};
use crate::policy::{check_link, Decision, MeasuredLink};
use crate::simulator::{DecisionSource, MeasurementSet, RelayRecord};

/// Targets for mean outage per step and relays per step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    pub q_bar: f64,
    pub n_bar: f64,
}

impl Constraints {
    pub fn new(q_bar: f64, n_bar: f64) -> Result<Self> {
        check(q_bar > 0.0 && q_bar <= 1.0, "q_bar", q_bar)?;
        check(n_bar > 0.0 && n_bar <= 1.0, "n_bar", n_bar)?;
        Ok(Self { q_bar, n_bar })
    }

    fn check_horizon(&self, b: usize) -> Result<()> {
        if self.n_bar <= 1.0 / b as f64 + 1e-12 {
            return Err(Error::InfeasibleConstraints(format!(
                "relay density {} is at or below 1/B = {}: links cannot be longer than B steps",
                self.n_bar,
                1.0 / b as f64
            )));
        }
        Ok(())
    }
}

/// Box `[0, a1] x [0, a2]` for the multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub a1: f64,
    pub a2: f64,
}

impl Bounds {
    pub fn new(a1: f64, a2: f64) -> Result<Self> {
        check(a1.is_finite() && a1 > 0.0, "a1", a1)?;
        check(a2.is_finite() && a2 > 0.0, "a2", a2)?;
        Ok(Self { a1, a2 })
    }

    pub fn contains(&self, w: &CostWeights) -> bool {
        (0.0..=self.a1).contains(&w.xi_out) && (0.0..=self.a2).contains(&w.xi_relay)
    }

    pub fn project(&self, xi_out: f64, xi_relay: f64) -> CostWeights {
        CostWeights { xi_out: xi_out.clamp(0.0, self.a1), xi_relay: xi_relay.clamp(0.0, self.a2) }
    }
}

/// Slow step sizes for the two multipliers; gains may differ, exponents may not.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplierSchedules {
    pub xi_out: StepSchedule,
    pub xi_relay: StepSchedule,
}

impl MultiplierSchedules {
    pub fn new(xi_out: StepSchedule, xi_relay: StepSchedule) -> Result<Self> {
        if xi_out.exponent != xi_relay.exponent {
            return Err(Error::Config(format!(
                "multiplier schedules must share an exponent ({} vs {})",
                xi_out.exponent, xi_relay.exponent
            )));
        }
        Ok(Self { xi_out, xi_relay })
    }

    /// Zero gains: the multipliers never move.
    pub fn frozen() -> Self {
        let z = StepSchedule { gain: 0.0, exponent: 1.0 };
        Self { xi_out: z, xi_relay: z }
    }
}

/// `b(floor(n/B)) / a(n)` vanishes iff the slow exponent exceeds the fast one.
pub fn timescales_separated(fast: &StepSchedule, slow: &MultiplierSchedules) -> bool {
    slow.xi_out.exponent > fast.exponent
}

/// `b(max(floor(n/B), 1)) / a(n)` for the outage multiplier.
pub fn timescale_ratio(fast: &StepSchedule, slow: &MultiplierSchedules, b: usize, n: u64) -> f64 {
    slow.xi_out.at((n / b as u64).max(1)) / fast.at(n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OaygalState {
    v: Vec<f64>,
    nu: Vec<u64>,
    xi: CostWeights,
    n_relays: u64,
    k: u64,
    pub fast: StepSchedule,
    pub slow: MultiplierSchedules,
    pub constraints: Constraints,
    pub bounds: Bounds,
    pub powers: PowerSet,
}

impl OaygalState {
    pub fn new(
        v0: ValueVector,
        xi0: CostWeights,
        fast: StepSchedule,
        slow: MultiplierSchedules,
        constraints: Constraints,
        bounds: Bounds,
        powers: PowerSet,
    ) -> Result<Self> {
        if !bounds.contains(&xi0) {
            return Err(Error::Config(format!(
                "initial multipliers ({}, {}) outside [0, {}] x [0, {}]",
                xi0.xi_out, xi0.xi_relay, bounds.a1, bounds.a2
            )));
        }
        let b = v0.b();
        Ok(Self { v: v0.into_vec(), nu: vec![0; b], xi: xi0, n_relays: 0, k: 0, fast, slow, constraints, bounds, powers })
    }

    pub fn b(&self) -> usize {
        self.v.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.v
    }

    pub fn nu(&self) -> &[u64] {
        &self.nu
    }

    pub fn multipliers(&self) -> CostWeights {
        self.xi
    }

    /// `N_k`.
    pub fn n_relays(&self) -> u64 {
        self.n_relays
    }

    pub fn steps(&self) -> u64 {
        self.k
    }

    pub fn decide(&self, link: &MeasuredLink) -> Result<Decision> {
        check_link(link, self.b(), &self.powers)?;
        Ok(estimate_decision(&self.v, &self.xi, &self.powers, link))
    }

    /// Decides on the link to the previous node, then learns from the whole set.
    pub fn step(&mut self, m: &MeasurementSet) -> Result<Decision> {
        for link in m.entries() {
            check_link(link, self.b(), &self.powers)?;
        }
        let link = m.decision_link();
        let d = estimate_decision(&self.v, &self.xi, &self.powers, link);
        let placed = match d {
            Decision::Place { link_outage, .. } => Some((link.r_steps, link_outage)),
            Decision::Continue => None,
        };
        self.apply(m, placed);
        Ok(d)
    }

    /// Value update with the current multipliers, then (on placement of a
    /// link of `gap` steps with outage `q`) the multiplier update.
    pub fn apply(&mut self, m: &MeasurementSet, placed: Option<(usize, f64)>) {
        sa_update(&mut self.v, &mut self.nu, &self.xi, &self.powers, &self.fast, m);
        self.k += 1;
        if let Some((gap, q)) = placed {
            self.n_relays += 1;
            let u = gap as f64;
            let c = &self.constraints;
            let out = self.xi.xi_out + self.slow.xi_out.at(self.n_relays) * (q - c.q_bar * u);
            let relay = self.xi.xi_relay + self.slow.xi_relay.at(self.n_relays) * (1.0 - c.n_bar * u);
            self.xi = self.bounds.project(out, relay);
        }
    }
}

impl DecisionSource for OaygalState {
    fn b(&self) -> usize {
        self.v.len()
    }

    fn decide(&mut self, link: &MeasuredLink) -> Decision {
        estimate_decision(&self.v, &self.xi, &self.powers, link)
    }

    fn observe(&mut self, m: &MeasurementSet, placed: Option<&RelayRecord>) {
        self.apply(m, placed.map(|r| (r.gap, r.outage)));
    }

    fn v1_estimate(&self) -> f64 {
        self.v[0]
    }

    fn multipliers(&self) -> CostWeights {
        self.xi
    }
}

/// Candidate bounds are `LADDER_BASE * 2^j` for `j < LADDER_LEN`.
pub const LADDER_BASE: f64 = 1.0;
pub const LADDER_LEN: usize = 24;

fn ladder() -> impl Iterator<Item = f64> {
    (0..LADDER_LEN).map(|j| LADDER_BASE * 2f64.powi(j as i32))
}

/// Largest per-step outage any policy can incur at the lowest power.
fn slack_outage(env: &Environment, b: usize) -> f64 {
    let p1 = env.powers.lowest();
    (1..=b)
        .map(|u| env.shadowing.expect(|w| env.outage(u, p1, w)) / u as f64)
        .fold(0.0, f64::max)
}

fn metrics_at(env: &Environment, b: usize, w: CostWeights) -> Result<crate::acoe::RenewalMetrics> {
    let v = solve_acoe(env, b, &w)?;
    Ok(renewal_metrics(env, &w, &v))
}

/// Searches the ladder for multiplier caps.
///
/// `a1` is the first candidate for which the highest power is the cheapest
/// choice with probability above `1 - kappa` at every distance, and the
/// optimal policy at `(a1, 0)` meets the outage target. `a2` is the first
/// candidate whose optimal mean link length exceeds `1 / n_bar` for every
/// `xi_out` in a sweep of `[0, a1]`. A constraint that is slack for every
/// policy gets the smallest candidate.
pub fn calibrate_bounds(env: &Environment, b: usize, constraints: &Constraints, kappa: f64) -> Result<Bounds> {
    check(kappa > 0.0 && kappa < 1.0, "kappa", kappa)?;
    constraints.check_horizon(b)?;
    let top = env.powers.len() - 1;

    let a1 = if constraints.q_bar >= slack_outage(env, b) {
        LADDER_BASE
    } else {
        let mut found = None;
        for a1 in ladder() {
            let w = CostWeights { xi_out: a1, xi_relay: 0.0 };
            let dominant = (1..=b).all(|u| {
                env.shadowing.probability(|wv| env.link_cost(&w, u, wv).power_index == top) > 1.0 - kappa
            });
            if dominant && metrics_at(env, b, w)?.outage_per_step <= constraints.q_bar {
                found = Some(a1);
                break;
            }
        }
        found.ok_or_else(|| {
            Error::InfeasibleConstraints(format!(
                "outage target {} not met by any xi_out up to {}",
                constraints.q_bar,
                LADDER_BASE * 2f64.powi(LADDER_LEN as i32 - 1)
            ))
        })?
    };

    let a2 = if constraints.n_bar >= 1.0 {
        LADDER_BASE
    } else {
        let sweep: Vec<f64> = std::iter::once(0.0).chain((0..5).map(|j| a1 / 4f64.powi(j))).collect();
        let mut found = None;
        'ladder: for a2 in ladder() {
            for &xo in sweep.iter().rev() {
                if metrics_at(env, b, CostWeights { xi_out: xo, xi_relay: a2 })?.u_bar <= 1.0 / constraints.n_bar {
                    continue 'ladder;
                }
            }
            found = Some(a2);
            break;
        }
        found.ok_or_else(|| {
            Error::InfeasibleConstraints(format!(
                "relay density target {} not met by any xi_relay up to {}",
                constraints.n_bar,
                LADDER_BASE * 2f64.powi(LADDER_LEN as i32 - 1)
            ))
        })?
    };
    Bounds::new(a1, a2)
}

/// A policy meeting both constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub weights: CostWeights,
    pub power_per_step: f64,
    pub outage_per_step: f64,
    pub relays_per_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub reason: String,
    pub witness: Option<Witness>,
}

const SWEEP_XI_OUT: [f64; 9] = [0.0, 1.0, 4.0, 16.0, 64.0, 256.0, 1024.0, 4096.0, 16384.0];
const RELAY_BISECTIONS: usize = 12;

/// Looks for an optimal-policy witness meeting both constraints.
///
/// For each `xi_out` in a fixed sweep, the smallest `xi_relay` meeting the
/// density target is located by bisection (larger `xi_relay` only lengthens
/// links) and its outage checked. A negative answer is therefore a strong
/// hint, not a proof.
pub fn feasibility_report(env: &Environment, b: usize, constraints: &Constraints) -> Result<FeasibilityReport> {
    let bf = b as f64;
    let infeasible = |reason: String| Ok(FeasibilityReport { feasible: false, reason, witness: None });
    if constraints.n_bar < 1.0 / bf - 1e-12 {
        return infeasible(format!("relay density {} below 1/B = {}", constraints.n_bar, 1.0 / bf));
    }
    let witness = |w: CostWeights, m: &crate::acoe::RenewalMetrics| Witness {
        weights: w,
        power_per_step: m.power_per_step,
        outage_per_step: m.outage_per_step,
        relays_per_step: m.relays_per_step,
    };
    if constraints.n_bar <= 1.0 / bf + 1e-12 {
        // Only "always place at B" has density 1/B; best case uses P_M on every link.
        let pm = env.powers.highest();
        let q = env.shadowing.expect(|w| env.outage(b, pm, w)) / bf;
        return if q <= constraints.q_bar {
            Ok(FeasibilityReport {
                feasible: true,
                reason: format!("placing every B steps at the highest power gives outage {q:.6} per step"),
                witness: None,
            })
        } else {
            infeasible(format!(
                "density 1/B forces B-step links; even at the highest power the outage per step is {q:.6} > {}",
                constraints.q_bar
            ))
        };
    }

    for &xo in &SWEEP_XI_OUT {
        let relays = |xr: f64| -> Result<(CostWeights, crate::acoe::RenewalMetrics)> {
            let w = CostWeights { xi_out: xo, xi_relay: xr };
            Ok((w, metrics_at(env, b, w)?))
        };
        let (mut w, mut m) = relays(0.0)?;
        if m.relays_per_step > constraints.n_bar {
            let mut hi = 1.0;
            loop {
                let (wh, mh) = relays(hi)?;
                if mh.relays_per_step <= constraints.n_bar {
                    (w, m) = (wh, mh);
                    break;
                }
                hi *= 2.0;
                if hi > 65536.0 {
                    break;
                }
            }
            if m.relays_per_step > constraints.n_bar {
                continue;
            }
            let mut lo = hi / 2.0;
            if hi == 1.0 {
                lo = 0.0;
            }
            for _ in 0..RELAY_BISECTIONS {
                let mid = 0.5 * (lo + hi);
                let (wm, mm) = relays(mid)?;
                if mm.relays_per_step <= constraints.n_bar {
                    hi = mid;
                    (w, m) = (wm, mm);
                } else {
                    lo = mid;
                }
            }
        }
        if m.outage_per_step <= constraints.q_bar {
            return Ok(FeasibilityReport {
                feasible: true,
                reason: format!("optimal policy at ({}, {:.4}) meets both targets", w.xi_out, w.xi_relay),
                witness: Some(witness(w, &m)),
            });
        }
    }
    infeasible("no policy in the multiplier sweep meets both targets".into())
}
