//! Average-cost optimality equations for placement with a fixed horizon `B`.
//!
//! With `c(r, W)` the cost of placing a relay `r` steps after the previous
//! node, the reduced system reads
//!
//! ```text
//! V(r) = E min{ c(r, W), V(r+1) - V(1) },   r < B
//! V(B) = E c(B, W)
//! ```
//!
//! and its unique solution has `V(1) = lambda*`, the optimal cost per step.
//! For a candidate `x = V(1)` the system can be evaluated backwards from
//! `V(B)`; the induced `phi(x) = V(1)` is continuous and non-increasing, so the
//! fixed point is found by bisection.

use serde::{Deserialize, Serialize};

pub use crate::channel::CostWeights;
use crate::channel::Environment;
use crate::error::{check, Error, Result};

const BISECTION_TOL: f64 = 1e-11;
const MAX_BISECTIONS: usize = 200;

/// Differential values `V(1..=B)`; `v[0]` is `V(1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueVector {
    v: Vec<f64>,
}

impl ValueVector {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::Config("value vector needs B >= 1 entries".into()));
        }
        for &x in &v {
            check(x.is_finite(), "value entry", x)?;
        }
        Ok(Self { v })
    }

    /// All-zero vector of horizon `b`.
    pub fn zeros(b: usize) -> Result<Self> {
        Self::new(vec![0.0; b])
    }

    /// Horizon `B`.
    pub fn b(&self) -> usize {
        self.v.len()
    }

    /// `V(r)` for `r` in `1..=B`.
    pub fn get(&self, r: usize) -> f64 {
        self.v[r - 1]
    }

    /// `V(1)`, which equals the average cost per step at the solution.
    pub fn lambda(&self) -> f64 {
        self.v[0]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.v
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.v
    }
}

/// Placement thresholds `c_th(r) = V(r+1) - V(1)` for `r < B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyThresholds {
    c_th: Vec<f64>,
}

impl PolicyThresholds {
    pub fn b(&self) -> usize {
        self.c_th.len() + 1
    }

    /// `c_th(r)` for `r` in `1..B`.
    pub fn get(&self, r: usize) -> f64 {
        self.c_th[r - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.c_th
    }

    pub fn is_non_decreasing(&self) -> bool {
        self.c_th.windows(2).all(|p| p[1] >= p[0])
    }
}

pub fn thresholds(v: &ValueVector) -> PolicyThresholds {
    let v1 = v.lambda();
    PolicyThresholds { c_th: v.v[1..].iter().map(|x| x - v1).collect() }
}

/// `E min{c(r, W), cont}`, or `E c(r, W)` when `cont` is `None` (at `r = B`).
fn row_expectation(env: &Environment, weights: &CostWeights, r: usize, cont: Option<f64>) -> f64 {
    let cost = |w: f64| env.link_cost(weights, r, w);
    match cont {
        None => env.shadowing.expect_piecewise(|w| cost(w).power_index as u64, |w| cost(w).cost),
        Some(cont) => env.shadowing.expect_piecewise(
            |w| {
                let lc = cost(w);
                ((lc.power_index as u64) << 1) | (lc.cost <= cont) as u64
            },
            |w| cost(w).cost.min(cont),
        ),
    }
}

/// Evaluates the backward recursion for a candidate `V(1) = x`.
fn backward_values(env: &Environment, weights: &CostWeights, b: usize, x: f64) -> Vec<f64> {
    let mut v = vec![0.0; b];
    v[b - 1] = row_expectation(env, weights, b, None);
    for r in (1..b).rev() {
        v[r - 1] = row_expectation(env, weights, r, Some(v[r] - x));
    }
    v
}

/// Solves the reduced ACOE for horizon `b`.
pub fn solve_acoe(env: &Environment, b: usize, weights: &CostWeights) -> Result<ValueVector> {
    if b == 0 {
        return Err(Error::Config("horizon B must be at least 1".into()));
    }
    let mut lo = 0.0;
    let mut hi = env.powers.highest() + weights.xi_out + weights.xi_relay;
    // g(x) = phi(x) - x is strictly decreasing with g(lo) >= 0 >= g(hi).
    let mut iters = 0;
    while hi - lo > BISECTION_TOL * hi.max(1.0) && iters < MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if backward_values(env, weights, b, mid)[0] > mid {
            lo = mid;
        } else {
            hi = mid;
        }
        iters += 1;
    }
    let x = 0.5 * (lo + hi);
    let mut v = backward_values(env, weights, b, x);
    let residual = (v[0] - x).abs();
    if !residual.is_finite() || residual > 1e-8 * x.max(1.0) {
        return Err(Error::NonConvergent { residual });
    }
    v[0] = x;
    ValueVector::new(v)
}

/// Residuals of every equation of the reduced system at `v`.
pub fn acoe_residuals(env: &Environment, weights: &CostWeights, v: &ValueVector) -> Vec<f64> {
    let b = v.b();
    let rhs = backward_values_at(env, weights, v);
    (0..b).map(|i| v.v[i] - rhs[i]).collect()
}

/// Right-hand sides of the reduced system evaluated at `v`.
fn backward_values_at(env: &Environment, weights: &CostWeights, v: &ValueVector) -> Vec<f64> {
    let b = v.b();
    (1..=b)
        .map(|r| row_expectation(env, weights, r, (r < b).then(|| v.get(r + 1) - v.lambda())))
        .collect()
}

/// Default search cap of [`choose_b`].
pub const DEFAULT_B_CAP: usize = 64;

/// Largest `B` such that a link of `B` steps at the highest power is workable
/// (outage below `workable_outage`) with probability above `min_prob`.
pub fn choose_b(env: &Environment, workable_outage: f64, min_prob: f64) -> Result<usize> {
    choose_b_capped(env, workable_outage, min_prob, DEFAULT_B_CAP)
}

/// As [`choose_b`], searching `1..=cap`. When every `B` up to `cap` qualifies the
/// cap itself is returned.
pub fn choose_b_capped(env: &Environment, workable_outage: f64, min_prob: f64, cap: usize) -> Result<usize> {
    check(workable_outage > 0.0 && workable_outage < 1.0, "workable_outage", workable_outage)?;
    check(min_prob > 0.0 && min_prob < 1.0, "min_prob", min_prob)?;
    let p_max = env.powers.highest();
    let mut best = None;
    for b in 1..=cap.max(1) {
        let p = workable_probability(env, b, p_max, workable_outage);
        // Workability is monotone in the link length.
        if p > min_prob {
            best = Some(b);
        } else {
            break;
        }
    }
    best.ok_or(Error::InfeasibleEnvironment)
}

/// `P_W( Q_out(b, gamma, W) < workable_outage )`.
pub fn workable_probability(env: &Environment, b: usize, gamma: f64, workable_outage: f64) -> f64 {
    env.shadowing.probability(|w| env.outage(b, gamma, w) < workable_outage)
}

/// Long-run statistics of a threshold policy, obtained from the i.i.d. link
/// structure by the renewal-reward theorem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewalMetrics {
    /// `link_law[u-1][i] = P(U = u, Gamma = P_i)`.
    pub link_law: Vec<Vec<f64>>,
    /// `P(place at u | reached u)`.
    pub placement_prob: Vec<f64>,
    /// Mean link length in steps.
    pub u_bar: f64,
    /// Mean power per link (mW).
    pub gamma_bar: f64,
    /// Mean outage per link.
    pub q_bar_link: f64,
    pub power_per_step: f64,
    pub outage_per_step: f64,
    pub relays_per_step: f64,
}

impl RenewalMetrics {
    /// `P(U = u)` for `u` in `1..=B`.
    pub fn spacing_law(&self) -> Vec<f64> {
        self.link_law.iter().map(|row| row.iter().sum()).collect()
    }

    /// `(gamma_bar + xi_out q_bar + xi_relay) / u_bar`.
    pub fn cost_per_step(&self, weights: &CostWeights) -> f64 {
        (self.gamma_bar + weights.xi_out * self.q_bar_link + weights.xi_relay) / self.u_bar
    }
}

/// Renewal metrics of the threshold policy defined by `v` under `weights`.
/// `v` need not be optimal, and the environment may differ from the one `v`
/// was solved for.
pub fn renewal_metrics(env: &Environment, weights: &CostWeights, v: &ValueVector) -> RenewalMetrics {
    let b = v.b();
    let th = thresholds(v);
    let m = env.powers.len();
    let mut link_law = vec![vec![0.0; m]; b];
    let mut placement_prob = vec![0.0; b];
    let (mut survive, mut u_bar, mut gamma_bar, mut q_bar) = (1.0, 0.0, 0.0, 0.0);
    for u in 1..=b {
        let t = if u < b { th.get(u) } else { f64::INFINITY };
        let atoms = env.shadowing.partition(|w| {
            let lc = env.link_cost(weights, u, w);
            ((lc.power_index as u64) << 1) | (lc.cost <= t) as u64
        });
        let (mut p_place, mut q_sum) = (0.0, 0.0);
        let mut by_power = vec![0.0; m];
        for a in &atoms {
            let lc = env.link_cost(weights, u, a.w);
            if lc.cost <= t {
                p_place += a.p;
                by_power[lc.power_index] += a.p;
                q_sum += a.p * lc.outage;
            }
        }
        if u == b {
            p_place = 1.0;
        }
        placement_prob[u - 1] = p_place;
        for (i, &pp) in by_power.iter().enumerate() {
            let g = survive * pp;
            link_law[u - 1][i] = g;
            u_bar += u as f64 * g;
            gamma_bar += g * env.powers.get(i);
        }
        q_bar += survive * q_sum;
        survive *= (1.0 - p_place).max(0.0);
    }
    RenewalMetrics {
        link_law,
        placement_prob,
        u_bar,
        gamma_bar,
        q_bar_link: q_bar,
        power_per_step: gamma_bar / u_bar,
        outage_per_step: q_bar / u_bar,
        relays_per_step: 1.0 / u_bar,
    }
}

/// One solved grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub weights: CostWeights,
    pub lambda: f64,
    pub values: ValueVector,
    pub metrics: RenewalMetrics,
}

/// Solves the ACOE and evaluates renewal metrics at every grid point.
pub fn lambda_surface(env: &Environment, b: usize, grid: &[CostWeights]) -> Result<Vec<SurfacePoint>> {
    let solve_one = |w: &CostWeights| -> Result<SurfacePoint> {
        let values = solve_acoe(env, b, w)?;
        let metrics = renewal_metrics(env, w, &values);
        Ok(SurfacePoint { weights: *w, lambda: values.lambda(), values, metrics })
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        grid.par_iter().map(solve_one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        grid.iter().map(solve_one).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{PowerSet, PropagationParams, Shadowing};
    use approx::assert_abs_diff_eq;

    fn deterministic(power_mw: f64) -> Environment {
        let mut p = PropagationParams::forest_trail();
        p.sigma_db = 0.0;
        Environment::new(p, PowerSet::new(vec![power_mw]).unwrap()).unwrap()
    }

    #[test]
    fn deterministic_instance_closed_form() {
        let env = deterministic(1.5);
        let w = CostWeights::new(0.0, 2.0).unwrap();
        for b in 1..=6 {
            let v = solve_acoe(&env, b, &w).unwrap();
            let lam = 3.5 / b as f64;
            assert_abs_diff_eq!(v.lambda(), lam, epsilon = 1e-9);
            for r in 1..=b {
                assert_abs_diff_eq!(v.get(r), 3.5 - (b - r) as f64 * lam, epsilon = 1e-9);
            }
            let th = thresholds(&v);
            for r in 1..b {
                assert_abs_diff_eq!(th.get(r), r as f64 * lam, epsilon = 1e-9);
            }
            let m = renewal_metrics(&env, &w, &v);
            let law = m.spacing_law();
            assert_abs_diff_eq!(law[b - 1], 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(m.gamma_bar, 1.5, epsilon = 1e-12);
            assert_abs_diff_eq!(m.q_bar_link, env.outage(b, 1.5, 1.0), epsilon = 1e-12);
        }
    }

    #[test]
    fn b_one_has_no_thresholds() {
        let env = Environment::forest_trail();
        let v = solve_acoe(&env, 1, &CostWeights::new(125.0, 2.0).unwrap()).unwrap();
        assert!(thresholds(&v).as_slice().is_empty());
        assert_eq!(thresholds(&v).b(), 1);
    }

    #[test]
    fn zero_horizon_is_rejected() {
        let env = Environment::forest_trail();
        assert!(matches!(solve_acoe(&env, 0, &CostWeights::new(1.0, 1.0).unwrap()), Err(Error::Config(_))));
    }

    #[test]
    fn trail_instance_solution() {
        let env = Environment::forest_trail();
        let w = CostWeights::new(125.0, 2.0).unwrap();
        let v = solve_acoe(&env, 5, &w).unwrap();
        assert!((v.lambda() - 1.85).abs() <= 0.02, "lambda {}", v.lambda());
        assert!(thresholds(&v).is_non_decreasing());
        for r in acoe_residuals(&env, &w, &v) {
            assert!(r.abs() < 1e-8, "residual {r}");
        }
        let m = renewal_metrics(&env, &w, &v);
        assert_abs_diff_eq!(m.cost_per_step(&w), v.lambda(), epsilon = 1e-6);
        assert_abs_diff_eq!(m.link_law.iter().flatten().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn choose_b_trail_and_degenerate() {
        let env = Environment::forest_trail();
        assert_eq!(choose_b(&env, 0.03, 0.2).unwrap(), 5);
        assert_eq!(choose_b_capped(&env, 0.03, 1e-6, 8).unwrap(), 8);

        let mut p = PropagationParams::forest_trail();
        p.sigma_db = 0.0;
        let det = Environment::new(p, PowerSet::iwise()).unwrap();
        let pm = det.powers.highest();
        let scan = (1..64).take_while(|&b| det.outage(b, pm, 1.0) < 0.03).last().unwrap();
        assert_eq!(choose_b(&det, 0.03, 0.2).unwrap(), scan);
    }

    #[test]
    fn choose_b_reports_infeasibility() {
        let mut p = PropagationParams::forest_trail();
        p.sigma_db = 0.0;
        p.p_rcv_min *= 1e6;
        let env = Environment::new(p, PowerSet::iwise()).unwrap();
        assert_eq!(choose_b(&env, 0.03, 0.2), Err(Error::InfeasibleEnvironment));
        assert!(choose_b(&env, 0.0, 0.2).is_err());
    }

    #[test]
    fn discrete_law_ties_favour_placement() {
        // Single atom, single power, xi_out = 0: c(r) = P + xi_relay exactly,
        // thresholds c_th(r) = r lambda; at r = B - 1 c_th = (B-1)/B (P + xi_relay) < c.
        let env = deterministic(1.0).with_shadowing(Shadowing::discrete(vec![(1.0, 1.0)]).unwrap());
        let w = CostWeights::new(0.0, 0.0).unwrap();
        let v = solve_acoe(&env, 1, &w).unwrap();
        assert_abs_diff_eq!(v.lambda(), 1.0, epsilon = 1e-9);
        // With V = (1, 2) the r = 1 threshold equals the placement cost: place wins.
        let tie = ValueVector::new(vec![1.0, 2.0]).unwrap();
        let m = renewal_metrics(&env, &w, &tie);
        assert_abs_diff_eq!(m.placement_prob[0], 1.0, epsilon = 1e-15);
    }
}
