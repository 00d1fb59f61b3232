//! Checks shared by the property suite and the acceptance harness. Each
//! returns `Err(description)` on the first violation.

#![allow(dead_code)]

use asyougo::acoe::{acoe_residuals, lambda_surface, renewal_metrics, solve_acoe, thresholds, CostWeights};
use asyougo::adaptive::{Bounds, Constraints, MultiplierSchedules, OaygalState};
use asyougo::channel::{Environment, PowerSet, PropagationParams, Shadowing};
use asyougo::learning::{OayglState, StepSchedule};
use asyougo::policy::FixedPolicy;
use asyougo::simulator::{monte_carlo, path_rng, run_path, RunOptions};
use proptest::prelude::*;

pub type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

/// `(eta, sigma_db, b, xi_out, xi_relay)`.
pub fn continuous_instance() -> impl Strategy<Value = (f64, f64, usize, f64, f64)> {
    (3.0f64..5.5, 0.0f64..10.0, 1usize..=6, 0.0f64..300.0, 0.0f64..5.0)
}

/// Solver output obeys the structural properties of the unique ACOE solution.
pub fn solution_invariants(eta: f64, sigma_db: f64, b: usize, xi_out: f64, xi_relay: f64) -> Check {
    let params = PropagationParams::forest_trail().with_eta_sigma(eta, sigma_db);
    let env = Environment::new(params, PowerSet::iwise()).map_err(|e| e.to_string())?;
    let w = CostWeights::new(xi_out, xi_relay).unwrap();
    let v = solve_acoe(&env, b, &w).map_err(|e| e.to_string())?;
    let scale = v.get(b).max(1.0);
    let res = acoe_residuals(&env, &w, &v);
    ensure!(res.iter().all(|r| r.abs() < 1e-8 * scale), "residuals {res:?}");
    let s = v.as_slice();
    ensure!(s.windows(2).all(|p| p[1] >= p[0] - 1e-12 * scale), "V not non-decreasing: {s:?}");
    for r in 1..b {
        ensure!(v.get(r) >= r as f64 * v.lambda() - 1e-9 * scale, "V({r}) < r V(1): {s:?}");
    }
    ensure!(v.lambda() > 0.0, "V(1) = {}", v.lambda());
    ensure!(thresholds(&v).is_non_decreasing(), "thresholds decrease: {s:?}");
    let m = renewal_metrics(&env, &w, &v);
    let law: f64 = m.spacing_law().iter().sum();
    ensure!((law - 1.0).abs() < 1e-9, "link law sums to {law}");
    let u: f64 = m.spacing_law().iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum();
    ensure!((u - m.u_bar).abs() < 1e-9 * u, "u_bar {} vs {u}", m.u_bar);
    let id = m.cost_per_step(&w);
    ensure!((id - v.lambda()).abs() < 1e-6 * v.lambda().max(1.0), "renewal identity {id} vs {}", v.lambda());
    Ok(())
}

/// `(atoms (log10 w, p), powers, b, xi_out, xi_relay)`.
pub fn discrete_instance() -> impl Strategy<Value = (Vec<(f64, f64)>, Vec<f64>, usize, f64, f64)> {
    (
        proptest::collection::vec((-1.5f64..1.5, 0.05f64..1.0), 1..=5),
        proptest::collection::vec(0.01f64..3.0, 1..=2),
        1usize..=3,
        0.0f64..300.0,
        0.0f64..5.0,
    )
}

/// Placement cost written out from the link model, independent of the crate.
fn oracle_cost(p: &PropagationParams, powers: &[f64], w: &CostWeights, r: usize, g: f64) -> f64 {
    let loss = p.p_rcv_min * (r as f64 * p.delta / p.r0).powf(p.eta);
    powers
        .iter()
        .map(|&gamma| gamma + w.xi_out * (1.0 - (-loss / (gamma * p.c_ref * g)).exp()))
        .fold(f64::INFINITY, f64::min)
        + w.xi_relay
}

/// Compares the solver with two oracles on a finite shadowing law: a scan of
/// `V(1)` on a 1e-6 grid (coarse bracket, then fine cells), and exhaustive
/// enumeration of deterministic stationary policies on the `(r, atom)` states.
pub fn discrete_oracles(atoms: &[(f64, f64)], powers: &[f64], b: usize, xi_out: f64, xi_relay: f64) -> Check {
    let mut pw: Vec<f64> = powers.to_vec();
    pw.sort_by(f64::total_cmp);
    pw.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
    let params = PropagationParams::forest_trail();
    let tot: f64 = atoms.iter().map(|a| a.1).sum();
    let law: Vec<(f64, f64)> = atoms.iter().map(|&(lw, p)| (10f64.powf(lw), p / tot)).collect();
    let env = Environment::new(params, PowerSet::new(pw.clone()).unwrap())
        .unwrap()
        .with_shadowing(Shadowing::discrete(law.clone()).unwrap());
    let w = CostWeights::new(xi_out, xi_relay).unwrap();
    let v = solve_acoe(&env, b, &w).map_err(|e| e.to_string())?;
    let c: Vec<Vec<f64>> = (1..=b).map(|r| law.iter().map(|&(g, _)| oracle_cost(&params, &pw, &w, r, g)).collect()).collect();

    // phi(x): backward recursion for a candidate V(1) = x.
    let phi = |x: f64| -> Vec<f64> {
        let mut vv = vec![0.0; b];
        vv[b - 1] = law.iter().zip(&c[b - 1]).map(|(a, c)| a.1 * c).sum();
        for r in (1..b).rev() {
            let cont = vv[r] - x;
            vv[r - 1] = law.iter().zip(&c[r - 1]).map(|(a, c)| a.1 * c.min(cont)).sum();
        }
        vv
    };
    let hi = pw[pw.len() - 1] + xi_out + xi_relay;
    let coarse = 1e-3;
    let mut x0 = 0.0;
    while x0 + coarse <= hi && phi(x0 + coarse)[0] > x0 + coarse {
        x0 += coarse;
    }
    let (mut best, mut best_gap) = (x0, f64::INFINITY);
    for i in 0..=1000 {
        let x = x0 + i as f64 * 1e-6;
        let gap = (phi(x)[0] - x).abs();
        if gap < best_gap {
            (best, best_gap) = (x, gap);
        }
    }
    ensure!((v.lambda() - best).abs() <= 2e-6, "grid V(1) {best} vs solver {}", v.lambda());
    let vg = phi(best);
    for (r, (&g, &s)) in vg.iter().zip(v.as_slice()).enumerate() {
        ensure!((g - s).abs() <= 1e-5 * (1.0 + hi), "V({}) grid {g} vs solver {s}", r + 1);
    }

    // Exhaustive policy enumeration: lambda* = min over policies of E[cost]/E[U].
    let n = law.len();
    let bits = n * (b - 1);
    let mut best_ratio = f64::INFINITY;
    for mask in 0u64..(1u64 << bits) {
        let (mut survive, mut cost, mut u) = (1.0, 0.0, 0.0);
        for r in 1..=b {
            let mut p_place = 0.0;
            for (i, &(_, p)) in law.iter().enumerate() {
                let place = r == b || mask >> ((r - 1) * n + i) & 1 == 1;
                if place {
                    p_place += p;
                    cost += survive * p * c[r - 1][i];
                }
            }
            u += survive * p_place * r as f64;
            survive *= 1.0 - p_place;
        }
        best_ratio = best_ratio.min(cost / u);
    }
    ensure!(
        (best_ratio - v.lambda()).abs() <= 1e-8 * best_ratio.max(1.0),
        "enumerated lambda* {best_ratio} vs solver {}",
        v.lambda()
    );
    Ok(())
}

/// Shape of `lambda*` and the optimal metrics over the multiplier grid
/// `xi_out in {0, 50, ..., 250}`, `xi_relay in {0, 1, ..., 5}`.
pub fn surface_shape() -> Check {
    let env = Environment::forest_trail();
    let xo: Vec<f64> = (0..6).map(|i| 50.0 * i as f64).collect();
    let xr: Vec<f64> = (0..6).map(|i| i as f64).collect();
    let grid: Vec<CostWeights> = xo.iter().flat_map(|&a| xr.iter().map(move |&b| CostWeights::new(a, b).unwrap())).collect();
    let pts = lambda_surface(&env, 5, &grid).map_err(|e| e.to_string())?;
    let at = |i: usize, j: usize| &pts[i * xr.len() + j];
    let tol = 1e-8;
    for i in 0..xo.len() {
        for j in 0..xr.len() {
            let p = at(i, j);
            if i + 1 < xo.len() {
                let q = at(i + 1, j);
                let d = q.lambda - p.lambda;
                ensure!(d >= -tol, "lambda decreases along xi_out at ({}, {})", xo[i], xr[j]);
                ensure!(d <= (xo[i + 1] - xo[i]) + tol, "Lipschitz bound fails along xi_out at ({}, {})", xo[i], xr[j]);
                ensure!(
                    q.metrics.outage_per_step <= p.metrics.outage_per_step + 1e-12,
                    "outage per step increases along xi_out at ({}, {})",
                    xo[i],
                    xr[j]
                );
            }
            if j + 1 < xr.len() {
                let q = at(i, j + 1);
                let d = q.lambda - p.lambda;
                ensure!(d >= -tol, "lambda decreases along xi_relay at ({}, {})", xo[i], xr[j]);
                ensure!(d <= (xr[j + 1] - xr[j]) + tol, "Lipschitz bound fails along xi_relay at ({}, {})", xo[i], xr[j]);
                ensure!(
                    q.metrics.relays_per_step <= p.metrics.relays_per_step + 1e-12,
                    "relays per step increase along xi_relay at ({}, {})",
                    xo[i],
                    xr[j]
                );
            }
            if i + 2 < xo.len() {
                let mid = (p.lambda + at(i + 2, j).lambda) / 2.0;
                ensure!(at(i + 1, j).lambda >= mid - tol, "not midpoint-concave along xi_out at ({}, {})", xo[i + 1], xr[j]);
            }
            if j + 2 < xr.len() {
                let mid = (p.lambda + at(i, j + 2).lambda) / 2.0;
                ensure!(at(i, j + 1).lambda >= mid - tol, "not midpoint-concave along xi_relay at ({}, {})", xo[i], xr[j + 1]);
            }
        }
    }
    Ok(())
}

fn trail_start() -> (Environment, asyougo::acoe::ValueVector) {
    let env = Environment::forest_trail();
    let prior = Environment::new(PropagationParams::forest_trail().with_eta_sigma(5.0, 8.0), PowerSet::iwise()).unwrap();
    let v0 = solve_acoe(&prior, 5, &CostWeights::new(100.0, 3.0).unwrap()).unwrap();
    (env, v0)
}

/// Multipliers never leave the box, even with gains large enough to hit its walls.
pub fn box_invariance() -> Check {
    let (env, v0) = trail_start();
    let slow = MultiplierSchedules::new(StepSchedule::new(5e4, 0.8).unwrap(), StepSchedule::new(50.0, 0.8).unwrap()).unwrap();
    let bounds = Bounds::new(130.0, 3.5).unwrap();
    let mut hit = false;
    for seed in 0..3 {
        let mut st = OaygalState::new(
            v0.clone(),
            CostWeights::new(100.0, 3.0).unwrap(),
            StepSchedule::new(1.0, 0.55).unwrap(),
            slow,
            Constraints::new(0.0044, 1.0 / 2.285).unwrap(),
            bounds,
            env.powers.clone(),
        )
        .unwrap();
        let t = run_path(&mut st, &env, 4000, &mut path_rng(seed, 0), &RunOptions::default());
        for (k, p) in t.curve.iter().enumerate() {
            ensure!(
                (0.0..=bounds.a1).contains(&p.xi_out) && (0.0..=bounds.a2).contains(&p.xi_relay),
                "multipliers ({}, {}) outside the box at step {}",
                p.xi_out,
                p.xi_relay,
                k + 1
            );
            hit |= p.xi_out == bounds.a1 || p.xi_out == 0.0 || p.xi_relay == bounds.a2 || p.xi_relay == 0.0;
        }
    }
    ensure!(hit, "projection never engaged; the check is vacuous");
    Ok(())
}

/// Zero slow gains reproduce the fixed-multiplier learner bit for bit.
pub fn frozen_multiplier_reduction() -> Check {
    let (env, v0) = trail_start();
    let xi = CostWeights::new(100.0, 3.0).unwrap();
    let fast = StepSchedule::new(1.0, 0.55).unwrap();
    for seed in 0..3 {
        let mut a = OaygalState::new(
            v0.clone(),
            xi,
            fast,
            MultiplierSchedules::frozen(),
            Constraints::new(0.0044, 1.0 / 2.285).unwrap(),
            Bounds::new(1e3, 10.0).unwrap(),
            env.powers.clone(),
        )
        .unwrap();
        let mut b = OayglState::new(v0.clone(), xi, fast, env.powers.clone());
        let opts = RunOptions { record_steps: true, ..Default::default() };
        let ta = run_path(&mut a, &env, 3000, &mut path_rng(seed, 1), &opts);
        let tb = run_path(&mut b, &env, 3000, &mut path_rng(seed, 1), &opts);
        ensure!(ta == tb, "traces differ for seed {seed}");
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        ensure!(bits(a.values()) == bits(b.values()), "final estimates differ for seed {seed}");
    }
    Ok(())
}

/// Same seed, same result: single paths, Monte-Carlo averages (also across
/// thread counts) and learners.
pub fn seeded_determinism() -> Check {
    let env = Environment::forest_trail();
    let w = CostWeights::new(125.0, 2.0).unwrap();
    let v = solve_acoe(&env, 5, &w).unwrap();
    let pol = FixedPolicy::new(v.clone(), w, env.powers.clone());
    let opts = RunOptions { record_steps: true, ..Default::default() };
    let t1 = run_path(&mut pol.clone(), &env, 1000, &mut path_rng(3, 9), &opts);
    let t2 = run_path(&mut pol.clone(), &env, 1000, &mut path_rng(3, 9), &opts);
    ensure!(t1 == t2, "fixed-policy traces differ");
    let t3 = run_path(&mut pol.clone(), &env, 1000, &mut path_rng(4, 9), &opts);
    ensure!(t1 != t3, "different seeds gave identical traces");

    let learner = OayglState::new(v, w, StepSchedule::new(1.0, 0.55).unwrap(), env.powers.clone());
    let mc = || monte_carlo(|_| learner.clone(), &env, 40, 300, 17, &RunOptions::default());
    let a = mc();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(mc);
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(mc);
    ensure!(a == one && a == four, "Monte-Carlo curves depend on the thread count");
    Ok(())
}
