//! The as-you-go walk along an infinite line.
//!
//! At step `k` the agent stands `k` steps from the sink. It measures the link
//! to every node (the sink included) placed `r <= B` steps behind it, drawing
//! one independent shadowing gain per measured link. Only the link to the most
//! recent node drives the placement decision; learners then receive the whole
//! measurement set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{CostWeights, Environment};
use crate::policy::{threshold_decision, Decision, FixedPolicy, MeasuredLink};

/// All links measured at one step, sorted by ascending distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub k: usize,
    entries: Vec<MeasuredLink>,
}

impl MeasurementSet {
    /// Builds a set from links with distinct distances.
    pub fn new(k: usize, mut entries: Vec<MeasuredLink>) -> crate::Result<Self> {
        entries.sort_by_key(|l| l.r_steps);
        if entries.is_empty() {
            return Err(crate::Error::Config("measurement set is empty".into()));
        }
        if entries.windows(2).any(|p| p[0].r_steps == p[1].r_steps) {
            return Err(crate::Error::Config("duplicate distance in measurement set".into()));
        }
        Ok(Self { k, entries })
    }

    pub fn entries(&self) -> &[MeasuredLink] {
        &self.entries
    }

    /// The distances `I_k`.
    pub fn distances(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|l| l.r_steps)
    }

    pub fn get(&self, r: usize) -> Option<&MeasuredLink> {
        self.entries.iter().find(|l| l.r_steps == r)
    }

    /// The link to the most recently placed node, which drives the decision.
    pub fn decision_link(&self) -> &MeasuredLink {
        &self.entries[0]
    }
}

/// A relay committed during deployment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelayRecord {
    /// 1-based relay index.
    pub index: usize,
    /// Position in steps from the sink.
    pub position: usize,
    /// Length `U_i` of the link to the previous node, in steps.
    pub gap: usize,
    pub power: f64,
    pub power_index: usize,
    pub outage: f64,
}

/// Anything that can drive the walk: a fixed policy or a learner.
pub trait DecisionSource {
    fn b(&self) -> usize;

    /// Decision for the link to the previous node. Must place when
    /// `link.r_steps == self.b()`.
    fn decide(&mut self, link: &MeasuredLink) -> Decision;

    /// Called after the decision has been committed.
    fn observe(&mut self, _measurements: &MeasurementSet, _placed: Option<&RelayRecord>) {}

    /// Current estimate of `V(1)`.
    fn v1_estimate(&self) -> f64;

    /// Multipliers currently in use.
    fn multipliers(&self) -> CostWeights;
}

impl DecisionSource for FixedPolicy {
    fn b(&self) -> usize {
        self.values.b()
    }

    fn decide(&mut self, link: &MeasuredLink) -> Decision {
        let b = self.b();
        let t = (link.r_steps < b).then(|| self.thresholds.get(link.r_steps));
        threshold_decision(link, &self.weights, &self.powers, t)
    }

    fn v1_estimate(&self) -> f64 {
        self.values.lambda()
    }

    fn multipliers(&self) -> CostWeights {
        self.weights
    }
}

/// Where the agent is and what it has placed so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentState {
    /// Last completed step.
    pub k: usize,
    /// Node positions in steps, starting with the sink at 0.
    pub placed_positions: Vec<usize>,
}

impl Default for DeploymentState {
    fn default() -> Self {
        Self { k: 0, placed_positions: vec![0] }
    }
}

impl DeploymentState {
    pub fn n_relays(&self) -> usize {
        self.placed_positions.len() - 1
    }

    /// Steps from the last placed node to the next location.
    pub fn next_gap(&self) -> usize {
        self.k + 1 - self.last_position()
    }

    fn last_position(&self) -> usize {
        *self.placed_positions.last().expect("sink is always present")
    }

    /// `I_{k+1}`: distances in `1..=b` from the next location to placed nodes, ascending.
    pub fn next_distances(&self, b: usize) -> Vec<usize> {
        let next = self.k + 1;
        self.placed_positions
            .iter()
            .rev()
            .map(|&p| next - p)
            .take_while(|&r| r <= b)
            .collect()
    }

    /// Records the decision for step `k + 1`.
    pub fn commit(&mut self, decision: &Decision) {
        self.k += 1;
        if decision.is_place() {
            self.placed_positions.push(self.k);
        }
    }
}

/// Cumulative per-step metrics after step `k`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepPoint {
    pub power_per_step: f64,
    pub outage_per_step: f64,
    pub relays_per_step: f64,
    /// `k / N_k`, with `N_k` floored at one before the first relay.
    pub mean_placement_distance: f64,
    pub v1_estimate: f64,
    pub xi_out: f64,
    pub xi_relay: f64,
}

impl StepPoint {
    pub const FIELDS: [&'static str; 7] = [
        "power_per_step",
        "outage_per_step",
        "relays_per_step",
        "mean_placement_distance",
        "v1_estimate",
        "xi_out",
        "xi_relay",
    ];

    pub fn to_array(self) -> [f64; 7] {
        [
            self.power_per_step,
            self.outage_per_step,
            self.relays_per_step,
            self.mean_placement_distance,
            self.v1_estimate,
            self.xi_out,
            self.xi_relay,
        ]
    }

    pub fn from_array(a: [f64; 7]) -> Self {
        Self {
            power_per_step: a[0],
            outage_per_step: a[1],
            relays_per_step: a[2],
            mean_placement_distance: a[3],
            v1_estimate: a[4],
            xi_out: a[5],
            xi_relay: a[6],
        }
    }
}

/// Denominator of the per-step sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepNormalization {
    /// Divide by `k`: the trailing partial link counts as deployed distance.
    #[default]
    AllSteps,
    /// Divide by the position of the last relay (or `k` before the first one).
    CompletedLinks,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub record_steps: bool,
    pub record_curve: bool,
    pub normalization: StepNormalization,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { record_steps: false, record_curve: true, normalization: StepNormalization::AllSteps }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    pub measured: Vec<usize>,
    pub shadowing: Vec<f64>,
    pub decision: Decision,
    pub v1_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentTrace {
    pub b: usize,
    pub horizon: usize,
    pub placed_positions: Vec<usize>,
    pub relays: Vec<RelayRecord>,
    /// Empty unless [`RunOptions::record_steps`] is set.
    pub steps: Vec<StepRecord>,
    /// One point per step unless [`RunOptions::record_curve`] is cleared.
    pub curve: Vec<StepPoint>,
}

impl DeploymentTrace {
    pub fn n_relays(&self) -> usize {
        self.relays.len()
    }
}

/// Independent stream for one sample path.
pub fn path_rng(master_seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(path);
    rng
}

/// Walks `horizon` steps.
pub fn run_path<S, R>(
    source: &mut S,
    env: &Environment,
    horizon: usize,
    rng: &mut R,
    opts: &RunOptions,
) -> DeploymentTrace
where
    S: DecisionSource + ?Sized,
    R: Rng + ?Sized,
{
    let b = source.b();
    let mut state = DeploymentState::default();
    let mut relays = Vec::new();
    let mut steps = Vec::new();
    let mut curve = Vec::with_capacity(if opts.record_curve { horizon } else { 0 });
    let (mut sum_power, mut sum_outage) = (0.0, 0.0);

    for k in 1..=horizon {
        let dists = state.next_distances(b);
        let mut ws = Vec::with_capacity(dists.len());
        let links: Vec<MeasuredLink> = dists
            .iter()
            .map(|&r| {
                let w = env.sample_shadowing(rng);
                ws.push(w);
                MeasuredLink::from_shadowing(env, r, w)
            })
            .collect();
        let measurements = MeasurementSet { k, entries: links };

        let gap = state.next_gap();
        debug_assert_eq!(gap, measurements.decision_link().r_steps);
        let decision = source.decide(measurements.decision_link());
        debug_assert!(gap < b || decision.is_place(), "placement is forced at r = B");
        state.commit(&decision);

        let placed = match decision {
            Decision::Place { power, power_index, link_outage } => {
                sum_power += power;
                sum_outage += link_outage;
                relays.push(RelayRecord {
                    index: relays.len() + 1,
                    position: k,
                    gap,
                    power,
                    power_index,
                    outage: link_outage,
                });
                relays.last()
            }
            Decision::Continue => None,
        };
        source.observe(&measurements, placed);

        if opts.record_curve {
            let n = state.n_relays();
            let denom = match opts.normalization {
                StepNormalization::AllSteps => k,
                StepNormalization::CompletedLinks if n > 0 => state.last_position(),
                StepNormalization::CompletedLinks => k,
            } as f64;
            let xi = source.multipliers();
            curve.push(StepPoint {
                power_per_step: sum_power / denom,
                outage_per_step: sum_outage / denom,
                relays_per_step: n as f64 / denom,
                mean_placement_distance: k as f64 / n.max(1) as f64,
                v1_estimate: source.v1_estimate(),
                xi_out: xi.xi_out,
                xi_relay: xi.xi_relay,
            });
        }
        if opts.record_steps {
            steps.push(StepRecord {
                k,
                measured: dists,
                shadowing: ws,
                decision,
                v1_estimate: source.v1_estimate(),
            });
        }
    }

    DeploymentTrace { b, horizon, placed_positions: state.placed_positions, relays, steps, curve }
}

/// Averaged curves over independent sample paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McCurves {
    pub n_paths: usize,
    pub mean: Vec<StepPoint>,
    pub stderr: Vec<StepPoint>,
}

/// Running (count, mean, M2) per step and field, combinable in a fixed order.
#[derive(Clone)]
struct Moments {
    n: f64,
    mean: Vec<[f64; 7]>,
    m2: Vec<[f64; 7]>,
}

impl Moments {
    fn new(horizon: usize) -> Self {
        Self { n: 0.0, mean: vec![[0.0; 7]; horizon], m2: vec![[0.0; 7]; horizon] }
    }

    fn push(&mut self, curve: &[StepPoint]) {
        self.n += 1.0;
        for (k, p) in curve.iter().enumerate() {
            let x = p.to_array();
            for (j, &xj) in x.iter().enumerate() {
                let d = xj - self.mean[k][j];
                self.mean[k][j] += d / self.n;
                self.m2[k][j] += d * (xj - self.mean[k][j]);
            }
        }
    }

    fn merge(&mut self, other: &Moments) {
        if other.n == 0.0 {
            return;
        }
        let n = self.n + other.n;
        for k in 0..self.mean.len() {
            for j in 0..7 {
                let d = other.mean[k][j] - self.mean[k][j];
                self.mean[k][j] += d * other.n / n;
                self.m2[k][j] += other.m2[k][j] + d * d * self.n * other.n / n;
            }
        }
        self.n = n;
    }
}

const PATHS_PER_CHUNK: usize = 16;

/// Runs `n_paths` independent paths and averages their curves step by step.
///
/// Path `i` uses [`path_rng`]`(master_seed, i)` and the source returned by
/// `make_source(i)`. Paths are grouped into fixed chunks whose partial
/// moments are merged in chunk order, so the result does not depend on thread
/// scheduling.
pub fn monte_carlo<S, F>(make_source: F, env: &Environment, n_paths: usize, horizon: usize, master_seed: u64, opts: &RunOptions) -> McCurves
where
    S: DecisionSource,
    F: Fn(usize) -> S + Sync,
{
    let opts = RunOptions { record_steps: false, record_curve: true, ..*opts };
    let chunk = |c: usize| {
        let mut m = Moments::new(horizon);
        for i in c * PATHS_PER_CHUNK..((c + 1) * PATHS_PER_CHUNK).min(n_paths) {
            let mut source = make_source(i);
            let mut rng = path_rng(master_seed, i as u64);
            m.push(&run_path(&mut source, env, horizon, &mut rng, &opts).curve);
        }
        m
    };
    let n_chunks = n_paths.div_ceil(PATHS_PER_CHUNK);
    #[cfg(feature = "parallel")]
    let parts: Vec<Moments> = {
        use rayon::prelude::*;
        (0..n_chunks).into_par_iter().map(chunk).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Moments> = (0..n_chunks).map(chunk).collect();

    let mut total = Moments::new(horizon);
    for p in &parts {
        total.merge(p);
    }
    let n = total.n;
    let stderr = total
        .m2
        .iter()
        .map(|m2| {
            let mut se = [0.0; 7];
            if n > 1.0 {
                for j in 0..7 {
                    se[j] = (m2[j].max(0.0) / (n - 1.0) / n).sqrt();
                }
            }
            StepPoint::from_array(se)
        })
        .collect();
    McCurves { n_paths, mean: total.mean.into_iter().map(StepPoint::from_array).collect(), stderr }
}

/// Measurement counts `nu(r, k)`: how many of the steps `1..=k` measured a
/// node at distance `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coverage {
    pub b: usize,
    pub horizon: usize,
    counts: Vec<u64>,
}

impl Coverage {
    pub fn nu(&self, r: usize, k: usize) -> u64 {
        self.counts[(k - 1) * self.b + (r - 1)]
    }

    /// Each node generates one measurement at every `r <= B` as the agent
    /// walks past it, and nodes are at most `B` apart, so
    /// `nu(r, k) >= floor((k - B) / B)`.
    pub fn satisfies_revisit_bound(&self) -> bool {
        (1..=self.horizon).all(|k| {
            let bound = k.saturating_sub(self.b) / self.b;
            (1..=self.b).all(|r| self.nu(r, k) >= bound as u64)
        })
    }
}

pub fn measurement_coverage(trace: &DeploymentTrace) -> Coverage {
    let (b, horizon) = (trace.b, trace.horizon);
    // nodes_upto[j] = number of nodes at positions <= j
    let mut nodes_upto = vec![0u64; horizon + 1];
    for &p in &trace.placed_positions {
        if p <= horizon {
            nodes_upto[p] += 1;
        }
    }
    for j in 1..=horizon {
        nodes_upto[j] += nodes_upto[j - 1];
    }
    let mut counts = vec![0u64; horizon * b];
    for k in 1..=horizon {
        for r in 1..=b.min(k) {
            counts[(k - 1) * b + (r - 1)] = nodes_upto[k - r];
        }
    }
    Coverage { b, horizon, counts }
}
