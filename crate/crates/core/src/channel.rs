//! Radio propagation along the line.
//!
//! A link of `r` steps operated at transmit power `gamma` sees received power
//! `gamma * c * (r * delta / r0)^-eta * H * W`, where `H` is unit-mean
//! exponential (Rayleigh) fading and `W` is log-normal shadowing with
//! `10 log10 W ~ N(0, sigma_db^2)`. Fading is integrated out in closed form, so
//! a link is fully described by its length and its shadowing realization.
//!
//! Expectations over `W` come in two flavours:
//! * [`Shadowing::expect`] uses Gauss-Hermite quadrature and is meant for
//!   smooth integrands;
//! * [`Shadowing::partition`] returns quadrature atoms adapted to a piecewise
//!   integrand. Placement indicators and argmin switches make most of the
//!   integrands in this crate discontinuous, and Gauss-Hermite alone misses the
//!   jump locations by a wide margin.

use gauss_quad::{GaussHermite, GaussLegendre};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check, Error, Result};

/// Default Gauss-Hermite node count for smooth expectations.
pub const DEFAULT_HERMITE_NODES: usize = 61;

/// Converts dBm to mW.
pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Converts mW to dBm.
pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FadingModel {
    #[default]
    Rayleigh,
}

/// Path-loss and receiver parameters of the deployment region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationParams {
    /// Path-loss exponent.
    pub eta: f64,
    /// Path-loss gain at the reference distance (linear).
    pub c_ref: f64,
    /// Reference distance in meters.
    pub r0: f64,
    /// Standard deviation of log-normal shadowing, in dB.
    pub sigma_db: f64,
    /// Step length in meters.
    pub delta: f64,
    /// Receiver outage threshold in mW.
    pub p_rcv_min: f64,
    #[serde(default)]
    pub fading: FadingModel,
}

impl PropagationParams {
    pub fn validate(&self) -> Result<()> {
        check(self.eta > 0.0 && self.eta.is_finite(), "eta", self.eta)?;
        check(self.c_ref > 0.0 && self.c_ref.is_finite(), "c_ref", self.c_ref)?;
        check(self.r0 > 0.0 && self.r0.is_finite(), "r0", self.r0)?;
        check(self.sigma_db >= 0.0 && self.sigma_db.is_finite(), "sigma_db", self.sigma_db)?;
        check(self.delta > 0.0 && self.delta.is_finite(), "delta", self.delta)?;
        check(self.p_rcv_min >= 0.0 && self.p_rcv_min.is_finite(), "p_rcv_min", self.p_rcv_min)?;
        Ok(())
    }

    /// Forest-trail environment: eta = 4.7, c = 1.7 dB, sigma = 7.7 dB,
    /// 20 m steps, -97 dBm receiver threshold, r0 = 1 m.
    pub fn forest_trail() -> Self {
        Self {
            eta: 4.7,
            c_ref: 10f64.powf(0.17),
            r0: 1.0,
            sigma_db: 7.7,
            delta: 20.0,
            p_rcv_min: dbm_to_mw(-97.0),
            fading: FadingModel::Rayleigh,
        }
    }

    /// Same environment with a different path-loss exponent and shadowing spread.
    pub fn with_eta_sigma(mut self, eta: f64, sigma_db: f64) -> Self {
        self.eta = eta;
        self.sigma_db = sigma_db;
        self
    }

    /// `P_rcv-min * (r delta / r0)^eta / c`, the numerator of the outage exponent
    /// before dividing by `gamma * w`.
    #[inline]
    pub fn loss_scale(&self, r_steps: usize) -> f64 {
        self.p_rcv_min * ((r_steps as f64 * self.delta) / self.r0).powf(self.eta) / self.c_ref
    }

    /// Outage probability without argument checks.
    #[inline]
    pub fn outage(&self, r_steps: usize, gamma: f64, w: f64) -> f64 {
        match self.fading {
            FadingModel::Rayleigh => -(-self.loss_scale(r_steps) / (gamma * w)).exp_m1(),
        }
    }
}

/// Discrete transmit power levels in mW, strictly ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PowerSet {
    levels: Vec<f64>,
}

impl PowerSet {
    pub fn new(levels_mw: Vec<f64>) -> Result<Self> {
        if levels_mw.is_empty() {
            return Err(Error::Config("power set must not be empty".into()));
        }
        for (i, &p) in levels_mw.iter().enumerate() {
            check(p > 0.0 && p.is_finite(), "power level", p)?;
            if i > 0 && p <= levels_mw[i - 1] {
                return Err(Error::Config(format!(
                    "power levels must be strictly ascending ({} mW follows {} mW)",
                    p,
                    levels_mw[i - 1]
                )));
            }
        }
        Ok(Self { levels: levels_mw })
    }

    pub fn from_dbm(levels_dbm: &[f64]) -> Result<Self> {
        Self::new(levels_dbm.iter().map(|&d| dbm_to_mw(d)).collect())
    }

    /// {-18, -7, -4, 0, 5} dBm.
    pub fn iwise() -> Self {
        Self::from_dbm(&[-18.0, -7.0, -4.0, 0.0, 5.0]).expect("valid power levels")
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.levels[i]
    }

    pub fn lowest(&self) -> f64 {
        self.levels[0]
    }

    pub fn highest(&self) -> f64 {
        self.levels[self.levels.len() - 1]
    }

    /// Multiplies every level by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.levels.iter().map(|p| p * factor).collect())
    }
}

impl TryFrom<Vec<f64>> for PowerSet {
    type Error = Error;

    fn try_from(levels: Vec<f64>) -> Result<Self> {
        Self::new(levels)
    }
}

impl From<PowerSet> for Vec<f64> {
    fn from(p: PowerSet) -> Self {
        p.levels
    }
}

/// Linear shadowing gain of one link.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ShadowingSample(f64);

impl ShadowingSample {
    pub fn new(w: f64) -> Result<Self> {
        check(w > 0.0 && !w.is_nan(), "shadowing gain", w)?;
        Ok(Self(w))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Outage probability of a link of `r_steps` steps at power `gamma` (mW) under
/// shadowing `w`.
pub fn outage_probability(
    params: &PropagationParams,
    r_steps: usize,
    gamma: f64,
    w: ShadowingSample,
) -> Result<f64> {
    if r_steps == 0 {
        return Err(Error::InvalidParameter { name: "r_steps", value: 0.0 });
    }
    check(gamma > 0.0 && !gamma.is_nan(), "gamma", gamma)?;
    Ok(params.outage(r_steps, gamma, w.value()))
}

/// Draws one shadowing gain `W = 10^(Y/10)` with `Y ~ N(0, sigma_db^2)`.
pub fn sample_shadowing<R: Rng + ?Sized>(params: &PropagationParams, rng: &mut R) -> ShadowingSample {
    let z: f64 = rng.sample(StandardNormal);
    ShadowingSample(10f64.powf(params.sigma_db * z / 10.0))
}

/// Multipliers on outage and relay count in the per-link cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub xi_out: f64,
    pub xi_relay: f64,
}

impl CostWeights {
    pub fn new(xi_out: f64, xi_relay: f64) -> Result<Self> {
        check(xi_out >= 0.0 && xi_out.is_finite(), "xi_out", xi_out)?;
        check(xi_relay >= 0.0 && xi_relay.is_finite(), "xi_relay", xi_relay)?;
        Ok(Self { xi_out, xi_relay })
    }
}

/// Cost of placing a relay on a given link, with the power that attains it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkCost {
    /// `min_gamma (gamma + xi_out * Q(gamma)) + xi_relay`.
    pub cost: f64,
    pub power_index: usize,
    pub power: f64,
    pub outage: f64,
}

/// Cheapest power for a measured outage curve. Ties go to the lowest power.
///
/// Returns `(min_gamma (gamma + xi_out * outage(gamma)), argmin index)`.
#[inline]
pub fn cheapest_power(weights: &CostWeights, powers: &PowerSet, outages: &[f64]) -> (f64, usize) {
    debug_assert_eq!(outages.len(), powers.len());
    let mut best = (f64::INFINITY, 0);
    for (i, (&g, &q)) in powers.levels().iter().zip(outages).enumerate() {
        let c = g + weights.xi_out * q;
        if c < best.0 {
            best = (c, i);
        }
    }
    best
}

/// Single-stage placement cost `c(r, w)`.
pub fn link_cost(
    params: &PropagationParams,
    powers: &PowerSet,
    weights: &CostWeights,
    r_steps: usize,
    w: f64,
) -> LinkCost {
    let mut best = LinkCost { cost: f64::INFINITY, power_index: 0, power: 0.0, outage: 0.0 };
    for (i, &g) in powers.levels().iter().enumerate() {
        let q = params.outage(r_steps, g, w);
        let c = g + weights.xi_out * q;
        if c < best.cost {
            best = LinkCost { cost: c, power_index: i, power: g, outage: q };
        }
    }
    best.cost += weights.xi_relay;
    best
}

/// One quadrature atom: a shadowing gain and its probability weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub w: f64,
    pub p: f64,
}

/// Tuning of the discontinuity-aware integrator on the standardized axis
/// `z = 10 log10(W) / sigma_db`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiecewiseConfig {
    /// Integration is truncated to `|z| <= z_max`.
    pub z_max: f64,
    /// Number of cells scanned for label changes.
    pub scan_cells: usize,
    /// Maximum width of one Gauss-Legendre panel.
    pub panel_width: f64,
    /// Gauss-Legendre nodes per panel.
    pub panel_nodes: usize,
}

impl Default for PiecewiseConfig {
    fn default() -> Self {
        // Tail mass beyond 8.5 standard deviations is ~2e-17.
        Self { z_max: 8.5, scan_cells: 512, panel_width: 0.5, panel_nodes: 12 }
    }
}

#[derive(Debug, Clone)]
enum Law {
    PointMass,
    LogNormal { sigma_db: f64, hermite: Vec<Atom>, legendre: Vec<(f64, f64)>, cfg: PiecewiseConfig },
    Discrete(Vec<Atom>),
}

/// Distribution of the shadowing gain together with its integration rules.
#[derive(Debug, Clone)]
pub struct Shadowing {
    law: Law,
}

impl Shadowing {
    /// Log-normal shadowing with the default 61-node Gauss-Hermite rule.
    pub fn log_normal(sigma_db: f64) -> Result<Self> {
        Self::log_normal_with(sigma_db, DEFAULT_HERMITE_NODES, PiecewiseConfig::default())
    }

    pub fn log_normal_with(sigma_db: f64, hermite_nodes: usize, cfg: PiecewiseConfig) -> Result<Self> {
        check(sigma_db >= 0.0 && sigma_db.is_finite(), "sigma_db", sigma_db)?;
        if hermite_nodes < 3 {
            return Err(Error::Config(format!(
                "Gauss-Hermite rule needs at least 3 nodes, got {hermite_nodes}"
            )));
        }
        if sigma_db == 0.0 {
            return Ok(Self { law: Law::PointMass });
        }
        let gh = GaussHermite::new(hermite_nodes)
            .map_err(|e| Error::Config(format!("Gauss-Hermite rule: {e}")))?;
        // Y = sqrt(2) sigma x turns the e^{-x^2} weight into the N(0, sigma^2) density.
        let norm = std::f64::consts::PI.sqrt();
        let hermite = gh
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, wt)| Atom { w: db_gain(std::f64::consts::SQRT_2 * sigma_db * x), p: wt / norm })
            .collect();
        let gl = GaussLegendre::new(cfg.panel_nodes.max(2))
            .map_err(|e| Error::Config(format!("Gauss-Legendre rule: {e}")))?;
        Ok(Self {
            law: Law::LogNormal { sigma_db, hermite, legendre: gl.as_node_weight_pairs().to_vec(), cfg },
        })
    }

    /// Finite shadowing law given as `(w, probability)` pairs. Probabilities
    /// are renormalized to sum to one.
    pub fn discrete(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Config("discrete shadowing law needs at least one atom".into()));
        }
        let mut total = 0.0;
        for &(w, p) in &atoms {
            check(w > 0.0 && w.is_finite(), "shadowing atom", w)?;
            check(p >= 0.0 && p.is_finite(), "atom probability", p)?;
            total += p;
        }
        check(total > 0.0, "total atom probability", total)?;
        Ok(Self { law: Law::Discrete(atoms.into_iter().map(|(w, p)| Atom { w, p: p / total }).collect()) })
    }

    /// Draws a shadowing gain from this law.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.law {
            Law::PointMass => 1.0,
            Law::LogNormal { sigma_db, .. } => {
                let z: f64 = rng.sample(StandardNormal);
                db_gain(sigma_db * z)
            }
            Law::Discrete(atoms) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for a in atoms {
                    acc += a.p;
                    if u < acc {
                        return a.w;
                    }
                }
                atoms[atoms.len() - 1].w
            }
        }
    }

    /// `E f(W)` by Gauss-Hermite quadrature (exact for discrete laws).
    pub fn expect<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        match &self.law {
            Law::PointMass => f(1.0),
            Law::LogNormal { hermite, .. } => hermite.iter().map(|a| a.p * f(a.w)).sum(),
            Law::Discrete(atoms) => atoms.iter().map(|a| a.p * f(a.w)).sum(),
        }
    }

    /// Quadrature atoms for integrands that are smooth wherever `label` is
    /// constant. Jumps of `label` are located by scanning and bisection, and
    /// each constant stretch gets its own composite Gauss-Legendre rule under
    /// the normal density. Atom weights sum to one.
    pub fn partition<L: FnMut(f64) -> u64>(&self, mut label: L) -> Vec<Atom> {
        match &self.law {
            Law::PointMass => vec![Atom { w: 1.0, p: 1.0 }],
            Law::Discrete(atoms) => atoms.clone(),
            Law::LogNormal { sigma_db, legendre, cfg, .. } => {
                let sigma = *sigma_db;
                let mut lab = |z: f64| label(db_gain(sigma * z));
                let breaks = find_breaks(&mut lab, cfg);
                let mut atoms = Vec::with_capacity((breaks.len() + 40) * legendre.len());
                for seg in breaks.windows(2) {
                    let (a, b) = (seg[0], seg[1]);
                    if b <= a {
                        continue;
                    }
                    let panels = ((b - a) / cfg.panel_width).ceil().max(1.0) as usize;
                    let h = (b - a) / panels as f64;
                    for j in 0..panels {
                        let lo = a + h * j as f64;
                        let mid = lo + 0.5 * h;
                        for &(x, wt) in legendre {
                            let z = mid + 0.5 * h * x;
                            atoms.push(Atom { w: db_gain(sigma * z), p: 0.5 * h * wt * std_normal_pdf(z) });
                        }
                    }
                }
                let total: f64 = atoms.iter().map(|a| a.p).sum();
                for a in &mut atoms {
                    a.p /= total;
                }
                atoms
            }
        }
    }

    /// `E f(W)` for an integrand that is smooth on each level set of `label`.
    pub fn expect_piecewise<L, F>(&self, label: L, mut f: F) -> f64
    where
        L: FnMut(f64) -> u64,
        F: FnMut(f64) -> f64,
    {
        self.partition(label).iter().map(|a| a.p * f(a.w)).sum()
    }

    /// `P(event(W))` for an event whose indicator changes finitely often.
    pub fn probability<E: FnMut(f64) -> bool>(&self, mut event: E) -> f64 {
        self.partition(|w| event(w) as u64)
            .iter()
            .filter(|a| event(a.w))
            .map(|a| a.p)
            .sum()
    }
}

fn db_gain(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Segment endpoints on `[-z_max, z_max]`, including every detected jump of `label`.
fn find_breaks<L: FnMut(f64) -> u64>(label: &mut L, cfg: &PiecewiseConfig) -> Vec<f64> {
    let (lo, hi) = (-cfg.z_max, cfg.z_max);
    let n = cfg.scan_cells.max(1);
    let step = (hi - lo) / n as f64;
    let mut breaks = vec![lo];
    let mut prev_z = lo;
    let mut prev_l = label(lo);
    for i in 1..=n {
        let z = if i == n { hi } else { lo + step * i as f64 };
        let l = label(z);
        if l != prev_l {
            let (mut a, mut b) = (prev_z, z);
            while b - a > 1e-13 {
                let m = 0.5 * (a + b);
                if label(m) == prev_l {
                    a = m;
                } else {
                    b = m;
                }
            }
            breaks.push(0.5 * (a + b));
        }
        prev_z = z;
        prev_l = l;
    }
    breaks.push(hi);
    breaks
}

/// A propagation environment: parameters, power levels, and the shadowing law
/// used for expectations and sampling.
#[derive(Debug, Clone)]
pub struct Environment {
    pub params: PropagationParams,
    pub powers: PowerSet,
    pub shadowing: Shadowing,
}

impl Environment {
    pub fn new(params: PropagationParams, powers: PowerSet) -> Result<Self> {
        params.validate()?;
        let shadowing = Shadowing::log_normal(params.sigma_db)?;
        Ok(Self { params, powers, shadowing })
    }

    /// Replaces the shadowing law, e.g. by a discrete test distribution.
    pub fn with_shadowing(mut self, shadowing: Shadowing) -> Self {
        self.shadowing = shadowing;
        self
    }

    /// The forest-trail environment with the iWiSe power levels.
    pub fn forest_trail() -> Self {
        Self::new(PropagationParams::forest_trail(), PowerSet::iwise()).expect("valid environment")
    }

    #[inline]
    pub fn outage(&self, r_steps: usize, gamma: f64, w: f64) -> f64 {
        self.params.outage(r_steps, gamma, w)
    }

    /// Outage probability at every power level.
    pub fn outage_curve(&self, r_steps: usize, w: f64) -> Vec<f64> {
        let s = self.params.loss_scale(r_steps);
        self.powers.levels().iter().map(|&g| -(-s / (g * w)).exp_m1()).collect()
    }

    #[inline]
    pub fn link_cost(&self, weights: &CostWeights, r_steps: usize, w: f64) -> LinkCost {
        link_cost(&self.params, &self.powers, weights, r_steps, w)
    }

    pub fn sample_shadowing<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.shadowing.sample(rng)
    }
}
