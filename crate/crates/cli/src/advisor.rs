//! Interactive placement advisor for a person walking the line.
//!
//! At each candidate location the advisor asks for measurements to every
//! node within `B` steps behind (it derives those distances from its own
//! placement log), prints Place/Continue with the power to use and, in the
//! learning modes, updates and persists its estimate.

use std::io::{BufRead, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use asyougo::acoe::solve_acoe;
use asyougo::adaptive::{calibrate_bounds, OaygalState};
use asyougo::channel::{mw_to_dbm, CostWeights};
use asyougo::learning::OayglState;
use asyougo::policy::{Decision, FixedPolicy, MeasuredLink};
use asyougo::simulator::{DecisionSource, DeploymentState, MeasurementSet, RelayRecord};
use serde::{Deserialize, Serialize};

use crate::config::Config;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Fixed optimal policy for the configured multipliers.
    Fixed,
    /// Learn the value vector for the configured multipliers.
    Learn,
    /// Learn the value vector and the multipliers that meet the constraints.
    Adapt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Learner {
    Fixed(FixedPolicy),
    Learn(OayglState),
    Adapt(OaygalState),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub k: usize,
    pub links: Vec<MeasuredLink>,
    pub decision: Decision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvisorSession {
    pub config: Config,
    pub learner: Learner,
    pub deployment: DeploymentState,
    pub log: Vec<LogEntry>,
}

impl AdvisorSession {
    /// Starts from the policy solved under the configured prior.
    pub fn new(config: Config, mode: Mode) -> Result<Self> {
        let b = config.horizon()?;
        let prior = config.prior_env()?;
        let powers = config.powers()?;
        let learner = match mode {
            Mode::Fixed => Learner::Fixed(FixedPolicy::new(solve_acoe(&prior, b, &config.weights)?, config.weights, powers)),
            Mode::Learn => Learner::Learn(OayglState::new(
                solve_acoe(&prior, b, &config.weights)?,
                config.weights,
                config.learning,
                powers,
            )),
            Mode::Adapt => {
                let a = &config.adaptive;
                let bounds = match a.bounds {
                    Some(bounds) => bounds,
                    None => calibrate_bounds(&prior, b, &a.constraints, a.kappa)?,
                };
                Learner::Adapt(OaygalState::new(
                    solve_acoe(&prior, b, &a.xi0)?,
                    a.xi0,
                    a.fast,
                    a.slow,
                    a.constraints,
                    bounds,
                    powers,
                )?)
            }
        };
        Ok(Self { config, learner, deployment: DeploymentState::default(), log: Vec::new() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading session {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing session {}", path.display()))
    }

    /// Writes via a temporary file so an interrupted save keeps the old session.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_string_pretty(self)?)?;
        std::fs::rename(&tmp, path).with_context(|| format!("writing session {}", path.display()))
    }

    pub fn mode(&self) -> Mode {
        match self.learner {
            Learner::Fixed(_) => Mode::Fixed,
            Learner::Learn(_) => Mode::Learn,
            Learner::Adapt(_) => Mode::Adapt,
        }
    }

    fn source(&self) -> &dyn DecisionSource {
        match &self.learner {
            Learner::Fixed(p) => p,
            Learner::Learn(s) => s,
            Learner::Adapt(s) => s,
        }
    }

    fn source_mut(&mut self) -> &mut dyn DecisionSource {
        match &mut self.learner {
            Learner::Fixed(p) => p,
            Learner::Learn(s) => s,
            Learner::Adapt(s) => s,
        }
    }

    pub fn b(&self) -> usize {
        self.source().b()
    }

    pub fn n_powers(&self) -> usize {
        self.config.power_levels_dbm.len()
    }

    /// Distances to measure at the next location, nearest (the deciding link) first.
    pub fn pending_distances(&self) -> Vec<usize> {
        self.deployment.next_distances(self.b())
    }

    pub fn v1_estimate(&self) -> f64 {
        self.source().v1_estimate()
    }

    pub fn multipliers(&self) -> CostWeights {
        self.source().multipliers()
    }

    /// Decides at the next location and learns from `links`, which must
    /// include the link to the previous node.
    pub fn step(&mut self, links: Vec<MeasuredLink>) -> Result<Decision> {
        let pending = self.pending_distances();
        let gap = pending[0];
        for l in &links {
            if !pending.contains(&l.r_steps) {
                bail!("no node sits {} steps back; expected one of {pending:?}", l.r_steps);
            }
            if l.outage_by_power.len() != self.n_powers() {
                bail!("expected {} outage values, got {}", self.n_powers(), l.outage_by_power.len());
            }
        }
        if !links.iter().any(|l| l.r_steps == gap) {
            bail!("the link to the previous node ({gap} steps back) is required for the decision");
        }
        let k = self.deployment.k + 1;
        let m = MeasurementSet::new(k, links)?;
        let decision = self.source_mut().decide(m.decision_link());
        let record = match decision {
            Decision::Place { power, power_index, link_outage } => Some(RelayRecord {
                index: self.deployment.n_relays() + 1,
                position: k,
                gap,
                power,
                power_index,
                outage: link_outage,
            }),
            Decision::Continue => None,
        };
        self.deployment.commit(&decision);
        self.source_mut().observe(&m, record.as_ref());
        self.log.push(LogEntry { k, links: m.entries().to_vec(), decision });
        Ok(decision)
    }
}

/// Parses one measurement line: either `M` outage probabilities, or `M`
/// packet counts written `received/sent`.
pub fn parse_measurement(r: usize, line: &str, n_powers: usize) -> Result<MeasuredLink> {
    let tokens: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()).collect();
    if tokens.len() != n_powers {
        bail!("expected {n_powers} values (one per power level), got {}", tokens.len());
    }
    if tokens.iter().all(|t| t.contains('/')) {
        let counts = tokens
            .iter()
            .map(|t| {
                let (rx, tx) = t.split_once('/').unwrap();
                Ok((tx.trim().parse::<u64>()?, rx.trim().parse::<u64>()?))
            })
            .collect::<Result<Vec<_>>>()
            .context("packet counts must look like received/sent")?;
        Ok(MeasuredLink::from_packet_counts(r, &counts)?)
    } else {
        let q = tokens.iter().map(|t| t.parse::<f64>()).collect::<Result<Vec<_>, _>>().context("not a number")?;
        Ok(MeasuredLink::new(r, q)?)
    }
}

fn describe(decision: &Decision) -> String {
    match decision {
        Decision::Continue => "CONTINUE".to_string(),
        Decision::Place { power, power_index, link_outage } => format!(
            "PLACE relay, power level {} ({} dBm, {power} mW), link outage {link_outage}",
            power_index + 1,
            mw_to_dbm(*power)
        ),
    }
}

/// Runs the prompt loop until end of input or `quit`, saving after every step.
pub fn run_interactive<R: BufRead, W: Write>(
    session: &mut AdvisorSession,
    mut input: R,
    mut out: W,
    session_path: Option<&Path>,
) -> Result<()> {
    writeln!(
        out,
        "advisor ({:?} mode, B = {}, {} power levels). Enter {} outage probabilities or received/sent counts per link; \
         'skip' omits a non-deciding link, 'quit' stops.",
        session.mode(),
        session.b(),
        session.n_powers(),
        session.n_powers()
    )?;
    let mut line = String::new();
    loop {
        let pending = session.pending_distances();
        let k = session.deployment.k + 1;
        writeln!(out, "step {k}: measure links to the nodes {pending:?} steps back")?;
        let mut links = Vec::new();
        for &r in &pending {
            loop {
                write!(out, "r={r}> ")?;
                out.flush()?;
                line.clear();
                if input.read_line(&mut line)? == 0 {
                    writeln!(out)?;
                    return finish(session, session_path, &mut out);
                }
                let text = line.trim();
                if text == "quit" {
                    return finish(session, session_path, &mut out);
                }
                if text == "skip" {
                    if r == pending[0] {
                        writeln!(out, "the link to the previous node decides; it cannot be skipped")?;
                        continue;
                    }
                    break;
                }
                match parse_measurement(r, text, session.n_powers()) {
                    Ok(link) => {
                        if !link.is_non_increasing() {
                            writeln!(out, "warning: outage rises with power on this link; check the measurements")?;
                        }
                        links.push(link);
                        break;
                    }
                    Err(e) => writeln!(out, "error: {e:#}; try again")?,
                }
            }
        }
        let decision = session.step(links)?;
        writeln!(out, "step {k}: {}", describe(&decision))?;
        if session.mode() != Mode::Fixed {
            let xi = session.multipliers();
            writeln!(out, "V(1) = {}; multipliers: xi_out={} xi_relay={}", session.v1_estimate(), xi.xi_out, xi.xi_relay)?;
        }
        if let Some(p) = session_path {
            session.save(p)?;
        }
    }
}

fn finish<W: Write>(session: &AdvisorSession, path: Option<&Path>, out: &mut W) -> Result<()> {
    if let Some(p) = path {
        session.save(p)?;
        writeln!(out, "session saved to {}", p.display())?;
    }
    writeln!(out, "{} steps, {} relays placed", session.deployment.k, session.deployment.n_relays())?;
    Ok(())
}
