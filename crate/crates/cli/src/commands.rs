//! Subcommand bodies, kept out of `main` so tests can call them directly.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use asyougo::acoe::{choose_b, renewal_metrics, solve_acoe, thresholds, workable_probability};
use asyougo::experiment::{csv_header, csv_rows, Controller, ExperimentCase};
use asyougo::simulator::{McCurves, RunOptions};
use serde_json::{json, Value};

use crate::config::Config;

/// Optimal values, thresholds and metrics for the configured multipliers.
pub fn solve(cfg: &Config) -> Result<Value> {
    let env = cfg.true_env()?;
    let b = cfg.horizon()?;
    let v = solve_acoe(&env, b, &cfg.weights)?;
    let m = renewal_metrics(&env, &cfg.weights, &v);
    Ok(json!({
        "b": b,
        "weights": cfg.weights,
        "lambda_star": v.lambda(),
        "values": v.as_slice(),
        "thresholds": thresholds(&v).as_slice(),
        "metrics": m,
    }))
}

/// Long-run metrics, in the true environment, of the policy solved under the
/// prior (or the truth when no prior is configured).
pub fn metrics(cfg: &Config) -> Result<Value> {
    let truth = cfg.true_env()?;
    let b = cfg.horizon()?;
    let v = solve_acoe(&cfg.prior_env()?, b, &cfg.weights)?;
    let m = renewal_metrics(&truth, &cfg.weights, &v);
    Ok(json!({
        "b": b,
        "solved_under_prior": cfg.prior.is_some(),
        "cost_per_step": m.cost_per_step(&cfg.weights),
        "spacing_law": m.spacing_law(),
        "metrics": m,
    }))
}

pub fn choose_horizon(cfg: &Config) -> Result<Value> {
    let env = cfg.true_env()?;
    let b = choose_b(&env, cfg.workable_outage, cfg.min_prob)?;
    let top = env.powers.highest();
    Ok(json!({
        "b": b,
        "workable_outage": cfg.workable_outage,
        "min_prob": cfg.min_prob,
        "workable_probability_at_b": workable_probability(&env, b, top, cfg.workable_outage),
        "workable_probability_at_b_plus_1": workable_probability(&env, b + 1, top, cfg.workable_outage),
    }))
}

pub fn write_csv<W: Write>(curves: &McCurves, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header())?;
    for row in csv_rows(curves) {
        let mut rec = vec![format!("{}", row[0] as usize)];
        rec.extend(row[1..].iter().map(|x| format!("{x}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes to `out`, or to stdout when no path is given.
pub fn emit_csv(curves: &McCurves, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => {
            let f = std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
            write_csv(curves, std::io::BufWriter::new(f))
        }
        None => write_csv(curves, std::io::stdout().lock()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Fixed,
    Learn,
    Adapt,
}

pub fn case_for(cfg: &Config, kind: Kind, n_paths: usize, horizon: usize) -> Result<ExperimentCase> {
    let controller = match kind {
        Kind::Fixed => Controller::Fixed { weights: cfg.weights },
        Kind::Learn => cfg.learning_controller(),
        Kind::Adapt => cfg.adaptive_controller(),
    };
    cfg.case("custom", controller, n_paths, horizon)
}

pub fn run_experiment(case: &ExperimentCase, seed: u64, out: Option<&Path>) -> Result<McCurves> {
    let curves = case.run(seed, &RunOptions::default())?;
    emit_csv(&curves, out)?;
    Ok(curves)
}

/// Runs the named cases, one CSV per case in `dir`; returns the final rows.
pub fn reproduce(names: &[&str], n_paths: usize, horizon: usize, seed: u64, dir: &Path) -> Result<Value> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut summary = serde_json::Map::new();
    for &name in names {
        let case = ExperimentCase::named(name)?.with_size(n_paths, horizon);
        let path = dir.join(format!("{name}.csv"));
        let curves = run_experiment(&case, seed, Some(&path))?;
        let last = curves.mean.last().expect("horizon is positive");
        summary.insert(name.to_string(), json!({ "file": path, "final": last }));
    }
    Ok(Value::Object(summary))
}
