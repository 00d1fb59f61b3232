use std::fmt::Write as _;
use std::process::Command;

use asyougo::acoe::solve_acoe;
use asyougo::adaptive::{Bounds, Constraints};
use asyougo::learning::{OayglState, StepSchedule};
use asyougo::policy::Decision;
use asyougo::simulator::{path_rng, run_path, RunOptions};
use asyougo_cli::advisor::{run_interactive, AdvisorSession, Learner, Mode};
use asyougo_cli::config::Config;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_asyougo"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json_of(cmd: &mut Command) -> serde_json::Value {
    serde_json::from_str(&run_ok(cmd)).unwrap()
}

#[test]
fn solve_and_choose_b_on_defaults() {
    let v = json_of(bin().arg("solve"));
    let lambda = v["lambda_star"].as_f64().unwrap();
    assert!((lambda - 1.851).abs() < 0.01, "{lambda}");
    assert_eq!(v["values"].as_array().unwrap().len(), 5);
    assert_eq!(json_of(bin().arg("choose-b"))["b"], 5);
}

#[test]
fn metrics_reads_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    // No shadowing and near-free outage: relays are the only cost, so every placement happens at B.
    std::fs::write(&path, r#"{"sigma_db": 0, "b": 3, "weights": {"xi_out": 1e-6, "xi_relay": 1}}"#).unwrap();
    let v = json_of(bin().arg("--config").arg(&path).arg("metrics"));
    let law: Vec<f64> = v["spacing_law"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(law.len(), 3);
    assert!(law[0].abs() < 1e-9 && law[1].abs() < 1e-9 && (law[2] - 1.0).abs() < 1e-9, "{law:?}");

    std::fs::write(&path, r#"{"sigma_db": 7.7, "etaa": 4}"#).unwrap();
    let out = bin().arg("--config").arg(&path).arg("solve").output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("etaa"));
}

#[test]
fn simulate_csv_shape_and_determinism() {
    let args = ["simulate", "--paths", "1", "--steps", "10", "--seed", "7"];
    let a = run_ok(bin().args(args));
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines.len(), 11);
    assert!(lines[0].starts_with("k,power_per_step,outage_per_step,relays_per_step,mean_placement_distance"));
    assert_eq!(lines[0].split(',').count(), 15);
    assert!(lines[10].starts_with("10,"));
    assert_eq!(a, run_ok(bin().args(args)));
    assert_ne!(a, run_ok(bin().args(["simulate", "--paths", "1", "--steps", "10", "--seed", "8"])));
}

#[test]
fn reproduce_writes_one_file_per_case() {
    let dir = tempfile::tempdir().unwrap();
    let v = json_of(bin().args(["reproduce-fig3", "--paths", "2", "--steps", "20", "--out"]).arg(dir.path()));
    let cases = v.as_object().unwrap();
    assert_eq!(cases.len(), 5);
    for name in cases.keys() {
        let text = std::fs::read_to_string(dir.path().join(format!("{name}.csv"))).unwrap();
        assert_eq!(text.lines().count(), 21, "{name}");
    }
}

/// Feeding the advisor the outage curves a simulated walk saw must give
/// the same decisions and the same learned values as the simulator.
#[test]
fn advisor_replays_a_simulated_walk() {
    let cfg = Config {
        prior: Some(asyougo_cli::config::Prior { eta: 5.0, sigma_db: 8.0 }),
        learning: StepSchedule::new(1.0, 0.55).unwrap(),
        ..Config::default()
    };
    let env = cfg.true_env().unwrap();
    let horizon = 300;

    let v0 = solve_acoe(&cfg.prior_env().unwrap(), 5, &cfg.weights).unwrap();
    let mut sim = OayglState::new(v0, cfg.weights, cfg.learning, cfg.powers().unwrap());
    let opts = RunOptions { record_steps: true, ..RunOptions::default() };
    let trace = run_path(&mut sim, &env, horizon, &mut path_rng(3, 0), &opts);

    let mut input = String::new();
    for s in &trace.steps {
        for (&r, &w) in s.measured.iter().zip(&s.shadowing) {
            let q = env.outage_curve(r, w);
            let line: Vec<String> = q.iter().map(|x| x.to_string()).collect();
            writeln!(input, "{}", line.join(" ")).unwrap();
        }
    }
    let mut session = AdvisorSession::new(cfg, Mode::Learn).unwrap();
    let mut out = Vec::new();
    run_interactive(&mut session, input.as_bytes(), &mut out, None).unwrap();

    assert_eq!(session.log.len(), horizon);
    for (entry, s) in session.log.iter().zip(&trace.steps) {
        assert_eq!(entry.decision, s.decision, "step {}", s.k);
    }
    match &session.learner {
        Learner::Learn(state) => assert_eq!(state, &sim),
        other => panic!("wrong learner {other:?}"),
    }
    assert!(trace.relays.len() > 10);
}

#[test]
fn learn_session_persists_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("walk.json");
    let curve = "0.9 0.5 0.2 0.05 0.01";
    let feed = |lines: &str| {
        let mut s = if path.exists() {
            AdvisorSession::load(&path).unwrap()
        } else {
            AdvisorSession::new(Config::default(), Mode::Learn).unwrap()
        };
        run_interactive(&mut s, lines.as_bytes(), Vec::new(), Some(&path)).unwrap();
        s
    };
    // Step 1 (one link), then quit.
    let first = feed(&format!("{curve}\nquit\n"));
    let loaded = AdvisorSession::load(&path).unwrap();
    assert_eq!(loaded, first);
    assert_eq!(loaded.deployment.k, 1);

    // A session carried across a restart matches one run without a break.
    let resumed = feed(&format!("{curve}\n{curve}\n"));
    let mut straight = AdvisorSession::new(Config::default(), Mode::Learn).unwrap();
    run_interactive(&mut straight, format!("{curve}\n{curve}\n{curve}\n").as_bytes(), Vec::new(), None).unwrap();
    assert_eq!(resumed.learner, straight.learner);
    assert_eq!(resumed.deployment, straight.deployment);
}

#[test]
fn advisor_binary_resumes_from_session_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    let advise = |stdin: &str| {
        use std::io::Write;
        let mut child = bin()
            .args(["advise", "--mode", "fixed", "--session"])
            .arg(&path)
            .stdin(std::process::Stdio::piped())
            .stdout(std::process::Stdio::piped())
            .spawn()
            .unwrap();
        child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
        let out = child.wait_with_output().unwrap();
        assert!(out.status.success());
        String::from_utf8(out.stdout).unwrap()
    };
    let a = advise("1 1 1 1 1\n");
    assert!(a.contains("step 1: CONTINUE"), "{a}");
    let b = advise("0.5 0.1 0.01 0 0\n");
    assert!(b.contains("step 2: measure"), "{b}");
    assert!(b.contains("step 2: PLACE"), "{b}");
    let s = AdvisorSession::load(&path).unwrap();
    assert_eq!(s.deployment.placed_positions, vec![0, 2]);
}

#[test]
fn advisor_rejects_bad_input_and_reprompts() {
    let mut s = AdvisorSession::new(Config::default(), Mode::Fixed).unwrap();
    let mut out = Vec::new();
    run_interactive(&mut s, "skip\n0.1 0.2\nabc\n0.1 0.2 0.05 0.01 0.01\n".as_bytes(), &mut out, None).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.contains("cannot be skipped"));
    assert_eq!(text.matches("error:").count(), 2, "{text}");
    assert!(text.contains("warning: outage rises"), "{text}");
    assert_eq!(s.log.len(), 1);
}

/// A placement whose outage and spacing sit exactly on both targets: the
/// multiplier innovations vanish and the printed multipliers do not move.
#[test]
fn adapt_with_zero_innovation_keeps_multipliers() {
    let mut cfg = Config { b: Some(2), ..Config::default() };
    cfg.adaptive.constraints = Constraints::new(0.01, 0.5).unwrap();
    cfg.adaptive.bounds = Some(Bounds::new(1e4, 1e3).unwrap());
    let mut s = AdvisorSession::new(cfg, Mode::Adapt).unwrap();
    let xi0 = s.multipliers();
    // Step 1: only the sink, 1 back; step 2: sink 2 back forces a placement.
    let mut out = Vec::new();
    run_interactive(&mut s, "1 1 1 1 1\n0.02 0.02 0.02 0.02 0.02\n".as_bytes(), &mut out, None).unwrap();
    assert!(matches!(s.log[1].decision, Decision::Place { .. }));
    let xi = s.multipliers();
    // One relay in two steps meets N̄ = 0.5 exactly; outage 0.02 per 2 steps meets q̄ = 0.01.
    assert_eq!(xi, xi0);
    let text = String::from_utf8(out).unwrap();
    assert!(text.contains(&format!("xi_out={} xi_relay={}", xi0.xi_out, xi0.xi_relay)), "{text}");
}
