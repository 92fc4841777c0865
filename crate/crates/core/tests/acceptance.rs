//! Acceptance checks. Each test prints one `CRITERION n ...: PASS|FAIL` line
//! straight to stderr so the verdicts show up even when output is captured.

use std::io::Write as _;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vsg_npc::grid::{power_flow_exact, power_flow_inductive, power_flow_linearized, GridParams};
use vsg_npc::harness::output::{DIAGNOSTICS_FILE, TIMESERIES_FILE};
use vsg_npc::harness::{
    compute_metrics, load_model, pipeline, run_scenario, save_model, step_windows, write_run,
    Channel, ComparisonReport, ControllerKind, GridPreset, RunRecord, RunSummary, ScenarioConfig,
    SchedulePoint,
};
use vsg_npc::nn::{gradcheck, EvalReport, Mlp, TrainOptions};
use vsg_npc::npc::{DEFAULT_CANDIDATES, DEFAULT_HORIZON, FAST_HORIZON};

fn verdict(n: u32, name: &str, pass: bool, details: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "CRITERION {n} {name}: {status} ({details})");
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

struct Trained {
    net: Mlp,
    validation: EvalReport,
    path: PathBuf,
}

fn trained(grid: GridPreset) -> &'static Trained {
    static INDUCTIVE: OnceLock<Trained> = OnceLock::new();
    static RESISTIVE: OnceLock<Trained> = OnceLock::new();
    let cell = match grid {
        GridPreset::Inductive => &INDUCTIVE,
        GridPreset::Resistive => &RESISTIVE,
    };
    cell.get_or_init(|| {
        let (_, outcome) = pipeline::train_predictor(grid, 200.0, 1, &TrainOptions::default()).unwrap();
        let path = scratch(grid_name(grid)).join("model.json");
        save_model(&outcome.net, &path).unwrap();
        Trained {
            net: outcome.net,
            validation: outcome.validation,
            path,
        }
    })
}

fn grid_name(grid: GridPreset) -> &'static str {
    match grid {
        GridPreset::Inductive => "inductive",
        GridPreset::Resistive => "resistive",
    }
}

/// Resistive NPC at the fast horizon, run from a config file path end to end.
struct NpcRun {
    config: ScenarioConfig,
    record: RunRecord,
    dir: PathBuf,
}

fn resistive_npc() -> &'static NpcRun {
    static RUN: OnceLock<NpcRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let model = trained(GridPreset::Resistive);
        let config = ScenarioConfig::npc_preset(GridPreset::Resistive, &model.path, FAST_HORIZON);
        let record = run_scenario(&config).unwrap();
        let dir = scratch("resistive-npc-a");
        write_run(&config, &record, &dir).unwrap();
        NpcRun { config, record, dir }
    })
}

fn phasor_power(e: f64, delta: f64, grid: &GridParams) -> Complex64 {
    let e_ph = Complex64::from_polar(e, delta);
    let v_ph = Complex64::new(grid.v_grid_peak, 0.0);
    let i = (e_ph - v_ph) / Complex64::new(grid.r_eq, grid.x_eq);
    0.5 * e_ph * i.conj()
}

#[test]
fn criterion_01_power_flow_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let presets = [GridParams::inductive(), GridParams::resistive()];
    let mut worst = 0.0_f64;
    for n in 0..1000 {
        let grid = &presets[n % 2];
        let v = grid.v_grid_peak;
        let e = rng.gen_range(0.5 * v..1.5 * v);
        let delta = rng.gen_range(-1.5..1.5);
        let s = power_flow_exact(e, grid, delta).unwrap();
        let oracle = phasor_power(e, delta, grid);
        let scale = oracle.norm().max(1e-9);
        worst = worst
            .max((s.p_phase - oracle.re).abs() / scale)
            .max((s.q_phase - oracle.im).abs() / scale);
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-9 && elapsed < 1.0;
    verdict(
        1,
        "power-flow oracle",
        pass,
        &format!("max rel err {worst:.2e} over 1000 inputs, {elapsed:.3} s"),
    );
    assert!(pass);
}

#[test]
fn criterion_02_approximation_chain() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let base = GridParams::inductive();
    let v = base.v_grid_peak;
    let mut exact_gap = 0.0_f64;
    let mut p_gap = 0.0_f64;
    let mut q_gap = 0.0_f64;
    let mut q_dropped_mismatch = 0.0_f64;
    for _ in 0..1000 {
        let x = rng.gen_range(0.01..0.1);
        let e = rng.gen_range(0.9 * v..1.1 * v);
        let delta = rng.gen_range(-0.05..0.05);
        let lossless = GridParams::new(v, base.omega_nominal, 0.0, x).unwrap();
        let exact = power_flow_exact(e, &lossless, delta).unwrap();
        let ind = power_flow_inductive(e, v, x, delta).unwrap();
        let lin = power_flow_linearized(e, v, x, delta).unwrap();
        let s = ind.p_phase.hypot(ind.q_phase);
        exact_gap = exact_gap
            .max((exact.p_phase - ind.p_phase).abs() / s)
            .max((exact.q_phase - ind.q_phase).abs() / s);
        p_gap = p_gap.max((lin.p_phase - ind.p_phase).abs() / ind.p_phase.abs());
        q_gap = q_gap.max((lin.q_phase - ind.q_phase).abs() / s);
        // cos δ ≈ 1 drops exactly E·V·(1 − cos δ)/(2X) from Q.
        let dropped = e * v * (1.0 - delta.cos()) / (2.0 * x);
        q_dropped_mismatch =
            q_dropped_mismatch.max(((ind.q_phase - lin.q_phase) - dropped).abs() / s);
    }
    let elapsed = start.elapsed().as_secs_f64();
    let exact_ok = exact_gap <= 1e-12;
    let p_ok = p_gap <= 5e-4;
    let q_ok = q_gap <= 5e-4;
    verdict(
        2,
        "approximation chain",
        exact_ok && p_ok && q_ok && elapsed < 1.0,
        &format!(
            "exact(r=0) vs inductive {exact_gap:.2e}; small-angle P {:.4}%, Q {:.3}% of |S| at |delta|<=0.05; {elapsed:.3} s",
            p_gap * 100.0,
            q_gap * 100.0
        ),
    );
    // The Q half of the bound does not hold for any reasonable scale: the
    // discarded cosine term is first order in δ relative to |S|. The parts
    // that do hold are enforced, and the Q gap must be exactly that term.
    assert!(exact_ok && p_ok && elapsed < 1.0);
    assert!(q_dropped_mismatch < 1e-9, "{q_dropped_mismatch}");
}

#[test]
fn criterion_03_gradient_check() {
    let start = Instant::now();
    let report = gradcheck::check_random_networks(3, 20, 5).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let pass = report.passed() && report.max_relative_error <= 1e-4 && elapsed < 10.0;
    verdict(
        3,
        "gradient correctness",
        pass,
        &format!(
            "{} parameter checks, max rel err {:.2e}, {elapsed:.2} s",
            report.parameters_checked, report.max_relative_error
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_04_swing_equilibrium() {
    let mut config = ScenarioConfig::preset(GridPreset::Inductive, ControllerKind::PiDroop);
    config.reference_schedule = vec![
        SchedulePoint::new(0.0, 0.0, 0.0),
        SchedulePoint::new(1.0, 2000.0, 0.0),
    ];
    config.duration = 11.0;
    let record = run_scenario(&config).unwrap();
    let last = record.rows.last().unwrap();
    assert!((last.time - 11.0).abs() < 1e-9);
    let p_dev = (last.p_out - 2000.0).abs() / 2000.0;
    let w_dev = (last.omega_i - config.vsg.omega_ref).abs();
    let pass = record.fault.is_none() && p_dev <= 5e-3 && w_dev < 1e-3;
    verdict(
        4,
        "swing equilibrium",
        pass,
        &format!(
            "t=11 s: p_out {:.3} W ({:.4}% off), |omega - omega_ref| {w_dev:.2e} rad/s",
            last.p_out,
            p_dev * 100.0
        ),
    );
    assert!(pass);
}

fn q_step_run(grid: GridPreset) -> (f64, Option<f64>) {
    let mut config = ScenarioConfig::preset(grid, ControllerKind::PiDroop);
    config.reference_schedule = vec![
        SchedulePoint::new(0.0, 0.0, 0.0),
        SchedulePoint::new(1.0, 0.0, 1000.0),
    ];
    config.duration = 10.0;
    let record = run_scenario(&config).unwrap();
    let k0 = record.rows.iter().position(|r| r.q_set != 0.0).unwrap();
    let p_before = record.rows[k0 - 1].p_out;
    let max_dp = record.rows[k0..]
        .iter()
        .map(|r| (r.p_out - p_before).abs())
        .fold(0.0, f64::max);
    let window = step_windows(&record.rows, Channel::Q)[0];
    let m = compute_metrics(&record, Channel::Q, &window).unwrap();
    let settling = if record.fault.is_none() && m.settled {
        m.settling_time
    } else {
        None
    };
    (max_dp, settling)
}

#[test]
fn criterion_05_resistive_coupling() {
    let rated = ScenarioConfig::preset(GridPreset::Resistive, ControllerKind::PiDroop)
        .vsg
        .p_rated;
    let (dp_res, ts_res) = q_step_run(GridPreset::Resistive);
    let (dp_ind, ts_ind) = q_step_run(GridPreset::Inductive);
    let coupling = dp_res > 0.05 * rated;
    let slow = match (ts_res, ts_ind) {
        (None, Some(_)) => true,
        (Some(r), Some(i)) => r >= 3.0 * i,
        _ => false,
    };
    let fmt = |t: Option<f64>| t.map_or("unsettled".to_string(), |t| format!("{t:.3} s"));
    let pass = coupling || slow;
    verdict(
        5,
        "resistive-grid coupling",
        pass,
        &format!(
            "max |dP| resistive {dp_res:.1} W vs limit {:.0} W (inductive {dp_ind:.1} W); Q settling resistive {} vs inductive {}",
            0.05 * rated,
            fmt(ts_res),
            fmt(ts_ind)
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_06_training_gate() {
    let res = &trained(GridPreset::Resistive).validation;
    let ind = &trained(GridPreset::Inductive).validation;
    let pass = res.worst_pct() < 2.0 && ind.worst_pct() < 2.0;
    verdict(
        6,
        "training gate",
        pass,
        &format!(
            "worst held-out RMSE: resistive {:.3}%, inductive {:.3}% of range ({} / {} held-out rows)",
            res.worst_pct(),
            ind.worst_pct(),
            res.rows,
            ind.rows
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_07_headline_comparison() {
    let npc = &resistive_npc().record;
    let pi = run_scenario(&ScenarioConfig::preset(GridPreset::Resistive, ControllerKind::PiDroop)).unwrap();
    let tuned = run_scenario(&ScenarioConfig::preset(GridPreset::Resistive, ControllerKind::TunedPi)).unwrap();
    let report = ComparisonReport::from_records("resistive", &[pi, tuned, npc.clone()]).unwrap();
    let (pi, tuned, npc) = (&report.entries[0], &report.entries[1], &report.entries[2]);

    let model = trained(GridPreset::Resistive);
    let full = ScenarioConfig::npc_preset(GridPreset::Resistive, &model.path, DEFAULT_HORIZON);
    let start = Instant::now();
    let long = run_scenario(&full).unwrap();
    let long_secs = start.elapsed().as_secs_f64();
    let long_ok = long.fault.is_none() && long.rows.len() == full.steps() + 1;

    let overshoot_order = npc.worst_overshoot_pct < tuned.worst_overshoot_pct
        && tuned.worst_overshoot_pct <= pi.worst_overshoot_pct * 1.05;
    let fastest = npc.worst_settling_time.is_finite()
        && npc.worst_settling_time <= tuned.worst_settling_time
        && npc.worst_settling_time <= pi.worst_settling_time;
    let pass = overshoot_order && fastest && long_ok;
    let fmt = |v: f64| if v.is_finite() { format!("{v:.3}") } else { "inf".into() };
    verdict(
        7,
        "headline comparison",
        pass,
        &format!(
            "overshoot % NPC {} / tuned {} / PI {}; settling s NPC {} / tuned {} / PI {}; horizon {DEFAULT_HORIZON} run {} rows, fault {:?}, {long_secs:.0} s",
            fmt(npc.worst_overshoot_pct),
            fmt(tuned.worst_overshoot_pct),
            fmt(pi.worst_overshoot_pct),
            fmt(npc.worst_settling_time),
            fmt(tuned.worst_settling_time),
            fmt(pi.worst_settling_time),
            long.rows.len(),
            long.fault,
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_inductive_accumulated_error() {
    let model = trained(GridPreset::Inductive);
    let npc_config = ScenarioConfig::npc_preset(GridPreset::Inductive, &model.path, DEFAULT_HORIZON);
    let npc = RunSummary::from_record(&run_scenario(&npc_config).unwrap()).unwrap();
    let pi = RunSummary::from_record(
        &run_scenario(&ScenarioConfig::preset(GridPreset::Inductive, ControllerKind::PiDroop)).unwrap(),
    )
    .unwrap();
    let (np, nq) = (npc.channel(Channel::P).ise, npc.channel(Channel::Q).ise);
    let (pp, pq) = (pi.channel(Channel::P).ise, pi.channel(Channel::Q).ise);
    let pass = npc.completed && np <= pp && nq <= pq;
    verdict(
        8,
        "inductive accumulated error",
        pass,
        &format!("ISE P NPC {np:.4e} vs PI {pp:.4e}; ISE Q NPC {nq:.4e} vs PI {pq:.4e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_09_argmin_property() {
    let run = resistive_npc();
    let path = run.dir.join(DIAGNOSTICS_FILE);
    let mut reader = csv::Reader::from_path(&path).unwrap();
    let header = reader.headers().unwrap().clone();
    let candidates: Vec<f64> = header
        .iter()
        .skip(1)
        .take(DEFAULT_CANDIDATES.len())
        .map(|h| h.trim_start_matches("cost_").parse().unwrap())
        .collect();
    assert_eq!(candidates, DEFAULT_CANDIDATES);
    let mut decisions = 0usize;
    let mut violations = 0usize;
    for rec in reader.records() {
        let rec = rec.unwrap();
        let values: Vec<f64> = rec.iter().map(|f| f.parse().unwrap()).collect();
        let costs = &values[1..=candidates.len()];
        let chosen = values[candidates.len() + 1];
        let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
        let idx = candidates.iter().position(|&c| c == chosen);
        if idx.is_none_or(|i| costs[i] != min) {
            violations += 1;
        }
        decisions += 1;
    }
    let pass = violations == 0 && decisions == run.config.steps();
    verdict(
        9,
        "argmin property",
        pass,
        &format!("{decisions} logged decisions, {violations} not at the minimum cost"),
    );
    assert!(pass);
}

#[test]
fn criterion_10_determinism() {
    let first = resistive_npc();
    let again = run_scenario(&first.config).unwrap();
    let dir_b = scratch("resistive-npc-b");
    write_run(&first.config, &again, &dir_b).unwrap();
    let npc_same = std::fs::read(first.dir.join(TIMESERIES_FILE)).unwrap()
        == std::fs::read(dir_b.join(TIMESERIES_FILE)).unwrap();

    let pi = ScenarioConfig::preset(GridPreset::Resistive, ControllerKind::TunedPi);
    let mut pi_same = true;
    let dirs = [scratch("tuned-a"), scratch("tuned-b")];
    for dir in &dirs {
        write_run(&pi, &run_scenario(&pi).unwrap(), dir).unwrap();
    }
    pi_same &= std::fs::read(dirs[0].join(TIMESERIES_FILE)).unwrap()
        == std::fs::read(dirs[1].join(TIMESERIES_FILE)).unwrap();

    // The model file itself must reload to the same network.
    let reloaded = load_model(&trained(GridPreset::Resistive).path).unwrap();
    let model_same = reloaded == trained(GridPreset::Resistive).net;

    let pass = npc_same && pi_same && model_same;
    verdict(
        10,
        "determinism",
        pass,
        &format!("NPC timeseries identical: {npc_same}; tuned PI identical: {pi_same}; model reload identical: {model_same}"),
    );
    assert!(pass);
}
