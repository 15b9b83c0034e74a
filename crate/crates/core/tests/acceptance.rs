//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails. Pass criterion numbers as arguments to
//! run a subset, e.g. `cargo test --test acceptance -- 3 4`.

mod common;

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::time::Instant;

use mechcool::dynamics::{sample_initial_state, Control, ModeParams, ModeSet, ResonatorState};
use mechcool::harness::{
    load_checkpoint, run_evaluation, run_thermalize, run_training, EvaluationSummary, ExperimentPreset, PresetName,
};
use mechcool::policy::Gradient;
use mechcool::reinforce::EpochRecord;
use mechcool::rng::{NoiseConfig, NoiseSource, StreamPurpose};
use mechcool::stats;

use common::{random_params, reference_log_probs, train_bandit, Bandit, BaselineKind};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// 1. Free thermalization from rest reaches the bath occupancy.
fn thermalization() -> Outcome {
    let mut preset = ExperimentPreset::new(PresetName::Thermalize);
    preset.thermalize.series_stride = 20_000;
    let gamma = preset.modes[0].gamma;
    let expected_steps = (3.0 / gamma / preset.dt).round() as usize;
    let dir = tempfile::tempdir().unwrap();
    let s = run_thermalize(&preset, dir.path()).unwrap();
    let ks = s.ks_statistic.unwrap();
    let crit = s.ks_critical_1pct.unwrap();
    let pass = s.n_traj >= 1000
        && s.steps >= expected_steps
        && (s.final_mean_energy - 100.0).abs() <= 10.0
        && ks < crit;
    outcome(
        pass,
        format!(
            "{} trajectories to t={}: mean energy {:.2} (target 100 +/- 10), KS {:.4} < {:.4}",
            s.n_traj, s.t_final, s.final_mean_energy, ks, crit
        ),
    )
}

/// 2. Thermal initial states are exponentially distributed.
fn boltzmann_sampler() -> Outcome {
    let modes = ModeSet::single(ModeParams {
        omega: 1.0,
        gamma: 4e-5,
        nbar: 100.0,
        g: 0.0,
    })
    .unwrap();
    let mut rng = NoiseConfig::for_trajectory(2, StreamPurpose::Test, 2, 0).rng();
    let energies: Vec<f64> = (0..100_000)
        .map(|_| sample_initial_state(&modes, &mut rng).total_energy())
        .collect();
    let mean = stats::mean(&energies);
    let ks = stats::ks_statistic_exponential(&energies, 100.0);
    let crit = stats::ks_critical_1pct(energies.len());
    outcome(
        (98.0..=102.0).contains(&mean) && ks < crit,
        format!("1e5 draws: mean {mean:.3} in [98, 102], KS {ks:.5} < {crit:.5}"),
    )
}

fn free_oscillator_position(dt: f64, horizon: f64) -> f64 {
    let modes = ModeSet::single(ModeParams {
        omega: 1.0,
        gamma: 0.0,
        nbar: 0.0,
        g: 0.0,
    })
    .unwrap();
    let control = Control::zero(1);
    let mut s = ResonatorState::new(vec![1.0], vec![0.0], 0.0).unwrap();
    let n = (horizon / dt).floor() as usize;
    for _ in 0..n {
        s.rk4_advance(&modes, &control, dt).unwrap();
    }
    let rest = horizon - n as f64 * dt;
    if rest > 0.0 {
        s.rk4_advance(&modes, &control, rest).unwrap();
    }
    s.q()[0]
}

/// 3. RK4 is fourth order and conserves energy without bath or drive.
fn integrator() -> Outcome {
    let horizon = 20.0 * PI;
    let exact = horizon.cos();
    let e1 = (free_oscillator_position(0.05, horizon) - exact).abs();
    let e2 = (free_oscillator_position(0.025, horizon) - exact).abs();
    let ratio = e1 / e2;

    let modes = ModeSet::single(ModeParams {
        omega: 1.0,
        gamma: 0.0,
        nbar: 100.0,
        g: 0.0,
    })
    .unwrap();
    let mut s = ResonatorState::new(vec![6.0], vec![-11.0], 0.0).unwrap();
    let e0 = s.total_energy();
    for _ in 0..1000 {
        s.rk4_advance(&modes, &Control::zero(1), 0.05).unwrap();
    }
    let drift = ((s.total_energy() - e0) / e0).abs();
    outcome(
        (8.0..=32.0).contains(&ratio) && drift < 1e-6,
        format!("error {e1:.3e} -> {e2:.3e}, ratio {ratio:.2} in [8, 32]; energy drift {drift:.2e} < 1e-6"),
    )
}

/// 4. Analytic log-probability gradients agree with finite differences.
fn gradient() -> Outcome {
    let layers = [2, 4, 4, 3];
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut trials = 0;
    let mut skipped = 0;
    let mut idx = 0;
    while trials < 100 {
        let mut rng = NoiseConfig::for_trajectory(44, StreamPurpose::Test, 4, idx).rng();
        idx += 1;
        let params = random_params(&layers, &mut rng);
        let obs = [3.0 * rng.standard_normal(), 3.0 * rng.standard_normal()];
        let action = (rng.uniform() * 3.0) as usize;
        if reference_log_probs(&layers, params.theta(), &obs).1 < 1e-3 {
            skipped += 1;
            continue;
        }
        trials += 1;
        let grad = params.logprob_grad(&obs, action).unwrap();
        let mut theta = params.theta().to_vec();
        for i in 0..theta.len() {
            let orig = theta[i];
            theta[i] = orig + h;
            let up = reference_log_probs(&layers, &theta, &obs).0[action];
            theta[i] = orig - h;
            let down = reference_log_probs(&layers, &theta, &obs).0[action];
            theta[i] = orig;
            let fd = (up - down) / (2.0 * h);
            let a = grad.0[i];
            worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(1e-5));
        }
    }

    let mut score: f64 = 0.0;
    for k in 0..100 {
        let mut rng = NoiseConfig::for_trajectory(45, StreamPurpose::Test, 4, k).rng();
        let params = random_params(&layers, &mut rng);
        let obs = [3.0 * rng.standard_normal(), 3.0 * rng.standard_normal()];
        let probs = params.forward(&obs).unwrap().probs;
        let mut total = Gradient::zeros(params.n_params());
        for (a, p) in probs.iter().enumerate() {
            total.add_scaled(&params.logprob_grad(&obs, a).unwrap(), *p);
        }
        score = score.max(total.max_abs());
    }
    outcome(
        worst < 1e-4 && score < 1e-8,
        format!(
            "{trials} triples ({skipped} skipped at ReLU kinks): max rel err {worst:.2e} < 1e-4; score identity {score:.1e} < 1e-8"
        ),
    )
}

/// 5. The estimator finds the better arm of a bandit with either baseline.
fn bandit() -> Outcome {
    let bandit = Bandit::standard();
    let zero = train_bandit(&bandit, BaselineKind::Zero, 200, 16, 0.05, 5);
    let running = train_bandit(&bandit, BaselineKind::RunningMean, 200, 16, 0.05, 5);
    outcome(
        zero > 0.95 && running > 0.95,
        format!("best-arm probability after 200 epochs: b=0 {zero:.4}, running mean {running:.4} (> 0.95)"),
    )
}

struct Cooling {
    curve: Vec<EpochRecord>,
    eval: EvaluationSummary,
    seconds: f64,
}

const DESK_EPOCHS: u64 = 100;
const EVAL_TRAJ: usize = 500;

fn train_and_evaluate(name: PresetName, dir: &Path) -> Cooling {
    let started = Instant::now();
    let mut preset = ExperimentPreset::new(name);
    preset.training.epochs = DESK_EPOCHS;
    preset.evaluation.n_traj = EVAL_TRAJ;
    preset.evaluation.steps = 20_000;
    preset.evaluation.series_stride = 100;
    let t = run_training(&preset, &dir.join("train"), None, |_| {}).unwrap();
    let ck = load_checkpoint(&t.final_checkpoint).unwrap();
    let eval = run_evaluation(&ck.params, &preset, &dir.join("evaluate")).unwrap();
    Cooling {
        curve: t.curve,
        eval,
        seconds: started.elapsed().as_secs_f64(),
    }
}

/// 6. Single-mode parametric cooling without runaway trajectories.
fn single_mode(c: &Cooling) -> Outcome {
    let e = &c.eval;
    outcome(
        e.final_mean_energy < 10.0 && e.n_runaway == 0 && e.n_traj >= 500 && e.steps >= 20_000,
        format!(
            "{DESK_EPOCHS} epochs, {} argmax trajectories x {} steps: mean energy {:.2} -> {:.4} (< 10), runaway {} (max initial {:.1}); {:.0}s",
            e.n_traj, e.steps, e.initial_mean_energy, e.final_mean_energy, e.n_runaway, e.initial_max_energy, c.seconds
        ),
    )
}

/// 7. Four modes cooled together through one collective force.
fn four_modes(c: &Cooling) -> Outcome {
    let e = &c.eval;
    let reduction = e.initial_mean_energy / e.final_mean_energy;
    let every_mode = e
        .initial_mode_means
        .iter()
        .zip(&e.final_mode_means)
        .all(|(a, b)| b < a);
    let modes: Vec<String> = e
        .initial_mode_means
        .iter()
        .zip(&e.final_mode_means)
        .map(|(a, b)| format!("{a:.1}->{b:.3}"))
        .collect();
    outcome(
        reduction >= 5.0 && every_mode && e.n_traj >= 500,
        format!(
            "{} trajectories: total {:.2} -> {:.4} ({reduction:.1}x >= 5x); modes [{}]; {:.0}s",
            e.n_traj,
            e.initial_mean_energy,
            e.final_mean_energy,
            modes.join(", "),
            c.seconds
        ),
    )
}

fn decile_means(curve: &[EpochRecord]) -> (f64, f64) {
    let k = (curve.len() / 10).max(1);
    let avg = |rs: &[EpochRecord]| rs.iter().map(|r| r.mean_total_reward).sum::<f64>() / rs.len() as f64;
    (avg(&curve[..k]), avg(&curve[curve.len() - k..]))
}

/// 8. Mean reward rises over training in both cooling presets.
fn learning_curves(single: &Cooling, four: &Cooling) -> Outcome {
    let (s0, s1) = decile_means(&single.curve);
    let (f0, f1) = decile_means(&four.curve);
    outcome(
        s1 > s0 && f1 > f0,
        format!("first -> last decile: single_quadratic {s0:.3e} -> {s1:.3e}, four_linear {f0:.3e} -> {f1:.3e}"),
    )
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut entries: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort();
    for path in entries {
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if path.is_dir() {
            out.extend(files(&path).into_iter().map(|(k, v)| (format!("{name}/{k}"), v)));
        } else {
            out.push((name, fs::read(&path).unwrap()));
        }
    }
    out
}

fn determinism_run(name: PresetName, dir: &Path) {
    let mut p = ExperimentPreset::new(name);
    p.training.epochs = 8;
    p.training.batch_size = 6;
    p.training.steps = 400;
    p.training.checkpoint_every = 4;
    p.evaluation.n_traj = 20;
    p.evaluation.steps = 1000;
    p.evaluation.series_stride = 10;
    p.thermalize.n_traj = 20;
    p.thermalize.steps = 2000;
    p.thermalize.series_stride = 100;
    run_thermalize(&p, &dir.join("thermalize")).unwrap();
    let t = run_training(&p, &dir.join("train"), None, |_| {}).unwrap();
    let ck = load_checkpoint(&t.final_checkpoint).unwrap();
    run_evaluation(&ck.params, &p, &dir.join("evaluate")).unwrap();

    let mid = load_checkpoint(&dir.join("train/checkpoint_epoch4.bin")).unwrap();
    run_training(&p, &dir.join("resumed"), Some(mid), |_| {}).unwrap();
}

/// 9. Same seed, same bytes; a resumed run matches the uninterrupted one.
fn determinism() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for name in [PresetName::SingleQuadratic, PresetName::FourLinear] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        determinism_run(name, a.path());
        determinism_run(name, b.path());
        let (fa, fb) = (files(a.path()), files(b.path()));
        let identical = fa == fb;
        let resumed = ["checkpoint.bin", "checkpoint_epoch8.bin", "learning_curve.csv"].iter().all(|f| {
            fs::read(a.path().join("train").join(f)).unwrap() == fs::read(a.path().join("resumed").join(f)).unwrap()
        });
        pass &= identical && resumed && !fa.is_empty();
        notes.push(format!(
            "{name}: {} files {}, resume {}",
            fa.len(),
            if identical { "identical" } else { "DIFFER" },
            if resumed { "matches" } else { "DIFFERS" }
        ));
    }
    outcome(pass, notes.join("; "))
}

fn report(n: usize, title: &str, o: &Outcome, failures: &mut Vec<usize>) {
    let tag = if o.pass { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {n}: {title} -- {}", o.detail);
    if !o.pass {
        failures.push(n);
    }
}

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let want = |n: usize| selected.is_empty() || selected.contains(&n);
    let mut failures = Vec::new();
    let started = Instant::now();
    println!("acceptance suite");

    if want(1) {
        report(1, "thermalization", &thermalization(), &mut failures);
    }
    if want(2) {
        report(2, "thermal sampler", &boltzmann_sampler(), &mut failures);
    }
    if want(3) {
        report(3, "integrator order", &integrator(), &mut failures);
    }
    if want(4) {
        report(4, "gradient", &gradient(), &mut failures);
    }
    if want(5) {
        report(5, "bandit", &bandit(), &mut failures);
    }
    if want(6) || want(7) || want(8) {
        let dir = tempfile::tempdir().unwrap();
        let single = (want(6) || want(8)).then(|| train_and_evaluate(PresetName::SingleQuadratic, &dir.path().join("s")));
        if let (true, Some(s)) = (want(6), &single) {
            report(6, "single-mode cooling", &single_mode(s), &mut failures);
        }
        let four = (want(7) || want(8)).then(|| train_and_evaluate(PresetName::FourLinear, &dir.path().join("f")));
        if let (true, Some(f)) = (want(7), &four) {
            report(7, "four-mode cooling", &four_modes(f), &mut failures);
        }
        if let (true, Some(s), Some(f)) = (want(8), &single, &four) {
            report(8, "learning curve", &learning_curves(s, f), &mut failures);
        }
    }
    if want(9) {
        report(9, "determinism", &determinism(), &mut failures);
    }

    println!("acceptance finished in {:.0}s", started.elapsed().as_secs_f64());
    if !failures.is_empty() {
        println!("failed criteria: {failures:?}");
        std::process::exit(1);
    }
}
