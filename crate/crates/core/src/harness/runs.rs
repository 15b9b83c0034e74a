//! Drivers for the three run kinds. Each writes its CSV files and a
//! `manifest.toml` into the output directory and returns a summary.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::dynamics::{sample_initial_state, Control, ResonatorState};
use crate::error::{Error, Result};
use crate::policy::PolicyParams;
use crate::reinforce::{run_episode_from, EpochRecord, Trainer};
use crate::rng::{NoiseConfig, StreamPurpose};
use crate::stats;

use super::checkpoint::{save_checkpoint, Checkpoint};
use super::output::{ensure_dir, write_toml, CsvWriter, Provenance};
use super::preset::ExperimentPreset;

/// Running sums of total and per-mode energy on a strided time grid.
struct EnergySeries {
    stride: usize,
    n_modes: usize,
    total: Vec<f64>,
    per_mode: Vec<f64>,
}

impl EnergySeries {
    fn new(steps: usize, stride: usize, n_modes: usize) -> Self {
        let n = steps / stride + 1;
        EnergySeries {
            stride,
            n_modes,
            total: vec![0.0; n],
            per_mode: vec![0.0; n * n_modes],
        }
    }

    /// Record `state` after `step` steps (0 is the initial state).
    fn record(&mut self, step: usize, state: &ResonatorState) {
        if !step.is_multiple_of(self.stride) {
            return;
        }
        let k = step / self.stride;
        for j in 0..self.n_modes {
            let e = state.mode_energy(j);
            self.per_mode[k * self.n_modes + j] += e;
            self.total[k] += e;
        }
    }

    fn write(&self, path: &Path, prov: Provenance, dt: f64, n_traj: usize) -> Result<()> {
        let mut columns = vec!["t".to_string(), "mean_total_energy".to_string()];
        if self.n_modes > 1 {
            columns.extend((0..self.n_modes).map(|j| format!("mean_energy_mode{j}")));
        }
        let columns: Vec<&str> = columns.iter().map(String::as_str).collect();
        let mut w = CsvWriter::create(path, prov, &columns)?;
        let n = n_traj as f64;
        let mut row: Vec<f64> = Vec::with_capacity(columns.len());
        for (k, total) in self.total.iter().enumerate() {
            row.clear();
            row.push((k * self.stride) as f64 * dt);
            row.push(total / n);
            if self.n_modes > 1 {
                row.extend(self.per_mode[k * self.n_modes..(k + 1) * self.n_modes].iter().map(|e| e / n));
            }
            let cells: Vec<&dyn std::fmt::Display> = row.iter().map(|x| x as &dyn std::fmt::Display).collect();
            w.row(&cells)?;
        }
        w.finish()
    }
}

fn write_phase_space(path: &Path, prov: Provenance, states: &[ResonatorState]) -> Result<()> {
    let mut w = CsvWriter::create(path, prov, &["traj_id", "mode", "q", "p"])?;
    for (i, s) in states.iter().enumerate() {
        for j in 0..s.n_modes() {
            w.row(&[&i, &j, &s.q()[j], &s.p()[j]])?;
        }
    }
    w.finish()
}

fn write_energy_hist(path: &Path, prov: Provenance, states: &[ResonatorState]) -> Result<()> {
    let mut w = CsvWriter::create(path, prov, &["traj_id", "total_energy"])?;
    for (i, s) in states.iter().enumerate() {
        w.row(&[&i, &s.total_energy()])?;
    }
    w.finish()
}

fn mode_means(states: &[ResonatorState]) -> Vec<f64> {
    let n_modes = states.first().map_or(0, ResonatorState::n_modes);
    (0..n_modes)
        .map(|j| states.iter().map(|s| s.mode_energy(j)).sum::<f64>() / states.len() as f64)
        .collect()
}

fn total_mean(states: &[ResonatorState]) -> f64 {
    states.iter().map(ResonatorState::total_energy).sum::<f64>() / states.len() as f64
}

#[derive(Serialize)]
struct Manifest<'a, S: Serialize> {
    command: &'a str,
    preset: &'a ExperimentPreset,
    summary: &'a S,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThermalizeSummary {
    pub n_traj: usize,
    pub steps: usize,
    pub t_final: f64,
    pub final_mean_energy: f64,
    pub final_mode_means: Vec<f64>,
    /// KS distance of the final single-mode energies from an exponential
    /// with mean n̄; absent for multi-mode presets.
    pub ks_statistic: Option<f64>,
    pub ks_critical_1pct: Option<f64>,
}

/// Relax trajectories started at rest with the control off.
pub fn run_thermalize(preset: &ExperimentPreset, out: &Path) -> Result<ThermalizeSummary> {
    preset.validate()?;
    ensure_dir(out)?;
    let prov = Provenance {
        preset: preset.name,
        seed: preset.seed,
    };
    let tp = &preset.thermalize;
    if tp.n_traj == 0 {
        return Err(Error::invalid("thermalize needs at least one trajectory"));
    }
    let n_modes = preset.modes.len();
    let control = Control::zero(n_modes);
    let mut series = EnergySeries::new(tp.steps, tp.series_stride, n_modes);
    let initial: Vec<ResonatorState> = (0..tp.n_traj).map(|_| ResonatorState::ground(n_modes)).collect::<Result<_>>()?;
    let mut finals = Vec::with_capacity(tp.n_traj);
    for (i, start) in initial.iter().enumerate() {
        let mut rng = NoiseConfig::for_trajectory(preset.seed, StreamPurpose::Thermalize, 0, i as u64).rng();
        let mut state = start.clone();
        series.record(0, &state);
        for step in 1..=tp.steps {
            state
                .evolve(&preset.modes, &control, preset.dt, &mut rng)
                .map_err(|e| Error::Diverged {
                    step,
                    reason: e.to_string(),
                })?;
            series.record(step, &state);
        }
        finals.push(state);
    }

    series.write(&out.join("energy_vs_time.csv"), prov, preset.dt, tp.n_traj)?;
    write_phase_space(&out.join("phase_space_initial.csv"), prov, &initial)?;
    write_phase_space(&out.join("phase_space_final.csv"), prov, &finals)?;
    write_energy_hist(&out.join("energy_hist_initial.csv"), prov, &initial)?;
    write_energy_hist(&out.join("energy_hist_final.csv"), prov, &finals)?;

    let (ks_statistic, ks_critical_1pct) = if n_modes == 1 {
        let energies: Vec<f64> = finals.iter().map(ResonatorState::total_energy).collect();
        (
            Some(stats::ks_statistic_exponential(&energies, preset.modes[0].nbar)),
            Some(stats::ks_critical_1pct(energies.len())),
        )
    } else {
        (None, None)
    };
    let summary = ThermalizeSummary {
        n_traj: tp.n_traj,
        steps: tp.steps,
        t_final: tp.steps as f64 * preset.dt,
        final_mean_energy: total_mean(&finals),
        final_mode_means: mode_means(&finals),
        ks_statistic,
        ks_critical_1pct,
    };
    write_toml(
        &out.join("manifest.toml"),
        &Manifest {
            command: "thermalize",
            preset,
            summary: &summary,
        },
    )?;
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainingSummary {
    pub master_seed: u64,
    pub start_epoch: u64,
    pub epochs_completed: u64,
    #[serde(skip)]
    pub final_checkpoint: PathBuf,
    #[serde(skip)]
    pub curve: Vec<EpochRecord>,
}

fn write_learning_curve(path: &Path, prov: Provenance, curve: &[EpochRecord]) -> Result<()> {
    let mut w = CsvWriter::create(path, prov, &["epoch", "mean_total_reward", "baseline"])?;
    for r in curve {
        w.row(&[&r.epoch, &r.mean_total_reward, &r.baseline])?;
    }
    w.finish()
}

/// Train the preset's policy, optionally continuing from `resume`.
///
/// Writes `checkpoint_epoch<N>.bin` every `checkpoint_every` epochs,
/// `checkpoint.bin` and `learning_curve.csv` at the end. If an epoch fails,
/// the last good state is still saved to `checkpoint.bin` before the error
/// is returned. On resume the checkpoint's seed is used, so the provenance
/// line names that seed.
pub fn run_training<F>(
    preset: &ExperimentPreset,
    out: &Path,
    resume: Option<Checkpoint>,
    mut on_epoch: F,
) -> Result<TrainingSummary>
where
    F: FnMut(&EpochRecord),
{
    preset.validate()?;
    ensure_dir(out)?;
    let config = preset.training_config()?;
    let mut trainer = match resume {
        Some(ck) => ck.into_trainer(config)?,
        None => Trainer::new(config, preset.seed)?,
    };
    let prov = Provenance {
        preset: preset.name,
        seed: trainer.seed(),
    };
    let start_epoch = trainer.epoch();
    let final_path = out.join("checkpoint.bin");
    let every = preset.training.checkpoint_every;

    let mut failure = None;
    while !trainer.is_done() {
        match trainer.run_epoch() {
            Ok(record) => {
                on_epoch(&record);
                if record.epoch % every == 0 {
                    let path = out.join(format!("checkpoint_epoch{}.bin", record.epoch));
                    save_checkpoint(&path, &Checkpoint::from_trainer(&trainer))?;
                }
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }

    save_checkpoint(&final_path, &Checkpoint::from_trainer(&trainer))?;
    let curve = trainer.learning_curve();
    write_learning_curve(&out.join("learning_curve.csv"), prov, &curve)?;
    if let Some(e) = failure {
        return Err(e);
    }
    let summary = TrainingSummary {
        master_seed: trainer.seed(),
        start_epoch,
        epochs_completed: trainer.epoch(),
        final_checkpoint: final_path,
        curve,
    };
    write_toml(
        &out.join("manifest.toml"),
        &Manifest {
            command: "train",
            preset,
            summary: &summary,
        },
    )?;
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvaluationSummary {
    pub n_traj: usize,
    pub steps: usize,
    pub initial_mean_energy: f64,
    pub final_mean_energy: f64,
    pub initial_mode_means: Vec<f64>,
    pub final_mode_means: Vec<f64>,
    /// Largest initial total energy in the batch.
    pub initial_max_energy: f64,
    /// Trajectories whose energy ever exceeded twice `initial_max_energy`.
    pub n_runaway: usize,
}

/// Roll a trained policy out on fresh thermal initial states.
pub fn run_evaluation(params: &PolicyParams, preset: &ExperimentPreset, out: &Path) -> Result<EvaluationSummary> {
    preset.validate()?;
    let env = preset.environment()?;
    let sizes = params.layer_sizes();
    if params.input_size() != crate::actuation::Observation::LEN || params.output_size() != env.n_actions() {
        return Err(Error::invalid(format!(
            "policy layers {sizes:?} do not match {} observations and {} actions",
            crate::actuation::Observation::LEN,
            env.n_actions()
        )));
    }
    let ep = &preset.evaluation;
    if ep.n_traj == 0 {
        return Err(Error::invalid("evaluation needs at least one trajectory"));
    }
    ensure_dir(out)?;
    let prov = Provenance {
        preset: preset.name,
        seed: preset.seed,
    };

    // Draw every initial state first: the runaway threshold depends on the
    // whole batch.
    let mut starts = Vec::with_capacity(ep.n_traj);
    for i in 0..ep.n_traj {
        let mut rng = NoiseConfig::for_trajectory(preset.seed, StreamPurpose::Evaluation, 0, i as u64).rng();
        let state = sample_initial_state(&env.modes, &mut rng);
        starts.push((state, rng));
    }
    let initial: Vec<ResonatorState> = starts.iter().map(|(s, _)| s.clone()).collect();
    let initial_max_energy = initial.iter().map(ResonatorState::total_energy).fold(0.0, f64::max);

    let mut series = EnergySeries::new(ep.steps, ep.series_stride, env.n_modes());
    let mut finals = Vec::with_capacity(ep.n_traj);
    let mut n_runaway = 0;
    for (i, (start, mut rng)) in starts.into_iter().enumerate() {
        series.record(0, &start);
        let mut actions = if i < ep.record_actions {
            let path = out.join(format!("actions_traj{i}.csv"));
            Some(CsvWriter::create(&path, prov, &["t", "action_index", "drive"])?)
        } else {
            None
        };
        let mut write_err = None;
        let summary = run_episode_from(params, &env, start, ep.steps, &mut rng, ep.mode, |info| {
            series.record(info.step + 1, info.state);
            if let Some(w) = actions.as_mut() {
                let t = info.step as f64 * env.dt;
                if let Err(e) = w.row(&[&t, &info.action, &info.drive]) {
                    write_err.get_or_insert(e);
                }
            }
        })?;
        if let Some(e) = write_err {
            return Err(e);
        }
        if let Some(w) = actions {
            w.finish()?;
        }
        if summary.max_energy > 2.0 * initial_max_energy {
            n_runaway += 1;
        }
        finals.push(summary.final_state);
    }

    series.write(&out.join("energy_vs_time.csv"), prov, env.dt, ep.n_traj)?;
    write_phase_space(&out.join("phase_space_initial.csv"), prov, &initial)?;
    write_phase_space(&out.join("phase_space_final.csv"), prov, &finals)?;
    write_energy_hist(&out.join("energy_hist_initial.csv"), prov, &initial)?;
    write_energy_hist(&out.join("energy_hist_final.csv"), prov, &finals)?;

    let summary = EvaluationSummary {
        n_traj: ep.n_traj,
        steps: ep.steps,
        initial_mean_energy: total_mean(&initial),
        final_mean_energy: total_mean(&finals),
        initial_mode_means: mode_means(&initial),
        final_mode_means: mode_means(&finals),
        initial_max_energy,
        n_runaway,
    };
    write_toml(
        &out.join("manifest.toml"),
        &Manifest {
            command: "evaluate",
            preset,
            summary: &summary,
        },
    )?;
    Ok(summary)
}

/// Human-readable description of a checkpoint.
pub fn inspect_checkpoint(ck: &Checkpoint) -> String {
    let p = &ck.params;
    let last = ck.baseline.epoch_mean_rewards.last().copied();
    let mut s = String::new();
    s.push_str(&format!("format version  {}\n", super::checkpoint::FORMAT_VERSION));
    s.push_str(&format!("layers          {:?}\n", p.layer_sizes()));
    s.push_str(&format!("parameters      {}\n", p.n_params()));
    s.push_str(&format!("adam steps      {}\n", p.adam_t()));
    s.push_str(&format!("master seed     {}\n", ck.master_seed));
    s.push_str(&format!("epochs done     {}\n", ck.epoch));
    s.push_str(&format!("baseline        {}\n", ck.baseline.current()));
    match last {
        Some(r) => s.push_str(&format!("last epoch mean {r}\n")),
        None => s.push_str("last epoch mean -\n"),
    }
    s
}
