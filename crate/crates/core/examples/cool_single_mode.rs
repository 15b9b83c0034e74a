//! Train the single-mode preset for a few epochs and evaluate it.
//!
//! cargo run --release -p mechcool --example cool_single_mode -- 30

use mechcool::harness::{ExperimentPreset, PresetName};
use mechcool::reinforce::{run_episode, ActionMode, Trainer};
use mechcool::rng::{NoiseConfig, StreamPurpose};

fn main() -> mechcool::Result<()> {
    let epochs: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(30);
    let mut preset = ExperimentPreset::new(PresetName::SingleQuadratic);
    preset.training.epochs = epochs;

    let mut trainer = Trainer::new(preset.training_config()?, preset.seed)?;
    while !trainer.is_done() {
        let r = trainer.run_epoch()?;
        if r.epoch % 10 == 0 || r.epoch == 1 {
            println!("epoch {:>4}  mean reward {:>12.4e}", r.epoch, r.mean_total_reward);
        }
    }

    let env = preset.environment()?;
    let (mut before, mut after) = (0.0, 0.0);
    let n = 50;
    for i in 0..n {
        let mut rng = NoiseConfig::for_trajectory(preset.seed, StreamPurpose::Evaluation, 0, i).rng();
        let s = run_episode(trainer.params(), &env, 20_000, &mut rng, ActionMode::Argmax, |_| {})?;
        before += s.initial_energy;
        after += s.final_state.total_energy();
    }
    println!("mean energy {:.2} -> {:.4}", before / n as f64, after / n as f64);
    Ok(())
}
