//! Noise-aware versus noise-free training on the synthetic coincidence task,
//! both evaluated under increasing weight read noise.

use denram::harness::{build_model, build_task, fit, noisy_accuracy, ExperimentConfig};
use denram::learn::TrainConfig;

fn main() -> denram::Result<()> {
    let base = ExperimentConfig::default();
    let levels = [0.0, 0.05, 0.1, 0.15, 0.2];
    println!("seed  training     {}", levels.map(|n| format!("σ={n:<5}")).join(" "));
    for seed in 0..5 {
        let cfg = ExperimentConfig { seed, ..base.clone() }.resolved();
        let data = build_task(&cfg)?;
        let plain = TrainConfig {
            epochs_pretrain: cfg.train.epochs_pretrain + cfg.train.epochs_noise_aware,
            epochs_noise_aware: 0,
            ..cfg.train.clone()
        };
        for (name, tc) in [("noise-free", &plain), ("noise-aware", &cfg.train)] {
            let model = fit(build_model(&cfg, &data)?, &data, tc)?;
            let accs = levels
                .iter()
                .map(|&n| noisy_accuracy(&model, &data.test, n, 20, seed).map(|r| format!("{:.3}  ", r.mean_accuracy)))
                .collect::<denram::Result<Vec<_>>>()?;
            println!("{seed:<5} {name:<12} {}", accs.join(" "));
        }
    }
    Ok(())
}
