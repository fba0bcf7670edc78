//! Trains the default delay network on the synthetic coincidence task and
//! prints the learning curve.

use denram::harness::{build_model, build_task, noisy_accuracy, ExperimentConfig};
use denram::learn::train;

fn main() -> denram::Result<()> {
    let cfg = ExperimentConfig::default().resolved();
    let data = build_task(&cfg)?;
    let model = build_model(&cfg, &data)?;
    let (trained, history) = train(model, &data.train, &data.val, &cfg.train)?;
    print!("{}", history.to_csv());
    println!("best epoch {:?}", history.best_epoch);
    for noise in [0.0, 0.1] {
        let r = noisy_accuracy(&trained, &data.test, noise, 10, cfg.seed)?;
        println!("test accuracy at {:>3.0}% noise: {:.3} ± {:.3}", noise * 100.0, r.mean_accuracy, r.std_accuracy);
    }
    Ok(())
}
