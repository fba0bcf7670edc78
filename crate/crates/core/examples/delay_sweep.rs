//! Accuracy of the delay network on the lag task as the mean programmed
//! delay varies: too short cannot bridge the lags, too long spreads the
//! delays too coarsely.

use denram::analysis::{summarize_delay_grid, sweep_delay_distribution, SweepTask};
use denram::data::LagTaskParams;
use denram::harness::{build_task, ExperimentConfig, SynthLagTask, TaskConfig};
use denram::network::{decay, LifParams};

fn main() -> denram::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.task = TaskConfig::SynthLag(SynthLagTask { params: LagTaskParams::default(), ..SynthLagTask::default() });
    let cfg = cfg.resolved();
    let data = build_task(&cfg)?;
    let dt = data.train.layout.dt;
    let task = SweepTask {
        train: data.train,
        val: data.val,
        test: data.test,
        n_delays: 16,
        lif: LifParams::from_tau(20e-3, dt, 1.0)?,
        alpha_out: decay(20e-3, dt)?,
        eval_noise: 0.1,
        eval_realizations: 3,
    };
    let means = [0.005, 0.015, 0.045, 0.135, 0.4, 1.2];
    let cells = sweep_delay_distribution(&task, &means, &[0.5], &cfg.train, &[0, 1])?;
    println!("mean_ms  accuracy");
    for (mean, _, acc, std) in summarize_delay_grid(&cells) {
        println!("{:>7.0}  {acc:.3} ± {std:.3} {}", mean * 1e3, "#".repeat((acc * 40.0) as usize));
    }
    Ok(())
}
