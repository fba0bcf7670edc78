//! Collapses a trained delay network's weights onto (channel, delay bin)
//! profiles: the signed weight a spike contributes at each later bin.

use denram::analysis::aggregate_weight_delay;
use denram::harness::{build_model, build_task, fit, ExperimentConfig};
use denram::network::Model;

fn main() -> denram::Result<()> {
    let cfg = ExperimentConfig::default().resolved();
    let data = build_task(&cfg)?;
    let Model::Denram(model) = fit(build_model(&cfg, &data)?, &data, &cfg.train)? else {
        unreachable!("default config builds a delay network")
    };
    for o in 0..model.n_out() {
        let profile = aggregate_weight_delay(&model, o)?;
        println!("output {o}");
        for (i, row) in profile.rows().into_iter().enumerate() {
            let cells: String = row
                .iter()
                .map(|&w| match w {
                    w if w > 0.5 => '#',
                    w if w > 0.05 => '+',
                    w if w < -0.5 => '=',
                    w if w < -0.05 => '-',
                    _ => '.',
                })
                .collect();
            println!("  ch {i} |{cells}|");
        }
    }
    println!("columns are delay bins of {} ms; + and # positive, - and = negative", model.bank.dt() * 1e3);
    Ok(())
}
