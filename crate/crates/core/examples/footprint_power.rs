//! Memory footprint of the delay network against the recurrent baseline,
//! and event-driven power of a trained model.

use denram::analysis::{
    count_events, count_footprint, estimate_power, footprint_ratios, Architecture, DeviceConvention, EnergyTable,
    EventRates,
};
use denram::harness::{build_model, build_task, fit, ExperimentConfig};

fn main() -> denram::Result<()> {
    let denram_arch = Architecture::Denram { n_in: 2, n_delays: 8, n_out: 1, shared_banks: true };
    let srnn_arch = Architecture::Srnn { n_in: 2, n_hidden: 32, n_out: 2 };
    for conv in [DeviceConvention::TwoPerWeightPlusDelay, DeviceConvention::FourPerSynapse] {
        let (d, s) = (count_footprint(denram_arch, conv), count_footprint(srnn_arch, conv));
        let r = footprint_ratios(&d, &s);
        println!(
            "{conv:?}: delay network {} params / {} devices, recurrent {} / {} → {:.0}× params, {:.0}× devices",
            d.trainable_parameters, d.rram_devices, s.trainable_parameters, s.rram_devices, r.parameter_ratio, r.device_ratio
        );
    }

    let table = EnergyTable::default();
    let one_event = estimate_power(&EventRates { dendritic_events: 1.0 / 30e-3, neuron_updates: 0.0, synops: 0.0 }, &table)?;
    println!("one dendritic event per 30 ms: {:.3} nW", one_event.watts * 1e9);

    let cfg = ExperimentConfig::default().resolved();
    let data = build_task(&cfg)?;
    let model = fit(build_model(&cfg, &data)?, &data, &cfg.train)?;
    let stats = count_events(&model, &data.test)?;
    let p = estimate_power(&stats.rates(), &table)?;
    println!("trained model on the test split: {stats:?}");
    println!("power {:.3e} W ({:?} energy table): {:?}", p.watts, p.calibration, p.breakdown);
    Ok(())
}
