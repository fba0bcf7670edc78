//! Two-input coincidence detection with device-programmed weights: the
//! output fires only when IN2 arrives about one programmed delay after IN1.

use denram::device::DeviceConfig;
use denram::network::{coincidence_experiment, CoincidenceSetup};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> denram::Result<()> {
    let delays = [18e-3, 36e-3, 48e-3, 58e-3];
    let cfg = DeviceConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for (name, strong) in [("58 ms circuit in LRS", Some(3)), ("all IN1 circuits in HRS", None)] {
        let setup = CoincidenceSetup::from_devices(&delays, strong, &cfg, 20e-3, 1e-3, &mut rng)?;
        println!("{name}: threshold {:.3}, IN1 weights {:?}", setup.lif.v_threshold, setup.in1_weights.iter().map(|w| format!("{w:.3}")).collect::<Vec<_>>());
        for lag_ms in (0..=120).step_by(6) {
            let o = coincidence_experiment(&setup, lag_ms as f64 * 1e-3)?;
            let bar = "=".repeat((o.peak_potential / setup.lif.v_threshold * 30.0) as usize);
            println!("  lag {lag_ms:>3} ms {} {bar}", if o.fired { "FIRE" } else { "    " });
        }
    }
    Ok(())
}
