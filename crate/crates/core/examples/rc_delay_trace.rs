//! Capacitor voltage of one dendritic circuit after an input spike, against
//! the closed-form delay.

use denram::dendrite::{analog_delay, resistance_for_delay, simulate_rc_trace, AnalogCircuitParams};

fn main() -> denram::Result<()> {
    let p = AnalogCircuitParams::default();
    let r_d = resistance_for_delay(10e-3, &p)?;
    let trace = simulate_rc_trace(r_d, &p, &[1e-3], p.pulse_width / 10.0, 20e-3)?;
    println!("R_d = {:.3e} Ω, C = {:.1e} F", r_d, p.capacitance);
    println!("t_ms,v_cap");
    let every = (0.5e-3 / trace.dt).round() as usize;
    for (k, v) in trace.v_cap.iter().enumerate().step_by(every) {
        println!("{:.1},{v:.4}", k as f64 * trace.dt * 1e3);
    }
    let closed = analog_delay(r_d, &p)?;
    for t in &trace.output_spikes {
        let measured = t - 1e-3 - p.pulse_width;
        println!("output spike at {:.4} ms: delay {:.4} ms (closed form {:.4} ms)", t * 1e3, measured * 1e3, closed * 1e3);
    }
    Ok(())
}
