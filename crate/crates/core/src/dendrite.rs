//! Behavioral model of the dendritic delay circuit.
//!
//! An input pulse grounds the delay capacitor; once the pulse ends the
//! capacitor recharges towards `v_ref` through the pristine delay device with
//! time constant `R_d·C`, and the threshold unit emits a delayed spike when
//! `v_cap` crosses `v_th` on the way up. At network level each input channel
//! drives a branch of such circuits, which is represented as a [`DelayBank`]
//! of integer bin shifts.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::device::{sample_delays, DelayDistribution};
use crate::error::{Error, Result};
use crate::raster::SpikeRaster;

/// Electrical parameters of one dendritic circuit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalogCircuitParams {
    /// Capacitor rest level, volts.
    pub v_ref: f64,
    /// Threshold-unit trip level, volts.
    pub v_th: f64,
    /// Farads.
    pub capacitance: f64,
    /// Volts.
    pub pulse_height: f64,
    /// Seconds.
    pub pulse_width: f64,
}

impl Default for AnalogCircuitParams {
    fn default() -> Self {
        AnalogCircuitParams {
            v_ref: 0.6,
            v_th: 0.25,
            capacitance: 1e-12,
            pulse_height: 1.2,
            pulse_width: 1e-6,
        }
    }
}

impl AnalogCircuitParams {
    pub fn validate(&self, path: &str) -> Result<()> {
        if !(self.v_ref > 0.0 && self.v_ref.is_finite()) {
            return Err(Error::config(format!("{path}.v_ref"), "must be finite and > 0"));
        }
        if !(self.v_th > 0.0 && self.v_th < self.v_ref) {
            return Err(Error::config(
                format!("{path}.v_th"),
                "must satisfy 0 < v_th < v_ref",
            ));
        }
        if !(self.capacitance > 0.0 && self.capacitance.is_finite()) {
            return Err(Error::config(format!("{path}.capacitance"), "must be finite and > 0"));
        }
        if !(self.pulse_width > 0.0 && self.pulse_width.is_finite()) {
            return Err(Error::config(format!("{path}.pulse_width"), "must be finite and > 0"));
        }
        Ok(())
    }

    /// `ln(v_ref / (v_ref - v_th))`: delay in units of `R_d·C`.
    pub fn delay_factor(&self) -> f64 {
        (self.v_ref / (self.v_ref - self.v_th)).ln()
    }
}

/// Closed-form delay from the end of the input pulse to the threshold crossing.
pub fn analog_delay(r_d: f64, p: &AnalogCircuitParams) -> Result<f64> {
    if !(r_d > 0.0 && r_d.is_finite()) {
        return Err(Error::domain(format!("delay resistance must be > 0, got {r_d}")));
    }
    if p.v_th >= p.v_ref {
        return Err(Error::domain(format!(
            "threshold {} V must be below v_ref {} V",
            p.v_th, p.v_ref
        )));
    }
    if !(p.capacitance > 0.0) {
        return Err(Error::domain("capacitance must be > 0"));
    }
    Ok(r_d * p.capacitance * p.delay_factor())
}

/// Inverse of [`analog_delay`]: resistance needed for `delay` seconds.
pub fn resistance_for_delay(delay: f64, p: &AnalogCircuitParams) -> Result<f64> {
    if !(delay > 0.0 && delay.is_finite()) {
        return Err(Error::domain(format!("delay must be > 0, got {delay}")));
    }
    p.validate("circuit").map_err(|e| Error::domain(e.to_string()))?;
    Ok(delay / (p.capacitance * p.delay_factor()))
}

/// Sampled capacitor voltage plus the emitted spike times.
#[derive(Debug, Clone, PartialEq)]
pub struct RcTrace {
    /// Sampling interval of `v_cap`, seconds.
    pub dt: f64,
    /// `v_cap` at `k·dt`, `k = 0..=ceil(t_end/dt)`.
    pub v_cap: Vec<f64>,
    pub output_spikes: Vec<f64>,
}

/// Numerically integrates the capacitor voltage of one dendritic circuit.
///
/// Forward Euler with step `dt_sim`; steps are split at pulse edges so that
/// recharge starts exactly at the end of each pulse. While a pulse is applied
/// the capacitor is held at ground and threshold crossings are ignored.
pub fn simulate_rc_trace(
    r_d: f64,
    p: &AnalogCircuitParams,
    input_spike_times: &[f64],
    dt_sim: f64,
    t_end: f64,
) -> Result<RcTrace> {
    let mut v_cap = Vec::new();
    let output_spikes = integrate_rc(r_d, p, input_spike_times, dt_sim, t_end, |v| v_cap.push(v))?;
    Ok(RcTrace {
        dt: dt_sim,
        v_cap,
        output_spikes,
    })
}

/// Output spike times of [`simulate_rc_trace`] without storing the trace.
pub fn rc_output_spikes(
    r_d: f64,
    p: &AnalogCircuitParams,
    input_spike_times: &[f64],
    dt_sim: f64,
    t_end: f64,
) -> Result<Vec<f64>> {
    integrate_rc(r_d, p, input_spike_times, dt_sim, t_end, |_| {})
}

fn integrate_rc(
    r_d: f64,
    p: &AnalogCircuitParams,
    spikes: &[f64],
    dt_sim: f64,
    t_end: f64,
    mut record: impl FnMut(f64),
) -> Result<Vec<f64>> {
    p.validate("circuit").map_err(|e| Error::domain(e.to_string()))?;
    if !(r_d > 0.0 && r_d.is_finite()) {
        return Err(Error::domain(format!("delay resistance must be > 0, got {r_d}")));
    }
    if !(dt_sim > 0.0) || dt_sim > p.pulse_width / 10.0 * (1.0 + 1e-9) {
        return Err(Error::domain(format!(
            "dt_sim {dt_sim} must be in (0, pulse_width/10]"
        )));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::domain("t_end must be finite and ≥ 0"));
    }
    if spikes.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::domain("input spike times must be finite and ≥ 0"));
    }
    if spikes.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::domain("input spike times must be non-decreasing"));
    }

    // Merge overlapping pulses into disjoint [start, end) intervals.
    let mut pulses: Vec<(f64, f64)> = Vec::with_capacity(spikes.len());
    for &t in spikes {
        let end = t + p.pulse_width;
        match pulses.last_mut() {
            Some(last) if t <= last.1 => last.1 = last.1.max(end),
            _ => pulses.push((t, end)),
        }
    }

    let tau = r_d * p.capacitance;
    let n_samples = (t_end / dt_sim).ceil() as usize;
    let mut v = p.v_ref;
    let mut t = 0.0;
    let mut armed = false;
    let mut in_pulse = false;
    let mut next_pulse = 0;
    let mut out = Vec::new();

    record(v);
    for k in 1..=n_samples {
        let t_grid = k as f64 * dt_sim;
        loop {
            let edge = if in_pulse {
                Some(pulses[next_pulse - 1].1)
            } else {
                pulses.get(next_pulse).map(|p| p.0)
            };
            if edge.is_some_and(|e| e <= t) {
                if in_pulse {
                    in_pulse = false;
                    armed = true;
                } else {
                    in_pulse = true;
                    next_pulse += 1;
                    v = 0.0;
                }
                continue;
            }
            if t >= t_grid {
                break;
            }
            let t_next = edge.map_or(t_grid, |e| e.min(t_grid));
            if !in_pulse {
                let h = t_next - t;
                let v_new = v + h * (p.v_ref - v) / tau;
                if armed && v < p.v_th && v_new >= p.v_th {
                    out.push(t + h * (p.v_th - v) / (v_new - v));
                    armed = false;
                }
                v = v_new;
            }
            t = t_next;
        }
        record(v);
    }
    Ok(out)
}

/// Fixed per-channel delays and their bin shifts.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayBank {
    delays: Array2<f64>,
    shifts: Array2<usize>,
    dt: f64,
}

impl DelayBank {
    /// Quantizes `delays` (seconds, `n_channels × n_delays`) to bins of `dt`,
    /// rounding to nearest with ties to even.
    pub fn from_delays(delays: Array2<f64>, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::domain(format!("bank dt must be > 0, got {dt}")));
        }
        if let Some(bad) = delays.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(Error::domain(format!("delays must be finite and ≥ 0, got {bad}")));
        }
        let shifts = delays.mapv(|d| (d / dt).round_ties_even() as usize);
        Ok(DelayBank { delays, shifts, dt })
    }

    /// Samples `n_channels × n_delays` delays from `dist`, row by row.
    pub fn sample<R: Rng + ?Sized>(
        dist: &DelayDistribution,
        n_channels: usize,
        n_delays: usize,
        dt: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if n_channels == 0 || n_delays == 0 {
            return Err(Error::config("model", "delay bank needs ≥ 1 channel and ≥ 1 delay"));
        }
        let flat = sample_delays(dist, n_channels * n_delays, rng)?;
        let delays = Array2::from_shape_vec((n_channels, n_delays), flat)
            .expect("sample count matches shape");
        DelayBank::from_delays(delays, dt)
    }

    pub fn delays(&self) -> &Array2<f64> {
        &self.delays
    }

    pub fn shifts(&self) -> &Array2<usize> {
        &self.shifts
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_channels(&self) -> usize {
        self.delays.nrows()
    }

    pub fn n_delays(&self) -> usize {
        self.delays.ncols()
    }

    pub fn n_expanded(&self) -> usize {
        self.n_channels() * self.n_delays()
    }

    pub fn max_shift(&self) -> usize {
        self.shifts.iter().copied().max().unwrap_or(0)
    }

    /// Row of the expanded raster that carries delay `j` of channel `i`.
    pub fn expanded_index(&self, channel: usize, delay: usize) -> usize {
        channel * self.n_delays() + delay
    }

    pub(crate) fn check_raster(&self, r: &SpikeRaster) -> Result<()> {
        if r.n_channels() != self.n_channels() {
            return Err(Error::domain(format!(
                "raster has {} channels, delay bank expects {}",
                r.n_channels(),
                self.n_channels()
            )));
        }
        if !SpikeRaster::same_dt(r.dt(), self.dt) {
            return Err(Error::domain(format!(
                "raster dt {} differs from delay bank dt {}",
                r.dt(),
                self.dt
            )));
        }
        Ok(())
    }

    /// Length of the expanded raster for an input of `n_steps` bins.
    pub fn expanded_steps(&self, n_steps: usize) -> usize {
        n_steps + self.max_shift()
    }
}

/// Replicates every input channel once per delay, shifting each replica right
/// by its bin shift. Output row `i·n_delays + j` holds delay `j` of channel `i`.
pub fn expand_with_delays(r: &SpikeRaster, bank: &DelayBank) -> Result<SpikeRaster> {
    bank.check_raster(r)?;
    let n_steps = bank.expanded_steps(r.n_steps());
    let mut counts = Array2::zeros((bank.n_expanded(), n_steps));
    for i in 0..bank.n_channels() {
        let row = r.counts().row(i);
        for j in 0..bank.n_delays() {
            let s = bank.shifts[[i, j]];
            counts
                .row_mut(bank.expanded_index(i, j))
                .slice_mut(ndarray::s![s..s + r.n_steps()])
                .assign(&row);
        }
    }
    SpikeRaster::new(counts, r.dt())
}

/// Weighted sum of the expanded raster: `out[o][t] = Σ_c w[c][o]·x[c][t]`.
///
/// Returns an `n_out × n_steps` current series. Terms are accumulated in
/// ascending expanded-channel order.
pub fn dendritic_current(expanded: &SpikeRaster, weights: &Array2<f64>) -> Result<Array2<f64>> {
    if weights.nrows() != expanded.n_channels() {
        return Err(Error::domain(format!(
            "weight rows {} do not match {} expanded channels",
            weights.nrows(),
            expanded.n_channels()
        )));
    }
    let mut out = Array2::zeros((weights.ncols(), expanded.n_steps()));
    for (c, t, n) in expanded.events() {
        let n = f64::from(n);
        for (o, w) in weights.row(c).iter().enumerate() {
            out[[o, t]] += w * n;
        }
    }
    Ok(out)
}

/// Event-driven equivalent of `dendritic_current(expand_with_delays(r, bank), w)`
/// that never materializes the expanded raster.
pub fn dendritic_current_sparse(
    r: &SpikeRaster,
    bank: &DelayBank,
    weights: &Array2<f64>,
) -> Result<Array2<f64>> {
    bank.check_raster(r)?;
    if weights.nrows() != bank.n_expanded() {
        return Err(Error::domain(format!(
            "weight rows {} do not match {} expanded channels",
            weights.nrows(),
            bank.n_expanded()
        )));
    }
    let mut out = Array2::zeros((weights.ncols(), bank.expanded_steps(r.n_steps())));
    for i in 0..bank.n_channels() {
        let events = r.channel_events(i);
        if events.is_empty() {
            continue;
        }
        for j in 0..bank.n_delays() {
            let s = bank.shifts[[i, j]];
            let w = weights.row(bank.expanded_index(i, j));
            for &(t, n) in &events {
                let n = f64::from(n);
                for (o, w) in w.iter().enumerate() {
                    out[[o, t + s]] += w * n;
                }
            }
        }
    }
    Ok(out)
}
