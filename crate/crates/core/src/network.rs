//! Forward dynamics: LIF neurons, leaky-integrator readouts, the delay-based
//! dendritic network and the recurrent spiking baseline.

use ndarray::{Array2, ArrayView1};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dendrite::{dendritic_current_sparse, DelayBank};
use crate::device::{program_reset, program_set, weight_from_conductance, DeviceConfig};
use crate::error::{Error, Result};
use crate::raster::SpikeRaster;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reset {
    ToZero,
}

/// Discrete-time LIF parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifParams {
    /// Per-step membrane decay.
    pub alpha: f64,
    pub v_threshold: f64,
    pub reset: Reset,
    pub refractory_bins: usize,
}

impl LifParams {
    pub fn new(alpha: f64, v_threshold: f64) -> Result<Self> {
        let p = LifParams {
            alpha,
            v_threshold,
            reset: Reset::ToZero,
            refractory_bins: 0,
        };
        p.validate("lif")?;
        Ok(p)
    }

    /// `alpha = exp(-dt/tau)`.
    pub fn from_tau(tau: f64, dt: f64, v_threshold: f64) -> Result<Self> {
        LifParams::new(decay(tau, dt)?, v_threshold)
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config(format!("{path}.alpha"), "must lie in (0, 1)"));
        }
        if !(self.v_threshold > 0.0 && self.v_threshold.is_finite()) {
            return Err(Error::config(format!("{path}.v_threshold"), "must be finite and > 0"));
        }
        Ok(())
    }
}

/// Per-step decay factor of a leaky state with time constant `tau`.
pub fn decay(tau: f64, dt: f64) -> Result<f64> {
    if !(tau > 0.0 && dt > 0.0 && tau.is_finite() && dt.is_finite()) {
        return Err(Error::config("tau", "time constant and dt must be > 0"));
    }
    Ok((-dt / tau).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LifOutput {
    /// 0/1 per neuron and step.
    pub spikes: Array2<u8>,
    pub potentials: Array2<f64>,
}

impl LifOutput {
    pub fn spike_counts(&self) -> Vec<u32> {
        self.spikes
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|&s| u32::from(s)).sum())
            .collect()
    }
}

/// Runs `n` independent LIF neurons over an `n × T` current series.
///
/// `v[t] = alpha·v[t-1]·(1 - s[t-1]) + I[t]`, `s[t] = [v[t] ≥ θ]`, with
/// spiking suppressed for `refractory_bins` steps after each spike.
pub fn lif_forward(currents: &Array2<f64>, p: &LifParams) -> LifOutput {
    let (n, steps) = currents.dim();
    let mut spikes = Array2::zeros((n, steps));
    let mut potentials = Array2::zeros((n, steps));
    for i in 0..n {
        let mut v = 0.0;
        let mut s_prev = 0u8;
        let mut refractory = 0usize;
        for t in 0..steps {
            v = p.alpha * v * f64::from(1 - s_prev) + currents[[i, t]];
            let s = if refractory > 0 {
                refractory -= 1;
                0
            } else if v >= p.v_threshold {
                refractory = p.refractory_bins;
                1
            } else {
                0
            };
            potentials[[i, t]] = v;
            spikes[[i, t]] = s;
            s_prev = s;
        }
    }
    LifOutput { spikes, potentials }
}

/// Non-spiking leaky integration `u[t] = alpha_out·u[t-1] + I[t]` per row.
pub fn leaky_readout(currents: &Array2<f64>, alpha_out: f64) -> Result<Array2<f64>> {
    if !(0.0..1.0).contains(&alpha_out) {
        return Err(Error::domain(format!("readout decay {alpha_out} outside [0, 1)")));
    }
    let mut u = currents.clone();
    for mut row in u.rows_mut() {
        for t in 1..row.len() {
            row[t] += alpha_out * row[t - 1];
        }
    }
    Ok(u)
}

/// First index of the maximum value.
pub fn argmax_earliest(row: ArrayView1<'_, f64>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (t, &v) in row.iter().enumerate() {
        if v > best.1 {
            best = (t, v);
        }
    }
    if row.is_empty() {
        best.1 = 0.0;
    }
    best
}

/// How output logits are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutMode {
    /// Leaky integrator per output; logit = max potential over time. A
    /// single output instead reports the peak minus the LIF threshold, so a
    /// positive logit means the output crossed it.
    #[default]
    MaxPotential,
    /// LIF per output; logit = number of output spikes.
    SpikeCount,
}

/// Delay bank plus trainable weights feeding one layer of output neurons.
#[derive(Debug, Clone, PartialEq)]
pub struct DenramModel {
    pub bank: DelayBank,
    /// `(n_in·n_delays) × n_out`, signed.
    pub weights: Array2<f64>,
    pub lif: LifParams,
    pub readout: ReadoutMode,
    pub alpha_out: f64,
    /// Seed the delay bank was sampled with.
    pub delay_seed: u64,
}

impl DenramModel {
    pub fn new(
        bank: DelayBank,
        weights: Array2<f64>,
        lif: LifParams,
        readout: ReadoutMode,
        alpha_out: f64,
    ) -> Result<Self> {
        if weights.nrows() != bank.n_expanded() {
            return Err(Error::domain(format!(
                "weight tensor has {} rows, bank expands to {}",
                weights.nrows(),
                bank.n_expanded()
            )));
        }
        if weights.ncols() == 0 {
            return Err(Error::domain("model needs at least one output"));
        }
        lif.validate("lif")?;
        if !(0.0..1.0).contains(&alpha_out) {
            return Err(Error::config("readout.alpha_out", "must lie in [0, 1)"));
        }
        Ok(DenramModel {
            bank,
            weights,
            lif,
            readout,
            alpha_out,
            delay_seed: 0,
        })
    }

    /// Weights uniform in ±1/√fan_in.
    pub fn init<R: Rng + ?Sized>(
        bank: DelayBank,
        n_out: usize,
        lif: LifParams,
        readout: ReadoutMode,
        alpha_out: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let weights = uniform_init(bank.n_expanded(), n_out, rng);
        DenramModel::new(bank, weights, lif, readout, alpha_out)
    }

    pub fn n_in(&self) -> usize {
        self.bank.n_channels()
    }

    pub fn n_delays(&self) -> usize {
        self.bank.n_delays()
    }

    pub fn n_out(&self) -> usize {
        self.weights.ncols()
    }
}

pub(crate) fn uniform_init<R: Rng + ?Sized>(fan_in: usize, n_out: usize, rng: &mut R) -> Array2<f64> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    Array2::from_shape_simple_fn((fan_in, n_out), || rng.gen_range(-bound..=bound))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenramOutput {
    pub logits: Vec<f64>,
    /// Readout potentials, `n_out × T`.
    pub potentials: Array2<f64>,
    /// Output spikes in `SpikeCount` mode.
    pub spikes: Option<Array2<u8>>,
}

/// Delay expansion → dendritic current → readout.
pub fn denram_forward(m: &DenramModel, r: &SpikeRaster) -> Result<DenramOutput> {
    let current = dendritic_current_sparse(r, &m.bank, &m.weights)?;
    Ok(readout_forward(&current, m))
}

/// Threshold subtracted from the peak potential of a lone MaxPotential output.
pub(crate) fn single_output_offset(m: &DenramModel) -> f64 {
    if m.n_out() == 1 {
        m.lif.v_threshold
    } else {
        0.0
    }
}

pub(crate) fn readout_forward(current: &Array2<f64>, m: &DenramModel) -> DenramOutput {
    match m.readout {
        ReadoutMode::MaxPotential => {
            let potentials = leaky_readout(current, m.alpha_out).expect("alpha_out validated");
            let offset = single_output_offset(m);
            let logits = potentials
                .rows()
                .into_iter()
                .map(|row| argmax_earliest(row).1 - offset)
                .collect();
            DenramOutput {
                logits,
                potentials,
                spikes: None,
            }
        }
        ReadoutMode::SpikeCount => {
            let out = lif_forward(current, &m.lif);
            let logits = out.spike_counts().into_iter().map(f64::from).collect();
            DenramOutput {
                logits,
                potentials: out.potentials,
                spikes: Some(out.spikes),
            }
        }
    }
}

/// Recurrent spiking baseline with one hidden LIF layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SrnnModel {
    /// `n_in × n_h`.
    pub w_in: Array2<f64>,
    /// `n_h × n_h`.
    pub w_rec: Array2<f64>,
    /// `n_h × n_out`.
    pub w_out: Array2<f64>,
    pub lif_hidden: LifParams,
    pub alpha_out: f64,
}

impl SrnnModel {
    pub fn new(
        w_in: Array2<f64>,
        w_rec: Array2<f64>,
        w_out: Array2<f64>,
        lif_hidden: LifParams,
        alpha_out: f64,
    ) -> Result<Self> {
        let n_h = w_in.ncols();
        if w_rec.dim() != (n_h, n_h) {
            return Err(Error::domain(format!(
                "recurrent matrix {:?} must be {n_h}×{n_h}",
                w_rec.dim()
            )));
        }
        if w_out.nrows() != n_h || w_out.ncols() == 0 {
            return Err(Error::domain(format!(
                "output matrix {:?} must have {n_h} rows",
                w_out.dim()
            )));
        }
        lif_hidden.validate("lif")?;
        if !(0.0..1.0).contains(&alpha_out) {
            return Err(Error::config("readout.alpha_out", "must lie in [0, 1)"));
        }
        Ok(SrnnModel {
            w_in,
            w_rec,
            w_out,
            lif_hidden,
            alpha_out,
        })
    }

    pub fn init<R: Rng + ?Sized>(
        n_in: usize,
        n_h: usize,
        n_out: usize,
        lif_hidden: LifParams,
        alpha_out: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let w_in = uniform_init(n_in, n_h, rng);
        let w_rec = uniform_init(n_h, n_h, rng);
        let w_out = uniform_init(n_h, n_out, rng);
        SrnnModel::new(w_in, w_rec, w_out, lif_hidden, alpha_out)
    }

    pub fn n_in(&self) -> usize {
        self.w_in.nrows()
    }

    pub fn n_hidden(&self) -> usize {
        self.w_in.ncols()
    }

    pub fn n_out(&self) -> usize {
        self.w_out.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SrnnOutput {
    pub logits: Vec<f64>,
    /// `n_h × T`.
    pub hidden_spikes: Array2<u8>,
    pub hidden_potentials: Array2<f64>,
    /// `n_out × T`.
    pub output_potentials: Array2<f64>,
}

pub fn srnn_forward(m: &SrnnModel, r: &SpikeRaster) -> Result<SrnnOutput> {
    if r.n_channels() != m.n_in() {
        return Err(Error::domain(format!(
            "raster has {} channels, model expects {}",
            r.n_channels(),
            m.n_in()
        )));
    }
    let (n_h, steps) = (m.n_hidden(), r.n_steps());
    let p = &m.lif_hidden;
    let mut spikes = Array2::<u8>::zeros((n_h, steps));
    let mut potentials = Array2::zeros((n_h, steps));
    let mut v = vec![0.0; n_h];
    let mut s_prev = vec![0u8; n_h];
    let mut refractory = vec![0usize; n_h];
    let mut current = vec![0.0; n_h];
    for t in 0..steps {
        current.iter_mut().for_each(|c| *c = 0.0);
        for i in 0..m.n_in() {
            let x = r.get(i, t);
            if x > 0 {
                let x = f64::from(x);
                for (c, w) in current.iter_mut().zip(m.w_in.row(i)) {
                    *c += w * x;
                }
            }
        }
        for k in 0..n_h {
            if s_prev[k] == 1 {
                for (c, w) in current.iter_mut().zip(m.w_rec.row(k)) {
                    *c += w;
                }
            }
        }
        for h in 0..n_h {
            v[h] = p.alpha * v[h] * f64::from(1 - s_prev[h]) + current[h];
            let s = if refractory[h] > 0 {
                refractory[h] -= 1;
                0
            } else if v[h] >= p.v_threshold {
                refractory[h] = p.refractory_bins;
                1
            } else {
                0
            };
            potentials[[h, t]] = v[h];
            spikes[[h, t]] = s;
        }
        for h in 0..n_h {
            s_prev[h] = spikes[[h, t]];
        }
    }
    let out_current = m.w_out.t().dot(&spikes.mapv(f64::from));
    let output_potentials = leaky_readout(&out_current, m.alpha_out)?;
    let logits = output_potentials
        .rows()
        .into_iter()
        .map(|row| argmax_earliest(row).1)
        .collect();
    Ok(SrnnOutput {
        logits,
        hidden_spikes: spikes,
        hidden_potentials: potentials,
        output_potentials,
    })
}

/// Either trainable architecture.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Denram(DenramModel),
    Srnn(SrnnModel),
}

impl Model {
    pub fn n_in(&self) -> usize {
        match self {
            Model::Denram(m) => m.n_in(),
            Model::Srnn(m) => m.n_in(),
        }
    }

    pub fn n_out(&self) -> usize {
        match self {
            Model::Denram(m) => m.n_out(),
            Model::Srnn(m) => m.n_out(),
        }
    }

    pub fn logits(&self, r: &SpikeRaster) -> Result<Vec<f64>> {
        match self {
            Model::Denram(m) => Ok(denram_forward(m, r)?.logits),
            Model::Srnn(m) => Ok(srnn_forward(m, r)?.logits),
        }
    }
}

/// Two-input coincidence-detection setup: IN1 feeds a branch of delayed
/// circuits, IN2 feeds a single undelayed circuit, and both converge on one
/// LIF neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceSetup {
    /// Delays of the IN1 branch, seconds.
    pub in1_delays: Vec<f64>,
    /// Weight of each IN1 circuit.
    pub in1_weights: Vec<f64>,
    pub in2_weight: f64,
    pub lif: LifParams,
    pub dt: f64,
    /// Arrival time of IN1, seconds.
    pub onset: f64,
    /// Simulated time after IN2, seconds.
    pub tail: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoincidenceOutcome {
    pub fired: bool,
    pub peak_potential: f64,
}

impl CoincidenceSetup {
    /// Programs weights from devices: the circuit at `strong` (if any) is SET
    /// to the top level, every other IN1 circuit is RESET to HRS, and IN2's
    /// circuit is SET to the top level. The neuron threshold sits halfway
    /// between a coincident LRS pair and a coincident pair whose IN1 partner
    /// is at the HRS band edge, using nominal (jitter-free) conductances.
    pub fn from_devices<R: Rng + ?Sized>(
        in1_delays: &[f64],
        strong: Option<usize>,
        cfg: &DeviceConfig,
        tau_mem: f64,
        dt: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if let Some(k) = strong {
            if k >= in1_delays.len() {
                return Err(Error::domain(format!(
                    "strong circuit {k} out of range for {} delays",
                    in1_delays.len()
                )));
            }
        }
        let g_ref = cfg.reference_conductance();
        let top = cfg.set_levels - 1;
        let in1_weights = (0..in1_delays.len())
            .map(|k| {
                let state = if Some(k) == strong {
                    program_set(top, cfg, rng)?
                } else {
                    program_reset(cfg, rng)
                };
                Ok(weight_from_conductance(state.conductance, g_ref))
            })
            .collect::<Result<Vec<_>>>()?;
        let in2_weight = weight_from_conductance(program_set(top, cfg, rng)?.conductance, g_ref);

        let nominal_strong = weight_from_conductance(1.0 / cfg.set_band_center(top), g_ref);
        let weak_edge = weight_from_conductance(1.0 / cfg.hrs_min, g_ref);
        let theta = nominal_strong + 0.5 * (nominal_strong + weak_edge);
        Ok(CoincidenceSetup {
            in1_delays: in1_delays.to_vec(),
            in1_weights,
            in2_weight,
            lif: LifParams::from_tau(tau_mem, dt, theta)?,
            dt,
            onset: 5e-3,
            tail: 0.1,
        })
    }
}

/// Presents IN1 at `onset` and IN2 `lag` seconds later; reports whether the
/// output neuron fired and its peak membrane potential.
pub fn coincidence_experiment(setup: &CoincidenceSetup, lag: f64) -> Result<CoincidenceOutcome> {
    let n = setup.in1_delays.len();
    if n == 0 || setup.in1_weights.len() != n {
        return Err(Error::domain("IN1 delays and weights must be non-empty and equal length"));
    }
    let t1 = setup.onset;
    let t2 = setup.onset + lag;
    if t2 < 0.0 {
        return Err(Error::domain("IN2 would arrive before t = 0"));
    }
    let bin = |t: f64| (t / setup.dt).round_ties_even() as usize;
    let n_steps = bin(t1.max(t2) + setup.tail) + 1;
    let raster = SpikeRaster::from_events(2, n_steps, setup.dt, [(0, bin(t1), 1), (1, bin(t2), 1)])?;

    let mut delays = Array2::zeros((2, n));
    delays.row_mut(0).assign(&ArrayView1::from(&setup.in1_delays));
    let bank = DelayBank::from_delays(delays, setup.dt)?;
    let mut weights = Array2::zeros((2 * n, 1));
    for (k, w) in setup.in1_weights.iter().enumerate() {
        weights[[k, 0]] = *w;
    }
    weights[[n, 0]] = setup.in2_weight;
    let model = DenramModel::new(bank, weights, setup.lif, ReadoutMode::SpikeCount, 0.0)?;
    let out = denram_forward(&model, &raster)?;
    let peak = out
        .potentials
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(CoincidenceOutcome {
        fired: out.logits[0] > 0.0,
        peak_potential: peak,
    })
}
