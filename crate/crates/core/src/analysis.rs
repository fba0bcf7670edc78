//! Footprint and power accounting, ablation sweeps and the weighted-delay
//! aggregation view of a trained delay network.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::LabeledRasterSet;
use crate::dendrite::DelayBank;
use crate::device::{DelayDistribution, NoiseModel};
use crate::error::{Error, Result};
use crate::learn::{evaluate, train, TrainConfig};
use crate::network::{srnn_forward, DenramModel, LifParams, Model, ReadoutMode, SrnnModel};

/// Mapping from trainable weights to physical RRAM devices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeviceConvention {
    /// A differential pair per weight plus one delay device per dendritic
    /// circuit.
    TwoPerWeightPlusDelay,
    /// Four devices per synapse.
    FourPerSynapse,
}

/// Layer sizes of a model, as far as footprint is concerned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Architecture {
    Denram {
        n_in: usize,
        n_delays: usize,
        n_out: usize,
        /// One delay bank per input, broadcast to every output. When false
        /// each output tree owns its own delay devices.
        shared_banks: bool,
    },
    Srnn {
        n_in: usize,
        n_hidden: usize,
        n_out: usize,
    },
}

impl Architecture {
    pub fn of(model: &Model) -> Self {
        match model {
            Model::Denram(m) => Architecture::Denram {
                n_in: m.n_in(),
                n_delays: m.n_delays(),
                n_out: m.n_out(),
                shared_banks: true,
            },
            Model::Srnn(m) => Architecture::Srnn {
                n_in: m.n_in(),
                n_hidden: m.n_hidden(),
                n_out: m.n_out(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FootprintReport {
    pub architecture: Architecture,
    pub trainable_parameters: usize,
    pub rram_devices: usize,
    pub convention: DeviceConvention,
}

pub fn count_footprint(arch: Architecture, convention: DeviceConvention) -> FootprintReport {
    let (params, devices) = match arch {
        Architecture::Denram {
            n_in,
            n_delays,
            n_out,
            shared_banks,
        } => {
            let p = n_in * n_delays * n_out;
            let delay_devices = if shared_banks { n_in * n_delays } else { p };
            let d = match convention {
                DeviceConvention::TwoPerWeightPlusDelay => 2 * p + delay_devices,
                DeviceConvention::FourPerSynapse => 4 * p,
            };
            (p, d)
        }
        Architecture::Srnn { n_in, n_hidden, n_out } => {
            let p = n_in * n_hidden + n_hidden * n_hidden + n_hidden * n_out;
            (p, 2 * p)
        }
    };
    FootprintReport {
        architecture: arch,
        trainable_parameters: params,
        rram_devices: devices,
        convention,
    }
}

/// How much larger `other` is than `base`, by parameters and by devices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FootprintRatios {
    pub parameter_ratio: f64,
    pub device_ratio: f64,
}

pub fn footprint_ratios(base: &FootprintReport, other: &FootprintReport) -> FootprintRatios {
    FootprintRatios {
        parameter_ratio: other.trainable_parameters as f64 / base.trainable_parameters as f64,
        device_ratio: other.rram_devices as f64 / base.rram_devices as f64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerFractions {
    pub threshold_block: f64,
    pub rc_and_weight: f64,
    pub mux: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Calibration {
    Measured,
    Assumed,
}

/// Energy per operation, joules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyTable {
    /// One delayed and weighted event through a dendritic circuit.
    pub e_dendritic_event: f64,
    pub fractions: PowerFractions,
    pub e_neuron_update: f64,
    pub e_synop: f64,
    /// Provenance of the neuron-update and synaptic-operation entries.
    pub calibration: Calibration,
}

impl Default for EnergyTable {
    fn default() -> Self {
        EnergyTable {
            e_dendritic_event: 58.5e-12,
            fractions: PowerFractions {
                threshold_block: 0.667,
                rc_and_weight: 0.09,
                mux: 0.243,
            },
            e_neuron_update: 2e-12,
            e_synop: 1e-12,
            calibration: Calibration::Assumed,
        }
    }
}

impl EnergyTable {
    pub fn validate(&self, path: &str) -> Result<()> {
        let f = self.fractions;
        for (name, v) in [
            ("e_dendritic_event", self.e_dendritic_event),
            ("e_neuron_update", self.e_neuron_update),
            ("e_synop", self.e_synop),
            ("fractions.threshold_block", f.threshold_block),
            ("fractions.rc_and_weight", f.rc_and_weight),
            ("fractions.mux", f.mux),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{path}.{name}"), "must be finite and ≥ 0"));
            }
        }
        let sum = f.threshold_block + f.rc_and_weight + f.mux;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("{path}.fractions"), format!("must sum to 1, got {sum}")));
        }
        Ok(())
    }
}

/// Operation counts over a simulated duration.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EventStats {
    pub dendritic_events: u64,
    pub neuron_updates: u64,
    pub synops: u64,
    pub simulated_seconds: f64,
}

/// Operations per second.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EventRates {
    pub dendritic_events: f64,
    pub neuron_updates: f64,
    pub synops: f64,
}

impl EventStats {
    pub fn rates(&self) -> EventRates {
        if self.simulated_seconds <= 0.0 {
            return EventRates::default();
        }
        let s = self.simulated_seconds;
        EventRates {
            dendritic_events: self.dendritic_events as f64 / s,
            neuron_updates: self.neuron_updates as f64 / s,
            synops: self.synops as f64 / s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBreakdown {
    pub threshold_block: f64,
    pub rc_and_weight: f64,
    pub mux: f64,
    pub neurons: f64,
    pub synops: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub watts: f64,
    pub breakdown: PowerBreakdown,
    pub calibration: Calibration,
}

pub fn estimate_power(rates: &EventRates, table: &EnergyTable) -> Result<PowerReport> {
    if [rates.dendritic_events, rates.neuron_updates, rates.synops]
        .iter()
        .any(|r| !(*r >= 0.0 && r.is_finite()))
    {
        return Err(Error::domain("event rates must be finite and ≥ 0"));
    }
    let dendritic = rates.dendritic_events * table.e_dendritic_event;
    let neurons = rates.neuron_updates * table.e_neuron_update;
    let synops = rates.synops * table.e_synop;
    let f = table.fractions;
    Ok(PowerReport {
        watts: dendritic + neurons + synops,
        breakdown: PowerBreakdown {
            threshold_block: dendritic * f.threshold_block,
            rc_and_weight: dendritic * f.rc_and_weight,
            mux: dendritic * f.mux,
            neurons,
            synops,
        },
        calibration: table.calibration,
    })
}

/// Counts operations over a dataset.
///
/// Delay networks are simulated over the input window extended by the
/// longest delay, so every input spike yields one event per delay. Neuron
/// updates count every output (and hidden) neuron at every simulated bin.
/// Recurrent synaptic operations count input spikes fanning out to the
/// hidden layer and hidden spikes fanning out to hidden and output layers.
pub fn count_events(model: &Model, set: &LabeledRasterSet) -> Result<EventStats> {
    let mut stats = EventStats::default();
    let dt = set.layout.dt;
    match model {
        Model::Denram(m) => {
            for s in &set.samples {
                let input = s.raster.total_spikes();
                let steps = m.bank.expanded_steps(s.raster.n_steps()) as u64;
                stats.dendritic_events += input * m.n_delays() as u64;
                stats.neuron_updates += steps * m.n_out() as u64;
                stats.simulated_seconds += steps as f64 * dt;
            }
        }
        Model::Srnn(m) => {
            let per_sample: Vec<(u64, u64)> = set
                .samples
                .par_iter()
                .map(|s| {
                    srnn_forward(m, &s.raster).map(|out| {
                        let hidden: u64 = out.hidden_spikes.iter().map(|&v| u64::from(v)).sum();
                        (s.raster.total_spikes(), hidden)
                    })
                })
                .collect::<Result<_>>()?;
            let (n_h, n_out) = (m.n_hidden() as u64, m.n_out() as u64);
            for (s, (input, hidden)) in set.samples.iter().zip(per_sample) {
                let steps = s.raster.n_steps() as u64;
                stats.synops += input * n_h + hidden * (n_h + n_out);
                stats.neuron_updates += steps * (n_h + n_out);
                stats.simulated_seconds += steps as f64 * dt;
            }
        }
    }
    Ok(stats)
}

/// Aggregate signed weight that a spike on channel `i` contributes `t` bins
/// later to output `o`: `profile[i][t] = Σ_j w[(i,j)][o]·1{shift[i][j] = t}`.
pub fn aggregate_weight_delay(model: &DenramModel, output: usize) -> Result<Array2<f64>> {
    if output >= model.n_out() {
        return Err(Error::domain(format!(
            "output {output} out of range for {} outputs",
            model.n_out()
        )));
    }
    let bank = &model.bank;
    let mut profile = Array2::zeros((bank.n_channels(), bank.max_shift() + 1));
    for i in 0..bank.n_channels() {
        for j in 0..bank.n_delays() {
            profile[[i, bank.shifts()[[i, j]]]] += model.weights[[bank.expanded_index(i, j), output]];
        }
    }
    Ok(profile)
}

/// A train/val/test task shared by every cell of a sweep.
#[derive(Debug, Clone)]
pub struct SweepTask {
    pub train: LabeledRasterSet,
    pub val: LabeledRasterSet,
    pub test: LabeledRasterSet,
    pub n_delays: usize,
    pub lif: LifParams,
    pub alpha_out: f64,
    /// Weight noise applied at evaluation.
    pub eval_noise: f64,
    pub eval_realizations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayCell {
    pub mean_s: f64,
    pub sigma: f64,
    pub seed: u64,
    pub accuracy: f64,
}

/// Trains one delay network per (mean, sigma, seed) with a freshly sampled
/// bank and scores it under the task's evaluation noise. Cells come back in
/// mean-major, then sigma, then seed order.
pub fn sweep_delay_distribution(
    task: &SweepTask,
    means: &[f64],
    sigmas: &[f64],
    cfg: &TrainConfig,
    seeds: &[u64],
) -> Result<Vec<DelayCell>> {
    if means.is_empty() || sigmas.is_empty() || seeds.is_empty() {
        return Err(Error::config("sweep", "means, sigmas and seeds must be non-empty"));
    }
    let cells: Vec<(f64, f64, u64)> = means
        .iter()
        .flat_map(|&m| sigmas.iter().flat_map(move |&s| seeds.iter().map(move |&seed| (m, s, seed))))
        .collect();
    cells
        .par_iter()
        .map(|&(mean, sigma, seed)| {
            let dist = DelayDistribution::from_mean(mean, sigma)?;
            let model = denram_for_task(task, &dist, seed)?;
            let accuracy = fit_and_score(Model::Denram(model), task, cfg, seed)?;
            Ok(DelayCell {
                mean_s: mean,
                sigma,
                seed,
                accuracy,
            })
        })
        .collect()
}

/// Untrained delay network for `task` with a bank drawn from `dist`.
pub fn denram_for_task(task: &SweepTask, dist: &DelayDistribution, seed: u64) -> Result<DenramModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = task.train.layout;
    let bank = DelayBank::sample(dist, l.n_channels, task.n_delays, l.dt, &mut rng)?;
    let mut m = DenramModel::init(bank, task.train.n_classes, task.lif, ReadoutMode::MaxPotential, task.alpha_out, &mut rng)?;
    m.delay_seed = seed;
    Ok(m)
}

fn fit_and_score(model: Model, task: &SweepTask, cfg: &TrainConfig, seed: u64) -> Result<f64> {
    let cfg = TrainConfig { seed, ..cfg.clone() };
    let (trained, _) = train(model, &task.train, &task.val, &cfg)?;
    let noise = NoiseModel::new(task.eval_noise, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
    Ok(evaluate(&trained, &task.test, &noise, task.eval_realizations, &mut rng)?.mean_accuracy)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HiddenCell {
    pub n_hidden: usize,
    pub seed: u64,
    pub accuracy: f64,
}

/// Recurrent baseline trained at each hidden size; size-major order.
pub fn sweep_hidden_size(task: &SweepTask, sizes: &[usize], cfg: &TrainConfig, seeds: &[u64]) -> Result<Vec<HiddenCell>> {
    if sizes.is_empty() || seeds.is_empty() || sizes.contains(&0) {
        return Err(Error::config("sweep", "hidden sizes must be non-empty and ≥ 1; seeds non-empty"));
    }
    let cells: Vec<(usize, u64)> = sizes
        .iter()
        .flat_map(|&h| seeds.iter().map(move |&s| (h, s)))
        .collect();
    cells
        .par_iter()
        .map(|&(n_hidden, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let l = task.train.layout;
            let m = SrnnModel::init(l.n_channels, n_hidden, task.train.n_classes, task.lif, task.alpha_out, &mut rng)?;
            let accuracy = fit_and_score(Model::Srnn(m), task, cfg, seed)?;
            Ok(HiddenCell { n_hidden, seed, accuracy })
        })
        .collect()
}

pub fn delay_grid_csv(cells: &[DelayCell]) -> String {
    let mut out = String::from("mean_s,sigma,seed,accuracy\n");
    for c in cells {
        out.push_str(&format!("{},{},{},{}\n", c.mean_s, c.sigma, c.seed, c.accuracy));
    }
    out
}

pub fn hidden_grid_csv(cells: &[HiddenCell]) -> String {
    let mut out = String::from("n_hidden,seed,accuracy\n");
    for c in cells {
        out.push_str(&format!("{},{},{}\n", c.n_hidden, c.seed, c.accuracy));
    }
    out
}

/// Mean and population std of accuracy per `(mean, sigma)`, in first-seen order.
pub fn summarize_delay_grid(cells: &[DelayCell]) -> Vec<(f64, f64, f64, f64)> {
    let mut keys: Vec<(f64, f64)> = Vec::new();
    for c in cells {
        if !keys.contains(&(c.mean_s, c.sigma)) {
            keys.push((c.mean_s, c.sigma));
        }
    }
    keys.into_iter()
        .map(|(m, s)| {
            let acc: Vec<f64> = cells
                .iter()
                .filter(|c| c.mean_s == m && c.sigma == s)
                .map(|c| c.accuracy)
                .collect();
            let n = acc.len() as f64;
            let mean = acc.iter().sum::<f64>() / n;
            let std = (acc.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
            (m, s, mean, std)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dendrite::{dendritic_current, expand_with_delays};
    use crate::raster::SpikeRaster;
    use proptest::prelude::*;
    use rand::Rng;

    fn denram(n_in: usize, n_delays: usize, n_out: usize) -> Architecture {
        Architecture::Denram {
            n_in,
            n_delays,
            n_out,
            shared_banks: true,
        }
    }

    #[test]
    fn golden_footprints() {
        let srnn = count_footprint(
            Architecture::Srnn {
                n_in: 2,
                n_hidden: 32,
                n_out: 2,
            },
            DeviceConvention::TwoPerWeightPlusDelay,
        );
        assert_eq!((srnn.trainable_parameters, srnn.rram_devices), (1152, 2304));
        let ecg = count_footprint(denram(2, 8, 1), DeviceConvention::FourPerSynapse);
        assert_eq!((ecg.trainable_parameters, ecg.rram_devices), (16, 64));
        let shd = count_footprint(denram(700, 16, 20), DeviceConvention::TwoPerWeightPlusDelay);
        assert_eq!(shd.trainable_parameters, 224_000);
        let r = footprint_ratios(&ecg, &srnn);
        assert_eq!(r.parameter_ratio, 72.0);
        assert_eq!(r.device_ratio, 36.0);
    }

    proptest! {
        #[test]
        fn footprint_formulas(n_in in 1usize..50, n_d in 1usize..20, n_out in 1usize..10, shared: bool) {
            let arch = Architecture::Denram { n_in, n_delays: n_d, n_out, shared_banks: shared };
            let two = count_footprint(arch, DeviceConvention::TwoPerWeightPlusDelay);
            let four = count_footprint(arch, DeviceConvention::FourPerSynapse);
            let p = n_in * n_d * n_out;
            prop_assert_eq!(two.trainable_parameters, p);
            prop_assert!(two.rram_devices >= p);
            prop_assert_eq!(four.rram_devices, 4 * p);
            let expected = if shared { 2 * p + p / n_out } else { 3 * p };
            prop_assert_eq!(two.rram_devices, expected);
        }

        #[test]
        fn power_is_linear(a in 0.0f64..1e4, b in 0.0f64..1e4, c in 0.0f64..1e4, k in 0.0f64..10.0) {
            let t = EnergyTable::default();
            let r = EventRates { dendritic_events: a, neuron_updates: b, synops: c };
            let scaled = EventRates { dendritic_events: k * a, neuron_updates: k * b, synops: k * c };
            let p1 = estimate_power(&r, &t).unwrap().watts;
            let p2 = estimate_power(&scaled, &t).unwrap().watts;
            prop_assert!((p2 - k * p1).abs() <= 1e-12 * p2.abs().max(1e-30));
            let t2 = EnergyTable { e_synop: 2.0 * t.e_synop, ..t };
            let diff = estimate_power(&r, &t2).unwrap().watts - p1;
            prop_assert!((diff - c * t.e_synop).abs() <= 1e-12 * p1.max(1e-30));
        }
    }

    #[test]
    fn power_identity() {
        let t = EnergyTable::default();
        t.validate("energy").unwrap();
        let r = EventRates {
            dendritic_events: 1.0 / 30e-3,
            ..EventRates::default()
        };
        let p = estimate_power(&r, &t).unwrap();
        assert!((p.watts - 1.95e-9).abs() / 1.95e-9 < 1e-9);
        assert!((p.breakdown.threshold_block / p.watts - 0.667).abs() < 1e-12);
        assert_eq!(estimate_power(&EventRates::default(), &t).unwrap().watts, 0.0);
        let bad = EnergyTable {
            fractions: PowerFractions {
                threshold_block: 0.5,
                rc_and_weight: 0.1,
                mux: 0.1,
            },
            ..t
        };
        assert!(bad.validate("energy").is_err());
    }

    fn random_denram(rng: &mut ChaCha8Rng, n_in: usize, n_d: usize, n_out: usize, dt: f64) -> DenramModel {
        let delays = Array2::from_shape_fn((n_in, n_d), |_| rng.gen_range(0.0..20.0 * dt));
        let bank = DelayBank::from_delays(delays, dt).unwrap();
        let lif = LifParams::new(0.9, 1.0).unwrap();
        DenramModel::init(bank, n_out, lif, ReadoutMode::MaxPotential, 0.9, rng).unwrap()
    }

    #[test]
    fn event_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_denram(&mut rng, 1, 8, 1, 1e-3);
        let r = SpikeRaster::from_events(1, 10, 1e-3, [(0, 3, 1)]).unwrap();
        let set = LabeledRasterSet::new(vec![crate::data::Sample { raster: r.clone(), label: 0 }], 1).unwrap();
        let stats = count_events(&Model::Denram(m.clone()), &set).unwrap();
        assert_eq!(stats.dendritic_events, 8);
        let empty = LabeledRasterSet::empty(set.layout, 1);
        assert_eq!(count_events(&Model::Denram(m.clone()), &empty).unwrap(), EventStats::default());

        // Brute-force recount from the expanded raster.
        let m = random_denram(&mut rng, 3, 4, 2, 1e-3);
        let events: Vec<_> = (0..30).map(|_| (rng.gen_range(0..3), rng.gen_range(0..25), rng.gen_range(1..3))).collect();
        let r = SpikeRaster::from_events(3, 25, 1e-3, events).unwrap();
        let set = LabeledRasterSet::new(vec![crate::data::Sample { raster: r.clone(), label: 0 }], 2).unwrap();
        let stats = count_events(&Model::Denram(m.clone()), &set).unwrap();
        assert_eq!(stats.dendritic_events, expand_with_delays(&r, &m.bank).unwrap().total_spikes());
    }

    /// `current[o][t] = Σ_i Σ_k profile[i][k]·x_i[t − k]`.
    fn convolve(r: &SpikeRaster, profile: &Array2<f64>, steps: usize) -> Vec<f64> {
        let mut out = vec![0.0; steps];
        for t in 0..steps {
            for i in 0..r.n_channels() {
                for k in 0..profile.ncols().min(t + 1) {
                    if t - k < r.n_steps() {
                        out[t] += profile[[i, k]] * f64::from(r.get(i, t - k));
                    }
                }
            }
        }
        out
    }

    #[test]
    fn aggregation_matches_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let m = random_denram(&mut rng, 3, 5, 2, 1e-3);
            let events: Vec<_> = (0..15).map(|_| (rng.gen_range(0..3), rng.gen_range(0..30), 1)).collect();
            let r = SpikeRaster::from_events(3, 30, 1e-3, events).unwrap();
            let current = dendritic_current(&expand_with_delays(&r, &m.bank).unwrap(), &m.weights).unwrap();
            for o in 0..2 {
                let p = aggregate_weight_delay(&m, o).unwrap();
                let conv = convolve(&r, &p, current.ncols());
                for t in 0..current.ncols() {
                    assert!((conv[t] - current[[o, t]]).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn aggregation_edges() {
        let bank = DelayBank::from_delays(ndarray::array![[3e-3], [1e-3]], 1e-3).unwrap();
        let lif = LifParams::new(0.9, 1.0).unwrap();
        let m = DenramModel::new(bank, ndarray::array![[0.5], [-2.0]], lif, ReadoutMode::MaxPotential, 0.9).unwrap();
        let p = aggregate_weight_delay(&m, 0).unwrap();
        assert_eq!(p, ndarray::array![[0.0, 0.0, 0.0, 0.5], [0.0, -2.0, 0.0, 0.0]]);
        assert!(aggregate_weight_delay(&m, 1).is_err());
        let zero = DenramModel { weights: Array2::zeros((2, 1)), ..m };
        assert!(aggregate_weight_delay(&zero, 0).unwrap().iter().all(|&v| v == 0.0));
    }

    fn tiny_task() -> SweepTask {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let set = crate::data::synth_coincidence_dataset(60, &[0.01, 0.03], 0.0, 1e-3, 60, &mut rng).unwrap();
        let (train_set, val) = crate::data::split_train_val(&set, 0.8, 0).unwrap();
        SweepTask {
            test: val.clone(),
            train: train_set,
            val,
            n_delays: 4,
            lif: LifParams::new(0.9, 1.0).unwrap(),
            alpha_out: 0.9,
            eval_noise: 0.1,
            eval_realizations: 2,
        }
    }

    #[test]
    fn sweeps_are_shaped_and_reproducible() {
        let task = tiny_task();
        let cfg = TrainConfig {
            epochs_pretrain: 2,
            epochs_noise_aware: 1,
            learning_rate: 0.01,
            batch_size: 16,
            ..TrainConfig::default()
        };
        let one = sweep_delay_distribution(&task, &[0.02], &[0.5], &cfg, &[0]).unwrap();
        assert_eq!(one.len(), 1);
        let grid = sweep_delay_distribution(&task, &[0.01, 0.02], &[0.25, 0.5], &cfg, &[0, 1]).unwrap();
        assert_eq!(grid.len(), 8);
        assert_eq!(delay_grid_csv(&grid).lines().count(), 9);
        assert_eq!(grid, sweep_delay_distribution(&task, &[0.01, 0.02], &[0.25, 0.5], &cfg, &[0, 1]).unwrap());
        assert_eq!(summarize_delay_grid(&grid).len(), 4);
        let hidden = sweep_hidden_size(&task, &[2, 4], &cfg, &[0]).unwrap();
        assert_eq!(hidden.iter().map(|c| c.n_hidden).collect::<Vec<_>>(), vec![2, 4]);
        assert!(sweep_delay_distribution(&task, &[], &[0.5], &cfg, &[0]).is_err());
    }
}
