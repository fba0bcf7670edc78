//! Experiment orchestration behind the `denram` command line.
//!
//! Every command writes its results as CSV/JSON files into an output
//! directory together with a `manifest.json` holding the command, crate
//! version, seed, config hash and input digests.

pub mod cli;
mod config;

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::*;

use crate::analysis::{
    count_events, count_footprint, delay_grid_csv, estimate_power, footprint_ratios, hidden_grid_csv,
    summarize_delay_grid, sweep_delay_distribution, sweep_hidden_size, Architecture, DeviceConvention,
    FootprintRatios, FootprintReport, PowerReport, SweepTask,
};
use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::data::{
    interquartile_range, load_ecg_segments, load_raster_dataset, read_ecg_record, read_eras, read_event_csv,
    rebin, split_train_val, subsample_channels, synth_coincidence_dataset, synth_lag_dataset, to_eras_binary,
    to_eras_text, write_eras_text, DeltaModParams, EcgParams, LabeledRasterSet, RasterLoadOptions, Sample, Split,
    delta_modulate,
};
use crate::dendrite::DelayBank;
use crate::device::NoiseModel;
use crate::error::{Error, Result};
use crate::learn::{accuracy, evaluate, train, EvalReport, TrainConfig};
use crate::network::{coincidence_experiment, decay, denram_forward, CoincidenceSetup, DenramModel, LifParams, Model, SrnnModel};

/// Splits used by one experiment.
#[derive(Debug, Clone)]
pub struct TaskData {
    pub train: LabeledRasterSet,
    pub val: LabeledRasterSet,
    pub test: LabeledRasterSet,
}

/// Independent RNG stream `stream` of the master seed.
pub fn seeded_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const STREAM_DATA: u64 = 1;
const STREAM_MODEL: u64 = 2;
const STREAM_EVAL: u64 = 3;
const STREAM_DEVICE: u64 = 4;

fn slice_set(set: &LabeledRasterSet, range: std::ops::Range<usize>, split: Split) -> LabeledRasterSet {
    LabeledRasterSet {
        samples: set.samples[range].to_vec(),
        n_classes: set.n_classes,
        layout: set.layout,
        split,
    }
}

fn three_way(set: LabeledRasterSet, n_train: usize, n_val: usize) -> TaskData {
    let n = set.len();
    TaskData {
        train: slice_set(&set, 0..n_train, Split::Train),
        val: slice_set(&set, n_train..n_train + n_val, Split::Val),
        test: slice_set(&set, n_train + n_val..n, Split::Test),
    }
}

pub fn build_task(cfg: &ExperimentConfig) -> Result<TaskData> {
    let mut rng = seeded_stream(cfg.seed, STREAM_DATA);
    match &cfg.task {
        TaskConfig::SynthCoincidence(t) => {
            let n = t.n_train + t.n_val + t.n_test;
            let set = synth_coincidence_dataset(n, &t.lags, t.jitter, t.dt, t.n_steps, &mut rng)?;
            Ok(three_way(set, t.n_train, t.n_val))
        }
        TaskConfig::SynthLag(t) => {
            let set = synth_lag_dataset(t.n_train + t.n_val + t.n_test, &t.params, &mut rng)?;
            Ok(three_way(set, t.n_train, t.n_val))
        }
        TaskConfig::Ecg(t) => {
            let ds = load_ecg_segments(&t.record, &t.annotations, &t.params)?;
            let (train_set, val) = holdout(&ds.train, t.val_fraction, cfg.seed)?;
            Ok(TaskData {
                train: train_set,
                val,
                test: ds.test,
            })
        }
        TaskConfig::RasterKws(t) => {
            let full = load_raster_dataset(&t.train, &t.load)?;
            let (pool, test) = match &t.test {
                Some(p) => (full, load_raster_dataset(p, &t.load)?),
                None => holdout(&full, t.test_fraction, cfg.seed.wrapping_add(1))?,
            };
            let (mut train_set, mut val) = holdout(&pool, t.val_fraction, cfg.seed)?;
            let mut test = test.with_split(Split::Test);
            if let Some(s) = t.subsample {
                train_set = subsample_channels(&train_set, s.group_size, s.n_groups)?;
                val = subsample_channels(&val, s.group_size, s.n_groups)?;
                test = subsample_channels(&test, s.group_size, s.n_groups)?;
            }
            Ok(TaskData { train: train_set, val, test })
        }
    }
}

/// Stratified split keeping `1 − fraction` for the first part.
fn holdout(set: &LabeledRasterSet, fraction: f64, seed: u64) -> Result<(LabeledRasterSet, LabeledRasterSet)> {
    if fraction == 0.0 {
        return Ok((set.clone().with_split(Split::Train), LabeledRasterSet::empty(set.layout, set.n_classes)));
    }
    split_train_val(set, 1.0 - fraction, seed)
}

/// Untrained model sized for `data`.
pub fn build_model(cfg: &ExperimentConfig, data: &TaskData) -> Result<Model> {
    let mut rng = seeded_stream(cfg.seed, STREAM_MODEL);
    let l = data.train.layout;
    let n_out = data.train.n_classes.max(2);
    match &cfg.model {
        ModelConfig::Denram(m) => {
            let n_out = if m.single_output {
                if data.train.n_classes > 2 {
                    return Err(Error::config(
                        "model.single_output",
                        format!("needs a binary task, dataset has {} classes", data.train.n_classes),
                    ));
                }
                1
            } else {
                n_out
            };
            let dist = m.delays.distribution("model.delays")?;
            let bank = DelayBank::sample(&dist, l.n_channels, m.n_delays, l.dt, &mut rng)?;
            let lif = LifParams::from_tau(m.tau_mem, l.dt, m.v_threshold)?;
            let mut model = DenramModel::init(bank, n_out, lif, m.readout, decay(m.tau_out, l.dt)?, &mut rng)?;
            model.delay_seed = cfg.seed;
            if m.single_output {
                calibrate_threshold(&mut model, &data.train)?;
            }
            Ok(Model::Denram(model))
        }
        ModelConfig::Srnn(m) => {
            let mut lif = LifParams::from_tau(m.tau_mem, l.dt, m.v_threshold)?;
            lif.refractory_bins = m.refractory_bins;
            let model = SrnnModel::init(l.n_channels, m.n_hidden, n_out, lif, decay(m.tau_out, l.dt)?, &mut rng)?;
            Ok(Model::Srnn(model))
        }
    }
}

/// Places a single output's threshold at the quantile of initial training
/// peaks that matches the class-1 prior, so training starts from centred logits.
fn calibrate_threshold(model: &mut DenramModel, train: &LabeledRasterSet) -> Result<()> {
    if train.samples.len() < 2 {
        return Ok(());
    }
    let theta = model.lif.v_threshold;
    let mut peaks = train
        .samples
        .iter()
        .map(|s| Ok(denram_forward(model, &s.raster)?.logits[0] + theta))
        .collect::<Result<Vec<f64>>>()?;
    peaks.sort_by(f64::total_cmp);
    let positives = train.samples.iter().filter(|s| s.label == 1).count();
    let k = (peaks.len() - positives).clamp(1, peaks.len() - 1);
    model.lif.v_threshold = 0.5 * (peaks[k - 1] + peaks[k]);
    Ok(())
}

fn io_write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes") + "\n"
}

fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config_sha256: Option<String>,
    /// `(name, sha256)` of every input file.
    pub inputs: Vec<(String, String)>,
    pub outputs: Vec<String>,
}

impl Manifest {
    fn new(command: &str, seed: u64, cfg: Option<&ExperimentConfig>) -> Self {
        Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config_sha256: cfg.map(ExperimentConfig::hash),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push((path.display().to_string(), file_sha256(path)?));
        Ok(())
    }

    fn write(mut self, dir: &Path) -> Result<()> {
        self.outputs.sort();
        io_write(&dir.join("manifest.json"), to_json(&self))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub model: String,
    pub trainable_parameters: usize,
    pub best_epoch: Option<usize>,
    pub val_accuracy: Option<f64>,
    pub test_accuracy: f64,
    /// Mean test accuracy under `train.noise` over `eval.realizations` draws.
    pub test_accuracy_noisy: f64,
    pub test_accuracy_noisy_std: f64,
    pub noise_relative_std: f64,
}

fn model_kind(m: &Model) -> &'static str {
    match m {
        Model::Denram(_) => "denram",
        Model::Srnn(_) => "srnn",
    }
}

fn parameters(m: &Model) -> usize {
    count_footprint(Architecture::of(m), DeviceConvention::TwoPerWeightPlusDelay).trainable_parameters
}

/// Builds the task, trains, and writes `checkpoint.bin`, `history.csv`,
/// `metrics.json`, `test.eras`, the resolved `config.toml` and the manifest.
pub fn cmd_train(cfg: &ExperimentConfig, out: &Path) -> Result<TrainSummary> {
    let cfg = cfg.clone().resolved();
    cfg.validate(true)?;
    let data = build_task(&cfg)?;
    let model = build_model(&cfg, &data)?;
    let (trained, history) = train(model, &data.train, &data.val, &cfg.train)?;

    let noise = NoiseModel::new(cfg.train.noise.relative_std, cfg.seed);
    let mut rng = seeded_stream(cfg.seed, STREAM_EVAL);
    let noisy = evaluate(&trained, &data.test, &noise, cfg.eval.realizations, &mut rng)?;
    let summary = TrainSummary {
        model: model_kind(&trained).to_string(),
        trainable_parameters: parameters(&trained),
        best_epoch: history.best_epoch,
        val_accuracy: history
            .best_epoch
            .and_then(|e| history.epochs.get(e - 1))
            .map(|r| r.val_acc),
        test_accuracy: accuracy(&trained, &data.test)?,
        test_accuracy_noisy: noisy.mean_accuracy,
        test_accuracy_noisy_std: noisy.std_accuracy,
        noise_relative_std: noise.relative_std,
    };

    ensure_dir(out)?;
    let mut manifest = Manifest::new("train", cfg.seed, Some(&cfg));
    if let TaskConfig::Ecg(t) = &cfg.task {
        manifest.input(&t.record)?;
        manifest.input(&t.annotations)?;
    }
    if let TaskConfig::RasterKws(t) = &cfg.task {
        manifest.input(&t.train)?;
        if let Some(p) = &t.test {
            manifest.input(p)?;
        }
    }
    save_checkpoint(&out.join("checkpoint.bin"), &trained)?;
    io_write(&out.join("history.csv"), history.to_csv())?;
    io_write(&out.join("metrics.json"), to_json(&summary))?;
    write_eras_text(&out.join("test.eras"), &data.test)?;
    io_write(&out.join("config.toml"), cfg.to_toml())?;
    manifest.outputs = ["checkpoint.bin", "history.csv", "metrics.json", "test.eras", "config.toml"]
        .map(String::from)
        .to_vec();
    manifest.write(out)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseLevelResult {
    pub noise: f64,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub levels: Vec<NoiseLevelResult>,
    /// Whether mean accuracy never rises with noise. Reported, not enforced.
    pub monotone_non_increasing: bool,
}

fn check_compatible(model: &Model, set: &LabeledRasterSet) -> Result<()> {
    let l = set.layout;
    if model.n_in() != l.n_channels {
        return Err(Error::config(
            "data",
            format!("checkpoint expects {} input channels, dataset has {}", model.n_in(), l.n_channels),
        ));
    }
    if let Model::Denram(m) = model {
        if !crate::SpikeRaster::same_dt(m.bank.dt(), l.dt) {
            return Err(Error::config(
                "data",
                format!("checkpoint bins at {} s, dataset at {} s", m.bank.dt(), l.dt),
            ));
        }
    }
    if set.n_classes > model.n_out().max(2) {
        return Err(Error::config(
            "data",
            format!("dataset has {} classes, checkpoint {} outputs", set.n_classes, model.n_out()),
        ));
    }
    Ok(())
}

/// Accuracy at each noise level; writes `eval.csv` and `eval.json`.
pub fn cmd_eval(
    checkpoint: &Path,
    dataset: &Path,
    levels: &[f64],
    realizations: usize,
    seed: u64,
    out: &Path,
) -> Result<EvalSummary> {
    if levels.is_empty() || realizations == 0 {
        return Err(Error::config("eval", "need at least one noise level and one realization"));
    }
    if let Some(bad) = levels.iter().find(|n| !(**n >= 0.0 && n.is_finite())) {
        return Err(Error::config("eval.noise_levels", format!("invalid level {bad}")));
    }
    if !dataset.exists() {
        return Err(Error::config("data", format!("{} does not exist", dataset.display())));
    }
    let model = load_checkpoint(checkpoint)?;
    let set = read_eras(dataset)?;
    check_compatible(&model, &set)?;
    let mut results = Vec::with_capacity(levels.len());
    for (k, &noise) in levels.iter().enumerate() {
        let mut rng = seeded_stream(seed, STREAM_EVAL + k as u64);
        let report = evaluate(&model, &set, &NoiseModel::new(noise, seed), realizations, &mut rng)?;
        results.push(NoiseLevelResult { noise, report });
    }
    let monotone = results
        .windows(2)
        .all(|w| w[1].report.mean_accuracy <= w[0].report.mean_accuracy);
    let summary = EvalSummary {
        levels: results,
        monotone_non_increasing: monotone,
    };
    ensure_dir(out)?;
    let mut csv = String::from("noise,mean_accuracy,std_accuracy\n");
    for r in &summary.levels {
        csv.push_str(&format!("{},{},{}\n", r.noise, r.report.mean_accuracy, r.report.std_accuracy));
    }
    io_write(&out.join("eval.csv"), csv)?;
    io_write(&out.join("eval.json"), to_json(&summary))?;
    let mut manifest = Manifest::new("eval", seed, None);
    manifest.input(checkpoint)?;
    manifest.input(dataset)?;
    manifest.outputs = vec!["eval.csv".into(), "eval.json".into()];
    manifest.write(out)?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdRow {
    pub lag_s: f64,
    pub peak_potential: f64,
    pub fired: bool,
}

/// Lags of the sweep as integer multiples of the step, so the grid is
/// reproduced exactly.
fn lag_grid(cd: &CdDemoConfig) -> Vec<f64> {
    let n = ((cd.lag_max - cd.lag_min) / cd.lag_step + 1e-9).floor() as usize;
    (0..=n)
        .map(|k| ((cd.lag_min + k as f64 * cd.lag_step) * 1e12).round() / 1e12)
        .collect()
}

/// Whether the fired lags form one contiguous run.
pub fn single_fired_window(rows: &[CdRow]) -> bool {
    let fired: Vec<usize> = rows.iter().enumerate().filter(|(_, r)| r.fired).map(|(k, _)| k).collect();
    fired.windows(2).all(|w| w[1] == w[0] + 1)
}

/// Coincidence tuning curve; writes `cd_demo.csv`.
pub fn cmd_cd_demo(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<CdRow>> {
    cfg.validate(false)?;
    let cd = &cfg.cd_demo;
    let mut rng = seeded_stream(cfg.seed, STREAM_DEVICE);
    let setup = CoincidenceSetup::from_devices(&cd.delays, cd.strong, &cfg.device, cd.tau_mem, cd.dt, &mut rng)?;
    let rows = lag_grid(cd)
        .into_iter()
        .map(|lag| {
            coincidence_experiment(&setup, lag).map(|o| CdRow {
                lag_s: lag,
                peak_potential: o.peak_potential,
                fired: o.fired,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ensure_dir(out)?;
    let mut csv = String::from("lag_s,peak_potential,fired\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{}\n", r.lag_s, r.peak_potential, r.fired));
    }
    io_write(&out.join("cd_demo.csv"), csv)?;
    let mut manifest = Manifest::new("cd-demo", cfg.seed, Some(cfg));
    manifest.outputs = vec!["cd_demo.csv".into()];
    manifest.write(out)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub delay_cells: usize,
    pub hidden_cells: usize,
    /// `(mean_s, sigma, mean accuracy, std)` per grid point.
    pub delay_summary: Vec<(f64, f64, f64, f64)>,
}

/// Delay-distribution sweep and, when configured, the hidden-size sweep;
/// writes `delay_grid.csv` and `hidden_grid.csv`.
pub fn cmd_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<SweepSummary> {
    let cfg = cfg.clone().resolved();
    cfg.validate(true)?;
    let s = &cfg.sweep;
    let data = build_task(&cfg)?;
    let (lif, alpha_out, n_delays) = match &cfg.model {
        ModelConfig::Denram(m) => (
            LifParams::from_tau(m.tau_mem, data.train.layout.dt, m.v_threshold)?,
            decay(m.tau_out, data.train.layout.dt)?,
            m.n_delays,
        ),
        ModelConfig::Srnn(m) => (
            LifParams::from_tau(m.tau_mem, data.train.layout.dt, m.v_threshold)?,
            decay(m.tau_out, data.train.layout.dt)?,
            DenramConfig::default().n_delays,
        ),
    };
    let task = SweepTask {
        train: data.train,
        val: data.val,
        test: data.test,
        n_delays,
        lif,
        alpha_out,
        eval_noise: s.eval_noise,
        eval_realizations: s.realizations,
    };
    ensure_dir(out)?;
    let mut manifest = Manifest::new("sweep", cfg.seed, Some(&cfg));
    let mut summary = SweepSummary {
        delay_cells: 0,
        hidden_cells: 0,
        delay_summary: Vec::new(),
    };
    if !s.means.is_empty() {
        let cells = sweep_delay_distribution(&task, &s.means, &s.sigmas, &cfg.train, &s.seeds)?;
        io_write(&out.join("delay_grid.csv"), delay_grid_csv(&cells))?;
        manifest.outputs.push("delay_grid.csv".into());
        summary.delay_cells = cells.len();
        summary.delay_summary = summarize_delay_grid(&cells);
    }
    if !s.hidden_sizes.is_empty() {
        let mut srnn_lif = lif;
        if let ModelConfig::Srnn(m) = &cfg.model {
            srnn_lif.refractory_bins = m.refractory_bins;
        }
        let task = SweepTask { lif: srnn_lif, ..task };
        let cells = sweep_hidden_size(&task, &s.hidden_sizes, &cfg.train, &s.seeds)?;
        io_write(&out.join("hidden_grid.csv"), hidden_grid_csv(&cells))?;
        manifest.outputs.push("hidden_grid.csv".into());
        summary.hidden_cells = cells.len();
    }
    if manifest.outputs.is_empty() {
        return Err(Error::config("sweep", "both the delay grid and hidden_sizes are empty"));
    }
    manifest.write(out)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run: String,
    pub model: String,
    pub footprints: Vec<FootprintReport>,
    pub power: PowerReport,
    pub events: crate::analysis::EventStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub runs: Vec<RunReport>,
    /// Size of every later run relative to the first, per convention.
    pub ratios: Vec<(DeviceConvention, Vec<FootprintRatios>)>,
}

fn run_file(dir: &Path, name: &str) -> Result<PathBuf> {
    let p = dir.join(name);
    if !p.is_file() {
        return Err(Error::config(
            "run",
            format!("{} has no {name}; expected the output directory of `train`", dir.display()),
        ));
    }
    Ok(p)
}

/// Footprint under both device conventions and power estimated from the
/// event rates on the run's test split; writes `report.json`.
pub fn cmd_report(run_dirs: &[PathBuf], out: &Path) -> Result<Report> {
    if run_dirs.is_empty() {
        return Err(Error::config("run", "no run directory given"));
    }
    let conventions = [DeviceConvention::TwoPerWeightPlusDelay, DeviceConvention::FourPerSynapse];
    let mut runs = Vec::new();
    let mut manifest = Manifest::new("report", 0, None);
    for dir in run_dirs {
        let ck = run_file(dir, "checkpoint.bin")?;
        let test = run_file(dir, "test.eras")?;
        let cfg_path = run_file(dir, "config.toml")?;
        let cfg = ExperimentConfig::load(&cfg_path)?;
        let model = load_checkpoint(&ck)?;
        let set = read_eras(&test)?;
        check_compatible(&model, &set)?;
        let events = count_events(&model, &set)?;
        let power = estimate_power(&events.rates(), &cfg.energy)?;
        let arch = Architecture::of(&model);
        for p in [&ck, &test, &cfg_path] {
            manifest.input(p)?;
        }
        runs.push(RunReport {
            run: dir.display().to_string(),
            model: model_kind(&model).to_string(),
            footprints: conventions.iter().map(|&c| count_footprint(arch, c)).collect(),
            power,
            events,
        });
    }
    let ratios = conventions
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let base = &runs[0].footprints[k];
            (c, runs[1..].iter().map(|r| footprint_ratios(base, &r.footprints[k])).collect())
        })
        .collect();
    let report = Report { runs, ratios };
    ensure_dir(out)?;
    io_write(&out.join("report.json"), to_json(&report))?;
    manifest.outputs = vec!["report.json".into()];
    manifest.write(out)?;
    Ok(report)
}

/// Delta-modulates a `sample_index,value` CSV into a one-sample ERAS file.
/// Unset `delta` uses 0.1 × the signal's interquartile range; unset
/// `initial` starts the reconstruction at the first sample.
pub fn cmd_encode(input: &Path, delta: Option<f64>, initial: Option<f64>, dt: f64, out_file: &Path) -> Result<()> {
    if !input.exists() {
        return Err(Error::config("input", format!("{} does not exist", input.display())));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::config("dt", "must be > 0"));
    }
    let signal = read_ecg_record(input)?;
    let first = *signal
        .first()
        .ok_or_else(|| Error::config("input", format!("{} holds no samples", input.display())))?;
    let delta = delta.unwrap_or_else(|| 0.1 * interquartile_range(&signal));
    if !(delta > 0.0) {
        return Err(Error::config("delta", "must be > 0 (signal has zero interquartile range)"));
    }
    let raster = delta_modulate(
        &signal,
        DeltaModParams {
            delta,
            initial: initial.unwrap_or(first),
        },
        dt,
    )?;
    let set = LabeledRasterSet::new(vec![Sample { raster, label: 0 }], 1)?;
    write_eras_text(out_file, &set)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ConvertFrom {
    /// `sample,label,time_s,channel` spike listings.
    EventsCsv,
    /// ECG record plus annotations; writes `train.eras` and `test.eras`.
    Ecg,
    /// ERAS text or binary, re-encoded and re-binned.
    Eras,
}

/// Converts a dataset to ERAS files in `out`; returns the written paths.
pub fn cmd_convert(
    from: ConvertFrom,
    input: &Path,
    annotations: Option<&Path>,
    load: &RasterLoadOptions,
    binary: bool,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    if !input.exists() {
        return Err(Error::config("input", format!("{} does not exist", input.display())));
    }
    let ext = if binary { "erasb" } else { "eras" };
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset").to_string();
    let sets: Vec<(String, LabeledRasterSet)> = match from {
        ConvertFrom::EventsCsv => vec![(stem, read_event_csv(input, load)?)],
        ConvertFrom::Eras => vec![(stem, rebin(&read_eras(input)?, load)?)],
        ConvertFrom::Ecg => {
            let ann = annotations.ok_or_else(|| Error::config("annotations", "required for ECG input"))?;
            if !ann.exists() {
                return Err(Error::config("annotations", format!("{} does not exist", ann.display())));
            }
            let ds = load_ecg_segments(input, ann, &EcgParams::default())?;
            vec![("train".into(), ds.train), ("test".into(), ds.test)]
        }
    };
    ensure_dir(out)?;
    let mut written = Vec::new();
    for (name, set) in sets {
        let path = out.join(format!("{name}.{ext}"));
        let bytes = if binary { to_eras_binary(&set) } else { to_eras_text(&set).into_bytes() };
        io_write(&path, bytes)?;
        written.push(path);
    }
    Ok(written)
}

/// Process exit status for an error: 2 for bad input or configuration,
/// 3 for failures while loading or running.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::Parse { .. } => 2,
        Error::Io { .. } | Error::Domain(_) => 3,
    }
}

/// Default noise-free and noisy evaluation of a trained model, used by the
/// examples and tests.
pub fn noisy_accuracy(model: &Model, set: &LabeledRasterSet, noise: f64, realizations: usize, seed: u64) -> Result<EvalReport> {
    let mut rng = seeded_stream(seed, STREAM_EVAL);
    evaluate(model, set, &NoiseModel::new(noise, seed), realizations, &mut rng)
}

/// Trains `model` on `data` with `cfg`.
pub fn fit(model: Model, data: &TaskData, cfg: &TrainConfig) -> Result<Model> {
    Ok(train(model, &data.train, &data.val, cfg)?.0)
}
