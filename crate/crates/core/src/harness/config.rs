use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::EnergyTable;
use crate::data::{EcgParams, LagTaskParams, RasterLoadOptions};
use crate::dendrite::AnalogCircuitParams;
use crate::device::{DelayDistribution, DeviceConfig};
use crate::error::{Error, Result};
use crate::learn::TrainConfig;
use crate::network::ReadoutMode;

/// One experiment, read from a TOML file. Every section is optional and
/// falls back to its defaults; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Master seed. Data generation, delay sampling, weight init and
    /// shuffling derive from it; `train.seed` and `train.noise.seed` are
    /// overwritten with values derived from it.
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Worker threads; unset uses every available core.
    pub threads: Option<usize>,
    pub task: TaskConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub device: DeviceConfig,
    pub circuit: AnalogCircuitParams,
    pub energy: EnergyTable,
    pub sweep: SweepConfig,
    pub cd_demo: CdDemoConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            out_dir: PathBuf::from("runs/default"),
            threads: None,
            task: TaskConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig {
                learning_rate: 0.01,
                ..TrainConfig::default()
            },
            eval: EvalConfig::default(),
            device: DeviceConfig::default(),
            circuit: AnalogCircuitParams::default(),
            energy: EnergyTable::default(),
            sweep: SweepConfig::default(),
            cd_demo: CdDemoConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskConfig {
    SynthCoincidence(SynthCoincidenceTask),
    SynthLag(SynthLagTask),
    Ecg(EcgTask),
    RasterKws(RasterKwsTask),
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig::SynthCoincidence(SynthCoincidenceTask::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthCoincidenceTask {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    /// Lag between the two channels per class, seconds.
    pub lags: Vec<f64>,
    pub jitter: f64,
    pub dt: f64,
    pub n_steps: usize,
}

impl Default for SynthCoincidenceTask {
    fn default() -> Self {
        SynthCoincidenceTask {
            n_train: 200,
            n_val: 50,
            n_test: 50,
            lags: vec![0.01, 0.04],
            jitter: 0.0,
            dt: 1e-3,
            n_steps: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthLagTask {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub params: LagTaskParams,
}

impl Default for SynthLagTask {
    fn default() -> Self {
        SynthLagTask {
            n_train: 300,
            n_val: 100,
            n_test: 100,
            params: LagTaskParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EcgTask {
    /// CSV export `sample_index,value` of one lead.
    pub record: PathBuf,
    /// CSV `sample_index,symbol`.
    pub annotations: PathBuf,
    pub params: EcgParams,
    /// Share of the training half held out for validation.
    pub val_fraction: f64,
}

impl Default for EcgTask {
    fn default() -> Self {
        EcgTask {
            record: PathBuf::new(),
            annotations: PathBuf::new(),
            params: EcgParams::default(),
            val_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RasterKwsTask {
    /// ERAS file with the training (or full) dataset.
    pub train: PathBuf,
    /// Separate ERAS test file; without it `test_fraction` is held out.
    pub test: Option<PathBuf>,
    pub load: RasterLoadOptions,
    pub test_fraction: f64,
    pub val_fraction: f64,
    pub subsample: Option<SubsampleConfig>,
}

impl Default for RasterKwsTask {
    fn default() -> Self {
        RasterKwsTask {
            train: PathBuf::new(),
            test: None,
            load: RasterLoadOptions::default(),
            test_fraction: 0.2,
            val_fraction: 0.2,
            subsample: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsampleConfig {
    pub group_size: usize,
    pub n_groups: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Denram(DenramConfig),
    Srnn(SrnnConfig),
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::Denram(DenramConfig::default())
    }
}

/// Linear-space delay statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DelayConfig {
    pub mean: f64,
    /// Log-space standard deviation.
    pub sigma: f64,
    /// Clamp sampled delays into `[clip_min, clip_max]`.
    pub clip: bool,
    pub clip_min: f64,
    pub clip_max: f64,
}

impl Default for DelayConfig {
    fn default() -> Self {
        DelayConfig {
            mean: 22e-3,
            sigma: 0.5,
            clip: true,
            clip_min: 8.08e-3,
            clip_max: 58.26e-3,
        }
    }
}

impl DelayConfig {
    pub fn distribution(&self, path: &str) -> Result<DelayDistribution> {
        let dist = DelayDistribution::from_mean(self.mean, self.sigma)
            .map_err(|e| Error::config(path, e.to_string()))?;
        let dist = if self.clip {
            dist.with_clip(self.clip_min, self.clip_max)
                .map_err(|e| Error::config(format!("{path}.clip_min"), e.to_string()))?
        } else {
            dist
        };
        dist.validate(path)?;
        Ok(dist)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DenramConfig {
    pub n_delays: usize,
    pub delays: DelayConfig,
    pub readout: ReadoutMode,
    /// Output membrane time constant (LIF readout), seconds.
    pub tau_mem: f64,
    pub v_threshold: f64,
    /// Leaky-integrator readout time constant, seconds.
    pub tau_out: f64,
    /// Binary tasks only: one output whose peak is compared against a
    /// threshold calibrated on the training set at initialisation.
    pub single_output: bool,
}

impl Default for DenramConfig {
    fn default() -> Self {
        DenramConfig {
            n_delays: 8,
            delays: DelayConfig::default(),
            readout: ReadoutMode::MaxPotential,
            tau_mem: 20e-3,
            v_threshold: 1.0,
            tau_out: 20e-3,
            single_output: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SrnnConfig {
    pub n_hidden: usize,
    pub tau_mem: f64,
    pub v_threshold: f64,
    pub refractory_bins: usize,
    pub tau_out: f64,
}

impl Default for SrnnConfig {
    fn default() -> Self {
        SrnnConfig {
            n_hidden: 32,
            tau_mem: 20e-3,
            v_threshold: 1.0,
            refractory_bins: 0,
            tau_out: 20e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Relative weight-noise levels to evaluate.
    pub noise_levels: Vec<f64>,
    pub realizations: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            noise_levels: vec![0.0, 0.05, 0.1, 0.15, 0.2],
            realizations: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Linear-space delay means, seconds.
    pub means: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Recurrent hidden sizes; empty skips the hidden-size sweep.
    pub hidden_sizes: Vec<usize>,
    pub eval_noise: f64,
    pub realizations: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            means: vec![5e-3, 10e-3, 22e-3, 50e-3],
            sigmas: vec![0.5],
            seeds: vec![0, 1, 2],
            hidden_sizes: Vec::new(),
            eval_noise: 0.1,
            realizations: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CdDemoConfig {
    /// Delays of the IN1 branch, seconds.
    pub delays: Vec<f64>,
    /// Index of the LRS circuit in the branch; unset programs all to HRS.
    pub strong: Option<usize>,
    pub lag_min: f64,
    pub lag_max: f64,
    pub lag_step: f64,
    pub tau_mem: f64,
    pub dt: f64,
}

impl Default for CdDemoConfig {
    fn default() -> Self {
        CdDemoConfig {
            delays: vec![18e-3, 36e-3, 48e-3, 58e-3],
            strong: Some(3),
            lag_min: 0.0,
            lag_max: 0.12,
            lag_step: 1e-3,
            tau_mem: 20e-3,
            dt: 1e-3,
        }
    }
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be finite and > 0, got {v}")))
    }
}

fn fraction(path: &str, v: f64) -> Result<()> {
    if (0.0..1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::config(path, format!("must lie in [0, 1), got {v}")))
    }
}

fn existing(path: &str, p: &Path) -> Result<()> {
    if p.as_os_str().is_empty() {
        return Err(Error::config(path, "path is required"));
    }
    if !p.exists() {
        return Err(Error::config(path, format!("{} does not exist", p.display())));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(origin, e.message().to_string() + &span_hint(text, e.span())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::from_toml_str(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// SHA-256 of the canonical TOML rendering, excluding the output
    /// directory and thread count, which cannot change results.
    pub fn hash(&self) -> String {
        let canonical = ExperimentConfig {
            out_dir: PathBuf::new(),
            threads: None,
            ..self.clone()
        };
        let digest = Sha256::digest(canonical.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Validates every section; input files are checked for existence when
    /// `check_paths` is set.
    pub fn validate(&self, check_paths: bool) -> Result<()> {
        if self.threads == Some(0) {
            return Err(Error::config("threads", "must be ≥ 1"));
        }
        match &self.task {
            TaskConfig::SynthCoincidence(t) => {
                if t.n_train == 0 || t.n_test == 0 {
                    return Err(Error::config("task.n_train", "train and test sizes must be ≥ 1"));
                }
                if t.lags.len() < 2 {
                    return Err(Error::config("task.lags", "need at least two lag classes"));
                }
                positive("task.dt", t.dt)?;
                if t.n_steps == 0 {
                    return Err(Error::config("task.n_steps", "must be ≥ 1"));
                }
            }
            TaskConfig::SynthLag(t) => {
                if t.n_train == 0 || t.n_test == 0 {
                    return Err(Error::config("task.n_train", "train and test sizes must be ≥ 1"));
                }
                if t.params.lags.len() < 2 {
                    return Err(Error::config("task.params.lags", "need at least two lag classes"));
                }
                positive("task.params.dt", t.params.dt)?;
            }
            TaskConfig::Ecg(t) => {
                t.params.validate("task.params")?;
                fraction("task.val_fraction", t.val_fraction)?;
                if check_paths {
                    existing("task.record", &t.record)?;
                    existing("task.annotations", &t.annotations)?;
                }
            }
            TaskConfig::RasterKws(t) => {
                positive("task.load.dt", t.load.dt)?;
                if t.load.max_steps == 0 {
                    return Err(Error::config("task.load.max_steps", "must be ≥ 1"));
                }
                fraction("task.test_fraction", t.test_fraction)?;
                fraction("task.val_fraction", t.val_fraction)?;
                if let Some(s) = t.subsample {
                    if s.group_size == 0 || s.n_groups == 0 {
                        return Err(Error::config("task.subsample", "group_size and n_groups must be ≥ 1"));
                    }
                }
                if check_paths {
                    existing("task.train", &t.train)?;
                    if let Some(p) = &t.test {
                        existing("task.test", p)?;
                    }
                }
            }
        }
        match &self.model {
            ModelConfig::Denram(m) => {
                if m.n_delays == 0 {
                    return Err(Error::config("model.n_delays", "must be ≥ 1"));
                }
                m.delays.distribution("model.delays")?;
                positive("model.tau_mem", m.tau_mem)?;
                positive("model.tau_out", m.tau_out)?;
                positive("model.v_threshold", m.v_threshold)?;
            }
            ModelConfig::Srnn(m) => {
                if m.n_hidden == 0 {
                    return Err(Error::config("model.n_hidden", "must be ≥ 1"));
                }
                positive("model.tau_mem", m.tau_mem)?;
                positive("model.tau_out", m.tau_out)?;
                positive("model.v_threshold", m.v_threshold)?;
            }
        }
        self.train.validate("train")?;
        if self.eval.realizations == 0 {
            return Err(Error::config("eval.realizations", "must be ≥ 1"));
        }
        for (k, &n) in self.eval.noise_levels.iter().enumerate() {
            if !(n >= 0.0 && n.is_finite()) {
                return Err(Error::config(format!("eval.noise_levels[{k}]"), "must be finite and ≥ 0"));
            }
        }
        self.device.validate("device")?;
        self.circuit.validate("circuit")?;
        self.energy.validate("energy")?;
        let s = &self.sweep;
        for (k, &m) in s.means.iter().enumerate() {
            positive(&format!("sweep.means[{k}]"), m)?;
        }
        for (k, &v) in s.sigmas.iter().enumerate() {
            positive(&format!("sweep.sigmas[{k}]"), v)?;
        }
        if s.realizations == 0 {
            return Err(Error::config("sweep.realizations", "must be ≥ 1"));
        }
        if !(s.eval_noise >= 0.0) {
            return Err(Error::config("sweep.eval_noise", "must be ≥ 0"));
        }
        let cd = &self.cd_demo;
        if cd.delays.is_empty() {
            return Err(Error::config("cd_demo.delays", "must be non-empty"));
        }
        if let Some(k) = cd.strong {
            if k >= cd.delays.len() {
                return Err(Error::config("cd_demo.strong", "index beyond the delay list"));
            }
        }
        positive("cd_demo.lag_step", cd.lag_step)?;
        positive("cd_demo.dt", cd.dt)?;
        positive("cd_demo.tau_mem", cd.tau_mem)?;
        if !(cd.lag_max >= cd.lag_min && cd.lag_min >= 0.0) {
            return Err(Error::config("cd_demo.lag_max", "need 0 ≤ lag_min ≤ lag_max"));
        }
        Ok(())
    }

    /// Applies the master seed to the training sub-config.
    pub fn resolved(mut self) -> Self {
        self.train.seed = self.seed;
        self.train.noise.seed = self.seed.wrapping_add(1);
        self
    }
}

fn span_hint(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(r) => {
            let line = text[..r.start.min(text.len())].matches('\n').count() + 1;
            format!(" (line {line})")
        }
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = ExperimentConfig::default();
        c.validate(false).unwrap();
        let back = ExperimentConfig::from_toml_str(&c.to_toml(), "t").unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn parses_tagged_sections() {
        let text = r#"
seed = 3
out_dir = "runs/x"

[task]
kind = "synth_lag"
n_train = 20

[task.params]
n_channels = 16

[model]
kind = "srnn"
n_hidden = 8

[train]
epochs_pretrain = 2
surrogate = { boxcar = { width = 0.5 } }
optimizer = "sgd"
"#;
        let c = ExperimentConfig::from_toml_str(text, "t").unwrap();
        c.validate(false).unwrap();
        assert!(matches!(&c.task, TaskConfig::SynthLag(t) if t.n_train == 20 && t.params.n_channels == 16));
        assert!(matches!(&c.model, ModelConfig::Srnn(m) if m.n_hidden == 8));
        let back = ExperimentConfig::from_toml_str(&c.to_toml(), "t").unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in ["sed = 1", "[task]\nkind = \"synth_coincidence\"\nlagz = [1]", "[model]\nkind = \"denram\"\nn_delay = 3"] {
            let err = ExperimentConfig::from_toml_str(text, "cfg.toml").unwrap_err();
            assert!(matches!(err, Error::Config { .. }), "{text}");
        }
    }

    #[test]
    fn errors_name_the_field() {
        let mut c = ExperimentConfig::default();
        c.train.batch_size = 0;
        assert!(c.validate(false).unwrap_err().to_string().starts_with("train.batch_size"));
        let mut c = ExperimentConfig::default();
        if let ModelConfig::Denram(m) = &mut c.model {
            m.delays.sigma = -1.0;
        }
        assert!(c.validate(false).unwrap_err().to_string().starts_with("model.delays"));
        let c = ExperimentConfig {
            task: TaskConfig::Ecg(EcgTask {
                record: "/nonexistent/rec.csv".into(),
                annotations: "/nonexistent/ann.csv".into(),
                ..EcgTask::default()
            }),
            ..ExperimentConfig::default()
        };
        c.validate(false).unwrap();
        let msg = c.validate(true).unwrap_err().to_string();
        assert!(msg.contains("task.record") && msg.contains("/nonexistent/rec.csv"), "{msg}");
    }
}
