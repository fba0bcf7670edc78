//! Statistical RRAM device models.
//!
//! Three device roles are modeled:
//!
//! * pristine (unformed) devices whose GΩ-scale resistance sets the RC delay
//!   of a dendritic circuit,
//! * LRS devices programmed with one of eight SET levels, used as strong weights,
//! * HRS devices after RESET, used as weak weights.
//!
//! Read noise on programmed weights is modeled as additive Gaussian noise whose
//! standard deviation is a fraction of the largest absolute weight in a layer.

use ndarray::{Array, Dimension};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Resistive state of a device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeviceMode {
    Pristine,
    Lrs,
    Hrs,
}

/// One RRAM device after programming (or as fabricated).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceState {
    pub mode: DeviceMode,
    /// Siemens.
    pub conductance: f64,
    /// SET level, present for LRS devices only.
    pub level: Option<u8>,
}

impl DeviceState {
    pub fn resistance(&self) -> f64 {
        1.0 / self.conductance
    }

    /// Pristine device realizing `delay` seconds with capacitance `capacitance`.
    pub fn pristine_for_delay(delay: f64, capacitance: f64, cfg: &DeviceConfig) -> Result<Self> {
        let r = resistance_from_delay(delay, capacitance)?;
        if r < cfg.pristine_min {
            return Err(Error::domain(format!(
                "resistance {r:e} Ω is below the pristine floor {:e} Ω",
                cfg.pristine_min
            )));
        }
        Ok(DeviceState {
            mode: DeviceMode::Pristine,
            conductance: 1.0 / r,
            level: None,
        })
    }
}

/// Resistance bands and programming parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceConfig {
    /// Ohms.
    pub lrs_min: f64,
    pub lrs_max: f64,
    pub hrs_min: f64,
    pub hrs_max: f64,
    pub pristine_min: f64,
    /// Number of SET programming levels.
    pub set_levels: u8,
    /// Log-space std of the multiplicative jitter around each SET sub-band center.
    pub set_jitter: f64,
    /// Delay capacitor, farads.
    pub capacitance: f64,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        DeviceConfig {
            lrs_min: 8e3,
            lrs_max: 50e3,
            hrs_min: 60e3,
            hrs_max: 1e6,
            pristine_min: 1e9,
            set_levels: 8,
            set_jitter: 0.05,
            capacitance: 1e-12,
        }
    }
}

impl DeviceConfig {
    pub fn validate(&self, path: &str) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(format!("{path}.{name}"), "must be finite and > 0"))
            }
        };
        pos("lrs_min", self.lrs_min)?;
        pos("lrs_max", self.lrs_max)?;
        pos("hrs_min", self.hrs_min)?;
        pos("hrs_max", self.hrs_max)?;
        pos("pristine_min", self.pristine_min)?;
        pos("capacitance", self.capacitance)?;
        if self.lrs_min >= self.lrs_max {
            return Err(Error::config(format!("{path}.lrs_max"), "must exceed lrs_min"));
        }
        if self.hrs_min >= self.hrs_max {
            return Err(Error::config(format!("{path}.hrs_max"), "must exceed hrs_min"));
        }
        if self.set_levels == 0 {
            return Err(Error::config(format!("{path}.set_levels"), "must be ≥ 1"));
        }
        if !(self.set_jitter >= 0.0 && self.set_jitter.is_finite()) {
            return Err(Error::config(format!("{path}.set_jitter"), "must be finite and ≥ 0"));
        }
        Ok(())
    }

    /// Conductance that maps to a unit weight: the most conductive LRS edge.
    pub fn reference_conductance(&self) -> f64 {
        1.0 / self.lrs_min
    }

    /// Center resistance of the SET sub-band selected by `level`.
    pub fn set_band_center(&self, level: u8) -> f64 {
        let lo = self.lrs_min.ln();
        let width = (self.lrs_max.ln() - lo) / f64::from(self.set_levels);
        // Level 0 sits in the top (most resistive) band.
        let band = f64::from(self.set_levels - 1 - level);
        (lo + (band + 0.5) * width).exp()
    }
}

/// Log-normal delay distribution, parameterized in log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayDistribution {
    /// Mean of the underlying normal over ln(delay in seconds).
    pub mu: f64,
    /// Std of the underlying normal.
    pub sigma: f64,
    #[serde(default)]
    pub clip_min: Option<f64>,
    #[serde(default)]
    pub clip_max: Option<f64>,
}

impl DelayDistribution {
    /// Distribution whose linear-space mean is `mean` seconds.
    pub fn from_mean(mean: f64, sigma: f64) -> Result<Self> {
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(Error::config("delay.mean", "must be finite and > 0"));
        }
        let dist = DelayDistribution {
            mu: mean.ln() - 0.5 * sigma * sigma,
            sigma,
            clip_min: None,
            clip_max: None,
        };
        dist.validate("delay")?;
        Ok(dist)
    }

    /// Measured delay range of the fabricated circuits: 22 ms mean, σ = 0.5,
    /// clipped to [8.08, 58.26] ms.
    pub fn measured() -> Self {
        DelayDistribution::from_mean(22e-3, 0.5)
            .and_then(|d| d.with_clip(8.08e-3, 58.26e-3))
            .expect("measured delay distribution is valid")
    }

    pub fn with_clip(mut self, min: f64, max: f64) -> Result<Self> {
        self.clip_min = Some(min);
        self.clip_max = Some(max);
        self.validate("delay")?;
        Ok(self)
    }

    /// Linear-space mean, ignoring clipping.
    pub fn mean(&self) -> f64 {
        (self.mu + 0.5 * self.sigma * self.sigma).exp()
    }

    pub fn median(&self) -> f64 {
        self.mu.exp()
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::config(format!("{path}.mu"), "must be finite"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::config(format!("{path}.sigma"), "must be finite and > 0"));
        }
        for (name, v) in [("clip_min", self.clip_min), ("clip_max", self.clip_max)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::config(format!("{path}.{name}"), "must be finite and > 0"));
                }
            }
        }
        if let (Some(lo), Some(hi)) = (self.clip_min, self.clip_max) {
            if lo >= hi {
                return Err(Error::config(
                    format!("{path}.clip_max"),
                    "must exceed clip_min",
                ));
            }
        }
        Ok(())
    }

    fn clip(&self, d: f64) -> f64 {
        let d = self.clip_min.map_or(d, |lo| d.max(lo));
        self.clip_max.map_or(d, |hi| d.min(hi))
    }
}

/// Draw `n` delays (seconds) from `dist`, clamping into the clip range.
pub fn sample_delays<R: Rng + ?Sized>(
    dist: &DelayDistribution,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    dist.validate("delay")?;
    if n == 0 {
        return Err(Error::config("delay.n", "must sample at least one delay"));
    }
    let normal = Normal::new(dist.mu, dist.sigma)
        .map_err(|e| Error::config("delay.sigma", e.to_string()))?;
    Ok((0..n).map(|_| dist.clip(normal.sample(rng).exp())).collect())
}

/// Pristine resistance that yields `delay` on a capacitor of `capacitance` farads.
pub fn resistance_from_delay(delay: f64, capacitance: f64) -> Result<f64> {
    if !(delay > 0.0 && delay.is_finite()) {
        return Err(Error::domain(format!("delay must be > 0, got {delay}")));
    }
    if !(capacitance > 0.0 && capacitance.is_finite()) {
        return Err(Error::domain(format!(
            "capacitance must be > 0, got {capacitance}"
        )));
    }
    Ok(delay / capacitance)
}

/// SET a device to `level` (0 = weakest, `set_levels - 1` = most conductive).
pub fn program_set<R: Rng + ?Sized>(level: u8, cfg: &DeviceConfig, rng: &mut R) -> Result<DeviceState> {
    if level >= cfg.set_levels {
        return Err(Error::domain(format!(
            "SET level {level} out of range 0..{}",
            cfg.set_levels
        )));
    }
    let jitter: f64 = rng.sample(StandardNormal);
    let r = (cfg.set_band_center(level) * (cfg.set_jitter * jitter).exp())
        .clamp(cfg.lrs_min, cfg.lrs_max);
    Ok(DeviceState {
        mode: DeviceMode::Lrs,
        conductance: 1.0 / r,
        level: Some(level),
    })
}

/// RESET a device into the HRS band; resistance is log-uniform over the band.
pub fn program_reset<R: Rng + ?Sized>(cfg: &DeviceConfig, rng: &mut R) -> DeviceState {
    let (lo, hi) = (cfg.hrs_min.ln(), cfg.hrs_max.ln());
    let r = rng.gen_range(lo..=hi).exp().clamp(cfg.hrs_min, cfg.hrs_max);
    DeviceState {
        mode: DeviceMode::Hrs,
        conductance: 1.0 / r,
        level: None,
    }
}

/// Weight realized by a device, proportional to its conductance.
pub fn weight_from_conductance(conductance: f64, reference: f64) -> f64 {
    conductance / reference
}

/// Gaussian weight-perturbation model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    /// Noise std as a fraction of max |w| over the layer.
    pub relative_std: f64,
    #[serde(default)]
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(relative_std: f64, seed: u64) -> Self {
        NoiseModel { relative_std, seed }
    }

    pub fn none() -> Self {
        NoiseModel::new(0.0, 0)
    }

    pub fn is_silent(&self) -> bool {
        self.relative_std == 0.0
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        if !(self.relative_std >= 0.0 && self.relative_std.is_finite()) {
            return Err(Error::config(
                format!("{path}.relative_std"),
                "must be finite and ≥ 0",
            ));
        }
        Ok(())
    }
}

/// Returns `weights + N(0, σ²)` element-wise with σ = relative_std · max|w|.
pub fn apply_read_noise<D: Dimension, R: Rng + ?Sized>(
    weights: &Array<f64, D>,
    model: &NoiseModel,
    rng: &mut R,
) -> Array<f64, D> {
    let max_abs = weights.iter().fold(0.0_f64, |m, w| m.max(w.abs()));
    let sigma = model.relative_std * max_abs;
    if sigma == 0.0 {
        return weights.clone();
    }
    weights.mapv(|w| {
        let z: f64 = rng.sample(StandardNormal);
        w + sigma * z
    })
}

/// Maximum-likelihood log-normal fit: `(mean, std)` of the log-samples.
pub fn fit_lognormal(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::domain("log-normal fit needs at least two samples"));
    }
    if let Some(bad) = samples.iter().find(|s| !(**s > 0.0)) {
        return Err(Error::domain(format!("log-normal samples must be > 0, got {bad}")));
    }
    let n = samples.len() as f64;
    let mu = samples.iter().map(|s| s.ln()).sum::<f64>() / n;
    let var = samples.iter().map(|s| (s.ln() - mu).powi(2)).sum::<f64>() / n;
    Ok((mu, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn measured_distribution_mean_and_clip() {
        let dist = DelayDistribution::measured();
        assert!((dist.mean() - 22e-3).abs() / 22e-3 < 1e-12);
        let d = sample_delays(&dist, 10_000, &mut rng(1)).unwrap();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        assert!((21e-3..=23e-3).contains(&mean), "mean {mean}");
        assert!(d.iter().all(|x| (8.08e-3..=58.26e-3).contains(x)));
    }

    #[test]
    fn degenerate_distribution() {
        let dist = DelayDistribution::from_mean(22e-3, 1e-9).unwrap();
        let d = sample_delays(&dist, 1000, &mut rng(2)).unwrap();
        assert!(d.iter().all(|x| (x - 22e-3).abs() < 1e-6));
    }

    #[test]
    fn median_matches_independent_monte_carlo() {
        // Oracle: Box-Muller draws from an unrelated generator.
        use rand::rngs::StdRng;
        let dist = DelayDistribution::from_mean(0.5, 0.5).unwrap();
        let expected_median = 0.5 / (0.125f64).exp();
        let mut oracle_rng = StdRng::seed_from_u64(77);
        let mut oracle: Vec<f64> = (0..100_000)
            .map(|_| {
                let u1: f64 = oracle_rng.gen_range(f64::EPSILON..1.0);
                let u2: f64 = oracle_rng.gen();
                let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
                (dist.mu + dist.sigma * z).exp()
            })
            .collect();
        oracle.sort_by(f64::total_cmp);
        let oracle_median = oracle[oracle.len() / 2];
        let mut ours = sample_delays(&dist, 100_000, &mut rng(3)).unwrap();
        ours.sort_by(f64::total_cmp);
        let ours_median = ours[ours.len() / 2];
        assert!((oracle_median - expected_median).abs() / expected_median < 0.01);
        assert!((ours_median - expected_median).abs() / expected_median < 0.01);
    }

    #[test]
    fn invalid_distribution_is_config_error() {
        assert!(matches!(
            DelayDistribution::from_mean(22e-3, 0.0),
            Err(Error::Config { .. })
        ));
        assert!(DelayDistribution::from_mean(22e-3, 0.5)
            .unwrap()
            .with_clip(0.05, 0.01)
            .is_err());
        let d = DelayDistribution::from_mean(22e-3, 0.5).unwrap();
        assert!(sample_delays(&d, 0, &mut rng(0)).is_err());
    }

    #[test]
    fn resistance_from_delay_values() {
        let r = resistance_from_delay(22e-3, 1e-12).unwrap();
        assert!((r - 2.2e10).abs() / 2.2e10 < 1e-12);
        let r = resistance_from_delay(58.26e-3, 0.4e-12).unwrap();
        assert!((r - 1.4565e11).abs() / 1.4565e11 < 1e-12);
        assert!(resistance_from_delay(0.0, 1e-12).is_err());
        assert!(resistance_from_delay(1e-3, -1.0).is_err());
    }

    #[test]
    fn pristine_floor() {
        let cfg = DeviceConfig::default();
        let s = DeviceState::pristine_for_delay(22e-3, 1e-12, &cfg).unwrap();
        assert_eq!(s.mode, DeviceMode::Pristine);
        assert!(s.resistance() >= 1e9);
        assert!(DeviceState::pristine_for_delay(1e-6, 1e-12, &cfg).is_err());
    }

    #[test]
    fn set_levels_land_in_expected_bands() {
        let cfg = DeviceConfig::default();
        let r7 = program_set(7, &cfg, &mut rng(4)).unwrap().resistance();
        let r0 = program_set(0, &cfg, &mut rng(4)).unwrap().resistance();
        assert!((8e3..10e3).contains(&r7), "level 7 → {r7}");
        assert!((40e3..=50e3).contains(&r0), "level 0 → {r0}");
        assert!(program_set(8, &cfg, &mut rng(4)).is_err());
        let a = program_set(3, &cfg, &mut rng(9)).unwrap();
        let b = program_set(3, &cfg, &mut rng(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn set_level_medians_are_monotone() {
        let cfg = DeviceConfig::default();
        let mut r = rng(5);
        let medians: Vec<f64> = (0..cfg.set_levels)
            .map(|level| {
                let mut v: Vec<f64> = (0..10_000)
                    .map(|_| program_set(level, &cfg, &mut r).unwrap().resistance())
                    .collect();
                assert!(v.iter().all(|x| (cfg.lrs_min..=cfg.lrs_max).contains(x)));
                v.sort_by(f64::total_cmp);
                v[v.len() / 2]
            })
            .collect();
        for w in medians.windows(2) {
            assert!(w[1] < w[0], "{medians:?}");
        }
    }

    #[test]
    fn reset_stays_in_hrs_band() {
        let cfg = DeviceConfig::default();
        let mut r = rng(6);
        let v: Vec<f64> = (0..10_000)
            .map(|_| program_reset(&cfg, &mut r).resistance())
            .collect();
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(0.0, f64::max);
        assert!(lo >= 60e3 && hi <= 1e6);
        // Log-uniform over a 16.7× span: both ends get visited.
        assert!(lo < 61e3 && hi > 0.98e6, "{lo} {hi}");
        assert_eq!(
            program_reset(&cfg, &mut rng(8)),
            program_reset(&cfg, &mut rng(8))
        );
    }

    #[test]
    fn read_noise_statistics() {
        let w = Array2::from_shape_fn((1000, 1000), |(i, j)| if i == 0 && j == 0 { 2.0 } else { 0.5 });
        let out = apply_read_noise(&w, &NoiseModel::new(0.1, 0), &mut rng(10));
        let diff: Vec<f64> = out.iter().zip(w.iter()).map(|(a, b)| a - b).collect();
        let n = diff.len() as f64;
        let mean = diff.iter().sum::<f64>() / n;
        let std = (diff.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((0.198..=0.202).contains(&std), "std {std}");
        assert!(mean.abs() < 3.0 * 0.2 / n.sqrt(), "mean {mean}");
        assert_eq!(w[[0, 0]], 2.0);
    }

    #[test]
    fn read_noise_degenerate_cases() {
        let w = Array2::from_shape_fn((4, 3), |(i, j)| (i * 3 + j) as f64 - 5.0);
        assert_eq!(apply_read_noise(&w, &NoiseModel::none(), &mut rng(0)), w);
        let z = Array2::<f64>::zeros((4, 3));
        assert_eq!(apply_read_noise(&z, &NoiseModel::new(0.3, 0), &mut rng(0)), z);
    }

    #[test]
    fn lognormal_fit() {
        let dist = DelayDistribution::from_mean(22e-3, 0.5).unwrap();
        let s = sample_delays(&dist, 71, &mut rng(11)).unwrap();
        let (_, sigma) = fit_lognormal(&s).unwrap();
        assert!((0.35..=0.65).contains(&sigma));

        let (_, sigma) = fit_lognormal(&[0.01; 5]).unwrap();
        assert_eq!(sigma, 0.0);

        let normal = Normal::new(0.01f64.ln(), 0.3).unwrap();
        let mut r = rng(12);
        let s: Vec<f64> = (0..1_000_000).map(|_| normal.sample(&mut r).exp()).collect();
        let (mu, sigma) = fit_lognormal(&s).unwrap();
        assert!((mu - 0.01f64.ln()).abs() < 1e-2);
        assert!((sigma - 0.3).abs() < 1e-2);

        assert!(fit_lognormal(&[0.01, -1.0]).is_err());
        assert!(fit_lognormal(&[0.01]).is_err());
    }
}
