//! Binned spike rasters.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Spike counts over (channel × time bin).
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeRaster {
    counts: Array2<u32>,
    dt: f64,
}

impl SpikeRaster {
    pub fn new(counts: Array2<u32>, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::domain(format!("raster dt must be > 0, got {dt}")));
        }
        Ok(SpikeRaster { counts, dt })
    }

    pub fn zeros(n_channels: usize, n_steps: usize, dt: f64) -> Result<Self> {
        SpikeRaster::new(Array2::zeros((n_channels, n_steps)), dt)
    }

    /// Builds a raster from `(channel, bin, count)` triples. Repeated
    /// coordinates accumulate.
    pub fn from_events(
        n_channels: usize,
        n_steps: usize,
        dt: f64,
        events: impl IntoIterator<Item = (usize, usize, u32)>,
    ) -> Result<Self> {
        let mut r = SpikeRaster::zeros(n_channels, n_steps, dt)?;
        for (c, t, n) in events {
            r.add(c, t, n)?;
        }
        Ok(r)
    }

    pub fn n_channels(&self) -> usize {
        self.counts.nrows()
    }

    pub fn n_steps(&self) -> usize {
        self.counts.ncols()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn counts(&self) -> &Array2<u32> {
        &self.counts
    }

    pub fn get(&self, channel: usize, step: usize) -> u32 {
        self.counts[[channel, step]]
    }

    pub fn add(&mut self, channel: usize, step: usize, count: u32) -> Result<()> {
        if channel >= self.n_channels() || step >= self.n_steps() {
            return Err(Error::domain(format!(
                "event ({channel}, {step}) outside raster {}×{}",
                self.n_channels(),
                self.n_steps()
            )));
        }
        self.counts[[channel, step]] += count;
        Ok(())
    }

    pub fn total_spikes(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }

    /// Non-zero entries as `(channel, bin, count)`, channel-major then time.
    pub fn events(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        self.counts
            .indexed_iter()
            .filter(|(_, &n)| n > 0)
            .map(|((c, t), &n)| (c, t, n))
    }

    /// `(bin, count)` pairs of one channel in time order.
    pub fn channel_events(&self, channel: usize) -> Vec<(usize, u32)> {
        self.counts
            .row(channel)
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(|(t, &n)| (t, n))
            .collect()
    }

    /// Same raster delayed by `k` bins, with `k` extra bins appended.
    pub fn shifted(&self, k: usize) -> SpikeRaster {
        let mut counts = Array2::zeros((self.n_channels(), self.n_steps() + k));
        counts
            .slice_mut(ndarray::s![.., k..])
            .assign(&self.counts);
        SpikeRaster { counts, dt: self.dt }
    }

    /// Same raster with `extra` empty bins appended.
    pub fn padded(&self, extra: usize) -> SpikeRaster {
        let mut counts = Array2::zeros((self.n_channels(), self.n_steps() + extra));
        counts
            .slice_mut(ndarray::s![.., ..self.n_steps()])
            .assign(&self.counts);
        SpikeRaster { counts, dt: self.dt }
    }

    /// Keeps the first `n_steps` bins (or fewer if the raster is shorter).
    pub fn truncated(&self, n_steps: usize) -> SpikeRaster {
        let n = n_steps.min(self.n_steps());
        SpikeRaster {
            counts: self.counts.slice(ndarray::s![.., ..n]).to_owned(),
            dt: self.dt,
        }
    }

    /// Rows `channels` of this raster, in the given order.
    pub fn select_channels(&self, channels: &[usize]) -> SpikeRaster {
        let counts = Array2::from_shape_fn((channels.len(), self.n_steps()), |(i, t)| {
            self.counts[[channels[i], t]]
        });
        SpikeRaster { counts, dt: self.dt }
    }

    pub(crate) fn same_dt(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
    }
}
