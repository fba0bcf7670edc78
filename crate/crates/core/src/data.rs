//! Spike encoding, dataset I/O and synthetic task generators.
//!
//! Datasets are stored in the ERAS event-raster format. The text form is
//!
//! ```text
//! ERAS v1 n_channels=<int> dt=<float seconds> n_steps=<int> n_classes=<int>
//! # sample <id> label=<int>
//! <channel>,<time_bin>,<count>
//! ...
//! <blank line>
//! ```
//!
//! and the binary twin starts with the magic bytes [`ERAS_BINARY_MAGIC`]
//! followed by little-endian fields of the same meaning.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::SpikeRaster;

pub const ERAS_BINARY_MAGIC: &[u8; 8] = b"ERASBIN1";

/// Shape shared by every raster of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RasterLayout {
    pub n_channels: usize,
    pub n_steps: usize,
    pub dt: f64,
}

impl RasterLayout {
    fn of(r: &SpikeRaster) -> Self {
        RasterLayout {
            n_channels: r.n_channels(),
            n_steps: r.n_steps(),
            dt: r.dt(),
        }
    }

    fn matches(&self, r: &SpikeRaster) -> bool {
        r.n_channels() == self.n_channels && r.n_steps() == self.n_steps && r.dt() == self.dt
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Split {
    #[default]
    All,
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub raster: SpikeRaster,
    pub label: usize,
}

/// Labeled rasters of identical layout.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRasterSet {
    pub samples: Vec<Sample>,
    pub n_classes: usize,
    pub layout: RasterLayout,
    pub split: Split,
}

impl LabeledRasterSet {
    /// Builds a set whose layout is taken from the first sample.
    pub fn new(samples: Vec<Sample>, n_classes: usize) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::domain("cannot infer the layout of an empty sample list"))?;
        let layout = RasterLayout::of(&first.raster);
        LabeledRasterSet::with_layout(layout, samples, n_classes)
    }

    pub fn with_layout(layout: RasterLayout, samples: Vec<Sample>, n_classes: usize) -> Result<Self> {
        for (k, s) in samples.iter().enumerate() {
            if !layout.matches(&s.raster) {
                return Err(Error::domain(format!(
                    "sample {k} is {}×{} at dt {}, expected {}×{} at dt {}",
                    s.raster.n_channels(),
                    s.raster.n_steps(),
                    s.raster.dt(),
                    layout.n_channels,
                    layout.n_steps,
                    layout.dt
                )));
            }
            if s.label >= n_classes {
                return Err(Error::domain(format!(
                    "sample {k} has label {} but n_classes = {n_classes}",
                    s.label
                )));
            }
        }
        Ok(LabeledRasterSet {
            samples,
            n_classes,
            layout,
            split: Split::All,
        })
    }

    pub fn empty(layout: RasterLayout, n_classes: usize) -> Self {
        LabeledRasterSet {
            samples: Vec::new(),
            n_classes,
            layout,
            split: Split::All,
        }
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    pub fn total_spikes(&self) -> u64 {
        self.samples.iter().map(|s| s.raster.total_spikes()).sum()
    }

    fn subset(&self, idx: &[usize], split: Split) -> LabeledRasterSet {
        LabeledRasterSet {
            samples: idx.iter().map(|&i| self.samples[i].clone()).collect(),
            n_classes: self.n_classes,
            layout: self.layout,
            split,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaModParams {
    /// Step threshold in signal units.
    pub delta: f64,
    /// Starting value of the reconstruction.
    pub initial: f64,
}

/// UP/DOWN delta modulation. Channel 0 counts UP steps, channel 1 DOWN steps.
pub fn delta_modulate(signal: &[f64], p: DeltaModParams, dt: f64) -> Result<SpikeRaster> {
    if !(p.delta > 0.0 && p.delta.is_finite()) {
        return Err(Error::domain(format!("delta must be > 0, got {}", p.delta)));
    }
    if signal.is_empty() {
        return Err(Error::domain("cannot encode an empty signal"));
    }
    let mut raster = SpikeRaster::zeros(2, signal.len(), dt)?;
    let mut r = p.initial;
    for (t, &x) in signal.iter().enumerate() {
        let mut up = 0;
        while x - r > p.delta {
            r += p.delta;
            up += 1;
        }
        let mut down = 0;
        while r - x > p.delta {
            r -= p.delta;
            down += 1;
        }
        if up > 0 {
            raster.add(0, t, up)?;
        }
        if down > 0 {
            raster.add(1, t, down)?;
        }
    }
    Ok(raster)
}

/// Reconstruction implied by a delta-modulated raster.
pub fn delta_reconstruct(raster: &SpikeRaster, p: DeltaModParams) -> Vec<f64> {
    let mut r = p.initial;
    (0..raster.n_steps())
        .map(|t| {
            r += p.delta * (f64::from(raster.get(0, t)) - f64::from(raster.get(1, t)));
            r
        })
        .collect()
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

/// Lines that carry data: not blank, not `#` comments, and not a leading
/// header row whose first field is not numeric.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut first_row = true;
    text.lines().enumerate().filter_map(move |(k, line)| {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            return None;
        }
        let leading = line.split(',').next().unwrap_or("").trim();
        let header = first_row && leading.parse::<f64>().is_err();
        first_row = false;
        (!header).then_some((k + 1, line))
    })
}

fn two_fields<'a>(file: &str, line_no: usize, line: &'a str) -> Result<(&'a str, &'a str)> {
    let mut parts = line.split(',').map(str::trim);
    match (parts.next(), parts.next(), parts.next()) {
        (Some(a), Some(b), None) => Ok((a, b)),
        _ => Err(Error::parse(file, line_no, "expected two comma-separated fields")),
    }
}

/// Reads an ECG export with lines `sample_index,value`.
pub fn read_ecg_record(path: &Path) -> Result<Vec<f64>> {
    let text = read_text(path)?;
    let file = display(path);
    let mut values = Vec::new();
    for (line_no, line) in data_lines(&text) {
        let (idx, value) = two_fields(&file, line_no, line)?;
        let idx: usize = idx
            .parse()
            .map_err(|_| Error::parse(&file, line_no, format!("bad sample index {idx:?}")))?;
        if idx != values.len() {
            return Err(Error::parse(
                &file,
                line_no,
                format!("sample index {idx} out of sequence, expected {}", values.len()),
            ));
        }
        let value: f64 = value
            .parse()
            .map_err(|_| Error::parse(&file, line_no, format!("bad value {value:?}")))?;
        values.push(value);
    }
    Ok(values)
}

/// Reads beat annotations with lines `sample_index,symbol`.
pub fn read_ecg_annotations(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = read_text(path)?;
    let file = display(path);
    let mut out = Vec::new();
    for (line_no, line) in data_lines(&text) {
        let (idx, symbol) = two_fields(&file, line_no, line)?;
        let idx: usize = idx
            .parse()
            .map_err(|_| Error::parse(&file, line_no, format!("bad sample index {idx:?}")))?;
        out.push((idx, symbol.to_string()));
    }
    Ok(out)
}

/// Beat class of an annotation symbol: 0 normal, 1 anomalous, `None` for
/// symbols outside both groups.
pub fn ecg_label(symbol: &str) -> Option<usize> {
    match symbol {
        "N" | "L" | "R" => Some(0),
        "e" | "j" | "A" | "a" | "J" | "S" | "V" | "E" | "F" | "/" | "f" | "Q" => Some(1),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EcgParams {
    /// Samples per segment, centered on the R peak.
    pub window: usize,
    /// Delta threshold; `None` uses 0.1 × the record's interquartile range.
    pub delta: Option<f64>,
    /// Seconds per sample.
    pub dt: f64,
}

impl Default for EcgParams {
    fn default() -> Self {
        EcgParams {
            window: 180,
            delta: None,
            dt: 1.0 / 360.0,
        }
    }
}

impl EcgParams {
    pub fn validate(&self, path: &str) -> Result<()> {
        if self.window == 0 {
            return Err(Error::config(format!("{path}.window"), "must be ≥ 1"));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::config(format!("{path}.delta"), "must be > 0"));
            }
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config(format!("{path}.dt"), "must be > 0"));
        }
        Ok(())
    }
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn interquartile_range(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile(&sorted, 0.75) - quantile(&sorted, 0.25)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EcgDataset {
    pub train: LabeledRasterSet,
    pub test: LabeledRasterSet,
    /// Beats whose symbol belongs to neither class.
    pub skipped: usize,
    pub delta: f64,
}

/// One 2-channel raster per annotated beat; the first half of the beats (in
/// time order, plus the odd one) trains and the rest tests.
pub fn ecg_segments(signal: &[f64], annotations: &[(usize, String)], p: &EcgParams) -> Result<EcgDataset> {
    p.validate("ecg")?;
    let delta = match p.delta {
        Some(d) => d,
        None => {
            let d = 0.1 * interquartile_range(signal);
            if !(d > 0.0) {
                return Err(Error::domain("record has zero interquartile range; set ecg.delta"));
            }
            d
        }
    };
    let mut beats: Vec<(usize, usize)> = Vec::new();
    let mut skipped = 0;
    for (idx, symbol) in annotations {
        if *idx >= signal.len() {
            return Err(Error::domain(format!(
                "annotation at sample {idx} beyond record length {}",
                signal.len()
            )));
        }
        match ecg_label(symbol) {
            Some(label) => beats.push((*idx, label)),
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        log::warn!("skipped {skipped} beats with unknown annotation symbols");
    }
    beats.sort_by_key(|b| b.0);
    let half = p.window / 2;
    let mut samples = Vec::with_capacity(beats.len());
    for &(peak, label) in &beats {
        let window: Vec<f64> = (0..p.window)
            .map(|k| {
                (peak + k)
                    .checked_sub(half)
                    .and_then(|i| signal.get(i).copied())
                    .unwrap_or(0.0)
            })
            .collect();
        let params = DeltaModParams {
            delta,
            initial: window[0],
        };
        samples.push(Sample {
            raster: delta_modulate(&window, params, p.dt)?,
            label,
        });
    }
    let layout = RasterLayout {
        n_channels: 2,
        n_steps: p.window,
        dt: p.dt,
    };
    let n_train = samples.len().div_ceil(2);
    let test_samples = samples.split_off(n_train);
    Ok(EcgDataset {
        train: LabeledRasterSet::with_layout(layout, samples, 2)?.with_split(Split::Train),
        test: LabeledRasterSet::with_layout(layout, test_samples, 2)?.with_split(Split::Test),
        skipped,
        delta,
    })
}

pub fn load_ecg_segments(record: &Path, annotations: &Path, p: &EcgParams) -> Result<EcgDataset> {
    let signal = read_ecg_record(record)?;
    let ann = read_ecg_annotations(annotations)?;
    ecg_segments(&signal, &ann, p)
}

/// ERAS text serialization.
pub fn to_eras_text(set: &LabeledRasterSet) -> String {
    let l = set.layout;
    let mut out = format!(
        "ERAS v1 n_channels={} dt={} n_steps={} n_classes={}\n",
        l.n_channels, l.dt, l.n_steps, set.n_classes
    );
    for (id, s) in set.samples.iter().enumerate() {
        out.push_str(&format!("# sample {id} label={}\n", s.label));
        for (c, t, n) in s.raster.events() {
            out.push_str(&format!("{c},{t},{n}\n"));
        }
        out.push('\n');
    }
    out
}

fn header_field<T: std::str::FromStr>(file: &str, token: Option<&str>, key: &str) -> Result<T> {
    token
        .and_then(|t| t.strip_prefix(key))
        .and_then(|t| t.strip_prefix('='))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::parse(file, 1, format!("header field {key}=<value> missing or malformed")))
}

pub fn parse_eras_text(text: &str, file: &str) -> Result<LabeledRasterSet> {
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l));
    let (_, header) = lines.next().ok_or_else(|| Error::parse(file, 1, "empty file"))?;
    let mut tok = header.split_whitespace();
    if tok.next() != Some("ERAS") || tok.next() != Some("v1") {
        return Err(Error::parse(file, 1, "expected header starting with `ERAS v1`"));
    }
    let n_channels: usize = header_field(file, tok.next(), "n_channels")?;
    let dt: f64 = header_field(file, tok.next(), "dt")?;
    let n_steps: usize = header_field(file, tok.next(), "n_steps")?;
    let n_classes: usize = header_field(file, tok.next(), "n_classes")?;
    if tok.next().is_some() {
        return Err(Error::parse(file, 1, "unexpected trailing header fields"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::parse(file, 1, "dt must be > 0"));
    }
    let layout = RasterLayout { n_channels, n_steps, dt };

    let mut samples = Vec::new();
    let mut current: Option<(SpikeRaster, usize)> = None;
    for (line_no, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            if let Some((raster, label)) = current.take() {
                samples.push(Sample { raster, label });
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix("# sample ") {
            if current.is_some() {
                return Err(Error::parse(file, line_no, "sample not terminated by a blank line"));
            }
            let mut parts = rest.split_whitespace();
            let id_ok = parts.next().is_some_and(|id| id.parse::<u64>().is_ok());
            let label = parts
                .next()
                .and_then(|l| l.strip_prefix("label="))
                .and_then(|l| l.parse::<usize>().ok());
            let label = match (id_ok, label, parts.next()) {
                (true, Some(label), None) => label,
                _ => return Err(Error::parse(file, line_no, "expected `# sample <id> label=<int>`")),
            };
            if label >= n_classes {
                return Err(Error::parse(
                    file,
                    line_no,
                    format!("label {label} ≥ n_classes {n_classes}"),
                ));
            }
            current = Some((SpikeRaster::zeros(n_channels, n_steps, dt)?, label));
            continue;
        }
        let Some((raster, _)) = current.as_mut() else {
            return Err(Error::parse(file, line_no, "event outside a sample block"));
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Option<(usize, usize, u32)> = match fields.as_slice() {
            [c, t, n] => c.parse().ok().zip(t.parse().ok()).zip(n.parse().ok()).map(|((c, t), n)| (c, t, n)),
            _ => None,
        };
        let (c, t, n) =
            parsed.ok_or_else(|| Error::parse(file, line_no, "expected `<channel>,<time_bin>,<count>`"))?;
        if c >= n_channels || t >= n_steps {
            return Err(Error::parse(
                file,
                line_no,
                format!("event ({c}, {t}) outside {n_channels}×{n_steps}"),
            ));
        }
        raster.add(c, t, n)?;
    }
    if let Some((raster, label)) = current.take() {
        samples.push(Sample { raster, label });
    }
    LabeledRasterSet::with_layout(layout, samples, n_classes)
}

/// ERAS binary serialization: magic, then `n_channels, dt, n_steps,
/// n_classes, n_samples`, then per sample `label, n_events` and `n_events`
/// triples of `u32 channel, u32 bin, u32 count`. Integers are u64 unless
/// stated, all little-endian.
pub fn to_eras_binary(set: &LabeledRasterSet) -> Vec<u8> {
    let l = set.layout;
    let mut out = Vec::new();
    out.extend_from_slice(ERAS_BINARY_MAGIC);
    out.extend_from_slice(&(l.n_channels as u64).to_le_bytes());
    out.extend_from_slice(&l.dt.to_le_bytes());
    out.extend_from_slice(&(l.n_steps as u64).to_le_bytes());
    out.extend_from_slice(&(set.n_classes as u64).to_le_bytes());
    out.extend_from_slice(&(set.len() as u64).to_le_bytes());
    for s in &set.samples {
        let events: Vec<_> = s.raster.events().collect();
        out.extend_from_slice(&(s.label as u64).to_le_bytes());
        out.extend_from_slice(&(events.len() as u64).to_le_bytes());
        for (c, t, n) in events {
            out.extend_from_slice(&(c as u32).to_le_bytes());
            out.extend_from_slice(&(t as u32).to_le_bytes());
            out.extend_from_slice(&n.to_le_bytes());
        }
    }
    out
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    file: &'a str,
}

impl ByteReader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let chunk = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::parse(self.file, 0, format!("truncated binary file at byte {}", self.pos)))?;
        self.pos = end;
        Ok(chunk.try_into().expect("slice length is N"))
    }

    fn u64(&mut self) -> Result<u64> {
        self.take::<8>().map(u64::from_le_bytes)
    }

    fn u32(&mut self) -> Result<u32> {
        self.take::<4>().map(u32::from_le_bytes)
    }

    fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| Error::parse(self.file, 0, format!("value {v} too large")))
    }
}

pub fn parse_eras_binary(bytes: &[u8], file: &str) -> Result<LabeledRasterSet> {
    if !bytes.starts_with(ERAS_BINARY_MAGIC) {
        return Err(Error::parse(file, 0, "missing ERAS binary magic"));
    }
    let mut rd = ByteReader {
        bytes,
        pos: ERAS_BINARY_MAGIC.len(),
        file,
    };
    let n_channels = rd.usize()?;
    let dt = f64::from_le_bytes(rd.take::<8>()?);
    let n_steps = rd.usize()?;
    let n_classes = rd.usize()?;
    let n_samples = rd.usize()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::parse(file, 0, "dt must be > 0"));
    }
    let layout = RasterLayout { n_channels, n_steps, dt };
    let mut samples = Vec::new();
    for k in 0..n_samples {
        let label = rd.usize()?;
        if label >= n_classes {
            return Err(Error::parse(file, 0, format!("sample {k}: label {label} ≥ n_classes")));
        }
        let n_events = rd.usize()?;
        let mut raster = SpikeRaster::zeros(n_channels, n_steps, dt)?;
        for _ in 0..n_events {
            let (c, t, n) = (rd.u32()? as usize, rd.u32()? as usize, rd.u32()?);
            if c >= n_channels || t >= n_steps {
                return Err(Error::parse(file, 0, format!("sample {k}: event ({c}, {t}) out of range")));
            }
            raster.add(c, t, n)?;
        }
        samples.push(Sample { raster, label });
    }
    if rd.pos != bytes.len() {
        return Err(Error::parse(file, 0, "trailing bytes after last sample"));
    }
    LabeledRasterSet::with_layout(layout, samples, n_classes)
}

/// Reads either ERAS form, chosen by the leading bytes.
pub fn read_eras(path: &Path) -> Result<LabeledRasterSet> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let file = display(path);
    if bytes.starts_with(ERAS_BINARY_MAGIC) {
        parse_eras_binary(&bytes, &file)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| Error::parse(&file, 1, "file is neither UTF-8 text nor ERAS binary"))?;
        parse_eras_text(&text, &file)
    }
}

pub fn write_eras_text(path: &Path, set: &LabeledRasterSet) -> Result<()> {
    fs::write(path, to_eras_text(set)).map_err(|e| Error::io(path, e))
}

pub fn write_eras_binary(path: &Path, set: &LabeledRasterSet) -> Result<()> {
    fs::write(path, to_eras_binary(set)).map_err(|e| Error::io(path, e))
}

/// Target binning for raster datasets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RasterLoadOptions {
    pub dt: f64,
    pub max_steps: usize,
}

impl Default for RasterLoadOptions {
    fn default() -> Self {
        RasterLoadOptions {
            dt: 5e-3,
            max_steps: 150,
        }
    }
}

/// Bin index of time `t` at width `dt`, tolerant to representation error
/// at exact bin edges.
fn time_bin(t: f64, dt: f64) -> usize {
    (t / dt * (1.0 + 1e-12)).floor() as usize
}

/// Re-bins `set` to `opts.dt` (which must not be finer than the stored dt)
/// and keeps the first `opts.max_steps` bins.
pub fn rebin(set: &LabeledRasterSet, opts: &RasterLoadOptions) -> Result<LabeledRasterSet> {
    let src = set.layout;
    if opts.dt < src.dt && !SpikeRaster::same_dt(opts.dt, src.dt) {
        return Err(Error::config(
            "data.dt",
            format!("cannot re-bin from {} s to the finer {} s", src.dt, opts.dt),
        ));
    }
    let same = SpikeRaster::same_dt(opts.dt, src.dt);
    let full_steps = if same {
        src.n_steps
    } else {
        time_bin(src.n_steps as f64 * src.dt, opts.dt) + 1
    };
    let layout = RasterLayout {
        n_channels: src.n_channels,
        n_steps: full_steps.min(opts.max_steps),
        dt: opts.dt,
    };
    let mut samples = Vec::with_capacity(set.len());
    for s in &set.samples {
        let mut r = SpikeRaster::zeros(layout.n_channels, layout.n_steps, layout.dt)?;
        for (c, t, n) in s.raster.events() {
            let bin = if same { t } else { time_bin(t as f64 * src.dt, opts.dt) };
            if bin < layout.n_steps {
                r.add(c, bin, n)?;
            }
        }
        samples.push(Sample { raster: r, label: s.label });
    }
    Ok(LabeledRasterSet {
        samples,
        n_classes: set.n_classes,
        layout,
        split: set.split,
    })
}

/// Reads an ERAS file and brings it to the standard raster-task binning.
pub fn load_raster_dataset(path: &Path, opts: &RasterLoadOptions) -> Result<LabeledRasterSet> {
    rebin(&read_eras(path)?, opts)
}

/// Converts a spike-time listing with lines `sample,label,time_s,channel`
/// into binned rasters. A `# n_channels=<int>` line overrides the default of
/// 700 channels. Spikes at or beyond `max_steps · dt` are dropped.
pub fn read_event_csv(path: &Path, opts: &RasterLoadOptions) -> Result<LabeledRasterSet> {
    let text = read_text(path)?;
    let file = display(path);
    let mut n_channels = 700;
    for line in text.lines() {
        if let Some(v) = line.trim().strip_prefix("# n_channels=") {
            n_channels = v
                .trim()
                .parse()
                .map_err(|_| Error::parse(&file, 1, format!("bad n_channels {v:?}")))?;
        }
    }
    let mut by_sample: BTreeMap<u64, (usize, Vec<(usize, usize)>)> = BTreeMap::new();
    for (line_no, line) in data_lines(&text) {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = |what: &str| Error::parse(&file, line_no, format!("bad {what}"));
        if f.len() != 4 {
            return Err(Error::parse(&file, line_no, "expected `sample,label,time_s,channel`"));
        }
        let id: u64 = f[0].parse().map_err(|_| bad("sample id"))?;
        let label: usize = f[1].parse().map_err(|_| bad("label"))?;
        let t: f64 = f[2].parse().map_err(|_| bad("time"))?;
        let c: usize = f[3].parse().map_err(|_| bad("channel"))?;
        if !(t >= 0.0 && t.is_finite()) {
            return Err(bad("time"));
        }
        if c >= n_channels {
            return Err(Error::parse(&file, line_no, format!("channel {c} ≥ n_channels {n_channels}")));
        }
        let entry = by_sample.entry(id).or_insert((label, Vec::new()));
        if entry.0 != label {
            return Err(Error::parse(&file, line_no, format!("sample {id} has conflicting labels")));
        }
        let bin = time_bin(t, opts.dt);
        if bin < opts.max_steps {
            entry.1.push((c, bin));
        }
    }
    let layout = RasterLayout {
        n_channels,
        n_steps: opts.max_steps,
        dt: opts.dt,
    };
    let n_classes = by_sample.values().map(|v| v.0 + 1).max().unwrap_or(0);
    let mut samples = Vec::with_capacity(by_sample.len());
    for (label, events) in by_sample.into_values() {
        let raster = SpikeRaster::from_events(n_channels, opts.max_steps, opts.dt, events.into_iter().map(|(c, t)| (c, t, 1)))?;
        samples.push(Sample { raster, label });
    }
    LabeledRasterSet::with_layout(layout, samples, n_classes)
}

/// Channel sub-sampling augmentation: `n_groups` disjoint contiguous blocks
/// of `n_channels / n_groups` channels, each cut to `group_size` channels or
/// padded with silent channels up to it. Every sample yields `n_groups`
/// consecutive samples.
pub fn subsample_channels(set: &LabeledRasterSet, group_size: usize, n_groups: usize) -> Result<LabeledRasterSet> {
    let n = set.layout.n_channels;
    if group_size == 0 || group_size > n {
        return Err(Error::domain(format!("group size {group_size} invalid for {n} channels")));
    }
    if n_groups == 0 || n_groups > n {
        return Err(Error::domain(format!("cannot form {n_groups} groups from {n} channels")));
    }
    let groups = channel_groups(n, group_size, n_groups);
    let layout = RasterLayout {
        n_channels: group_size,
        ..set.layout
    };
    let mut samples = Vec::with_capacity(set.len() * n_groups);
    for s in &set.samples {
        for g in &groups {
            let mut counts = ndarray::Array2::zeros((group_size, layout.n_steps));
            for (row, &c) in g.iter().enumerate() {
                counts.row_mut(row).assign(&s.raster.counts().row(c));
            }
            samples.push(Sample {
                raster: SpikeRaster::new(counts, layout.dt)?,
                label: s.label,
            });
        }
    }
    Ok(LabeledRasterSet {
        samples,
        n_classes: set.n_classes,
        layout,
        split: set.split,
    })
}

/// Source channels of each sub-sampling group (before padding).
pub fn channel_groups(n_channels: usize, group_size: usize, n_groups: usize) -> Vec<Vec<usize>> {
    let block = n_channels / n_groups;
    let take = block.min(group_size);
    (0..n_groups).map(|g| (g * block..g * block + take).collect()).collect()
}

/// Stratified seeded split. Each class contributes its share of the
/// `round(fraction · n)` training samples, with leftover slots going to the
/// classes with the largest fractional remainders.
pub fn split_train_val(set: &LabeledRasterSet, fraction: f64, seed: u64) -> Result<(LabeledRasterSet, LabeledRasterSet)> {
    if set.len() < 2 {
        return Err(Error::domain("need at least two samples to split"));
    }
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::domain(format!("split fraction {fraction} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); set.n_classes];
    for (i, s) in set.samples.iter().enumerate() {
        per_class[s.label].push(i);
    }
    for idx in &mut per_class {
        idx.shuffle(&mut rng);
    }
    let target = (fraction * set.len() as f64).round() as usize;
    let quotas: Vec<f64> = per_class.iter().map(|c| fraction * c.len() as f64).collect();
    let mut take: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..set.n_classes).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut remaining = target.saturating_sub(take.iter().sum());
    for &c in order.iter().cycle().take(order.len() * 2) {
        if remaining == 0 {
            break;
        }
        if take[c] < per_class[c].len() {
            take[c] += 1;
            remaining -= 1;
        }
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (c, idx) in per_class.iter().enumerate() {
        train.extend_from_slice(&idx[..take[c]]);
        val.extend_from_slice(&idx[take[c]..]);
    }
    train.shuffle(&mut rng);
    val.shuffle(&mut rng);
    Ok((set.subset(&train, Split::Train), set.subset(&val, Split::Val)))
}

fn check_lags(lags: &[f64], jitter: f64) -> Result<()> {
    if lags.is_empty() {
        return Err(Error::domain("need at least one lag class"));
    }
    if lags.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::domain("lags must be finite and ≥ 0"));
    }
    if !(jitter >= 0.0) {
        return Err(Error::domain("jitter must be ≥ 0"));
    }
    let mut sorted = lags.to_vec();
    sorted.sort_by(f64::total_cmp);
    for w in sorted.windows(2) {
        let gap = w[1] - w[0];
        if gap <= 0.0 {
            return Err(Error::domain("lags must be distinct"));
        }
        if jitter >= gap / 2.0 {
            return Err(Error::domain(format!("jitter {jitter} s not below half the lag gap {gap} s")));
        }
    }
    Ok(())
}

/// Two-channel coincidence task: channel 0 spikes at a random onset and
/// channel 1 follows after the class lag plus uniform jitter. Labels cycle
/// through the classes.
pub fn synth_coincidence_dataset<R: Rng + ?Sized>(
    n_samples: usize,
    lags: &[f64],
    jitter: f64,
    dt: f64,
    n_steps: usize,
    rng: &mut R,
) -> Result<LabeledRasterSet> {
    check_lags(lags, jitter)?;
    let layout = RasterLayout { n_channels: 2, n_steps, dt };
    let max_lag = lags.iter().cloned().fold(0.0, f64::max);
    let span = n_steps as f64 * dt - max_lag - jitter - dt;
    if !(span > 0.0) {
        return Err(Error::domain("window too short for the largest lag"));
    }
    let mut samples = Vec::with_capacity(n_samples);
    for k in 0..n_samples {
        let label = k % lags.len();
        let t0 = rng.gen_range(0.0..span);
        let j = if jitter > 0.0 { rng.gen_range(-jitter..=jitter) } else { 0.0 };
        let t1 = (t0 + lags[label] + j).max(0.0);
        let raster = SpikeRaster::from_events(2, n_steps, dt, [(0, time_bin(t0, dt), 1), (1, time_bin(t1, dt), 1)])?;
        samples.push(Sample { raster, label });
    }
    LabeledRasterSet::with_layout(layout, samples, lags.len())
}

/// Reduced keyword-spotting stand-in: classes differ only in the lag
/// between two bursts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LagTaskParams {
    pub n_channels: usize,
    /// Inter-burst lag per class, seconds.
    pub lags: Vec<f64>,
    /// Per-spike timing jitter, seconds (uniform ±).
    pub jitter: f64,
    /// Probability that a burst channel emits its spike.
    pub spike_prob: f64,
    /// Background spikes per channel per second.
    pub background_rate: f64,
    pub dt: f64,
    pub n_steps: usize,
}

impl Default for LagTaskParams {
    fn default() -> Self {
        LagTaskParams {
            n_channels: 32,
            lags: vec![0.02, 0.04, 0.06, 0.08, 0.1],
            jitter: 0.004,
            spike_prob: 0.8,
            background_rate: 2.0,
            dt: 5e-3,
            n_steps: 150,
        }
    }
}

/// The first half of the channels fire an onset burst at a random time; the
/// second half fire a burst after the class lag. Both bursts carry the same
/// spike statistics, so only their separation identifies the class.
pub fn synth_lag_dataset<R: Rng + ?Sized>(n_samples: usize, p: &LagTaskParams, rng: &mut R) -> Result<LabeledRasterSet> {
    if p.n_channels < 2 {
        return Err(Error::domain("lag task needs at least two channels"));
    }
    if !(0.0..=1.0).contains(&p.spike_prob) || !(p.background_rate >= 0.0) {
        return Err(Error::domain("spike_prob must lie in [0, 1] and background_rate be ≥ 0"));
    }
    check_lags(&p.lags, p.jitter)?;
    let layout = RasterLayout {
        n_channels: p.n_channels,
        n_steps: p.n_steps,
        dt: p.dt,
    };
    let duration = p.n_steps as f64 * p.dt;
    let max_lag = p.lags.iter().cloned().fold(0.0, f64::max);
    let span = duration - max_lag - 2.0 * p.jitter - p.dt;
    if !(span > p.jitter) {
        return Err(Error::domain("window too short for the largest lag"));
    }
    let half = p.n_channels / 2;
    let p_background = (p.background_rate * p.dt).min(1.0);
    let mut samples = Vec::with_capacity(n_samples);
    for k in 0..n_samples {
        let label = k % p.lags.len();
        let t0 = rng.gen_range(p.jitter..span);
        let mut r = SpikeRaster::zeros(p.n_channels, p.n_steps, p.dt)?;
        for c in 0..p.n_channels {
            let onset = if c < half { t0 } else { t0 + p.lags[label] };
            if rng.gen_bool(p.spike_prob) {
                let j = if p.jitter > 0.0 { rng.gen_range(-p.jitter..=p.jitter) } else { 0.0 };
                let bin = time_bin((onset + j).max(0.0), p.dt);
                if bin < p.n_steps {
                    r.add(c, bin, 1)?;
                }
            }
            if p_background > 0.0 {
                for t in 0..p.n_steps {
                    if rng.gen_bool(p_background) {
                        r.add(c, t, 1)?;
                    }
                }
            }
        }
        samples.push(Sample { raster: r, label });
    }
    LabeledRasterSet::with_layout(layout, samples, p.lags.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn dm(delta: f64, initial: f64) -> DeltaModParams {
        DeltaModParams { delta, initial }
    }

    /// Straightforward scalar encoder used as the reference.
    fn reference_encoder(signal: &[f64], delta: f64, initial: f64) -> (Vec<u32>, Vec<u32>, f64) {
        let mut up = vec![0; signal.len()];
        let mut down = vec![0; signal.len()];
        let mut r = initial;
        for t in 0..signal.len() {
            loop {
                if signal[t] - r > delta {
                    up[t] += 1;
                    r += delta;
                } else if r - signal[t] > delta {
                    down[t] += 1;
                    r -= delta;
                } else {
                    break;
                }
            }
        }
        (up, down, r)
    }

    #[test]
    fn constant_signal_is_silent() {
        let r = delta_modulate(&[0.3; 50], dm(0.1, 0.3), 1e-3).unwrap();
        assert_eq!(r.total_spikes(), 0);
        assert!(delta_modulate(&[0.0], dm(0.0, 0.0), 1e-3).is_err());
        assert!(delta_modulate(&[], dm(0.1, 0.0), 1e-3).is_err());
    }

    #[test]
    fn ramp_emits_one_up_per_step() {
        let delta = 0.25;
        let signal: Vec<f64> = (0..40).map(|t| t as f64 * delta).collect();
        let r = delta_modulate(&signal, dm(delta, 0.0), 1e-3).unwrap();
        assert_eq!(r.counts().row(1).sum(), 0);
        // The strict threshold lets the first crossing wait one step.
        for t in 2..40 {
            assert_eq!(r.get(0, t), 1, "step {t}");
        }
    }

    #[test]
    fn random_walk_matches_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x = 0.0;
        let signal: Vec<f64> = (0..1000)
            .map(|_| {
                x += rng.gen_range(-0.5..0.5);
                x
            })
            .collect();
        let delta = 0.1;
        let r = delta_modulate(&signal, dm(delta, 0.0), 1e-3).unwrap();
        let (up, down, r_final) = reference_encoder(&signal, delta, 0.0);
        for t in 0..signal.len() {
            assert_eq!(r.get(0, t), up[t]);
            assert_eq!(r.get(1, t), down[t]);
        }
        let rec = delta_reconstruct(&r, dm(delta, 0.0));
        assert!((rec[999] - signal[999]).abs() <= delta);
        assert!((rec[999] - r_final).abs() < 1e-9);
    }

    #[test]
    fn ecg_labels() {
        assert_eq!(ecg_label("N"), Some(0));
        assert_eq!(ecg_label("V"), Some(1));
        assert_eq!(ecg_label("/"), Some(1));
        assert_eq!(ecg_label("+"), None);
    }

    #[test]
    fn ecg_window_padding_and_split() {
        let signal: Vec<f64> = (0..180).map(|t| (t as f64 * 0.1).sin()).collect();
        let p = EcgParams::default();
        let ds = ecg_segments(&signal, &[(90, "N".into())], &p).unwrap();
        assert_eq!(ds.train.len(), 1);
        assert_eq!(ds.train.samples[0].raster.n_steps(), 180);

        let ann: Vec<(usize, String)> = (0..12)
            .map(|k| (10 + 15 * k, if k == 3 { "+".into() } else if k % 4 == 0 { "V".into() } else { "N".into() }))
            .collect();
        let ds = ecg_segments(&signal, &ann, &p).unwrap();
        assert_eq!(ds.skipped, 1);
        assert_eq!((ds.train.len(), ds.test.len()), (6, 5));
        assert!(ecg_segments(&signal, &[(180, "N".into())], &p).is_err());
    }

    #[test]
    fn ecg_window_contents() {
        // Beat at sample 2 of a 6-sample window: samples -1..5 with a zero pad.
        let signal = [5.0, 5.0, 5.0, 5.0, 5.0];
        let p = EcgParams {
            window: 6,
            delta: Some(1.0),
            dt: 1e-3,
        };
        let ds = ecg_segments(&signal, &[(2, "N".into())], &p).unwrap();
        let r = &ds.train.samples[0].raster;
        // Starts at 0 (padding), jumps to 5: four UP steps pass the strict threshold.
        assert_eq!(r.get(0, 1), 4);
        assert_eq!(r.total_spikes(), 4);
    }

    fn random_set(rng: &mut ChaCha8Rng, n: usize) -> LabeledRasterSet {
        let layout = RasterLayout {
            n_channels: 5,
            n_steps: 30,
            dt: 0.001 * rng.gen_range(1.0..9.0),
        };
        let samples = (0..n)
            .map(|_| {
                let events: Vec<_> = (0..rng.gen_range(0..20))
                    .map(|_| (rng.gen_range(0..5), rng.gen_range(0..30), rng.gen_range(1..4)))
                    .collect();
                Sample {
                    raster: SpikeRaster::from_events(5, 30, layout.dt, events).unwrap(),
                    label: rng.gen_range(0..3),
                }
            })
            .collect();
        LabeledRasterSet::with_layout(layout, samples, 3).unwrap()
    }

    #[test]
    fn eras_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in [0, 1, 7] {
            let set = random_set(&mut rng, n);
            let text = to_eras_text(&set);
            assert_eq!(parse_eras_text(&text, "t").unwrap(), set);
            assert_eq!(to_eras_text(&parse_eras_text(&text, "t").unwrap()), text);
            assert_eq!(parse_eras_binary(&to_eras_binary(&set), "b").unwrap(), set);
        }
    }

    #[test]
    fn eras_header_is_exact() {
        let set = LabeledRasterSet::new(
            vec![Sample {
                raster: SpikeRaster::from_events(2, 4, 0.005, [(1, 3, 2)]).unwrap(),
                label: 1,
            }],
            2,
        )
        .unwrap();
        assert_eq!(
            to_eras_text(&set),
            "ERAS v1 n_channels=2 dt=0.005 n_steps=4 n_classes=2\n# sample 0 label=1\n1,3,2\n\n"
        );
    }

    #[test]
    fn eras_errors_carry_line_numbers() {
        let bad = "ERAS v1 n_channels=2 dt=0.005 n_steps=4 n_classes=2\n# sample 0 label=1\n1,3\n\n";
        match parse_eras_text(bad, "f.eras") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let out_of_range = "ERAS v1 n_channels=2 dt=0.005 n_steps=4 n_classes=2\n# sample 0 label=1\n0,0,1\n2,0,1\n";
        match parse_eras_text(out_of_range, "f.eras") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_eras_text("ERAS v2", "f"), Err(Error::Parse { line: 1, .. })));
        assert!(parse_eras_text("ERAS v1 n_channels=2 dt=0.005 n_steps=4 n_classes=2\n# sample 0 label=2\n", "f").is_err());
    }

    #[test]
    fn rebinning_and_truncation() {
        // Stored at 0.1 ms resolution: bin 7501 is t = 0.7501 s, bin 120 is 12 ms.
        let raw = SpikeRaster::from_events(3, 8000, 1e-4, [(0, 7501, 1), (1, 120, 1), (2, 50, 1)]).unwrap();
        let set = LabeledRasterSet::new(vec![Sample { raster: raw, label: 0 }], 1).unwrap();
        let out = rebin(&set, &RasterLoadOptions::default()).unwrap();
        let r = &out.samples[0].raster;
        assert_eq!(r.n_steps(), 150);
        assert_eq!(r.dt(), 5e-3);
        assert_eq!(r.get(1, 2), 1);
        assert_eq!(r.get(2, 1), 1);
        assert_eq!(r.total_spikes(), 2);
        assert!(rebin(&out, &RasterLoadOptions { dt: 1e-3, max_steps: 150 }).is_err());
    }

    #[test]
    fn event_csv_conversion() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ev.csv");
        fs::write(&path, "# n_channels=4\nsample,label,time,channel\n0,1,0.012,3\n0,1,0.7501,2\n1,0,0.0,0\n").unwrap();
        let set = read_event_csv(&path, &RasterLoadOptions::default()).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.layout.n_channels, 4);
        assert_eq!(set.samples[0].raster.get(3, 2), 1);
        assert_eq!(set.samples[0].raster.total_spikes(), 1);
        fs::write(&path, "0,1,0.1\n").unwrap();
        assert!(matches!(read_event_csv(&path, &RasterLoadOptions::default()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn subsampling_groups() {
        let groups = channel_groups(700, 256, 3);
        assert_eq!(groups.iter().map(Vec::len).collect::<Vec<_>>(), vec![233; 3]);
        assert_eq!(groups[2][0], 466);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let set = random_set(&mut rng, 4);
        let id = subsample_channels(&set, 5, 1).unwrap();
        assert_eq!(id.samples, set.samples);
        let aug = subsample_channels(&set, 2, 3).unwrap();
        assert_eq!(aug.len(), 12);
        assert!(aug.total_spikes() <= set.total_spikes());
        assert_eq!(aug.samples[4].label, set.samples[1].label);
        assert!(subsample_channels(&set, 6, 3).is_err());
    }

    #[test]
    fn padding_when_blocks_are_short() {
        let r = SpikeRaster::from_events(7, 3, 1e-3, (0..7).map(|c| (c, 0, 1))).unwrap();
        let set = LabeledRasterSet::new(vec![Sample { raster: r, label: 0 }], 1).unwrap();
        let aug = subsample_channels(&set, 3, 3).unwrap();
        assert_eq!(aug.layout.n_channels, 3);
        for s in &aug.samples {
            assert_eq!(s.raster.total_spikes(), 2);
            assert_eq!(s.raster.get(2, 0), 0);
        }
    }

    #[test]
    fn split_sizes_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let set = random_set(&mut rng, 10);
        let (a, b) = split_train_val(&set, 0.8, 5).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        assert_eq!(split_train_val(&set, 0.8, 5).unwrap(), (a, b));
        assert!(split_train_val(&random_set(&mut rng, 1), 0.8, 0).is_err());
    }

    proptest! {
        #[test]
        fn split_is_stratified(n in 2usize..80, seed in 0u64..1000, frac in 0.1f64..0.9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let set = random_set(&mut rng, n);
            let (train, val) = split_train_val(&set, frac, seed).unwrap();
            prop_assert_eq!(train.len() + val.len(), n);
            prop_assert_eq!(train.len(), (frac * n as f64).round() as usize);
            let all = set.class_counts();
            for (c, &k) in train.class_counts().iter().enumerate() {
                prop_assert!((k as f64 - frac * all[c] as f64).abs() <= 1.0);
            }
        }

        #[test]
        fn reconstruction_stays_close(seed in 0u64..500, delta in 0.01f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut x = 0.0;
            let signal: Vec<f64> = (0..200).map(|_| { x += rng.gen_range(-1.0..1.0); x }).collect();
            let max_step = signal.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
            let r = delta_modulate(&signal, dm(delta, 0.0), 1e-3).unwrap();
            for (rec, s) in delta_reconstruct(&r, dm(delta, 0.0)).iter().zip(&signal) {
                prop_assert!((rec - s).abs() <= delta + max_step + 1e-9);
            }
        }

        #[test]
        fn groups_are_disjoint(n in 3usize..800, g in 1usize..300) {
            prop_assume!(g <= n);
            let groups = channel_groups(n, g, 3);
            let mut seen = std::collections::HashSet::new();
            for grp in &groups {
                for &c in grp {
                    prop_assert!(c < n);
                    prop_assert!(seen.insert(c));
                }
            }
        }
    }

    #[test]
    fn coincidence_generator() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let set = synth_coincidence_dataset(40, &[0.01, 0.04], 0.0, 1e-3, 100, &mut rng).unwrap();
        assert_eq!(set.class_counts(), vec![20, 20]);
        for s in &set.samples {
            let t0 = s.raster.channel_events(0)[0].0 as i64;
            let t1 = s.raster.channel_events(1)[0].0 as i64;
            let lag = [10, 40][s.label];
            assert!((t1 - t0 - lag).abs() <= 1);
        }
        assert!(synth_coincidence_dataset(0, &[0.01, 0.04], 0.0, 1e-3, 100, &mut rng).unwrap().is_empty());
        assert!(synth_coincidence_dataset(4, &[0.01, 0.04], 0.02, 1e-3, 100, &mut rng).is_err());
    }

    #[test]
    fn lag_generator_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = LagTaskParams::default();
        let set = synth_lag_dataset(50, &p, &mut rng).unwrap();
        assert_eq!(set.len(), 50);
        assert_eq!(set.n_classes, 5);
        assert_eq!(set.layout.n_channels, 32);
        assert!(set.samples.iter().all(|s| s.raster.total_spikes() > 0));
    }
}
