//! Versioned binary checkpoints.
//!
//! Layout (little-endian): the magic `DENRAMCK`, a `u32` version, a `u8`
//! model kind (1 delay network, 2 recurrent), then the kind's fields. Shapes
//! are `u64`, reals `f64`. Delay networks store their delays, the bin shifts
//! derived from them (checked on load), `dt`, the weight tensor in row-major
//! order, LIF and readout parameters and the delay seed.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::dendrite::DelayBank;
use crate::error::{Error, Result};
use crate::network::{DenramModel, LifParams, Model, ReadoutMode, Reset, SrnnModel};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DENRAMCK";
pub const CHECKPOINT_VERSION: u32 = 1;

const KIND_DENRAM: u8 = 1;
const KIND_SRNN: u8 = 2;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }

    fn u64(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u64).to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn matrix(&mut self, m: &Array2<f64>) {
        for v in m.iter() {
            self.f64(*v);
        }
    }

    fn lif(&mut self, p: &LifParams) {
        self.f64(p.alpha);
        self.f64(p.v_threshold);
        self.u8(match p.reset {
            Reset::ToZero => 0,
        });
        self.u64(p.refractory_bins);
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::domain(format!("corrupt checkpoint: {}", msg.into()))
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| corrupt(format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| corrupt(format!("size {v} too large")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Array2<f64>> {
        let n = rows.checked_mul(cols).ok_or_else(|| corrupt("shape overflow"))?;
        if n.saturating_mul(8) > self.bytes.len() - self.pos {
            return Err(corrupt(format!("{rows}×{cols} matrix exceeds file size")));
        }
        let data = (0..n).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        Ok(Array2::from_shape_vec((rows, cols), data).expect("length matches shape"))
    }

    fn lif(&mut self) -> Result<LifParams> {
        let alpha = self.f64()?;
        let v_threshold = self.f64()?;
        let reset = match self.u8()? {
            0 => Reset::ToZero,
            k => return Err(corrupt(format!("unknown reset kind {k}"))),
        };
        let refractory_bins = self.u64()?;
        let p = LifParams {
            alpha,
            v_threshold,
            reset,
            refractory_bins,
        };
        p.validate("checkpoint.lif")?;
        Ok(p)
    }
}

pub fn encode_checkpoint(model: &Model) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(CHECKPOINT_MAGIC);
    w.0.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    match model {
        Model::Denram(m) => {
            w.u8(KIND_DENRAM);
            w.u64(m.n_in());
            w.u64(m.n_delays());
            w.u64(m.n_out());
            w.matrix(m.bank.delays());
            for s in m.bank.shifts().iter() {
                w.u64(*s);
            }
            w.f64(m.bank.dt());
            w.matrix(&m.weights);
            w.lif(&m.lif);
            w.u8(match m.readout {
                ReadoutMode::MaxPotential => 0,
                ReadoutMode::SpikeCount => 1,
            });
            w.f64(m.alpha_out);
            w.0.extend_from_slice(&m.delay_seed.to_le_bytes());
        }
        Model::Srnn(m) => {
            w.u8(KIND_SRNN);
            w.u64(m.n_in());
            w.u64(m.n_hidden());
            w.u64(m.n_out());
            w.matrix(&m.w_in);
            w.matrix(&m.w_rec);
            w.matrix(&m.w_out);
            w.lif(&m.lif_hidden);
            w.f64(m.alpha_out);
        }
    }
    w.0
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Model> {
    if !bytes.starts_with(CHECKPOINT_MAGIC) {
        return Err(corrupt("missing magic"));
    }
    let mut r = Reader {
        bytes,
        pos: CHECKPOINT_MAGIC.len(),
    };
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let model = match r.u8()? {
        KIND_DENRAM => {
            let (n_in, n_delays, n_out) = (r.u64()?, r.u64()?, r.u64()?);
            let delays = r.matrix(n_in, n_delays)?;
            let shifts = (0..n_in * n_delays).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
            let dt = r.f64()?;
            let bank = DelayBank::from_delays(delays, dt)?;
            if bank.shifts().iter().copied().ne(shifts) {
                return Err(corrupt("stored shifts disagree with delays"));
            }
            let weights = r.matrix(n_in * n_delays, n_out)?;
            let lif = r.lif()?;
            let readout = match r.u8()? {
                0 => ReadoutMode::MaxPotential,
                1 => ReadoutMode::SpikeCount,
                k => return Err(corrupt(format!("unknown readout kind {k}"))),
            };
            let alpha_out = r.f64()?;
            let delay_seed = u64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
            let mut m = DenramModel::new(bank, weights, lif, readout, alpha_out)?;
            m.delay_seed = delay_seed;
            Model::Denram(m)
        }
        KIND_SRNN => {
            let (n_in, n_h, n_out) = (r.u64()?, r.u64()?, r.u64()?);
            let w_in = r.matrix(n_in, n_h)?;
            let w_rec = r.matrix(n_h, n_h)?;
            let w_out = r.matrix(n_h, n_out)?;
            let lif = r.lif()?;
            let alpha_out = r.f64()?;
            Model::Srnn(SrnnModel::new(w_in, w_rec, w_out, lif, alpha_out)?)
        }
        k => return Err(corrupt(format!("unknown model kind {k}"))),
    };
    if r.pos != bytes.len() {
        return Err(corrupt("trailing bytes"));
    }
    Ok(model)
}

pub fn save_checkpoint(path: &Path, model: &Model) -> Result<()> {
    fs::write(path, encode_checkpoint(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Model> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
