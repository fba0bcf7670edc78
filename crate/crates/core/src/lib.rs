//! Behavioral simulation and training of RRAM delay-line dendritic networks.
//!
//! Spike inputs are expanded in time by banks of fixed, device-derived delays
//! and weighted by trainable RRAM conductances before reaching leaky
//! integrate-and-fire or leaky-integrator readouts. A recurrent spiking
//! baseline, noise-aware training and footprint/power accounting complete the
//! toolkit.

pub mod device;
pub mod dendrite;
pub mod analysis;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod harness;
pub mod learn;
pub mod network;
pub mod raster;

pub use error::{Error, Result};
pub use raster::SpikeRaster;
