//! Writes the reduced keyword-spotting stand-in to ERAS (text and binary),
//! reads both back and checks they agree.
//!
//! Usage: `raster_io [PATH]`, default `data/lag_kws.eras`.

use std::path::PathBuf;

use denram::data::{read_eras, synth_lag_dataset, write_eras_binary, write_eras_text, LagTaskParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> denram::Result<()> {
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("data/lag_kws.eras"));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| denram::Error::Io { path: dir.into(), source: e })?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let set = synth_lag_dataset(500, &LagTaskParams::default(), &mut rng)?;
    let binary = path.with_extension("erasb");
    write_eras_text(&path, &set)?;
    write_eras_binary(&binary, &set)?;
    let (a, b) = (read_eras(&path)?, read_eras(&binary)?);
    assert_eq!(a.samples, b.samples);
    let size = |p: &PathBuf| std::fs::metadata(p).map(|m| m.len()).unwrap_or(0);
    println!(
        "{} samples, {} channels × {} bins at {} ms, classes {:?}, {} spikes",
        a.len(),
        a.layout.n_channels,
        a.layout.n_steps,
        a.layout.dt * 1e3,
        a.class_counts(),
        a.total_spikes()
    );
    println!("{}: {} bytes; {}: {} bytes", path.display(), size(&path), binary.display(), size(&binary));
    Ok(())
}
