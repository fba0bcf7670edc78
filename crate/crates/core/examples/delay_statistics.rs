//! Samples the measured delay distribution and fits a lognormal back to it.

use denram::device::{fit_lognormal, sample_delays, DelayDistribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> denram::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let free = DelayDistribution::from_mean(22e-3, 0.5)?;
    let clipped = DelayDistribution::measured();
    for (name, dist) in [("unclipped", free), ("clipped", clipped)] {
        let d = sample_delays(&dist, 100_000, &mut rng)?;
        let (mu, sigma) = fit_lognormal(&d)?;
        let (lo, hi) = d.iter().fold((f64::MAX, f64::MIN), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        println!(
            "{name:<10} mean {:6.2} ms  median {:6.2} ms  log-std {:.3}  range [{:.2}, {:.2}] ms",
            d.iter().sum::<f64>() / d.len() as f64 * 1e3,
            mu.exp() * 1e3,
            sigma,
            lo * 1e3,
            hi * 1e3
        );
    }
    let mut hist = [0usize; 12];
    for x in sample_delays(&clipped, 20_000, &mut rng)? {
        hist[((x * 1e3 / 5.0) as usize).min(11)] += 1;
    }
    for (k, n) in hist.iter().enumerate() {
        println!("{:>3}-{:<3} ms {}", k * 5, k * 5 + 5, "#".repeat(n / 100));
    }
    Ok(())
}
