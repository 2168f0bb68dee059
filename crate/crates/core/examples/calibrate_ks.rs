//! Calibration run for the frozen KS thresholds.
//!
//! Prints the distribution of per-replica KS distances between empirical
//! spectra and the semicircle, and the rejection rates of the two-sample
//! sampler comparison over many seeds. Output is committed next to this file
//! as `calibrate_ks.txt`.
//!
//! `cargo run --release --example calibrate_ks`

use ncfbm::ensemble::EnsembleConfig;
use ncfbm::stats::{self, Thresholds};
use ncfbm::{HurstParameter, SeedSpec, TimeGrid};

fn quantile(sorted: &[f64], q: f64) -> f64 {
    sorted[((sorted.len() - 1) as f64 * q).round() as usize]
}

fn main() -> ncfbm::Result<()> {
    let grid = TimeGrid::uniform(1.0, 1)?;
    println!("semicircle KS distance per replica (t = 1, 400 replicas, seed 424242)");
    println!("{:>4} {:>5} {:>9} {:>9} {:>9} {:>9}", "n", "h", "median", "q95", "q99", "max");
    for h in [0.6, 0.75] {
        for n in [50, 100, 200] {
            let cfg = EnsembleConfig::new(n, HurstParameter::new(h)?, grid.clone(), SeedSpec::new(424_242), 400)?;
            let mut d = stats::semicircle_ks_distances(&cfg, &[1.0])?.remove(0);
            d.sort_by(f64::total_cmp);
            println!(
                "{n:>4} {h:>5} {:>9.5} {:>9.5} {:>9.5} {:>9.5}",
                quantile(&d, 0.5),
                quantile(&d, 0.95),
                quantile(&d, 0.99),
                d[d.len() - 1]
            );
        }
    }

    println!();
    println!("Cholesky vs circulant two-sample KS, H = 0.7, 64 steps, 5000 paths, seeds 0..400");
    let th = Thresholds::default();
    let ps: Vec<f64> = (0..400)
        .map(|s| Ok(stats::sampler_equivalence_test(HurstParameter::new(0.7)?, 64, 5_000, SeedSpec::new(s), &th)?.statistic))
        .collect::<ncfbm::Result<_>>()?;
    for level in [0.01, 0.05, 0.1, 0.5] {
        let rate = ps.iter().filter(|&&p| p < level).count() as f64 / ps.len() as f64;
        println!("rejection rate at level {level}: {rate:.4}");
    }
    Ok(())
}
