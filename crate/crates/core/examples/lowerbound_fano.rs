//! Build a checkerboard family, print its pairwise separation, and trace how
//! fast maximum likelihood over the family identifies the true member.

use fourier_density::lowerbound::{build_family, fano_experiment, pair_metrics, FamilyMle};
use fourier_density::Stream;

fn main() -> fourier_density::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let (eps, n) = (0.1, 16);
    let family = build_family(eps, 1, n, 1.0, Stream::new(seed))?;
    let pairs = pair_metrics(&family)?;
    let min_tv = pairs.iter().map(|p| p.tv).fold(f64::INFINITY, f64::min);
    let max_kl = pairs.iter().map(|p| p.kl).fold(0.0, f64::max);
    println!(
        "{n} members on {} cells, {} pairs: min TV {min_tv:.4}, max KL {max_kl:.4}",
        family[0].cell_count(),
        pairs.len()
    );

    let learner = FamilyMle { family: family.clone() };
    let rows = fano_experiment(&family, &learner, &[1, 10, 100, 1000, 10_000], 40, Stream::new(seed + 1))?;
    for r in rows {
        println!("m = {:>6}: mean TV {:.4} ± {:.4}", r.m, r.mean_tv, r.stderr);
    }
    Ok(())
}
