//! Affinity propagation picks its own number of clusters.

use metricpat::affinity::{cluster, AffinityConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn run() -> metricpat::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let centres = [(0.0, 0.0), (4.0, 1.0), (1.0, 5.0)];
    let points: Vec<Vec<f64>> = (0..45)
        .map(|i| {
            let (x, y) = centres[i % 3];
            vec![x + rng.gen_range(-0.5..0.5), y + rng.gen_range(-0.5..0.5)]
        })
        .collect();

    let result = cluster(&points, &AffinityConfig::default())?;
    println!(
        "{} clusters after {} iterations (converged: {})",
        result.cluster_count(),
        result.iterations,
        result.converged
    );
    for (&exemplar, members) in result.exemplars.iter().zip(result.members()) {
        let p = &points[exemplar];
        println!("  exemplar {exemplar:>2} at ({:.2}, {:.2}): {} points", p[0], p[1], members.len());
    }
    Ok(())
}

fn main() -> metricpat::Result<()> {
    run()
}
