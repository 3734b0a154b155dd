//! Self-join and cross-join matrix profiles over min-max normalized
//! windows, checked against the brute-force oracle.

use metricpat::{brute_force_spw, cross_join, self_join, synth};

pub fn run() -> metricpat::Result<()> {
    let m = 16;
    let mut values = synth::sine(600, 40.0, 0.01, 7);
    values[400] += 3.0;

    let profile = self_join(&values, m)?;
    let (discord, distance) = profile
        .distances
        .iter()
        .enumerate()
        .fold((0, 0.0), |best, (i, &d)| if d > best.1 { (i, d) } else { best });
    println!("self-join: {} windows, discord at {discord} (d = {distance:.3}, nearest {})", profile.len(), profile.indices[discord]);

    let reference = synth::sine(600, 40.0, 0.01, 8);
    let cross = cross_join(&reference, &values, m)?;
    let oracle = brute_force_spw(&reference, &values, m, None)?;
    let worst = cross
        .distances
        .iter()
        .zip(&oracle.distances)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("cross-join: max |fast - oracle| = {worst:.1e}");
    let flagged: Vec<usize> = (0..cross.len()).filter(|&i| cross.distances[i] > 1.0).collect();
    println!("windows far from the reference: {:?}..{:?}", flagged.first(), flagged.last());
    Ok(())
}

fn main() -> metricpat::Result<()> {
    run()
}
