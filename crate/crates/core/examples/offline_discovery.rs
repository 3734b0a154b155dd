//! Offline pattern discovery: compare a curve with an anomaly-free
//! reference, cluster the windows into normal and anomalous patterns, and
//! save the pattern store.

use metricpat::synth::{self, SuiteParams};
use metricpat::{discover_patterns, group_overlapping_clusters, DiscoveryConfig};

pub fn run() -> metricpat::Result<()> {
    let params = SuiteParams::default();
    let curve = &synth::injection_suite(params)[1];
    let values = curve.series.values();
    let normal = &values[..params.normal_end];
    let detect = &values[params.normal_end..params.offline_end];

    let config = DiscoveryConfig { m: 9, p: 99.0, ..DiscoveryConfig::default() };
    let discovery = discover_patterns(normal, detect, &config)?;
    let mut store = discovery.store;
    println!(
        "{} windows, {} anomaly candidates, {} normal and {} anomalous patterns",
        discovery.graph.node_count(),
        discovery.components.isolated.len(),
        store.normal_ids().len(),
        store.anomalous_ids().len()
    );
    println!("d_n = {:.3}, d_a = {:.3}", store.d_n(), store.d_a());

    group_overlapping_clusters(&mut store)?;
    for id in store.anomalous_ids() {
        let c = store.cluster(id)?;
        println!("  pattern {id}: size {}, radius {:.3}, group {:?}", c.size, c.radius, c.group);
    }

    let injected = curve.injections[0].start - params.normal_end;
    let flagged: Vec<usize> = (0..detect.len()).filter(|&i| discovery.predictions[i]).collect();
    println!("injected at {injected}..{}, flagged {:?}..{:?}", injected + curve.injections[0].len, flagged.first(), flagged.last());

    store.drop_provenance();
    let path = std::env::temp_dir().join("metricpat-offline-store.json");
    store.save(&path)?;
    println!("store written to {}", path.display());
    Ok(())
}

fn main() -> metricpat::Result<()> {
    run()
}
