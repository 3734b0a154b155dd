//! Online detection with issue-label recommendation: engineers label an
//! anomalous pattern once, and later windows matching it carry the label.

use metricpat::online::{causal_point_records, detect_stream};
use metricpat::synth::{self, SuiteParams};
use metricpat::{discover_patterns, group_overlapping_clusters, DiscoveryConfig};

pub fn run() -> metricpat::Result<()> {
    let params = SuiteParams::default();
    let curve = &synth::injection_suite(params)[2];
    let values = curve.series.values();
    let config = DiscoveryConfig { m: 9, p: 99.0, ..DiscoveryConfig::default() };
    let mut store = discover_patterns(&values[..params.normal_end], &values[params.normal_end..params.offline_end], &config)?.store;
    group_overlapping_clusters(&mut store)?;
    store.drop_provenance();

    for id in store.anomalous_ids() {
        store.label_pattern(id, ["connection pool exhausted"])?;
    }

    let online = &values[params.offline_end..];
    let records = detect_stream(&store, curve.series.name(), online)?;
    let points = causal_point_records(&records, online.len(), store.m());
    let flagged: Vec<usize> = (0..points.len()).filter(|&i| points[i].is_anomaly).collect();
    let injected = curve.injections[1].start - params.offline_end;
    println!("injected at {injected}..{}, {} points flagged", injected + curve.injections[1].len, flagged.len());
    if let Some(&first) = flagged.first() {
        let r = points[first];
        println!(
            "first alert at {first}: pattern {}, distance {:.3}, labels {:?}",
            r.matched_cluster_id, r.distance, r.recommended_labels
        );
    }
    Ok(())
}

fn main() -> metricpat::Result<()> {
    run()
}
