//! Adaptive learning: an anomaly shape never seen offline is only caught
//! once the store is allowed to grow new patterns online.

use metricpat::eval::{run_offline_experiment, run_online_experiment, RunConfig, Split};
use metricpat::synth::{self, SuiteParams};
use metricpat::Adaptation;

pub fn run() -> metricpat::Result<()> {
    let params = SuiteParams::default();
    let series: Vec<_> = synth::drift_suite(params).into_iter().map(|c| c.series).collect();
    let split = Split::Indices { normal_end: params.normal_end, offline_end: params.offline_end };
    let config = RunConfig::new(9, 99.0, split);

    let stores = run_offline_experiment(&config, &series)?.stores();
    let fixed = run_online_experiment(&config, &series, &stores, false)?;
    let adaptive = run_online_experiment(&config, &series, &stores, true)?;
    println!("weighted F1 without adaptation {:.3}, with {:.3}", fixed.report.weighted.f1, adaptive.report.weighted.f1);

    for (before, after) in stores.iter().zip(&adaptive.stores).take(3) {
        println!(
            "  {} patterns -> {} ({} anomalous, d_n {:.3}, d_a {:.3})",
            before.len(),
            after.len(),
            after.anomalous_ids().len(),
            after.d_n(),
            after.d_a()
        );
    }

    let mut store = stores[1].clone();
    let values = &series[1].values()[params.offline_end..];
    let records = metricpat::online::adapt_stream(&mut store, series[1].name(), values)?;
    let created = records.iter().filter(|r| matches!(r.adaptation, Adaptation::Created(_))).count();
    let switched = records.iter().filter(|r| matches!(r.adaptation, Adaptation::RoleSwitched(_))).count();
    println!("{}: {created} patterns created, {switched} switched to normal", series[1].name());
    Ok(())
}

fn main() -> metricpat::Result<()> {
    run()
}
