//! The full protocol on a labelled dataset directory: reference prefix,
//! offline segment, online segment, point-level scores weighted by length.
//!
//! Pass a directory of `timestamp,value,label` CSV files to evaluate it;
//! without one the synthetic injection suite is written to a temporary
//! directory and used instead.

use std::path::PathBuf;

use metricpat::eval::{load_dataset_dir, run_protocol, write_series_csv, RunConfig, Split};
use metricpat::synth::{self, SuiteParams};

pub fn run(dataset: Option<PathBuf>) -> metricpat::Result<()> {
    let (dir, split, m, p) = match dataset {
        Some(dir) => (dir, Split::Fractions { normal_fraction: 0.1, offline_fraction: 0.55 }, 15, 99.5),
        None => {
            let params = SuiteParams::default();
            let dir = std::env::temp_dir().join("metricpat-synthetic");
            std::fs::create_dir_all(&dir)?;
            for c in synth::injection_suite(params) {
                write_series_csv(&c.series, dir.join(format!("{}.csv", c.series.name())))?;
            }
            (dir, Split::Indices { normal_end: params.normal_end, offline_end: params.offline_end }, 9, 99.0)
        }
    };
    let series = load_dataset_dir(&dir)?;
    let mut config = RunConfig::new(m, p, split);
    config.adaptive = true;
    let report = run_protocol(&config, &series)?;
    println!("offline\n{}\n\nonline\n{}", report.offline, report.online);
    if let Some(adaptive) = report.adaptive {
        println!("\nonline (adaptive)\n{adaptive}");
    }
    Ok(())
}

fn main() -> metricpat::Result<()> {
    run(std::env::args().nth(1).map(PathBuf::from))
}
