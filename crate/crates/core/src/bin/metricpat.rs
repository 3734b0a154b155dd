use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use metricpat::discovery::{discover_patterns, group_overlapping_clusters, DiscoveryConfig};
use metricpat::eval::{
    self, load_dataset_dir, load_series_csv, read_predictions, score_predictions, write_predictions, PredictionRow,
    RunConfig,
};
use metricpat::{AffinityConfig, PatternStore};

#[derive(Parser)]
#[command(name = "metricpat", version, about = "Metric-pattern anomaly detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Discover normal and anomalous patterns and flag anomalies offline.
    Offline {
        /// Anomaly-free reference curve (labels are ignored).
        #[arg(long)]
        normal: PathBuf,
        /// Curve to inspect.
        #[arg(long)]
        detect: PathBuf,
        #[arg(short = 'm', default_value_t = 15)]
        m: usize,
        #[arg(short = 'p', default_value_t = 99.5)]
        p: f64,
        /// Also prune weak links inside the reference curve.
        #[arg(long)]
        mitigate_contamination: bool,
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        pred_out: PathBuf,
    },
    /// Replay a curve window by window against a pattern store.
    Online {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Learn new patterns while detecting.
        #[arg(long)]
        adaptive: bool,
        #[arg(long)]
        pred_out: PathBuf,
        /// Where to write the updated store (adaptive mode).
        #[arg(long)]
        store_out: Option<PathBuf>,
    },
    /// Attach issue labels to a pattern and its overlap group.
    Label {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        pattern_id: usize,
        #[arg(long = "add", required = true, num_args = 1..)]
        add: Vec<String>,
    },
    /// Score a prediction file against a labelled curve.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Full offline + online protocol over a dataset directory.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Dump pattern means as CSV rows.
    ExportPatterns {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(err) = run(Cli::parse()) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Offline {
            normal,
            detect,
            m,
            p,
            mitigate_contamination,
            store,
            pred_out,
        } => {
            let normal = load_series_csv(&normal)?;
            if normal.labels().is_some_and(|l| l.iter().any(|&x| x)) {
                log::warn!("{}: labelled anomalies in the reference curve are ignored", normal.name());
            }
            let detect = load_series_csv(&detect)?;
            let config = DiscoveryConfig {
                m,
                p,
                exclusion: None,
                mitigate_contamination,
                affinity: AffinityConfig::default(),
                preference: Default::default(),
            };
            let discovery = discover_patterns(normal.values(), detect.values(), &config)?;
            let mut patterns = discovery.store;
            group_overlapping_clusters(&mut patterns)?;
            patterns.drop_provenance();
            let rows: Vec<PredictionRow> = (0..detect.len())
                .map(|i| {
                    let pred = discovery.predictions[i];
                    let cluster = discovery.point_clusters[i];
                    let labels = if pred {
                        patterns.clusters()[cluster].labels.clone()
                    } else {
                        Default::default()
                    };
                    PredictionRow::new(detect.timestamp(i), pred, cluster, &labels)
                })
                .collect();
            patterns.save(&store).with_context(|| format!("writing {}", store.display()))?;
            write_predictions(&rows, &pred_out)?;
            println!(
                "{} patterns ({} anomalous), {} of {} points flagged",
                patterns.len(),
                patterns.anomalous_ids().len(),
                rows.iter().filter(|r| r.is_anomaly()).count(),
                rows.len()
            );
        }
        Command::Online {
            store,
            input,
            adaptive,
            pred_out,
            store_out,
        } => {
            let mut patterns = PatternStore::load(&store).with_context(|| format!("reading {}", store.display()))?;
            let series = load_series_csv(&input)?;
            if store_out.is_some() && !adaptive {
                log::warn!("--store-out without --adaptive writes the store unchanged");
            }
            let rows = eval::replay(&mut patterns, &series, 0, adaptive)?;
            write_predictions(&rows, &pred_out)?;
            if let Some(out) = store_out {
                patterns.save(&out)?;
            }
            println!(
                "{} of {} points flagged, {} patterns",
                rows.iter().filter(|r| r.is_anomaly()).count(),
                rows.len(),
                patterns.len()
            );
        }
        Command::Label { store, pattern_id, add } => {
            let mut patterns = PatternStore::load(&store)?;
            patterns.label_pattern(pattern_id, add)?;
            patterns.save(&store)?;
            let c = patterns.cluster(pattern_id)?;
            let labels: Vec<&str> = c.labels.iter().map(String::as_str).collect();
            println!("pattern {pattern_id}: {}", labels.join("; "));
        }
        Command::Eval { pred, truth } => {
            let rows = read_predictions(&pred)?;
            let truth = load_series_csv(&truth)?;
            let s = score_predictions(&rows, &truth)?;
            println!("precision {:.4}", s.precision);
            println!("recall    {:.4}", s.recall);
            println!("f1        {:.4}", s.f1);
        }
        Command::Run { config } => {
            let cfg = RunConfig::load(&config).with_context(|| format!("reading {}", config.display()))?;
            let Some(dir) = &cfg.dataset_dir else {
                bail!("config has no dataset_dir");
            };
            // relative dataset paths are resolved against the config file
            let dir = match config.parent() {
                Some(base) if dir.is_relative() => base.join(dir),
                _ => dir.clone(),
            };
            let series = load_dataset_dir(&dir)?;
            if series.is_empty() {
                bail!("no CSV files in {}", dir.display());
            }
            let report = eval::run_protocol(&cfg, &series)?;
            println!("offline\n{}\n", report.offline);
            println!("online\n{}", report.online);
            if let Some(adaptive) = report.adaptive {
                println!("\nonline (adaptive)\n{adaptive}");
            }
        }
        Command::ExportPatterns { store, out } => {
            let patterns = PatternStore::load(&store)?;
            let mut w = csv::Writer::from_path(&out)?;
            let mut header = vec!["id".to_string(), "role".into(), "size".into(), "radius".into(), "labels".into()];
            header.extend((0..patterns.m()).map(|k| format!("v{k}")));
            w.write_record(&header)?;
            for c in patterns.clusters() {
                let mut row = vec![
                    c.id.to_string(),
                    format!("{:?}", c.role).to_lowercase(),
                    c.size.to_string(),
                    c.radius.to_string(),
                    c.labels.iter().cloned().collect::<Vec<_>>().join(";"),
                ];
                row.extend(c.mean.iter().map(f64::to_string));
                w.write_record(&row)?;
            }
            w.flush()?;
            println!("{} patterns written to {}", patterns.len(), out.display());
        }
    }
    Ok(())
}
