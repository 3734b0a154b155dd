//! Ingestion, prediction files, point-level scoring and the
//! offline/online experiment protocol.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affinity::AffinityConfig;
use crate::discovery::{discover_patterns, group_overlapping_clusters, DiscoveryConfig, PreferenceRule};
use crate::error::{Error, Result};
use crate::online::{adapt_stream, causal_point_records, detect_stream, DetectionRecord};
use crate::series::MetricSeries;
use crate::store::PatternStore;

fn csv_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_label(raw: &str) -> Option<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "0" | "false" => Some(false),
        "1" | "true" => Some(true),
        _ => None,
    }
}

/// Reads a `timestamp,value[,label]` CSV. Only `value` is mandatory; a
/// missing `timestamp` column means implicit index timestamps.
pub fn load_series_csv(path: impl AsRef<Path>) -> Result<MetricSeries> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, 1, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| csv_error(path, 1, e.to_string()))?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let value_col = column("value").ok_or_else(|| csv_error(path, 1, "missing `value` column"))?;
    let ts_col = column("timestamp");
    let label_col = column("label");

    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            csv_error(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |col: usize, what: &str| -> Result<&str> {
            match record.get(col) {
                Some(f) if !f.is_empty() => Ok(f),
                _ => Err(csv_error(path, line, format!("missing {what}"))),
            }
        };
        let value: f64 = field(value_col, "value")?
            .parse()
            .map_err(|_| csv_error(path, line, format!("bad value {:?}", &record[value_col])))?;
        if !value.is_finite() {
            return Err(csv_error(path, line, "non-finite value"));
        }
        values.push(value);
        if let Some(c) = ts_col {
            let raw = field(c, "timestamp")?;
            let ts: i64 = raw
                .parse()
                .map_err(|_| csv_error(path, line, format!("bad timestamp {raw:?}")))?;
            if timestamps.last().is_some_and(|&prev| ts <= prev) {
                return Err(csv_error(path, line, "timestamps not strictly increasing"));
            }
            timestamps.push(ts);
        }
        if let Some(c) = label_col {
            let raw = field(c, "label")?;
            labels.push(parse_label(raw).ok_or_else(|| csv_error(path, line, format!("bad label {raw:?}")))?);
        }
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    if values.is_empty() {
        return Err(csv_error(path, 1, "no data rows"));
    }
    MetricSeries::new(
        name,
        ts_col.map(|_| timestamps),
        values,
        label_col.map(|_| labels),
    )
}

pub fn write_series_csv(series: &MetricSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, 0, e.to_string()))?;
    let io = |e: csv::Error| csv_error(path, 0, e.to_string());
    if series.labels().is_some() {
        w.write_record(["timestamp", "value", "label"]).map_err(io)?;
    } else {
        w.write_record(["timestamp", "value"]).map_err(io)?;
    }
    for (i, v) in series.values().iter().enumerate() {
        let ts = series.timestamp(i).to_string();
        let v = v.to_string();
        match series.labels() {
            Some(l) => w.write_record([ts.as_str(), v.as_str(), if l[i] { "1" } else { "0" }]),
            None => w.write_record([ts.as_str(), v.as_str()]),
        }
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// All `*.csv` files of a directory, sorted by file name.
pub fn load_dataset_dir(dir: impl AsRef<Path>) -> Result<Vec<MetricSeries>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir.as_ref())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")))
        .collect();
    paths.sort();
    paths.iter().map(load_series_csv).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesScore {
    pub name: String,
    pub length: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Point-level precision, recall and F1. A series with no positives
/// predicted or labelled scores 1 on all three; otherwise an empty
/// denominator scores 0.
pub fn point_metrics(name: &str, pred: &[bool], truth: &[bool]) -> Result<SeriesScore> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (&p, &t) in pred.iter().zip(truth) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let (precision, recall, f1) = if tp + fp + fn_ == 0 {
        (1.0, 1.0, 1.0)
    } else {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        (precision, recall, f1)
    };
    Ok(SeriesScore {
        name: name.to_string(),
        length: pred.len(),
        tp,
        fp,
        fn_,
        precision,
        recall,
        f1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_series: Vec<SeriesScore>,
    /// Averages weighted by scored length.
    pub weighted: WeightedScore,
}

impl EvalReport {
    pub fn new(per_series: Vec<SeriesScore>) -> Self {
        let total: f64 = per_series.iter().map(|s| s.length as f64).sum();
        let avg = |f: fn(&SeriesScore) -> f64| {
            if total == 0.0 {
                0.0
            } else {
                // summed in sorted order so series order cannot change the result
                let mut terms: Vec<f64> = per_series.iter().map(|s| f(s) * s.length as f64).collect();
                terms.sort_by(f64::total_cmp);
                terms.iter().sum::<f64>() / total
            }
        };
        let weighted = WeightedScore {
            precision: avg(|s| s.precision),
            recall: avg(|s| s.recall),
            f1: avg(|s| s.f1),
        };
        Self { per_series, weighted }
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<28} {:>8} {:>6} {:>6} {:>6} {:>9} {:>9} {:>9}",
            "series", "length", "TP", "FP", "FN", "precision", "recall", "F1"
        )?;
        for s in &self.per_series {
            writeln!(
                f,
                "{:<28} {:>8} {:>6} {:>6} {:>6} {:>9.3} {:>9.3} {:>9.3}",
                s.name, s.length, s.tp, s.fp, s.fn_, s.precision, s.recall, s.f1
            )?;
        }
        write!(
            f,
            "{:<28} {:>8} {:>6} {:>6} {:>6} {:>9.3} {:>9.3} {:>9.3}",
            "weighted",
            self.per_series.iter().map(|s| s.length).sum::<usize>(),
            "",
            "",
            "",
            self.weighted.precision,
            self.weighted.recall,
            self.weighted.f1
        )
    }
}

/// One line of a prediction file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub timestamp: i64,
    pub pred: u8,
    pub cluster_id: usize,
    /// Semicolon-joined issue labels.
    pub labels: String,
}

impl PredictionRow {
    pub fn new(timestamp: i64, pred: bool, cluster_id: usize, labels: &BTreeSet<String>) -> Self {
        Self {
            timestamp,
            pred: pred.into(),
            cluster_id,
            labels: labels.iter().map(String::as_str).collect::<Vec<_>>().join(";"),
        }
    }

    pub fn is_anomaly(&self) -> bool {
        self.pred != 0
    }
}

pub fn write_predictions(rows: &[PredictionRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, 0, e.to_string()))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_error(path, 0, e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<PredictionRow>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, 1, e.to_string()))?;
    r.deserialize()
        .map(|row| {
            row.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                csv_error(path, line, e.to_string())
            })
        })
        .collect()
}

/// Scores a prediction file against a labelled series, matching rows by
/// timestamp.
pub fn score_predictions(rows: &[PredictionRow], truth: &MetricSeries) -> Result<SeriesScore> {
    let labels = truth
        .labels()
        .ok_or_else(|| Error::InvalidSeries(format!("{}: no label column", truth.name())))?;
    let index: std::collections::HashMap<i64, usize> =
        (0..truth.len()).map(|i| (truth.timestamp(i), i)).collect();
    let mut pred = Vec::with_capacity(rows.len());
    let mut gold = Vec::with_capacity(rows.len());
    for row in rows {
        let i = *index.get(&row.timestamp).ok_or_else(|| {
            Error::InvalidSeries(format!("timestamp {} not found in {}", row.timestamp, truth.name()))
        })?;
        pred.push(row.is_anomaly());
        gold.push(labels[i]);
    }
    point_metrics(truth.name(), &pred, &gold)
}

/// Where each series is cut into reference, offline and online segments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Split {
    /// Absolute point indices.
    Indices { normal_end: usize, offline_end: usize },
    /// Fractions of each series' length.
    Fractions { normal_fraction: f64, offline_fraction: f64 },
}

impl Split {
    /// `(normal_end, offline_end)` for a series of `len` points; both must
    /// fall strictly inside the series, in order.
    pub fn resolve(&self, len: usize) -> Result<(usize, usize)> {
        let (a, b) = match *self {
            Split::Indices { normal_end, offline_end } => (normal_end, offline_end),
            Split::Fractions {
                normal_fraction,
                offline_fraction,
            } => (
                (normal_fraction * len as f64).round() as usize,
                (offline_fraction * len as f64).round() as usize,
            ),
        };
        if !(0 < a && a < b && b < len) {
            return Err(Error::InvalidConfig(format!(
                "split ({a}, {b}) invalid for a series of length {len}"
            )));
        }
        Ok((a, b))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Directory of per-curve CSV files (used by the `run` command).
    #[serde(default)]
    pub dataset_dir: Option<PathBuf>,
    pub m: usize,
    pub p: f64,
    #[serde(default)]
    pub exclusion: Option<usize>,
    pub split: Split,
    /// Also report adaptive online learning next to plain detection.
    #[serde(default)]
    pub adaptive: bool,
    #[serde(default)]
    pub mitigate_contamination: bool,
    #[serde(default)]
    pub affinity: AffinityConfig,
    #[serde(default)]
    pub preference: PreferenceRule,
}

impl RunConfig {
    pub fn new(m: usize, p: f64, split: Split) -> Self {
        Self {
            dataset_dir: None,
            m,
            p,
            exclusion: None,
            split,
            adaptive: false,
            mitigate_contamination: false,
            affinity: AffinityConfig::default(),
            preference: PreferenceRule::default(),
        }
    }

    pub fn discovery(&self) -> DiscoveryConfig {
        DiscoveryConfig {
            m: self.m,
            p: self.p,
            exclusion: self.exclusion,
            mitigate_contamination: self.mitigate_contamination,
            affinity: self.affinity.clone(),
            preference: self.preference,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

fn labels_of(series: &MetricSeries) -> Result<&[bool]> {
    series
        .labels()
        .ok_or_else(|| Error::InvalidSeries(format!("{}: ground-truth labels required", series.name())))
}

/// Offline results for one curve.
#[derive(Debug, Clone)]
pub struct OfflineCurve {
    pub store: PatternStore,
    /// Predictions over the offline segment.
    pub rows: Vec<PredictionRow>,
    pub candidate_count: usize,
}

#[derive(Debug, Clone)]
pub struct OfflineOutcome {
    pub report: EvalReport,
    pub curves: Vec<OfflineCurve>,
}

impl OfflineOutcome {
    pub fn stores(&self) -> Vec<PatternStore> {
        self.curves.iter().map(|c| c.store.clone()).collect()
    }
}

/// Offline stage of one curve: the reference prefix is treated as
/// anomaly-free, the offline segment is inspected.
pub fn offline_curve(config: &RunConfig, series: &MetricSeries) -> Result<(OfflineCurve, SeriesScore)> {
    let (normal_end, offline_end) = config.split.resolve(series.len())?;
    if series.labels().is_some_and(|l| l[..normal_end].iter().any(|&x| x)) {
        log::warn!("{}: labelled anomalies in the reference prefix are ignored", series.name());
    }
    let values = series.values();
    let discovery = discover_patterns(&values[..normal_end], &values[normal_end..offline_end], &config.discovery())?;
    let candidate_count = discovery.candidate_count();
    let mut store = discovery.store;
    group_overlapping_clusters(&mut store)?;
    store.drop_provenance();

    let rows: Vec<PredictionRow> = (normal_end..offline_end)
        .map(|i| {
            let k = i - normal_end;
            let cluster = discovery.point_clusters[k];
            let pred = discovery.predictions[k];
            let labels = if pred { store.clusters()[cluster].labels.clone() } else { BTreeSet::new() };
            PredictionRow::new(series.timestamp(i), pred, cluster, &labels)
        })
        .collect();
    let score = match series.labels() {
        Some(truth) => point_metrics(series.name(), &discovery.predictions, &truth[normal_end..offline_end])?,
        None => point_metrics(series.name(), &discovery.predictions, &discovery.predictions)?,
    };
    Ok((
        OfflineCurve {
            store,
            rows,
            candidate_count,
        },
        score,
    ))
}

/// Runs the offline stage on every curve (in parallel) and scores the
/// offline segments.
pub fn run_offline_experiment(config: &RunConfig, series: &[MetricSeries]) -> Result<OfflineOutcome> {
    for s in series {
        labels_of(s)?;
    }
    let results: Vec<(OfflineCurve, SeriesScore)> =
        series.par_iter().map(|s| offline_curve(config, s)).collect::<Result<_>>()?;
    let (curves, scores): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok(OfflineOutcome {
        report: EvalReport::new(scores),
        curves,
    })
}

/// Point predictions from a stream of window records.
pub fn stream_rows(
    series: &MetricSeries,
    offset: usize,
    records: &[DetectionRecord],
    m: usize,
) -> Vec<PredictionRow> {
    let len = records.len() + m - 1;
    causal_point_records(records, len, m)
        .into_iter()
        .enumerate()
        .map(|(k, r)| PredictionRow::new(series.timestamp(offset + k), r.is_anomaly, r.matched_cluster_id, &r.recommended_labels))
        .collect()
}

/// Replays `values[offset..]` of a curve through a store. With `adaptive`
/// the store learns as it goes; otherwise it is only read.
pub fn replay(
    store: &mut PatternStore,
    series: &MetricSeries,
    offset: usize,
    adaptive: bool,
) -> Result<Vec<PredictionRow>> {
    let segment = &series.values()[offset..];
    let records = if adaptive {
        adapt_stream(store, series.name(), segment)?
    } else {
        detect_stream(store, series.name(), segment)?
    };
    Ok(stream_rows(series, offset, &records, store.m()))
}

#[derive(Debug, Clone)]
pub struct OnlineOutcome {
    pub report: EvalReport,
    /// Final stores (unchanged copies when not adaptive).
    pub stores: Vec<PatternStore>,
    pub rows: Vec<Vec<PredictionRow>>,
}

/// Replays every curve's online segment through its store, window by
/// window, and scores the causal point labels. The input stores are never
/// modified.
pub fn run_online_experiment(
    config: &RunConfig,
    series: &[MetricSeries],
    stores: &[PatternStore],
    adaptive: bool,
) -> Result<OnlineOutcome> {
    if series.len() != stores.len() {
        return Err(Error::LengthMismatch {
            left: series.len(),
            right: stores.len(),
        });
    }
    let results: Vec<(PatternStore, Vec<PredictionRow>, SeriesScore)> = series
        .par_iter()
        .zip(stores)
        .map(|(s, store)| {
            let truth = labels_of(s)?;
            let (_, offline_end) = config.split.resolve(s.len())?;
            let mut store = store.clone();
            let rows = replay(&mut store, s, offline_end, adaptive)?;
            let pred: Vec<bool> = rows.iter().map(PredictionRow::is_anomaly).collect();
            let score = point_metrics(s.name(), &pred, &truth[offline_end..])?;
            Ok((store, rows, score))
        })
        .collect::<Result<_>>()?;
    let mut out_stores = Vec::with_capacity(results.len());
    let mut rows = Vec::with_capacity(results.len());
    let mut scores = Vec::with_capacity(results.len());
    for (store, r, score) in results {
        out_stores.push(store);
        rows.push(r);
        scores.push(score);
    }
    Ok(OnlineOutcome {
        report: EvalReport::new(scores),
        stores: out_stores,
        rows,
    })
}

#[derive(Debug, Clone)]
pub struct ProtocolReport {
    pub offline: EvalReport,
    pub online: EvalReport,
    pub adaptive: Option<EvalReport>,
}

/// Offline discovery followed by online replay, the full evaluation
/// protocol.
pub fn run_protocol(config: &RunConfig, series: &[MetricSeries]) -> Result<ProtocolReport> {
    let offline = run_offline_experiment(config, series)?;
    let stores = offline.stores();
    let online = run_online_experiment(config, series, &stores, false)?;
    let adaptive = if config.adaptive {
        Some(run_online_experiment(config, series, &stores, true)?.report)
    } else {
        None
    };
    Ok(ProtocolReport {
        offline: offline.report,
        online: online.report,
        adaptive,
    })
}
