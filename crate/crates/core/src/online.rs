//! Streaming detection against a pattern store, adaptive pattern learning
//! and issue labelling.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{euclidean_distance, window_count, Subsequence};
use crate::store::{Origin, PatternCluster, PatternStore, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "cluster")]
pub enum Adaptation {
    None,
    Absorbed(usize),
    Created(usize),
    RoleSwitched(usize),
}

/// Verdict for one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub window_start: usize,
    pub is_anomaly: bool,
    /// Nearest pattern, or the freshly created one when adaptation opened a
    /// new cluster.
    pub matched_cluster_id: usize,
    /// Distance from the normalized window to the nearest pre-existing
    /// pattern.
    pub distance: f64,
    pub recommended_labels: BTreeSet<String>,
    pub adaptation: Adaptation,
}

impl PatternStore {
    fn nearest(&self, normalized: &[f64]) -> Result<(usize, f64)> {
        let mut best = (0, f64::INFINITY);
        for c in self.clusters() {
            let d = euclidean_distance(normalized, &c.mean)?;
            if d < best.1 {
                best = (c.id, d);
            }
        }
        Ok(best)
    }

    fn check_window(&self, window: &Subsequence<'_>) -> Result<Vec<f64>> {
        if self.is_empty() {
            return Err(Error::UninitializedDetector);
        }
        if window.len() != self.m() {
            return Err(Error::LengthMismatch {
                left: window.len(),
                right: self.m(),
            });
        }
        window.normalized()
    }

    /// Nearest-pattern verdict; the store is not modified.
    pub fn detect(&self, window: &Subsequence<'_>) -> Result<DetectionRecord> {
        let normalized = self.check_window(window)?;
        let (idx, distance) = self.nearest(&normalized)?;
        let cluster = &self.clusters()[idx];
        let is_anomaly = cluster.is_anomalous();
        Ok(DetectionRecord {
            window_start: window.start,
            is_anomaly,
            matched_cluster_id: idx,
            distance,
            recommended_labels: if is_anomaly {
                cluster.labels.clone()
            } else {
                BTreeSet::new()
            },
            adaptation: Adaptation::None,
        })
    }

    /// Detects and then learns from the window: it is absorbed by its
    /// nearest pattern when closer than the largest radius of that
    /// pattern's role, otherwise it founds a new anomalous pattern.
    ///
    /// The radius of an absorbing cluster grows to the worst case
    /// `max(|t - mean'|, |mean - mean'| + radius)`, which bounds the true
    /// member radius without keeping members around.
    pub fn adapt(&mut self, window: &Subsequence<'_>) -> Result<DetectionRecord> {
        let t = self.check_window(window)?;
        let (idx, distance) = self.nearest(&t)?;
        let cluster = &self.clusters()[idx];
        let was_anomalous = cluster.is_anomalous();
        let limit = if was_anomalous { self.d_a() } else { self.d_n() };

        // An exact copy of a pattern is always absorbed, even by a
        // zero-radius role.
        if distance < limit || distance == 0.0 {
            let (new_mean, new_radius) = absorb_update(&cluster.mean, cluster.size, cluster.radius, &t)?;

            let threshold = self.offline_max_anomalous_size();
            let c = &mut self.clusters_mut()[idx];
            c.mean = new_mean;
            c.size += 1;
            c.radius = new_radius;
            let switched = c.role == Role::Anomalous && c.origin == Origin::Online && c.size > threshold;
            if switched {
                c.role = Role::Normal;
            }
            let labels = if was_anomalous { c.labels.clone() } else { BTreeSet::new() };
            self.refresh_maxima();
            Ok(DetectionRecord {
                window_start: window.start,
                is_anomaly: was_anomalous,
                matched_cluster_id: idx,
                distance,
                recommended_labels: labels,
                adaptation: if switched {
                    Adaptation::RoleSwitched(idx)
                } else {
                    Adaptation::Absorbed(idx)
                },
            })
        } else {
            let id = self.len();
            self.push_cluster(PatternCluster {
                id,
                role: Role::Anomalous,
                size: 1,
                radius: 0.0,
                mean: t,
                labels: BTreeSet::new(),
                origin: Origin::Online,
                group: None,
                members: None,
            });
            self.refresh_maxima();
            Ok(DetectionRecord {
                window_start: window.start,
                is_anomaly: true,
                matched_cluster_id: id,
                distance,
                recommended_labels: BTreeSet::new(),
                adaptation: Adaptation::Created(id),
            })
        }
    }

    /// Adds issue labels to a pattern and to every pattern in its
    /// label-sharing group.
    pub fn label_pattern<I, S>(&mut self, id: usize, labels: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let group = self.cluster(id)?.group;
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        for c in self.clusters_mut() {
            if c.id == id || (group.is_some() && c.group == group) {
                c.labels.extend(labels.iter().cloned());
            }
        }
        Ok(())
    }
}

/// Mean and worst-case radius of a cluster `(mean, size, radius)` after it
/// absorbs the normalized window `t`.
pub fn absorb_update(mean: &[f64], size: usize, radius: f64, t: &[f64]) -> Result<(Vec<f64>, f64)> {
    if mean.len() != t.len() {
        return Err(Error::LengthMismatch {
            left: mean.len(),
            right: t.len(),
        });
    }
    let size = size as f64;
    let new_mean: Vec<f64> = mean
        .iter()
        .zip(t)
        .map(|(mu, x)| (mu * size + x) / (size + 1.0))
        .collect();
    let worst_old = euclidean_distance(mean, &new_mean)? + radius;
    let to_new = euclidean_distance(t, &new_mean)?;
    Ok((new_mean, to_new.max(worst_old)))
}

/// Runs [`PatternStore::detect`] over every stride-1 window of `values`.
pub fn detect_stream(store: &PatternStore, name: &str, values: &[f64]) -> Result<Vec<DetectionRecord>> {
    let m = store.m();
    let count = window_count(values.len(), m)?;
    (0..count)
        .into_par_iter()
        .map(|s| store.detect(&Subsequence::new(name, s, &values[s..s + m])))
        .collect()
}

/// Runs [`PatternStore::adapt`] over every stride-1 window of `values`, in
/// order.
pub fn adapt_stream(store: &mut PatternStore, name: &str, values: &[f64]) -> Result<Vec<DetectionRecord>> {
    let m = store.m();
    let count = window_count(values.len(), m)?;
    (0..count)
        .map(|s| store.adapt(&Subsequence::new(name, s, &values[s..s + m])))
        .collect()
}

/// Spreads window verdicts onto points: point `j` takes the verdict of the
/// window ending at `j`; the first `m - 1` points take the first window's.
pub fn causal_point_records(records: &[DetectionRecord], len: usize, m: usize) -> Vec<&DetectionRecord> {
    assert_eq!(records.len() + m - 1, len, "one record per window expected");
    (0..len).map(|j| &records[j.saturating_sub(m - 1)]).collect()
}
