//! Metric-pattern anomaly detection for univariate performance metrics.
//!
//! Offline, [`discover_patterns`] compares a curve against an anomaly-free
//! reference using nearest-neighbour subsequence search, links similar
//! windows into a graph, and clusters the result into normal and anomalous
//! *metric patterns*. Online, a [`PatternStore`] classifies each incoming
//! window by its nearest pattern, recommends the issue labels engineers
//! attached to it, and can keep learning new patterns as behaviour drifts.

pub mod affinity;
pub mod discovery;
pub mod error;
pub mod eval;
pub mod online;
pub mod profile;
pub mod series;
pub mod store;
pub mod synth;

pub use affinity::{AffinityConfig, ClusteringResult};
pub use discovery::{discover_patterns, group_overlapping_clusters, Discovery, DiscoveryConfig};
pub use error::{Error, Result};
pub use online::{Adaptation, DetectionRecord};
pub use profile::{brute_force_spw, cross_join, self_join, ProfilePair};
pub use series::{euclidean_distance, minmax_normalize, sliding_subsequences, MetricSeries, Subsequence};
pub use store::{Origin, PatternCluster, PatternStore, Role};
