//! The detector state for one metric curve: every metric pattern with its
//! role, size, radius and issue labels, plus the running radius maxima used
//! by adaptive learning. Persisted as a versioned JSON document.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const STORE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Normal,
    Anomalous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Offline,
    Online,
}

/// Which offline input a subsequence was cut from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SeriesTag {
    /// The anomaly-free reference series.
    Normal,
    /// The series under inspection.
    Detect,
}

/// Provenance of one cluster member: `(series, start)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Member {
    pub series: SeriesTag,
    pub start: usize,
}

/// A metric pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternCluster {
    pub id: usize,
    pub role: Role,
    pub size: usize,
    /// Upper bound on the distance from `mean` to any member. Exact for
    /// offline clusters, a worst-case bound once a cluster absorbs online.
    pub radius: f64,
    /// Mean of the member windows in min-max normalized space.
    pub mean: Vec<f64>,
    #[serde(default)]
    pub labels: BTreeSet<String>,
    pub origin: Origin,
    /// Label-sharing group (overlapping anomalous clusters share one).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<usize>,
    /// Member provenance; only kept in memory between discovery and
    /// overlap grouping.
    #[serde(skip)]
    pub members: Option<Vec<Member>>,
}

impl PatternCluster {
    pub fn is_anomalous(&self) -> bool {
        self.role == Role::Anomalous
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternStore {
    m: usize,
    p: f64,
    exclusion: usize,
    mitigate_contamination: bool,
    offline_max_anomalous_size: usize,
    d_n: f64,
    d_a: f64,
    clusters: Vec<PatternCluster>,
}

/// On-disk layout.
#[derive(Serialize, Deserialize)]
struct StoreDocument {
    version: u32,
    m: usize,
    p: f64,
    exclusion: usize,
    #[serde(default)]
    mitigate_contamination: bool,
    offline_max_anomalous_size: usize,
    d_n: f64,
    d_a: f64,
    normal_ids: Vec<usize>,
    anomalous_ids: Vec<usize>,
    clusters: Vec<PatternCluster>,
}

fn max_radius<'a>(clusters: impl Iterator<Item = &'a PatternCluster>) -> f64 {
    clusters.map(|c| c.radius).fold(0.0, f64::max)
}

impl PatternStore {
    /// Builds a store and derives `d_n` / `d_a` from the cluster radii.
    /// Cluster ids must equal their positions.
    pub fn new(
        m: usize,
        p: f64,
        exclusion: usize,
        mitigate_contamination: bool,
        offline_max_anomalous_size: usize,
        clusters: Vec<PatternCluster>,
    ) -> Result<Self> {
        let mut store = Self {
            m,
            p,
            exclusion,
            mitigate_contamination,
            offline_max_anomalous_size,
            d_n: 0.0,
            d_a: 0.0,
            clusters,
        };
        store.refresh_maxima();
        store.validate()?;
        Ok(store)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn exclusion(&self) -> usize {
        self.exclusion
    }

    pub fn mitigate_contamination(&self) -> bool {
        self.mitigate_contamination
    }

    /// Size an online-created anomalous cluster must exceed to turn normal.
    pub fn offline_max_anomalous_size(&self) -> usize {
        self.offline_max_anomalous_size
    }

    /// Largest radius among normal clusters (0 when there are none).
    pub fn d_n(&self) -> f64 {
        self.d_n
    }

    /// Largest radius among anomalous clusters (0 when there are none).
    pub fn d_a(&self) -> f64 {
        self.d_a
    }

    pub fn clusters(&self) -> &[PatternCluster] {
        &self.clusters
    }

    pub fn cluster(&self, id: usize) -> Result<&PatternCluster> {
        self.clusters.get(id).ok_or(Error::UnknownCluster(id))
    }

    pub(crate) fn clusters_mut(&mut self) -> &mut [PatternCluster] {
        &mut self.clusters
    }

    pub(crate) fn push_cluster(&mut self, cluster: PatternCluster) {
        debug_assert_eq!(cluster.id, self.clusters.len());
        self.clusters.push(cluster);
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// The normal pattern index set.
    pub fn normal_ids(&self) -> Vec<usize> {
        self.ids_with(Role::Normal)
    }

    /// The anomalous pattern index set.
    pub fn anomalous_ids(&self) -> Vec<usize> {
        self.ids_with(Role::Anomalous)
    }

    fn ids_with(&self, role: Role) -> Vec<usize> {
        self.clusters
            .iter()
            .filter(|c| c.role == role)
            .map(|c| c.id)
            .collect()
    }

    pub(crate) fn refresh_maxima(&mut self) {
        self.d_n = max_radius(self.clusters.iter().filter(|c| c.role == Role::Normal));
        self.d_a = max_radius(self.clusters.iter().filter(|c| c.role == Role::Anomalous));
    }

    /// Forgets member provenance once it is no longer needed.
    pub fn drop_provenance(&mut self) {
        for c in &mut self.clusters {
            c.members = None;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidStore(msg));
        if self.m == 0 {
            return bad("window length m is 0".into());
        }
        if !(self.p > 0.0 && self.p < 100.0) {
            return bad(format!("percentile {} outside (0, 100)", self.p));
        }
        for (pos, c) in self.clusters.iter().enumerate() {
            if c.id != pos {
                return bad(format!("cluster at position {pos} has id {}", c.id));
            }
            if c.mean.len() != self.m {
                return bad(format!(
                    "cluster {pos}: mean has length {}, expected {}",
                    c.mean.len(),
                    self.m
                ));
            }
            if c.mean.iter().any(|v| !v.is_finite()) {
                return bad(format!("cluster {pos}: non-finite mean"));
            }
            if c.size == 0 {
                return bad(format!("cluster {pos}: size 0"));
            }
            if !(c.radius.is_finite() && c.radius >= 0.0) {
                return bad(format!("cluster {pos}: invalid radius {}", c.radius));
            }
        }
        let d_n = max_radius(self.clusters.iter().filter(|c| c.role == Role::Normal));
        let d_a = max_radius(self.clusters.iter().filter(|c| c.role == Role::Anomalous));
        if d_n != self.d_n || d_a != self.d_a {
            return bad(format!(
                "radius maxima ({}, {}) disagree with clusters ({d_n}, {d_a})",
                self.d_n, self.d_a
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = StoreDocument {
            version: STORE_VERSION,
            m: self.m,
            p: self.p,
            exclusion: self.exclusion,
            mitigate_contamination: self.mitigate_contamination,
            offline_max_anomalous_size: self.offline_max_anomalous_size,
            d_n: self.d_n,
            d_a: self.d_a,
            normal_ids: self.normal_ids(),
            anomalous_ids: self.anomalous_ids(),
            clusters: self.clusters.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(text)?;
        let version = raw.get("version").and_then(|v| v.as_u64());
        match version {
            Some(v) if v == u64::from(STORE_VERSION) => {}
            Some(v) => {
                return Err(Error::StoreVersion {
                    found: v.try_into().unwrap_or(u32::MAX),
                    expected: STORE_VERSION,
                })
            }
            None => return Err(Error::InvalidStore("missing version tag".into())),
        }
        let doc: StoreDocument = serde_json::from_value(raw)?;

        let normal: BTreeSet<usize> = doc.normal_ids.iter().copied().collect();
        let anomalous: BTreeSet<usize> = doc.anomalous_ids.iter().copied().collect();
        if normal.len() != doc.normal_ids.len() || anomalous.len() != doc.anomalous_ids.len() {
            return Err(Error::InvalidStore("duplicate ids in role sets".into()));
        }
        if let Some(id) = normal.intersection(&anomalous).next() {
            return Err(Error::InvalidStore(format!(
                "pattern {id} is in both the normal and anomalous sets"
            )));
        }
        if normal.len() + anomalous.len() != doc.clusters.len() {
            return Err(Error::InvalidStore(
                "role sets do not cover every pattern exactly once".into(),
            ));
        }
        for c in &doc.clusters {
            let listed = if normal.contains(&c.id) {
                Role::Normal
            } else if anomalous.contains(&c.id) {
                Role::Anomalous
            } else {
                return Err(Error::InvalidStore(format!("pattern {} has no role set", c.id)));
            };
            if listed != c.role {
                return Err(Error::InvalidStore(format!(
                    "pattern {} role disagrees with the role sets",
                    c.id
                )));
            }
        }

        let store = Self {
            m: doc.m,
            p: doc.p,
            exclusion: doc.exclusion,
            mitigate_contamination: doc.mitigate_contamination,
            offline_max_anomalous_size: doc.offline_max_anomalous_size,
            d_n: doc.d_n,
            d_a: doc.d_a,
            clusters: doc.clusters,
        };
        store.validate()?;
        Ok(store)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn cluster(id: usize, role: Role, mean: Vec<f64>, size: usize, radius: f64) -> PatternCluster {
        PatternCluster {
            id,
            role,
            size,
            radius,
            mean,
            labels: BTreeSet::new(),
            origin: Origin::Offline,
            group: None,
            members: None,
        }
    }

    pub(crate) fn three_cluster_store() -> PatternStore {
        let mut c2 = cluster(2, Role::Anomalous, vec![1.0, 0.1 + 0.2, 1.0 / 3.0], 3, 0.25);
        c2.labels.insert("service restart".into());
        c2.group = Some(2);
        PatternStore::new(
            3,
            99.5,
            2,
            false,
            3,
            vec![
                cluster(0, Role::Normal, vec![0.0, 0.5, 1.0], 40, 0.3),
                cluster(1, Role::Normal, vec![1.0, 0.5, 0.0], 25, std::f64::consts::PI / 10.0),
                c2,
            ],
        )
        .unwrap()
    }

    #[test]
    fn maxima_follow_roles() {
        let s = three_cluster_store();
        assert_eq!(s.d_n(), std::f64::consts::PI / 10.0);
        assert_eq!(s.d_a(), 0.25);
        assert_eq!(s.normal_ids(), vec![0, 1]);
        assert_eq!(s.anomalous_ids(), vec![2]);

        let empty_a = PatternStore::new(3, 99.5, 2, false, 1, vec![cluster(0, Role::Normal, vec![0.0; 3], 1, 0.0)])
            .unwrap();
        assert_eq!(empty_a.d_a(), 0.0);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let s = three_cluster_store();
        let back = PatternStore::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.clusters()[2].mean[1].to_bits(), (0.1f64 + 0.2).to_bits());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.json");
        s.save(&path).unwrap();
        assert_eq!(PatternStore::load(&path).unwrap(), s);
    }

    #[test]
    fn rejects_unknown_version() {
        let text = three_cluster_store().to_json().unwrap().replace("\"version\": 1", "\"version\": 7");
        match PatternStore::from_json(&text) {
            Err(Error::StoreVersion { found: 7, expected: 1 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_overlapping_role_sets() {
        let mut doc: serde_json::Value = serde_json::from_str(&three_cluster_store().to_json().unwrap()).unwrap();
        doc["anomalous_ids"] = serde_json::json!([1, 2]);
        let err = PatternStore::from_json(&doc.to_string()).unwrap_err();
        assert!(err.to_string().contains("both"), "{err}");
    }

    #[test]
    fn rejects_inconsistent_maxima() {
        let mut doc: serde_json::Value = serde_json::from_str(&three_cluster_store().to_json().unwrap()).unwrap();
        doc["d_a"] = serde_json::json!(0.5);
        assert!(matches!(PatternStore::from_json(&doc.to_string()), Err(Error::InvalidStore(_))));
    }
}
