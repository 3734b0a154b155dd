//! Offline metric-pattern discovery.
//!
//! Pipeline: self-join of the anomaly-free series, cross-join of the
//! inspected series against it, a nearest-neighbour similarity graph with
//! percentile pruning of the weakest cross links, connected components,
//! affinity propagation over the component means, and finally a role per
//! cluster: anomalous iff every member was left isolated by the pruning.

use std::collections::BTreeSet;

use petgraph::unionfind::UnionFind;

use crate::affinity::{self, AffinityConfig};
use crate::error::{Error, Result};
use crate::profile::{cross_join, default_exclusion, self_join_with_exclusion, NormalizedWindows, ProfilePair};
use crate::series::euclidean_distance;
use crate::store::{Member, Origin, PatternCluster, PatternStore, Role, SeriesTag};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct DiscoveryConfig {
    /// Subsequence (pattern) length.
    pub m: usize,
    /// Percentile of cross-join distances above which links are broken.
    pub p: f64,
    /// Self-join trivial-match half-width; `None` means `ceil(m / 2)`.
    pub exclusion: Option<usize>,
    /// Also break self-join links above the same percentile of the
    /// self-join distances, for reference series that may hide anomalies.
    pub mitigate_contamination: bool,
    pub affinity: AffinityConfig,
    /// How the clustering preference is chosen when `affinity.preference`
    /// is unset.
    pub preference: PreferenceRule,
}

/// Self-similarity given to every component mean before clustering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreferenceRule {
    /// `-(threshold^2)`: a component mean founds its own cluster only when
    /// no exemplar is closer than the pruning threshold.
    PruningThreshold,
    /// `-(q^2)` with `q` the same percentile of the reference self-join
    /// distances.
    #[default]
    ReferenceSpread,
    /// Median off-diagonal similarity.
    Median,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        Self {
            m: 15,
            p: 99.5,
            exclusion: None,
            mitigate_contamination: false,
            affinity: AffinityConfig::default(),
            preference: PreferenceRule::default(),
        }
    }
}

impl DiscoveryConfig {
    pub fn exclusion(&self) -> usize {
        self.exclusion.unwrap_or_else(|| default_exclusion(self.m))
    }
}

/// Linear-interpolation percentile (`p` in `[0, 100]`) of unsorted values.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of an empty slice");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64)
}

// Zero-distance links are exact matches and survive any threshold.
fn pruned(distance: f64, threshold: f64) -> bool {
    distance > 0.0 && distance >= threshold
}

/// Nodes are numbered normal-series windows first (`0..normal_count`), then
/// inspected-series windows.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    pub normal_count: usize,
    pub detect_count: usize,
    /// Undirected links, deduplicated, as `(min, max)` node pairs.
    pub edges: Vec<(usize, usize)>,
    /// Distance at or above which cross links were broken.
    pub threshold: f64,
}

impl SimilarityGraph {
    pub fn node_count(&self) -> usize {
        self.normal_count + self.detect_count
    }

    pub fn member(&self, node: usize) -> Member {
        if node < self.normal_count {
            Member {
                series: SeriesTag::Normal,
                start: node,
            }
        } else {
            Member {
                series: SeriesTag::Detect,
                start: node - self.normal_count,
            }
        }
    }

    pub fn node(&self, member: Member) -> usize {
        match member.series {
            SeriesTag::Normal => member.start,
            SeriesTag::Detect => self.normal_count + member.start,
        }
    }
}

/// Links every window to its nearest neighbour, then breaks cross links
/// whose distance reaches the `p`-th percentile of the cross distances.
/// With `mitigate_contamination`, self links are pruned the same way
/// against the percentile of the self distances.
pub fn build_graph(
    normal: &ProfilePair,
    cross: &ProfilePair,
    p: f64,
    mitigate_contamination: bool,
) -> Result<SimilarityGraph> {
    if !(p > 0.0 && p < 100.0) {
        return Err(Error::InvalidPercentile(p));
    }
    if normal.is_empty() || cross.is_empty() {
        return Err(Error::EmptyInput);
    }
    let nn = normal.len();
    if let Some(&j) = normal.indices.iter().chain(&cross.indices).find(|&&j| j >= nn) {
        return Err(Error::InvalidSeries(format!(
            "neighbour index {j} outside the {nn} reference windows"
        )));
    }
    let threshold = percentile(&cross.distances, p);
    let self_threshold = percentile(&normal.distances, p);

    let mut edges = BTreeSet::new();
    for (i, (&j, &d)) in normal.indices.iter().zip(&normal.distances).enumerate() {
        if mitigate_contamination && pruned(d, self_threshold) {
            continue;
        }
        edges.insert((i.min(j), i.max(j)));
    }
    for (i, (&j, &d)) in cross.indices.iter().zip(&cross.distances).enumerate() {
        if pruned(d, threshold) {
            continue;
        }
        edges.insert((j, nn + i));
    }
    Ok(SimilarityGraph {
        normal_count: nn,
        detect_count: cross.len(),
        edges: edges.into_iter().collect(),
        threshold,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Components {
    /// Maximal connected node sets, each sorted, ordered by smallest node.
    pub components: Vec<Vec<usize>>,
    /// Nodes forming singleton components (the anomaly candidates).
    pub isolated: Vec<usize>,
}

pub fn connected_components(graph: &SimilarityGraph) -> Components {
    let n = graph.node_count();
    let mut uf = UnionFind::<usize>::new(n);
    for &(a, b) in &graph.edges {
        uf.union(a, b);
    }
    let mut slot = vec![usize::MAX; n];
    let mut components: Vec<Vec<usize>> = Vec::new();
    for node in 0..n {
        let root = uf.find(node);
        if slot[root] == usize::MAX {
            slot[root] = components.len();
            components.push(Vec::new());
        }
        components[slot[root]].push(node);
    }
    let isolated = components
        .iter()
        .filter(|c| c.len() == 1)
        .map(|c| c[0])
        .collect();
    Components {
        components,
        isolated,
    }
}

/// Element-wise mean of the (normalized) windows of each component.
pub fn component_means(components: &[Vec<usize>], windows: &[&[f64]]) -> Vec<Vec<f64>> {
    components
        .iter()
        .map(|members| mean_of(members.iter().map(|&n| windows[n])))
        .collect()
}

fn mean_of<'a>(mut rows: impl Iterator<Item = &'a [f64]>) -> Vec<f64> {
    let first = rows.next().expect("non-empty member set");
    let mut sum = first.to_vec();
    let mut count = 1usize;
    for row in rows {
        for (s, v) in sum.iter_mut().zip(row) {
            *s += v;
        }
        count += 1;
    }
    if count > 1 {
        for s in &mut sum {
            *s /= count as f64;
        }
    }
    sum
}

/// Everything the offline stage produces for one curve.
#[derive(Debug, Clone)]
pub struct Discovery {
    /// Patterns with member provenance still attached.
    pub store: PatternStore,
    /// Point-level verdicts over the inspected series.
    pub predictions: Vec<bool>,
    /// Per inspected point, the pattern used to explain it: the anomalous
    /// cluster covering it if predicted, otherwise the cluster of the
    /// window ending at it.
    pub point_clusters: Vec<usize>,
    pub graph: SimilarityGraph,
    pub components: Components,
}

impl Discovery {
    /// Anomaly-candidate count (isolated nodes).
    pub fn candidate_count(&self) -> usize {
        self.components.isolated.len()
    }
}

/// Runs the full offline stage on an anomaly-free reference `normal` and an
/// inspected series `detect`.
pub fn discover_patterns(normal: &[f64], detect: &[f64], config: &DiscoveryConfig) -> Result<Discovery> {
    let m = config.m;
    let exclusion = config.exclusion();
    let self_profile = self_join_with_exclusion(normal, m, exclusion)?;
    let cross_profile = cross_join(normal, detect, m)?;
    let graph = build_graph(&self_profile, &cross_profile, config.p, config.mitigate_contamination)?;
    let components = connected_components(&graph);

    let normal_windows = NormalizedWindows::new(normal, m)?;
    let detect_windows = NormalizedWindows::new(detect, m)?;
    let windows: Vec<&[f64]> = normal_windows.iter().chain(detect_windows.iter()).collect();

    let component_mean = component_means(&components.components, &windows);
    let mut affinity_config = config.affinity.clone();
    if affinity_config.preference.is_none() {
        let scale = match config.preference {
            PreferenceRule::PruningThreshold => Some(graph.threshold),
            PreferenceRule::ReferenceSpread => Some(percentile(&self_profile.distances, config.p)),
            PreferenceRule::Median => None,
        };
        affinity_config.preference = scale.map(|q| -(q * q));
    }
    let clustering = affinity::cluster(&component_mean, &affinity_config)?;
    if !clustering.converged {
        log::warn!(
            "affinity propagation did not converge after {} iterations",
            clustering.iterations
        );
    }

    let mut is_isolated = vec![false; graph.node_count()];
    for &n in &components.isolated {
        is_isolated[n] = true;
    }

    let mut clusters = Vec::with_capacity(clustering.cluster_count());
    for (id, comp_ids) in clustering.members().into_iter().enumerate() {
        let mut nodes: Vec<usize> = comp_ids
            .iter()
            .flat_map(|&c| components.components[c].iter().copied())
            .collect();
        nodes.sort_unstable();
        let mean = mean_of(nodes.iter().map(|&n| windows[n]));
        let mut radius = 0.0f64;
        for &n in &nodes {
            radius = radius.max(euclidean_distance(&mean, windows[n])?);
        }
        let role = if nodes.iter().all(|&n| is_isolated[n]) {
            Role::Anomalous
        } else {
            Role::Normal
        };
        clusters.push(PatternCluster {
            id,
            role,
            size: nodes.len(),
            radius,
            mean,
            labels: BTreeSet::new(),
            origin: Origin::Offline,
            group: None,
            members: Some(nodes.iter().map(|&n| graph.member(n)).collect()),
        });
    }

    let offline_max_anomalous_size = clusters
        .iter()
        .filter(|c| c.is_anomalous())
        .map(|c| c.size)
        .max()
        .unwrap_or_else(|| fallback_switch_size(graph.node_count()));

    let mut predictions = vec![false; detect.len()];
    let mut point_clusters = vec![usize::MAX; detect.len()];
    for c in clusters.iter().filter(|c| c.is_anomalous()) {
        for member in c.members.iter().flatten() {
            if member.series != SeriesTag::Detect {
                continue;
            }
            for p in member.start..member.start + m {
                predictions[p] = true;
                // lowest covering start wins; members are sorted by start
                if point_clusters[p] == usize::MAX {
                    point_clusters[p] = c.id;
                }
            }
        }
    }
    let mut window_cluster = vec![0usize; graph.detect_count];
    for c in &clusters {
        for member in c.members.iter().flatten() {
            if member.series == SeriesTag::Detect {
                window_cluster[member.start] = c.id;
            }
        }
    }
    for (p, slot) in point_clusters.iter_mut().enumerate() {
        if *slot == usize::MAX {
            *slot = window_cluster[p.saturating_sub(m - 1)];
        }
    }

    let store = PatternStore::new(
        m,
        config.p,
        exclusion,
        config.mitigate_contamination,
        offline_max_anomalous_size,
        clusters,
    )?;
    Ok(Discovery {
        store,
        predictions,
        point_clusters,
        graph,
        components,
    })
}

/// Role-switch threshold used when the offline stage found no anomalous
/// pattern: 0.5% of the windows clustered offline, at least 1.
pub fn fallback_switch_size(windows: usize) -> usize {
    (windows * 5).div_ceil(1000).max(1)
}

/// Groups clusters whose members overlap (share a point of the same series),
/// closed transitively. Returns, per input cluster, the smallest input
/// position in its group.
pub fn overlap_groups(members: &[&[Member]], m: usize) -> Vec<usize> {
    let n = members.len();
    let mut uf = UnionFind::<usize>::new(n.max(1));
    let mut owner: std::collections::HashMap<(SeriesTag, usize), usize> = Default::default();
    for (c, list) in members.iter().enumerate() {
        for member in list.iter() {
            for point in member.start..member.start + m {
                match owner.entry((member.series, point)) {
                    std::collections::hash_map::Entry::Occupied(e) => {
                        uf.union(*e.get(), c);
                    }
                    std::collections::hash_map::Entry::Vacant(e) => {
                        e.insert(c);
                    }
                }
            }
        }
    }
    let mut smallest = vec![usize::MAX; n];
    for c in 0..n {
        let root = uf.find(c);
        smallest[root] = smallest[root].min(c);
    }
    (0..n).map(|c| smallest[uf.find(c)]).collect()
}

/// Assigns label-sharing groups to the anomalous clusters of a freshly
/// discovered store from their member provenance, and merges any labels
/// already present within each group. Normal clusters are left ungrouped.
pub fn group_overlapping_clusters(store: &mut PatternStore) -> Result<()> {
    let m = store.m();
    let anomalous: Vec<usize> = store.anomalous_ids();
    let mut member_lists = Vec::with_capacity(anomalous.len());
    for &id in &anomalous {
        let c = store.cluster(id)?;
        match &c.members {
            Some(list) => member_lists.push(list.as_slice()),
            None => {
                return Err(Error::InvalidStore(format!(
                    "pattern {id} has no member provenance to group by"
                )))
            }
        }
    }
    let groups: Vec<usize> = overlap_groups(&member_lists, m)
        .into_iter()
        .map(|pos| anomalous[pos])
        .collect();
    let clusters = store.clusters_mut();
    for (&id, &group) in anomalous.iter().zip(&groups) {
        clusters[id].group = Some(group);
    }
    for &group in groups.iter().collect::<BTreeSet<_>>() {
        let merged: BTreeSet<String> = clusters
            .iter()
            .filter(|c| c.group == Some(group))
            .flat_map(|c| c.labels.iter().cloned())
            .collect();
        for c in clusters.iter_mut().filter(|c| c.group == Some(group)) {
            c.labels = merged.clone();
        }
    }
    Ok(())
}
