//! Affinity propagation (Frey & Dueck, 2007) over dense Euclidean points.
//!
//! Similarity is the negative squared Euclidean distance. The number of
//! clusters is not fixed up front; it follows from the preference (the
//! self-similarity on the diagonal), which defaults to the median of the
//! off-diagonal similarities.

use crate::error::{Error, Result};
use crate::series::squared_distance;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct AffinityConfig {
    /// Message damping factor in `[0.5, 1)`.
    pub damping: f64,
    pub max_iterations: usize,
    /// Stop once the exemplar set has been stable for this many iterations.
    pub convergence_window: usize,
    /// Diagonal similarity; `None` uses the median off-diagonal similarity.
    pub preference: Option<f64>,
}

impl Default for AffinityConfig {
    fn default() -> Self {
        Self {
            damping: 0.9,
            max_iterations: 1000,
            convergence_window: 50,
            preference: None,
        }
    }
}

impl AffinityConfig {
    fn validate(&self) -> Result<()> {
        if !(0.5..1.0).contains(&self.damping) {
            return Err(Error::InvalidClusteringParameter(format!(
                "damping {} outside [0.5, 1)",
                self.damping
            )));
        }
        if self.max_iterations == 0 || self.convergence_window == 0 {
            return Err(Error::InvalidClusteringParameter(
                "max_iterations and convergence_window must be positive".into(),
            ));
        }
        if self.preference.is_some_and(|p| !p.is_finite()) {
            return Err(Error::InvalidClusteringParameter("non-finite preference".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    /// Exemplar point indices, ascending.
    pub exemplars: Vec<usize>,
    /// For every point, the index of its exemplar.
    pub assignment: Vec<usize>,
    /// False when `max_iterations` ran out before the exemplars settled.
    pub converged: bool,
    pub iterations: usize,
}

impl ClusteringResult {
    pub fn cluster_count(&self) -> usize {
        self.exemplars.len()
    }

    /// Cluster number (position in `exemplars`) of every point.
    pub fn labels(&self) -> Vec<usize> {
        self.assignment
            .iter()
            .map(|e| self.exemplars.binary_search(e).expect("assigned to an exemplar"))
            .collect()
    }

    /// Member point indices per cluster, in exemplar order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.exemplars.len()];
        for (i, label) in self.labels().into_iter().enumerate() {
            out[label].push(i);
        }
        out
    }
}

fn single_cluster(n: usize, converged: bool, iterations: usize) -> ClusteringResult {
    ClusteringResult {
        exemplars: vec![0],
        assignment: vec![0; n],
        converged,
        iterations,
    }
}

/// Index-derived value in `[0, 1)`, used to break symmetric ties without a
/// random number generator.
fn jitter(i: usize, k: usize) -> f64 {
    let mut z = (i as u64)
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((k as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F))
        .wrapping_add(0x1656_67B1_9E37_79F9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn cluster(points: &[Vec<f64>], config: &AffinityConfig) -> Result<ClusteringResult> {
    config.validate()?;
    let n = points.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let dim = points[0].len();
    if let Some(bad) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::LengthMismatch {
            left: dim,
            right: bad.len(),
        });
    }
    if n == 1 {
        return Ok(single_cluster(1, true, 0));
    }

    let mut sim = vec![0.0; n * n];
    for i in 0..n {
        for k in (i + 1)..n {
            let s = -squared_distance(&points[i], &points[k]);
            sim[i * n + k] = s;
            sim[k * n + i] = s;
        }
    }
    let mut off_diagonal: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).filter(move |&k| k != i).map(move |k| (i, k)))
        .map(|(i, k)| sim[i * n + k])
        .collect();
    let lowest = off_diagonal.iter().copied().fold(f64::INFINITY, f64::min);
    let highest = off_diagonal.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let preference = match config.preference {
        Some(p) => p,
        None => median(&mut off_diagonal),
    };
    let spread = highest.max(preference) - lowest.min(preference);
    if spread == 0.0 {
        // every point coincides and the preference agrees: one cluster
        return Ok(single_cluster(n, true, 0));
    }
    for i in 0..n {
        sim[i * n + i] = preference;
    }
    let scale = 1e-12 * spread;
    let mut noisy = sim.clone();
    for i in 0..n {
        for k in 0..n {
            noisy[i * n + k] += scale * jitter(i, k);
        }
    }

    let damping = config.damping;
    let mut resp = vec![0.0; n * n];
    let mut avail = vec![0.0; n * n];
    let mut col_sum = vec![0.0; n];
    let mut exemplars: Vec<usize> = Vec::new();
    let mut stable = 0usize;
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..config.max_iterations {
        iterations = it + 1;

        for i in 0..n {
            let row = i * n;
            let (mut first, mut second, mut first_k) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0);
            for k in 0..n {
                let v = avail[row + k] + noisy[row + k];
                if v > first {
                    second = first;
                    first = v;
                    first_k = k;
                } else if v > second {
                    second = v;
                }
            }
            for k in 0..n {
                let competitor = if k == first_k { second } else { first };
                let r = noisy[row + k] - competitor;
                resp[row + k] = damping * resp[row + k] + (1.0 - damping) * r;
            }
        }

        col_sum.fill(0.0);
        for i in 0..n {
            let row = i * n;
            for k in 0..n {
                let r = resp[row + k];
                col_sum[k] += if i == k { r } else { r.max(0.0) };
            }
        }
        for i in 0..n {
            let row = i * n;
            for k in 0..n {
                let r = resp[row + k];
                let a = if i == k {
                    col_sum[k] - r
                } else {
                    (col_sum[k] - r.max(0.0)).min(0.0)
                };
                avail[row + k] = damping * avail[row + k] + (1.0 - damping) * a;
            }
        }

        let current: Vec<usize> = (0..n)
            .filter(|&k| avail[k * n + k] + resp[k * n + k] > 0.0)
            .collect();
        if current == exemplars {
            stable += 1;
        } else {
            stable = 1;
            exemplars = current;
        }
        if stable >= config.convergence_window && !exemplars.is_empty() {
            converged = true;
            break;
        }
    }

    if exemplars.is_empty() {
        let best = (0..n)
            .max_by(|&a, &b| {
                let ea = avail[a * n + a] + resp[a * n + a];
                let eb = avail[b * n + b] + resp[b * n + b];
                ea.total_cmp(&eb).then(b.cmp(&a))
            })
            .unwrap_or(0);
        exemplars.push(best);
        converged = false;
    }

    let assignment = (0..n)
        .map(|i| {
            if exemplars.binary_search(&i).is_ok() {
                return i;
            }
            let mut best = exemplars[0];
            for &e in &exemplars[1..] {
                if sim[i * n + e] > sim[i * n + best] {
                    best = e;
                }
            }
            best
        })
        .collect();

    Ok(ClusteringResult {
        exemplars,
        assignment,
        converged,
        iterations,
    })
}
