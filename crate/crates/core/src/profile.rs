//! Nearest-neighbour subsequence search (the matrix profile) over min-max
//! normalized windows.
//!
//! For every window of a query series we find the start index and distance
//! of its closest window in a reference series. The self-join variant
//! forbids trivial matches inside an exclusion band around the query window.
//!
//! Distances are exact: each candidate is scored with the same summation
//! order as [`euclidean_distance`](crate::series::euclidean_distance), and
//! early abandoning only skips candidates that are already strictly worse
//! than the incumbent. Query windows are processed in parallel, but each
//! one is an independent sequential scan, so the output does not depend on
//! the number of worker threads.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::series::{euclidean_distance, minmax_normalize, normalize_into, window_count};

/// Per query window: start index of the nearest reference window and its
/// distance.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ProfilePair {
    pub indices: Vec<usize>,
    pub distances: Vec<f64>,
}

impl ProfilePair {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Default trivial-match exclusion half-width: `ceil(m / 2)`.
pub fn default_exclusion(m: usize) -> usize {
    m.div_ceil(2)
}

/// All length-`m` windows of a series, normalized once and stored row-major.
#[derive(Debug, Clone)]
pub struct NormalizedWindows {
    m: usize,
    data: Vec<f64>,
}

impl NormalizedWindows {
    pub fn new(values: &[f64], m: usize) -> Result<Self> {
        let count = window_count(values.len(), m)?;
        let mut data = vec![0.0; count * m];
        data.par_chunks_mut(m)
            .enumerate()
            .for_each(|(i, out)| normalize_into(&values[i..i + m], out));
        Ok(Self { m, data })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.m
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.m)
    }
}

/// Nearest neighbour of every window of `values` among the other windows of
/// the same series, skipping starts `j` with `|j - i| < ceil(m / 2)`.
pub fn self_join(values: &[f64], m: usize) -> Result<ProfilePair> {
    self_join_with_exclusion(values, m, default_exclusion(m))
}

pub fn self_join_with_exclusion(values: &[f64], m: usize, exclusion: usize) -> Result<ProfilePair> {
    if m == 0 {
        return Err(Error::ZeroWindow);
    }
    if values.len() < 2 * m {
        return Err(Error::SeriesTooShortForSelfJoin {
            m,
            len: values.len(),
        });
    }
    let windows = NormalizedWindows::new(values, m)?;
    Ok(scan(&windows, &windows, Some(exclusion)))
}

/// Nearest neighbour in `reference` of every window of `query`. No
/// exclusion zone: an identical window at the same offset is a valid match.
pub fn cross_join(reference: &[f64], query: &[f64], m: usize) -> Result<ProfilePair> {
    let reference = NormalizedWindows::new(reference, m)?;
    let query = NormalizedWindows::new(query, m)?;
    Ok(scan(&reference, &query, None))
}

fn scan(
    reference: &NormalizedWindows,
    query: &NormalizedWindows,
    exclusion: Option<usize>,
) -> ProfilePair {
    let (indices, distances) = (0..query.len())
        .into_par_iter()
        .map(|i| nearest(reference, query.get(i), i, exclusion))
        .unzip();
    ProfilePair { indices, distances }
}

fn nearest(
    reference: &NormalizedWindows,
    q: &[f64],
    i: usize,
    exclusion: Option<usize>,
) -> (usize, f64) {
    let mut best = f64::INFINITY;
    let mut best_j = usize::MAX;
    'candidates: for (j, r) in reference.iter().enumerate() {
        if let Some(excl) = exclusion {
            if i.abs_diff(j) < excl {
                continue;
            }
        }
        let mut acc = 0.0;
        for (x, y) in q.iter().zip(r) {
            acc += (x - y) * (x - y);
            if acc > best {
                continue 'candidates;
            }
        }
        // strict: ties keep the lower start index
        if acc < best {
            best = acc;
            best_j = j;
        }
    }
    (best_j, best.sqrt())
}

/// Exhaustive reference scan, normalizing both windows afresh for every
/// pair. Slow by construction; it is the correctness oracle for
/// [`self_join`] and [`cross_join`]. Pass `exclusion` only when `reference`
/// and `query` are the same series.
pub fn brute_force_spw(
    reference: &[f64],
    query: &[f64],
    m: usize,
    exclusion: Option<usize>,
) -> Result<ProfilePair> {
    let n_ref = window_count(reference.len(), m)?;
    let n_query = window_count(query.len(), m)?;
    let mut indices = Vec::with_capacity(n_query);
    let mut distances = Vec::with_capacity(n_query);
    for i in 0..n_query {
        let q = minmax_normalize(&query[i..i + m])?;
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n_ref {
            if exclusion.is_some_and(|e| i.abs_diff(j) < e) {
                continue;
            }
            let r = minmax_normalize(&reference[j..j + m])?;
            let d = euclidean_distance(&q, &r)?;
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        let (j, d) = best.ok_or(Error::SeriesTooShortForSelfJoin {
            m,
            len: reference.len(),
        })?;
        indices.push(j);
        distances.push(d);
    }
    Ok(ProfilePair { indices, distances })
}
