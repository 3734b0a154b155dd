//! Time-series primitives: the metric curve container, subsequence views,
//! per-window min-max normalization and Euclidean distance.

use std::ops::Range;

use crate::error::{Error, Result};

/// One univariate metric curve, optionally carrying point-level ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    name: String,
    timestamps: Option<Vec<i64>>,
    values: Vec<f64>,
    labels: Option<Vec<bool>>,
}

impl MetricSeries {
    pub fn new(
        name: impl Into<String>,
        timestamps: Option<Vec<i64>>,
        values: Vec<f64>,
        labels: Option<Vec<bool>>,
    ) -> Result<Self> {
        let name = name.into();
        if values.is_empty() {
            return Err(Error::InvalidSeries(format!("{name}: no values")));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!(
                "{name}: non-finite value at index {pos}"
            )));
        }
        if let Some(labels) = &labels {
            if labels.len() != values.len() {
                return Err(Error::InvalidSeries(format!(
                    "{name}: {} labels for {} values",
                    labels.len(),
                    values.len()
                )));
            }
        }
        if let Some(ts) = &timestamps {
            if ts.len() != values.len() {
                return Err(Error::InvalidSeries(format!(
                    "{name}: {} timestamps for {} values",
                    ts.len(),
                    values.len()
                )));
            }
            if let Some(pos) = ts.windows(2).position(|w| w[1] <= w[0]) {
                return Err(Error::InvalidSeries(format!(
                    "{name}: timestamps not strictly increasing at index {}",
                    pos + 1
                )));
            }
        }
        Ok(Self {
            name,
            timestamps,
            values,
            labels,
        })
    }

    /// Unlabeled series with implicit (index) timestamps.
    pub fn from_values(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        Self::new(name, None, values, None)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[bool]> {
        self.labels.as_deref()
    }

    pub fn timestamps(&self) -> Option<&[i64]> {
        self.timestamps.as_deref()
    }

    /// Timestamp of point `i`; the index itself when timestamps are implicit.
    pub fn timestamp(&self, i: usize) -> i64 {
        match &self.timestamps {
            Some(ts) => ts[i],
            None => i as i64,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Copy of the points in `range`, keeping timestamps (implicit timestamps
    /// become explicit so the slice still knows where it came from).
    pub fn slice(&self, range: Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.len() {
            return Err(Error::InvalidSeries(format!(
                "{}: slice {:?} out of bounds for length {}",
                self.name,
                range,
                self.len()
            )));
        }
        let timestamps = Some(range.clone().map(|i| self.timestamp(i)).collect());
        Ok(Self {
            name: self.name.clone(),
            timestamps,
            values: self.values[range.clone()].to_vec(),
            labels: self.labels.as_ref().map(|l| l[range].to_vec()),
        })
    }

    pub fn without_labels(mut self) -> Self {
        self.labels = None;
        self
    }
}

/// A borrowed window `values = parent[start..start + m]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Subsequence<'a> {
    pub series: &'a str,
    pub start: usize,
    pub values: &'a [f64],
}

impl<'a> Subsequence<'a> {
    pub fn new(series: &'a str, start: usize, values: &'a [f64]) -> Self {
        Self {
            series,
            start,
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Point indices of the parent series covered by this window.
    pub fn span(&self) -> Range<usize> {
        self.start..self.start + self.values.len()
    }

    pub fn normalized(&self) -> Result<Vec<f64>> {
        minmax_normalize(self.values)
    }
}

/// Maps `values` affinely onto `[0, 1]`. A constant window maps to the zero
/// vector.
pub fn minmax_normalize(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptySubsequence);
    }
    let mut out = vec![0.0; values.len()];
    normalize_into(values, &mut out);
    Ok(out)
}

/// Unchecked variant of [`minmax_normalize`]; `out` must match `values` in
/// length and `values` must be non-empty.
pub(crate) fn normalize_into(values: &[f64], out: &mut [f64]) {
    debug_assert_eq!(values.len(), out.len());
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = max - min;
    if range == 0.0 {
        out.fill(0.0);
    } else {
        for (o, &v) in out.iter_mut().zip(values) {
            *o = (v - min) / range;
        }
    }
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(squared_distance(a, b).sqrt())
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// All stride-1 windows of length `m`: exactly `l - m + 1` of them.
pub fn sliding_subsequences(series: &MetricSeries, m: usize) -> Result<Vec<Subsequence<'_>>> {
    let count = window_count(series.len(), m)?;
    Ok((0..count)
        .map(|start| Subsequence::new(series.name(), start, &series.values()[start..start + m]))
        .collect())
}

/// Number of length-`m` windows in a series of length `len`.
pub fn window_count(len: usize, m: usize) -> Result<usize> {
    if m == 0 {
        return Err(Error::ZeroWindow);
    }
    if m > len {
        return Err(Error::WindowExceedsSeries { m, len });
    }
    Ok(len - m + 1)
}
