//! Seeded synthetic metric curves with injected, labelled anomalies, for
//! examples, tests and desk-scale evaluation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::series::MetricSeries;

/// Gaussian random walk starting at 0.
pub fn random_walk(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = Normal::new(0.0, 1.0).unwrap();
    let mut x = 0.0;
    (0..len)
        .map(|_| {
            x += step.sample(&mut rng);
            x
        })
        .collect()
}

/// Unit-amplitude sine with optional Gaussian noise.
pub fn sine(len: usize, period: f64, noise: f64, seed: u64) -> Vec<f64> {
    render_base(Base::Sine { period }, len, noise, seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Base {
    Sine { period: f64 },
    /// Linear rise over `period` points, then a drop back to 0.
    Sawtooth { period: usize },
    /// Alternating 0/1 plateaus of `period / 2` points.
    Square { period: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnomalyShape {
    /// A spike of several times the normal range every few points.
    SpikeBurst,
    /// The value freezes at its level when the anomaly starts.
    Stuck,
    /// Heavy Gaussian noise on top of the signal.
    NoiseBurst,
    /// The signal oscillates much faster than usual.
    FastOscillation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Injection {
    pub start: usize,
    pub len: usize,
    pub shape: AnomalyShape,
}

/// A labelled curve plus the split it is meant to be evaluated with:
/// `[0, normal_end)` anomaly-free reference, `[normal_end, offline_end)`
/// offline segment, `[offline_end, len)` online segment.
#[derive(Debug, Clone)]
pub struct SyntheticCurve {
    pub series: MetricSeries,
    pub normal_end: usize,
    pub offline_end: usize,
    pub injections: Vec<Injection>,
}

fn render_base(base: Base, len: usize, noise: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = Normal::new(0.0, 1.0).unwrap();
    (0..len)
        .map(|i| {
            let clean = match base {
                Base::Sine { period } => (std::f64::consts::TAU * i as f64 / period).sin(),
                Base::Sawtooth { period } => (i % period) as f64 / period as f64,
                Base::Square { period } => {
                    if (i % period) < period / 2 {
                        0.0
                    } else {
                        1.0
                    }
                }
            };
            let n = if noise > 0.0 { noise * gauss.sample(&mut rng) } else { 0.0 };
            clean + n
        })
        .collect()
}

/// Applies an injection in place. Magnitudes are relative to the range of
/// the untouched curve.
pub fn inject(values: &mut [f64], injection: Injection, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = Normal::new(0.0, 1.0).unwrap();
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let range = (hi - lo).max(1e-9);
    let span = injection.start..injection.start + injection.len;
    match injection.shape {
        AnomalyShape::SpikeBurst => {
            for (k, i) in span.enumerate() {
                if k % 3 == 0 {
                    values[i] += range * rng.gen_range(2.0..3.0);
                }
            }
        }
        AnomalyShape::Stuck => {
            let level = values[injection.start];
            values[span].fill(level);
        }
        AnomalyShape::NoiseBurst => {
            for i in span {
                values[i] += 0.8 * range * gauss.sample(&mut rng);
            }
        }
        AnomalyShape::FastOscillation => {
            let mid = lo + range / 2.0;
            for (k, i) in span.enumerate() {
                values[i] = mid + 0.5 * range * (std::f64::consts::TAU * k as f64 / 4.0).sin();
            }
        }
    }
}

/// Renders a labelled curve.
pub fn render(
    name: &str,
    base: Base,
    len: usize,
    noise: f64,
    injections: &[Injection],
    seed: u64,
) -> MetricSeries {
    let mut values = render_base(base, len, noise, seed);
    let mut labels = vec![false; len];
    for (k, inj) in injections.iter().enumerate() {
        inject(&mut values, *inj, seed.wrapping_add(1000 + k as u64));
        labels[inj.start..inj.start + inj.len].fill(true);
    }
    MetricSeries::new(name, None, values, Some(labels)).expect("synthetic curve is valid")
}

/// A reference curve and a spiky variant of the same signal, for quick
/// offline checks. Returns `(normal, detect, labels_of_detect)`.
pub fn spiky_pair(normal_len: usize, detect_len: usize, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
    let normal = sine(normal_len, 40.0, 0.01, seed);
    let start = detect_len / 2;
    let injection = Injection {
        start,
        len: 25,
        shape: AnomalyShape::SpikeBurst,
    };
    let detect = render("d", Base::Sine { period: 40.0 }, detect_len, 0.01, &[injection], seed + 1);
    let labels = detect.labels().unwrap().to_vec();
    (normal, detect.values().to_vec(), labels)
}

const BASES: [Base; 10] = [
    Base::Sine { period: 50.0 },
    Base::Sawtooth { period: 60 },
    Base::Square { period: 40 },
    Base::Sine { period: 37.0 },
    Base::Sawtooth { period: 45 },
    Base::Square { period: 64 },
    Base::Sine { period: 80.0 },
    Base::Sawtooth { period: 75 },
    Base::Square { period: 50 },
    Base::Sine { period: 64.0 },
];

fn base_noise(base: Base) -> f64 {
    match base {
        // plateaus turn any noise into full-range jitter after per-window
        // min-max scaling, so square waves stay clean
        Base::Square { .. } => 0.0,
        _ => 0.01,
    }
}

fn shapes_for(base: Base) -> &'static [AnomalyShape] {
    match base {
        Base::Square { .. } => &[AnomalyShape::SpikeBurst, AnomalyShape::NoiseBurst, AnomalyShape::FastOscillation],
        _ => &[AnomalyShape::SpikeBurst, AnomalyShape::Stuck, AnomalyShape::NoiseBurst, AnomalyShape::FastOscillation],
    }
}

/// Parameters shared by the synthetic suites.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteParams {
    pub curves: usize,
    pub len: usize,
    pub normal_end: usize,
    pub offline_end: usize,
    /// Length of each injected anomaly.
    pub anomaly_len: usize,
    pub seed: u64,
}

impl Default for SuiteParams {
    fn default() -> Self {
        Self {
            curves: 10,
            len: 5000,
            normal_end: 1000,
            offline_end: 3000,
            anomaly_len: 37,
            seed: 2022,
        }
    }
}

/// Curves whose offline and online segments each carry one anomaly of the
/// same shape (shapes rotate across curves), about 1.5% of all points.
pub fn injection_suite(params: SuiteParams) -> Vec<SyntheticCurve> {
    (0..params.curves)
        .map(|k| {
            let base = BASES[k % BASES.len()];
            let shapes = shapes_for(base);
            let shape = shapes[(k / 3 + k) % shapes.len()];
            let seed = params.seed.wrapping_mul(31).wrapping_add(k as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let offline = place(&mut rng, params.normal_end, params.offline_end, params.anomaly_len);
            let online = place(&mut rng, params.offline_end, params.len, params.anomaly_len);
            let injections = [
                Injection { start: offline, len: params.anomaly_len, shape },
                Injection { start: online, len: params.anomaly_len, shape },
            ];
            let series = render(&format!("synthetic-{k:02}"), base, params.len, base_noise(base), &injections, seed);
            SyntheticCurve {
                series,
                normal_end: params.normal_end,
                offline_end: params.offline_end,
                injections: injections.to_vec(),
            }
        })
        .collect()
}

/// Like [`injection_suite`], but the online anomaly has a shape that never
/// occurs offline.
pub fn drift_suite(params: SuiteParams) -> Vec<SyntheticCurve> {
    (0..params.curves)
        .map(|k| {
            let base = BASES[k % BASES.len()];
            let shapes = shapes_for(base);
            let offline_shape = shapes[k % shapes.len()];
            let online_shape = shapes[(k + 1) % shapes.len()];
            let seed = params.seed.wrapping_mul(131).wrapping_add(k as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let offline = place(&mut rng, params.normal_end, params.offline_end, params.anomaly_len);
            let online = place(&mut rng, params.offline_end, params.len, params.anomaly_len);
            let injections = [
                Injection { start: offline, len: params.anomaly_len, shape: offline_shape },
                Injection { start: online, len: params.anomaly_len, shape: online_shape },
            ];
            let series = render(&format!("drift-{k:02}"), base, params.len, base_noise(base), &injections, seed);
            SyntheticCurve {
                series,
                normal_end: params.normal_end,
                offline_end: params.offline_end,
                injections: injections.to_vec(),
            }
        })
        .collect()
}

/// Anomaly start inside `[lo, hi)`, away from the segment edges.
fn place(rng: &mut ChaCha8Rng, lo: usize, hi: usize, len: usize) -> usize {
    let margin = 100;
    rng.gen_range(lo + margin..hi - margin - len)
}

/// Anomaly-free curves of varied shape for identity checks.
pub fn clean_suite(count: usize, len: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..count)
        .map(|k| {
            let s = seed.wrapping_add(k as u64);
            match k % 4 {
                0 => random_walk(len, s),
                1 => render_base(BASES[k % BASES.len()], len, 0.0, s),
                2 => sine(len, 20.0 + k as f64 * 3.0, 0.05, s),
                _ => render_base(Base::Sawtooth { period: 30 + k }, len, 0.02, s),
            }
        })
        .collect()
}
