//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use metricpat::discovery::PreferenceRule;
use metricpat::eval::{
    read_predictions, run_offline_experiment, run_online_experiment, write_predictions, RunConfig, Split,
};
use metricpat::store::{Origin, PatternCluster, PatternStore, Role};
use metricpat::synth::{self, SuiteParams};
use metricpat::{
    brute_force_spw, cross_join, discover_patterns, euclidean_distance, minmax_normalize, self_join, Adaptation,
    DiscoveryConfig, MetricSeries, Subsequence,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn suite_config(params: &SuiteParams) -> RunConfig {
    let mut config = RunConfig::new(
        9,
        99.0,
        Split::Indices {
            normal_end: params.normal_end,
            offline_end: params.offline_end,
        },
    );
    config.preference = PreferenceRule::ReferenceSpread;
    config
}

fn series_of(curves: &[synth::SyntheticCurve]) -> Vec<MetricSeries> {
    curves.iter().map(|c| c.series.clone()).collect()
}

/// Random test curve: random walk, noisy sine or a quantized walk full of
/// ties and flat stretches.
fn random_curve(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let seed = rng.gen();
    match rng.gen_range(0..3) {
        0 => synth::random_walk(len, seed),
        1 => synth::sine(len, rng.gen_range(8.0..80.0), 0.1, seed),
        _ => synth::random_walk(len, seed).iter().map(|v| (v * 0.5).round()).collect(),
    }
}

/// Checks a fast profile against the oracle. Index disagreements are only
/// accepted when the fast index is an equally near neighbour.
fn matches_oracle(
    fast: &metricpat::ProfilePair,
    oracle: &metricpat::ProfilePair,
    reference: &[f64],
    query: &[f64],
    m: usize,
) -> Result<(), String> {
    if fast.len() != oracle.len() {
        return Err(format!("length {} vs {}", fast.len(), oracle.len()));
    }
    for i in 0..fast.len() {
        let (d_fast, d_oracle) = (fast.distances[i], oracle.distances[i]);
        if (d_fast - d_oracle).abs() > TOL {
            return Err(format!("distance at {i}: {d_fast} vs {d_oracle}"));
        }
        let j = fast.indices[i];
        if j != oracle.indices[i] {
            let q = minmax_normalize(&query[i..i + m]).unwrap();
            let r = minmax_normalize(&reference[j..j + m]).unwrap();
            let d = euclidean_distance(&q, &r).unwrap();
            if (d - d_oracle).abs() > TOL {
                return Err(format!("index at {i}: {j} is not a tie of {}", oracle.indices[i]));
            }
        }
    }
    Ok(())
}

fn oracle_equivalence() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ms = [4, 8, 16, 32];
    for case in 0..100 {
        let m = ms[case % ms.len()];
        let len = rng.gen_range(50..=2000);
        let query = random_curve(&mut rng, len);
        let reference_len = rng.gen_range(50..=2000);
        let reference = random_curve(&mut rng, reference_len);
        let exclusion = metricpat::profile::default_exclusion(m);

        let fast = self_join(&query, m).unwrap();
        let oracle = brute_force_spw(&query, &query, m, Some(exclusion)).unwrap();
        if let Err(e) = matches_oracle(&fast, &oracle, &query, &query, m) {
            return Outcome::new(false, format!("self-join case {case} (len {len}, m {m}): {e}"));
        }
        if let Some(i) = (0..fast.len()).find(|&i| fast.indices[i].abs_diff(i) < exclusion) {
            return Outcome::new(false, format!("self-join case {case}: index {i} inside exclusion zone"));
        }

        let fast = cross_join(&reference, &query, m).unwrap();
        let oracle = brute_force_spw(&reference, &query, m, None).unwrap();
        if let Err(e) = matches_oracle(&fast, &oracle, &reference, &query, m) {
            return Outcome::new(false, format!("cross-join case {case} (len {len}, m {m}): {e}"));
        }
    }
    let elapsed = started.elapsed();
    Outcome::new(
        elapsed < Duration::from_secs(120),
        format!("100 series, self and cross join within {TOL:e}, {elapsed:.1?} (limit 2 min)"),
    )
}

fn cluster(id: usize, role: Role, origin: Origin, mean: Vec<f64>, size: usize, radius: f64) -> PatternCluster {
    PatternCluster {
        id,
        role,
        size,
        radius,
        mean,
        labels: BTreeSet::new(),
        origin,
        group: None,
        members: None,
    }
}

fn radius_soundness() -> Outcome {
    let m = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let values = synth::random_walk(20_000, 3);
    let window = |start: usize| minmax_normalize(&values[start..start + m]).unwrap();

    // Seed patterns are exact batch clusters of 20 random windows each, so
    // the retained member lists are complete from the start.
    let mut members: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut clusters = Vec::new();
    for id in 0..3 {
        let group: Vec<Vec<f64>> = (0..20).map(|_| window(rng.gen_range(0..values.len() - m))).collect();
        let mut mean = vec![0.0; m];
        for w in &group {
            for (a, v) in mean.iter_mut().zip(w) {
                *a += v / group.len() as f64;
            }
        }
        let radius = group.iter().map(|w| euclidean_distance(w, &mean).unwrap()).fold(0.0, f64::max);
        let role = if id == 2 { Role::Anomalous } else { Role::Normal };
        clusters.push(cluster(id, role, Origin::Offline, mean, group.len(), radius));
        members.push(group);
    }
    let mut store = PatternStore::new(m, 99.0, 4, false, 5, clusters).unwrap();

    let (mut absorptions, mut steps, mut worst_mean) = (0usize, 0usize, 0.0f64);
    while absorptions < 2000 && steps < 200_000 {
        steps += 1;
        let start = rng.gen_range(0..values.len() - m);
        let record = store.adapt(&Subsequence::new("walk", start, &values[start..start + m])).unwrap();
        let id = match record.adaptation {
            Adaptation::Absorbed(id) | Adaptation::RoleSwitched(id) => {
                absorptions += 1;
                members[id].push(window(start));
                id
            }
            Adaptation::Created(id) => {
                members.push(vec![window(start)]);
                id
            }
            Adaptation::None => unreachable!("adapt always reports an adaptation"),
        };
        let c = store.cluster(id).unwrap();
        let mut batch = vec![0.0; m];
        for w in &members[id] {
            for (b, v) in batch.iter_mut().zip(w) {
                *b += v / members[id].len() as f64;
            }
        }
        let mean_error = batch.iter().zip(&c.mean).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst_mean = worst_mean.max(mean_error);
        if mean_error > TOL {
            return Outcome::new(false, format!("step {steps}: incremental mean off by {mean_error:e}"));
        }
        if c.size != members[id].len() {
            return Outcome::new(false, format!("step {steps}: size {} vs {} members", c.size, members[id].len()));
        }
        for w in &members[id] {
            let d = euclidean_distance(w, &c.mean).unwrap();
            if d > c.radius {
                return Outcome::new(false, format!("step {steps}: member at {d} outside radius {}", c.radius));
            }
        }
    }
    Outcome::new(
        absorptions >= 1000,
        format!("{absorptions} absorptions over {steps} windows, radius sound at every step, worst mean error {worst_mean:.1e}"),
    )
}

fn role_switch() -> Outcome {
    let m = 6;
    let normal = vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
    let offline_anomaly = vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
    let store = PatternStore::new(
        m,
        99.5,
        3,
        false,
        2,
        vec![
            cluster(0, Role::Normal, Origin::Offline, normal, 40, 0.05),
            cluster(1, Role::Anomalous, Origin::Offline, offline_anomaly.clone(), 2, 0.05),
        ],
    )
    .unwrap();
    let mut store = store;

    // A shape unlike both patterns, repeated: created, then grown past the
    // offline maximum anomalous size of 2.
    let novel = [1.0, 0.0, 0.0, 0.0, 0.0, 1.0];
    let mut switches = Vec::new();
    let mut created = Vec::new();
    for k in 0..10 {
        let r = store.adapt(&Subsequence::new("s", k, &novel)).unwrap();
        match r.adaptation {
            Adaptation::Created(id) => created.push(id),
            Adaptation::RoleSwitched(id) => switches.push(id),
            _ => {}
        }
    }
    // The offline anomalous pattern keeps absorbing and must never switch.
    for k in 0..10 {
        let r = store.adapt(&Subsequence::new("s", 100 + k, &offline_anomaly)).unwrap();
        if let Adaptation::RoleSwitched(id) = r.adaptation {
            switches.push(id);
        }
    }
    let offline_kept = store.cluster(1).unwrap().role == Role::Anomalous && store.cluster(1).unwrap().size == 12;
    let switched_ok = created == vec![2] && switches == vec![2] && store.cluster(2).unwrap().role == Role::Normal;
    Outcome::new(
        offline_kept && switched_ok,
        format!(
            "created {created:?}, switched {switches:?}, offline anomalous pattern size {} role {:?}",
            store.cluster(1).unwrap().size,
            store.cluster(1).unwrap().role
        ),
    )
}

fn anomaly_free_identity() -> Outcome {
    let curves = synth::clean_suite(20, 1500, 4);
    let config = DiscoveryConfig::default();
    for (k, curve) in curves.iter().enumerate() {
        let d = discover_patterns(curve, curve, &config).unwrap();
        let flagged = d.predictions.iter().filter(|&&p| p).count();
        if !d.store.anomalous_ids().is_empty() || flagged > 0 {
            return Outcome::new(
                false,
                format!("curve {k}: {} anomalous patterns, {flagged} flagged points", d.store.anomalous_ids().len()),
            );
        }
    }
    Outcome::new(true, "20 curves: no anomalous patterns, no flagged points")
}

fn detection_quality() -> Outcome {
    let started = Instant::now();
    let params = SuiteParams::default();
    let series = series_of(&synth::injection_suite(params));
    let config = suite_config(&params);
    let offline = run_offline_experiment(&config, &series).unwrap();
    let online = run_online_experiment(&config, &series, &offline.stores(), false).unwrap();
    let elapsed = started.elapsed();
    let (f_off, f_on) = (offline.report.weighted.f1, online.report.weighted.f1);
    Outcome::new(
        f_off >= 0.9 && f_on >= 0.85 && elapsed < Duration::from_secs(300),
        format!("offline F1 {f_off:.3} (>= 0.9), online F1 {f_on:.3} (>= 0.85), {elapsed:.1?} (limit 5 min)"),
    )
}

fn adaptation_gain() -> Outcome {
    let params = SuiteParams::default();
    let series = series_of(&synth::drift_suite(params));
    let config = suite_config(&params);
    let stores = run_offline_experiment(&config, &series).unwrap().stores();
    let fixed = run_online_experiment(&config, &series, &stores, false).unwrap().report.weighted.f1;
    let adaptive = run_online_experiment(&config, &series, &stores, true).unwrap().report.weighted.f1;
    Outcome::new(
        adaptive - fixed >= 0.15,
        format!("non-adaptive F1 {fixed:.3}, adaptive F1 {adaptive:.3}, gain {:.3} (>= 0.15)", adaptive - fixed),
    )
}

/// Prediction file bytes and store documents of one full adaptive run.
fn run_bytes(series: &[MetricSeries], config: &RunConfig, threads: usize) -> (Vec<Vec<u8>>, Vec<String>) {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let offline = run_offline_experiment(config, series).unwrap();
        let online = run_online_experiment(config, series, &offline.stores(), true).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let mut files = Vec::new();
        for (k, rows) in online.rows.iter().enumerate() {
            let path = dir.path().join(format!("{k}.csv"));
            write_predictions(rows, &path).unwrap();
            files.push(std::fs::read(&path).unwrap());
        }
        let stores = offline
            .stores()
            .iter()
            .chain(&online.stores)
            .map(|s| s.to_json().unwrap())
            .collect();
        (files, stores)
    })
}

fn determinism() -> Outcome {
    let params = SuiteParams {
        curves: 4,
        ..SuiteParams::default()
    };
    let series = series_of(&synth::injection_suite(params));
    let config = suite_config(&params);
    let reference = run_bytes(&series, &config, 1);
    for threads in [1, 4, 7] {
        if run_bytes(&series, &config, threads) != reference {
            return Outcome::new(false, format!("output differs with {threads} worker(s)"));
        }
    }

    let dir = tempfile::tempdir().unwrap();
    let offline = run_offline_experiment(&config, &series).unwrap();
    for (k, store) in offline.stores().iter().enumerate() {
        let path = dir.path().join(format!("store-{k}.json"));
        store.save(&path).unwrap();
        let loaded = PatternStore::load(&path).unwrap();
        let mut bare = store.clone();
        bare.drop_provenance();
        if loaded != bare || loaded.to_json().unwrap() != store.to_json().unwrap() {
            return Outcome::new(false, format!("store {k} does not round-trip"));
        }
    }
    let online = run_online_experiment(&config, &series, &offline.stores(), false).unwrap();
    let path = dir.path().join("pred.csv");
    write_predictions(&online.rows[0], &path).unwrap();
    if read_predictions(&path).unwrap() != online.rows[0] {
        return Outcome::new(false, "prediction file does not round-trip");
    }
    Outcome::new(
        true,
        "byte-identical predictions and stores over runs with 1, 1, 4 and 7 workers; save/load exact",
    )
}

fn sensitivity() -> Outcome {
    let params = SuiteParams::default();
    let curves = synth::injection_suite(params);
    let mut lines = Vec::new();
    let mut monotone = true;
    for m in [9, 15, 21] {
        let mut counts = Vec::new();
        // Descending p: the pruning threshold only drops, so isolation grows.
        for p in [99.8, 99.5, 97.0] {
            let config = DiscoveryConfig {
                m,
                p,
                ..DiscoveryConfig::default()
            };
            let total: usize = curves
                .iter()
                .map(|c| {
                    let v = c.series.values();
                    let d = discover_patterns(&v[..c.normal_end], &v[c.normal_end..c.offline_end], &config).unwrap();
                    d.components.isolated.len()
                })
                .sum();
            counts.push(total);
        }
        monotone &= counts.windows(2).all(|w| w[0] <= w[1]);
        lines.push(format!("m={m}: {counts:?}"));
    }
    Outcome::new(monotone, format!("|N_i| at p = 99.8, 99.5, 97: {}", lines.join("; ")))
}

fn main() {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check); 8] = [
        ("1 matrix-profile oracle equivalence", oracle_equivalence),
        ("2 radius-bound soundness", radius_soundness),
        ("3 role switch", role_switch),
        ("4 anomaly-free identity", anomaly_free_identity),
        ("5 detection quality", detection_quality),
        ("6 adaptation gain", adaptation_gain),
        ("7 determinism and persistence", determinism),
        ("8 parameter sensitivity", sensitivity),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = check();
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!("[{verdict}] criterion {name}: {}", outcome.detail);
        failed += usize::from(!outcome.pass);
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
