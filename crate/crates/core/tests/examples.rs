#[allow(dead_code)]
#[path = "../examples/matrix_profile.rs"]
mod matrix_profile;

#[allow(dead_code)]
#[path = "../examples/affinity_clustering.rs"]
mod affinity_clustering;

#[allow(dead_code)]
#[path = "../examples/offline_discovery.rs"]
mod offline_discovery;

#[allow(dead_code)]
#[path = "../examples/online_detection.rs"]
mod online_detection;

#[allow(dead_code)]
#[path = "../examples/adaptive_learning.rs"]
mod adaptive_learning;

#[allow(dead_code)]
#[path = "../examples/evaluate_protocol.rs"]
mod evaluate_protocol;

#[test]
fn examples_run() {
    matrix_profile::run().unwrap();
    affinity_clustering::run().unwrap();
    offline_discovery::run().unwrap();
    online_detection::run().unwrap();
    adaptive_learning::run().unwrap();
    evaluate_protocol::run(None).unwrap();
}
