//! Metric equivalences on synthetic data.

use std::collections::HashMap;

use geovlm_core::evaluator::{haversine, recall_at_k, threshold_recall, EARTH_RADIUS_KM};
use geovlm_core::geostore::generate_synthetic;
use geovlm_core::retriever::retrieve_all;
use geovlm_core::{Accumulation, GeoCoord, SynthConfig};

#[test]
fn zero_threshold_equals_recall_when_references_are_apart() {
    let cfg = SynthConfig {
        n_locations: 120,
        ..SynthConfig::default()
    };
    let store = generate_synthetic(&cfg, 3).unwrap();
    let coords: HashMap<String, GeoCoord> = store
        .references()
        .iter()
        .map(|r| (r.id.clone(), r.coord.unwrap()))
        .collect();
    let refs: Vec<GeoCoord> = coords.values().copied().collect();
    for (i, a) in refs.iter().enumerate() {
        for b in &refs[i + 1..] {
            assert!(haversine(*a, *b, EARTH_RADIUS_KM) >= 0.1);
        }
    }
    let rankings = retrieve_all(&store, 10, Accumulation::F64).unwrap();
    let gt = store.ground_truth();
    for k in [1, 5, 10] {
        let t = threshold_recall(&rankings, &coords, &gt, 0.0, k, EARTH_RADIUS_KM).unwrap();
        assert_eq!(t, recall_at_k(&rankings, &gt, k).unwrap(), "k={k}");
    }
}
