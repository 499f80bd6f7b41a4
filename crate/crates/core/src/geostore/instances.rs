use super::{EvalInstance, GeoStore, QueryRecord, StoreError};

/// Expands a multi-positive query into one instance per positive. Each
/// instance's pool drops the query's other positives so exactly one correct
/// reference remains.
pub fn build_eval_instances(
    query: &QueryRecord,
    store: &GeoStore,
) -> Result<Vec<EvalInstance>, StoreError> {
    if query.ground_truth.is_empty() {
        return Err(StoreError::EmptyGroundTruth {
            query_id: query.id.clone(),
        });
    }
    Ok(query
        .ground_truth
        .iter()
        .map(|positive| EvalInstance {
            query_id: query.id.clone(),
            positive_id: positive.clone(),
            candidate_pool: store
                .references()
                .iter()
                .filter(|r| &r.id == positive || !query.ground_truth.contains(&r.id))
                .map(|r| r.id.clone())
                .collect(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::geostore::{Embedding, ReferenceRecord};

    fn store_with(n_refs: usize, positives: &[usize]) -> (GeoStore, QueryRecord) {
        let refs: Vec<ReferenceRecord> = (0..n_refs)
            .map(|i| ReferenceRecord {
                id: format!("r{i:03}"),
                image: Embedding::new(vec![1.0, i as f32]).unwrap(),
                text: None,
                caption: None,
                coord: None,
            })
            .collect();
        let query = QueryRecord {
            id: "q".into(),
            image: Embedding::new(vec![1.0, 0.0]).unwrap(),
            text: None,
            caption: None,
            coord: None,
            ground_truth: positives.iter().map(|i| format!("r{i:03}")).collect(),
            semi_positives: BTreeSet::new(),
        };
        let store = GeoStore::new(2, 3, refs, vec![query.clone()]).unwrap();
        (store, query)
    }

    #[test]
    fn three_positives_give_three_single_positive_instances() {
        let (store, query) = store_with(50, &[3, 17, 42]);
        let instances = build_eval_instances(&query, &store).unwrap();
        assert_eq!(instances.len(), 3);
        let mut seen = BTreeSet::new();
        for inst in &instances {
            assert_eq!(inst.candidate_pool.len(), 48);
            assert!(inst.candidate_pool.contains(&inst.positive_id));
            let positives_in_pool = inst
                .candidate_pool
                .iter()
                .filter(|id| query.ground_truth.contains(*id))
                .count();
            assert_eq!(positives_in_pool, 1);
            seen.insert(inst.positive_id.clone());
        }
        assert_eq!(seen, query.ground_truth);
    }

    #[test]
    fn single_positive_keeps_full_pool() {
        let (store, query) = store_with(10, &[4]);
        let instances = build_eval_instances(&query, &store).unwrap();
        assert_eq!(instances.len(), 1);
        assert_eq!(instances[0].candidate_pool.len(), 10);
    }

    #[test]
    fn empty_ground_truth_is_an_error() {
        let (store, mut query) = store_with(3, &[0]);
        query.ground_truth.clear();
        assert!(matches!(
            build_eval_instances(&query, &store),
            Err(StoreError::EmptyGroundTruth { .. })
        ));
    }
}
