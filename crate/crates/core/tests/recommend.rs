mod common;

use bdaudit_core::recommend::{recommend_fold, train, Algorithm, HyperParams, TrainingData};
use proptest::prelude::*;

fn dense_strategy(max_users: usize, max_items: usize) -> impl Strategy<Value = Vec<Vec<Option<f64>>>> {
    (2usize..=max_users, 2usize..=max_items).prop_flat_map(|(n, m)| {
        prop::collection::vec(
            prop::collection::vec(prop::option::weighted(0.5, (1u8..=5).prop_map(f64::from)), m),
            n,
        )
    })
    .prop_filter("needs ratings", |d| d.iter().flatten().any(Option::is_some))
}

fn quick(alg: Algorithm) -> HyperParams {
    let mut h = HyperParams::defaults_for(alg);
    h.factors = 4;
    h.epochs = 10;
    h
}

#[test]
fn most_popular_on_a_toy() {
    let x = Some(4.0);
    let dense = vec![
        vec![x, x, None, None, None, None],
        vec![x, None, x, None, None, None],
        vec![None, x, x, x, None, None],
        vec![x, None, None, x, None, x],
        vec![None, None, None, None, None, None],
    ];
    // counts: 3 2 2 2 0 1
    let data = TrainingData::from_dense(&dense);
    let model = train(Algorithm::MostPopular, &data, &quick(Algorithm::MostPopular), 0).unwrap();
    let r = recommend_fold(&model, 0, 3);
    assert_eq!(r.lists[0], [2, 3, 5]);
    assert_eq!(r.lists[2], [0, 5, 4]);
    assert_eq!(r.lists[4], [0, 1, 2]);
    common::most_popular_agrees_with_oracle(&dense, 3).unwrap();
}

#[test]
fn two_users_top_ten_gives_twenty_entries() {
    let dense: Vec<Vec<Option<f64>>> = (0..2)
        .map(|u| (0..15).map(|i| ((i + u) % 5 == 0).then_some(3.0)).collect())
        .collect();
    let data = TrainingData::from_dense(&dense);
    for alg in Algorithm::ALL {
        let mut h = quick(alg);
        h.top_n = 10;
        let model = train(alg, &data, &h, 3).unwrap();
        let r = recommend_fold(&model, 0, 10);
        assert_eq!(r.nnz(), 20, "{alg}");
    }
}

#[test]
fn recommendations_exclude_training_items_for_every_algorithm() {
    let mut rng = common::rng(5);
    let dense = common::random_dense(&mut rng, 12, 10, 0.4, 2);
    let data = TrainingData::from_dense(&dense);
    for alg in Algorithm::ALL {
        let model = train(alg, &data, &quick(alg), 1).unwrap();
        let r = recommend_fold(&model, 0, 5);
        for (u, list) in r.lists.iter().enumerate() {
            let unrated = dense[u].iter().filter(|x| x.is_none()).count();
            assert_eq!(list.len(), unrated.min(5), "{alg} user {u}");
            for &i in list {
                assert!(dense[u][i as usize].is_none(), "{alg} recommended a training item");
            }
            let mut sorted = list.clone();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted.len(), list.len(), "{alg} repeated an item");
        }
    }
}

#[test]
fn same_seed_same_lists() {
    let mut rng = common::rng(9);
    let dense = common::random_dense(&mut rng, 10, 12, 0.35, 2);
    let data = TrainingData::from_dense(&dense);
    for alg in Algorithm::ALL {
        let a = recommend_fold(&train(alg, &data, &quick(alg), 42).unwrap(), 0, 4);
        let b = recommend_fold(&train(alg, &data, &quick(alg), 42).unwrap(), 0, 4);
        assert_eq!(a, b, "{alg}");
    }
    let r1 = recommend_fold(&train(Algorithm::Random, &data, &quick(Algorithm::Random), 1).unwrap(), 0, 4);
    let r2 = recommend_fold(&train(Algorithm::Random, &data, &quick(Algorithm::Random), 2).unwrap(), 0, 4);
    assert_ne!(r1, r2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn most_popular_matches_counting_oracle(dense in dense_strategy(5, 6), n in 1usize..6) {
        prop_assert_eq!(common::most_popular_agrees_with_oracle(&dense, n), Ok(()));
    }

    #[test]
    fn most_popular_lists_follow_global_order(dense in dense_strategy(6, 8)) {
        let data = TrainingData::from_dense(&dense);
        let model = train(Algorithm::MostPopular, &data, &quick(Algorithm::MostPopular), 0).unwrap();
        let counts = &model.popularity;
        let mut global: Vec<u32> = (0..counts.len() as u32).collect();
        global.sort_by(|&a, &b| counts[b as usize].cmp(&counts[a as usize]).then(a.cmp(&b)));
        let r = recommend_fold(&model, 0, 4);
        for list in &r.lists {
            let mut pos = global.iter();
            for i in list {
                prop_assert!(pos.any(|g| g == i), "{:?} is not a subsequence of {:?}", list, global);
            }
        }
    }

    #[test]
    fn knn_matches_brute_force(dense in dense_strategy(8, 8), k in 1usize..6, pearson: bool, user_based: bool) {
        prop_assert_eq!(common::knn_agrees_with_oracle(&dense, user_based, k, pearson, 3), Ok(()));
    }
}
