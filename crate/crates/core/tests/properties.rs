use std::collections::HashSet;

use fairhin::eval::{diff_dp, diff_eo, diff_eo_with, nested_cv_split, ranking_from_probs, EoDenominator, PredictionRecord};
use fairhin::gnn::{loss_acc, loss_dp, loss_eo, softmax_rows, Activation, Adjacency, GnnInput, GnnModel};
use fairhin::{Group, NodeId};
use ndarray::{Array1, Array2};
use proptest::prelude::*;

fn group(b: bool) -> Group {
    if b {
        Group::G1
    } else {
        Group::G0
    }
}

/// Records over `k` careers with both groups present.
fn records() -> impl Strategy<Value = Vec<PredictionRecord>> {
    (1usize..6).prop_flat_map(|k| {
        prop::collection::vec((any::<bool>(), 0..k, 0..k, any::<u64>()), 2..40).prop_map(move |rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, (g, truth, top, salt))| {
                    let mut ranking: Vec<NodeId> = (0..k as u32).map(NodeId).collect();
                    ranking.rotate_left(top);
                    ranking[1..].sort_by_key(|c| (u64::from(c.0) ^ salt).wrapping_mul(0x9e37_79b9));
                    let g = if i < 2 { i == 1 } else { g };
                    PredictionRecord { user: NodeId(100 + i as u32), group: group(g), truth: NodeId(truth as u32), ranking }
                })
                .collect()
        })
    })
}

fn swapped(r: &[PredictionRecord]) -> Vec<PredictionRecord> {
    r.iter()
        .cloned()
        .map(|mut x| {
            x.group = x.group.other();
            x
        })
        .collect()
}

proptest! {
    #[test]
    fn metric_ranges(r in records()) {
        let dp = diff_dp(&r).unwrap();
        prop_assert!((0.0..=2.0 + 1e-12).contains(&dp));
        prop_assert!(diff_eo(&r).unwrap() >= 0.0);
        prop_assert!(diff_eo_with(&r, EoDenominator::Truth).unwrap() >= 0.0);
    }

    #[test]
    fn group_swap_leaves_metrics_unchanged(r in records()) {
        let s = swapped(&r);
        prop_assert!((diff_dp(&r).unwrap() - diff_dp(&s).unwrap()).abs() < 1e-12);
        prop_assert!((diff_eo(&r).unwrap() - diff_eo(&s).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn constant_predictor_has_no_dp_gap(r in records()) {
        let fixed = r[0].ranking.clone();
        let c: Vec<PredictionRecord> = r.into_iter().map(|mut x| { x.ranking = fixed.clone(); x }).collect();
        prop_assert_eq!(diff_dp(&c).unwrap(), 0.0);
    }

    #[test]
    fn split_is_a_partition(careers in prop::collection::vec(0u32..5, 1..300), seed in any::<u64>()) {
        let users: Vec<(NodeId, NodeId)> = careers.iter().enumerate().map(|(i, &c)| (NodeId(i as u32), NodeId(1000 + c))).collect();
        let plans = nested_cv_split(&users, seed).unwrap();
        prop_assert_eq!(plans.len(), 3);
        let mut tests = HashSet::new();
        for p in &plans {
            let all: Vec<NodeId> = p.all().collect();
            let set: HashSet<NodeId> = all.iter().copied().collect();
            prop_assert_eq!(all.len(), users.len());
            prop_assert_eq!(set.len(), users.len());
            prop_assert_eq!(&p.embedding_train, &plans[0].embedding_train);
            for u in &p.predict_test {
                prop_assert!(tests.insert(*u));
            }
        }
        let outside: usize = users.len() - plans[0].embedding_train.len();
        prop_assert_eq!(tests.len(), outside);
    }

    #[test]
    fn ranking_ignores_logit_shift(logits in prop::collection::vec(-20.0f64..20.0, 1..12), shift in -50.0f64..50.0) {
        let a = Array2::from_shape_vec((1, logits.len()), logits.clone()).unwrap();
        let b = a.mapv(|x| x + shift);
        let (pa, pb) = (softmax_rows(&a), softmax_rows(&b));
        let ra = ranking_from_probs(pa.row(0));
        prop_assert_eq!(&ra, &ranking_from_probs(pb.row(0)));
        let mut sorted = ra.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..logits.len()).collect::<Vec<_>>());
    }

    #[test]
    fn gnn_rows_are_distributions(seed in any::<u64>(), n in 2usize..12, scale in 0.1f64..50.0) {
        let lists: Vec<Vec<usize>> = (0..n).map(|v| vec![(v + 1) % n]).collect();
        let x = Array2::from_shape_fn((n, 4), |(i, j)| scale * (((i * 7 + j * 3 + seed as usize) % 11) as f64 - 5.0));
        let model = GnnModel::init(4, 6, 3, Activation::Relu, seed);
        let probs = model.predict(&GnnInput::new(Adjacency::from_lists(&lists), x), &(0..n).collect::<Vec<_>>());
        for row in probs.rows() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-9);
            prop_assert!(row.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }

    #[test]
    fn losses_ignore_row_order(
        raw in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 3), 4..16),
        flags in prop::collection::vec(any::<bool>(), 16),
        labels in prop::collection::vec(0usize..3, 16),
        rot in 0usize..16,
    ) {
        let n = raw.len();
        let mut p = Array2::from_shape_fn((n, 3), |(i, j)| raw[i][j]);
        for mut r in p.rows_mut() {
            let s = r.sum();
            r /= s;
        }
        let mut groups: Vec<Group> = flags[..n].iter().map(|&b| group(b)).collect();
        groups[0] = Group::G0;
        groups[1] = Group::G1;
        let labels = &labels[..n];
        let order: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
        let q = p.select(ndarray::Axis(0), &order);
        let g2: Vec<Group> = order.iter().map(|&i| groups[i]).collect();
        let l2: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
        prop_assert!((loss_acc(p.view(), labels) - loss_acc(q.view(), &l2)).abs() < 1e-12);
        prop_assert!((loss_dp(p.view(), &groups).unwrap() - loss_dp(q.view(), &g2).unwrap()).abs() < 1e-12);
        prop_assert!((loss_eo(p.view(), &groups, labels) - loss_eo(q.view(), &g2, &l2)).abs() < 1e-12);
        let dp = loss_dp(p.view(), &groups).unwrap();
        prop_assert!((0.0..=2.0).contains(&dp));
    }
}

#[test]
fn softmax_of_equal_logits_is_uniform() {
    let p = softmax_rows(&Array2::from_elem((2, 4), 3.0));
    assert!(p.iter().all(|&x| (x - 0.25).abs() < 1e-15));
    assert_eq!(ranking_from_probs(Array1::from(vec![0.25; 4]).view()), vec![0, 1, 2, 3]);
}
